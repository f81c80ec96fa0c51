#include "uad/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "binio.hpp"
#include "uad/error.hpp"

namespace uad {

namespace {

constexpr std::uint16_t kLogitVersion = 1;

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        if (!field.empty() && field.back() == '\r') field.pop_back();
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double(const std::string& s, const std::filesystem::path& path, std::size_t line) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw IoError(path.string() + ":" + std::to_string(line) + ": bad number '" + s + "'");
    }
    return v;
}

std::size_t parse_index(const std::string& s, const std::filesystem::path& path, std::size_t line) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw IoError(path.string() + ":" + std::to_string(line) + ": bad label '" + s + "'");
    }
    return v;
}

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

bool starts_with_magic(const std::filesystem::path& path, const char* magic) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char buf[4] = {};
    in.read(buf, 4);
    return in.gcount() == 4 && std::string(buf, 4) == std::string(magic, 4);
}

}  // namespace

void write_dataset_csv(const LabeledDataset& data, const std::filesystem::path& path) {
    auto out = open_out(path, false);
    for (std::size_t j = 0; j < data.features.cols; ++j) out << 'f' << j << ',';
    out << "label\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (double v : data.features.row(i)) out << format_double(v) << ',';
        out << data.labels[i] << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

LabeledDataset read_dataset_csv(const std::filesystem::path& path, std::optional<std::size_t> classes) {
    auto in = open_in(path, false);
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
    const auto header = split_csv(line);
    if (header.size() < 2 || header.back() != "label") throw IoError(path.string() + ": header must end with 'label'");
    const std::size_t d = header.size() - 1;
    for (std::size_t j = 0; j < d; ++j) {
        if (header[j] != "f" + std::to_string(j)) throw IoError(path.string() + ": unexpected column '" + header[j] + "'");
    }
    LabeledDataset data;
    std::vector<double> values;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv(line);
        if (fields.size() != d + 1) throw IoError(path.string() + ":" + std::to_string(line_no) + ": wrong column count");
        for (std::size_t j = 0; j < d; ++j) values.push_back(parse_double(fields[j], path, line_no));
        data.labels.push_back(parse_index(fields[d], path, line_no));
    }
    data.features = Matrix(data.labels.size(), d, std::move(values));
    std::size_t k = 2;
    for (auto y : data.labels) k = std::max(k, y + 1);
    data.classes = classes.value_or(k);
    data.validate();
    return data;
}

void write_dataset_bin(const LabeledDataset& data, const std::filesystem::path& path) {
    auto out = open_out(path, true);
    binio::put_magic(out, "UADD");
    binio::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.size()));
    binio::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.features.cols));
    binio::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.classes));
    for (double v : data.features.data) binio::put_f64(out, v);
    for (auto y : data.labels) binio::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(y));
    if (!out) throw IoError("write failed: " + path.string());
}

LabeledDataset read_dataset_bin(const std::filesystem::path& path) {
    auto in = open_in(path, true);
    binio::expect_magic(in, "UADD", path.string());
    const auto n = binio::get_le<std::uint32_t>(in);
    const auto d = binio::get_le<std::uint32_t>(in);
    const auto k = binio::get_le<std::uint32_t>(in);
    LabeledDataset data;
    data.classes = k;
    std::vector<double> values(static_cast<std::size_t>(n) * d);
    for (auto& v : values) v = binio::get_f64(in);
    data.features = Matrix(n, d, std::move(values));
    data.labels.resize(n);
    for (auto& y : data.labels) y = binio::get_le<std::uint32_t>(in);
    data.validate();
    return data;
}

LabeledDataset read_dataset(const std::filesystem::path& path) {
    return starts_with_magic(path, "UADD") ? read_dataset_bin(path) : read_dataset_csv(path);
}

void write_logits_bin(const LogitMatrix& logits, const std::filesystem::path& path) {
    auto out = open_out(path, true);
    binio::put_magic(out, "UADL");
    binio::put_le<std::uint16_t>(out, kLogitVersion);
    binio::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(logits.rows()));
    binio::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(logits.classes()));
    for (double v : logits.values()) binio::put_f64(out, v);
    if (!out) throw IoError("write failed: " + path.string());
}

LogitMatrix read_logits_bin(const std::filesystem::path& path) {
    auto in = open_in(path, true);
    binio::expect_magic(in, "UADL", path.string());
    const auto version = binio::get_le<std::uint16_t>(in);
    if (version != kLogitVersion) throw IoError(path.string() + ": unsupported logit file version " + std::to_string(version));
    const auto n = binio::get_le<std::uint32_t>(in);
    const auto k = binio::get_le<std::uint32_t>(in);
    std::vector<double> values(static_cast<std::size_t>(n) * k);
    for (auto& v : values) v = binio::get_f64(in);
    return LogitMatrix(n, k, std::move(values));
}

void write_logits_csv(const LogitMatrix& logits, const std::filesystem::path& path) {
    auto out = open_out(path, false);
    for (std::size_t k = 0; k < logits.classes(); ++k) out << (k ? "," : "") << "logit_" << k;
    out << '\n';
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        auto row = logits.row(i);
        for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << format_double(row[k]);
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

LogitMatrix read_logits_csv(const std::filesystem::path& path) {
    auto in = open_in(path, false);
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
    const auto header = split_csv(line);
    for (std::size_t k = 0; k < header.size(); ++k) {
        if (header[k] != "logit_" + std::to_string(k)) throw IoError(path.string() + ": unexpected column '" + header[k] + "'");
    }
    const std::size_t k = header.size();
    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv(line);
        if (fields.size() != k) throw IoError(path.string() + ":" + std::to_string(line_no) + ": wrong column count");
        for (const auto& f : fields) values.push_back(parse_double(f, path, line_no));
        ++rows;
    }
    return LogitMatrix(rows, k, std::move(values));
}

LogitMatrix read_logits(const std::filesystem::path& path) {
    return starts_with_magic(path, "UADL") ? read_logits_bin(path) : read_logits_csv(path);
}

}  // namespace uad
