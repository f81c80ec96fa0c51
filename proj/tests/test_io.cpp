#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "uad/error.hpp"
#include "uad/io.hpp"
#include "uad/mlp.hpp"
#include "uad/synth.hpp"

using namespace uad;
using namespace uad::testing;

namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t u32_at(const std::vector<unsigned char>& b, std::size_t off) {
    return static_cast<std::uint32_t>(b[off]) | static_cast<std::uint32_t>(b[off + 1]) << 8 |
           static_cast<std::uint32_t>(b[off + 2]) << 16 | static_cast<std::uint32_t>(b[off + 3]) << 24;
}

double f64_at(const std::vector<unsigned char>& b, std::size_t off) {
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = bits << 8 | b[off + static_cast<std::size_t>(i)];
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
}

}  // namespace

TEST_CASE("dataset round trips") {
    auto dir = temp_dir("io_dataset");
    DomainSpec spec;
    spec.classes = 3;
    spec.dim = 4;
    spec.samples_per_class = 7;
    spec.seed = 2;
    auto data = gen_domain(spec);

    write_dataset_csv(data, dir / "d.csv");
    CHECK(read_dataset_csv(dir / "d.csv") == data);
    CHECK(read_dataset(dir / "d.csv") == data);
    write_dataset_bin(data, dir / "d.uadd");
    CHECK(read_dataset_bin(dir / "d.uadd") == data);
    CHECK(read_dataset(dir / "d.uadd") == data);

    std::ifstream in(dir / "d.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "f0,f1,f2,f3,label");

    auto bytes = slurp(dir / "d.uadd");
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "UADD");
    CHECK(u32_at(bytes, 4) == 21);
    CHECK(u32_at(bytes, 8) == 4);
    CHECK(u32_at(bytes, 12) == 3);
    CHECK(f64_at(bytes, 16) == data.features(0, 0));
    CHECK(bytes.size() == 16 + 21 * 4 * 8 + 21 * 4);
}

TEST_CASE("dataset csv class count") {
    auto dir = temp_dir("io_classes");
    {
        std::ofstream out(dir / "a.csv");
        out << "f0,label\n0.5,0\n1.5,2\n";
    }
    auto d = read_dataset_csv(dir / "a.csv");
    CHECK(d.classes == 3);
    CHECK(read_dataset_csv(dir / "a.csv", 5).classes == 5);
    {
        std::ofstream out(dir / "bad.csv");
        out << "f0,label\n0.5\n";
    }
    CHECK_THROWS_AS(read_dataset_csv(dir / "bad.csv"), IoError);
    CHECK_THROWS_AS(read_dataset(dir / "missing.csv"), IoError);
}

TEST_CASE("logit round trips") {
    auto dir = temp_dir("io_logits");
    std::mt19937_64 rng(3);
    auto l = random_logits(rng, 13, 4);
    write_logits_bin(l, dir / "l.uadl");
    write_logits_csv(l, dir / "l.csv");
    CHECK(read_logits_bin(dir / "l.uadl") == l);
    CHECK(read_logits_csv(dir / "l.csv") == l);
    CHECK(read_logits(dir / "l.uadl") == l);
    CHECK(read_logits(dir / "l.csv") == l);

    auto bytes = slurp(dir / "l.uadl");
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "UADL");
    CHECK((bytes[4] | bytes[5] << 8) == 1);
    CHECK(u32_at(bytes, 6) == 13);
    CHECK(u32_at(bytes, 10) == 4);
    CHECK(f64_at(bytes, 14) == l(0, 0));
    CHECK(f64_at(bytes, 14 + 8 * 5) == l(1, 1));
    CHECK(bytes.size() == 14 + 13 * 4 * 8);

    std::ifstream in(dir / "l.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "logit_0,logit_1,logit_2,logit_3");

    bytes[4] = 9;  // unknown version
    {
        std::ofstream out(dir / "v.uadl", std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(read_logits_bin(dir / "v.uadl"), IoError);
    {
        std::ofstream out(dir / "short.uadl", std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()), 20);
    }
    CHECK_THROWS_AS(read_logits_bin(dir / "short.uadl"), IoError);
}

TEST_CASE("checkpoint round trip and layout") {
    auto dir = temp_dir("io_ckpt");
    auto m = MlpClassifier::init({3, 5, 2}, 11);
    save_checkpoint(m, dir / "m.uadm");
    CHECK(load_checkpoint(dir / "m.uadm") == m);

    auto bytes = slurp(dir / "m.uadm");
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "UADM");
    CHECK((bytes[4] | bytes[5] << 8) == 1);
    CHECK(u32_at(bytes, 6) == 2);
    CHECK(u32_at(bytes, 10) == 3);
    CHECK(u32_at(bytes, 14) == 5);
    CHECK(u32_at(bytes, 18) == 2);
    CHECK(f64_at(bytes, 22) == m.layers()[0].weights[0]);
    std::size_t params = 3 * 5 + 5 + 5 * 2 + 2;
    CHECK(bytes.size() == 22 + params * 8);

    {
        std::ofstream out(dir / "junk.uadm", std::ios::binary);
        out << "NOPE";
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "junk.uadm"), IoError);
}
