#include "uad/zoo.hpp"

#include <cmath>

#include "uad/error.hpp"

namespace uad {

Temperature Temperature::from_value(double value) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw InvalidTemperature("temperature must be a finite positive number, got " + std::to_string(value));
    }
    return Temperature(value, std::log(value));
}

Temperature Temperature::from_log(double log_value) {
    if (!std::isfinite(log_value)) throw InvalidTemperature("log-temperature must be finite");
    const double value = std::exp(log_value);
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw InvalidTemperature("log-temperature out of range: " + std::to_string(log_value));
    }
    return Temperature(value, log_value);
}

void ModelZoo::add(std::string id, LogitMatrix logits, Temperature temperature) {
    if (!entries_.empty()) {
        if (logits.rows() != rows() || logits.classes() != classes()) {
            throw InvalidInput("zoo entry '" + id + "' has shape " + std::to_string(logits.rows()) + "x" +
                               std::to_string(logits.classes()) + ", expected " + std::to_string(rows()) +
                               "x" + std::to_string(classes()));
        }
    }
    for (const auto& e : entries_) {
        if (e.id == id) throw InvalidInput("duplicate zoo id '" + id + "'");
    }
    entries_.push_back({std::move(id), std::move(logits), temperature});
}

void ModelZoo::set_temperature(std::size_t index, Temperature temperature) {
    entries_.at(index).temperature = temperature;
}

std::size_t ModelZoo::rows() const {
    if (entries_.empty()) throw InvalidInput("empty model zoo");
    return entries_.front().logits.rows();
}

std::size_t ModelZoo::classes() const {
    if (entries_.empty()) throw InvalidInput("empty model zoo");
    return entries_.front().logits.classes();
}

std::vector<std::string> ModelZoo::ids() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.id);
    return out;
}

std::size_t ModelZoo::index_of(const std::string& id) const {
    for (std::size_t j = 0; j < entries_.size(); ++j) {
        if (entries_[j].id == id) return j;
    }
    throw InvalidInput("unknown zoo id '" + id + "'");
}

}  // namespace uad
