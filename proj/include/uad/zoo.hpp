#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "uad/matrix.hpp"

namespace uad {

/// Positive temperature stored with its log parametrization T = exp(t).
class Temperature {
public:
    Temperature() = default;  // T = 1

    static Temperature from_value(double value);
    static Temperature from_log(double log_value);

    double value() const noexcept { return value_; }
    double log_value() const noexcept { return log_value_; }

    bool operator==(const Temperature&) const = default;

private:
    Temperature(double value, double log_value) : value_(value), log_value_(log_value) {}
    double value_ = 1.0;
    double log_value_ = 0.0;
};

struct ZooEntry {
    std::string id;
    LogitMatrix logits;  // source model outputs on the target set
    Temperature temperature;
};

/// Source model zoo: N >= 1 entries sharing n and K, unique ids.
class ModelZoo {
public:
    ModelZoo() = default;

    void add(std::string id, LogitMatrix logits, Temperature temperature = {});
    void set_temperature(std::size_t index, Temperature temperature);

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::size_t rows() const;
    std::size_t classes() const;

    const ZooEntry& operator[](std::size_t j) const { return entries_[j]; }
    std::span<const ZooEntry> entries() const noexcept { return entries_; }
    std::vector<std::string> ids() const;

    /// Throws InvalidInput if `id` is unknown.
    std::size_t index_of(const std::string& id) const;

private:
    std::vector<ZooEntry> entries_;
};

}  // namespace uad
