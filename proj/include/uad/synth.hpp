#pragma once

// Seeded synthetic multi-domain benchmark: Gaussian class clusters whose
// means are a shared base layout pushed through a per-domain transform.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uad/matrix.hpp"
#include "uad/trainer.hpp"

namespace uad {

struct DomainSpec {
    std::string id;
    std::size_t classes = 4;
    std::size_t dim = 8;
    std::uint64_t layout_seed = 0;
    double radius = 5.0;
    double rotation = 0.0;       // radians, first two feature axes
    std::vector<double> shift;   // empty means zero
    double scale = 1.0;
    double noise = 1.0;
    std::size_t samples_per_class = 100;
    std::optional<std::vector<std::size_t>> label_permutation;
    std::uint64_t seed = 0;

    /// Throws InvalidConfig for out-of-range fields or a non-bijective permutation.
    void validate() const;
};

/// K x d class means on a seeded sphere of the given radius.
Matrix base_means(std::size_t classes, std::size_t dim, std::uint64_t layout_seed, double radius);

/// Rotate (first two axes), scale and shift each row of `means`.
Matrix transform_means(const Matrix& means, const DomainSpec& spec);

/// Class-major samples, exact class balance, labels permuted iff a permutation is set.
LabeledDataset gen_domain(const DomainSpec& spec);

/// Independent 64-bit seed for a numbered stream of a base seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

enum class ShiftProfile { Mild, Strong, AdversarialOne };

std::string to_string(ShiftProfile profile);
ShiftProfile shift_profile_from_string(const std::string& name);

struct BenchmarkOptions {
    std::size_t n_sources = 3;
    ShiftProfile profile = ShiftProfile::Mild;
    std::uint64_t seed = 0;
    std::size_t classes = 4;
    std::size_t dim = 8;
    std::size_t samples_per_class = 500;
};

struct BenchmarkBundle {
    std::vector<LabeledDataset> sources;
    LabeledDataset target;  // labels are for evaluation only
    std::vector<DomainSpec> source_specs;
    DomainSpec target_spec;
};

/// Source j has transform magnitude (j+1)/n of the profile maximum; the target is
/// untransformed. "adversarial-one" permutes the labels of the least-shifted source.
std::vector<DomainSpec> benchmark_specs(const BenchmarkOptions& options, DomainSpec* target_spec = nullptr);
BenchmarkBundle make_benchmark(const BenchmarkOptions& options);
BenchmarkBundle make_benchmark(std::size_t n_sources, ShiftProfile profile, std::uint64_t seed);

}  // namespace uad
