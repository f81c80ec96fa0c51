#include "uad/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "uad/error.hpp"

namespace uad {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

struct ProfileLimits {
    double max_rotation;  // radians
    double max_shift;
    double max_scale_change;
    double noise;
};

// Frozen once the benchmark orderings were checked empirically.
ProfileLimits limits_for(ShiftProfile profile) {
    constexpr double deg = std::numbers::pi / 180.0;
    switch (profile) {
        case ShiftProfile::Mild:
            return {15.0 * deg, 0.5, 0.05, 1.0};
        case ShiftProfile::Strong:
        case ShiftProfile::AdversarialOne:
            return {60.0 * deg, 2.0, 0.2, 1.2};
    }
    return {0.0, 0.0, 0.0, 1.0};
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ (stream * 0xD1B54A32D192ED03ULL));
}

void DomainSpec::validate() const {
    if (classes < 2) throw InvalidConfig("domain '" + id + "': need at least two classes");
    if (dim < 1) throw InvalidConfig("domain '" + id + "': feature dim must be positive");
    if (samples_per_class < 1) throw InvalidConfig("domain '" + id + "': samples per class must be >= 1");
    if (!(noise > 0.0)) throw InvalidConfig("domain '" + id + "': noise scale must be positive");
    if (!(scale > 0.0)) throw InvalidConfig("domain '" + id + "': scale must be positive");
    if (!(radius > 0.0)) throw InvalidConfig("domain '" + id + "': radius must be positive");
    if (rotation != 0.0 && dim < 2) throw InvalidConfig("domain '" + id + "': rotation needs dim >= 2");
    if (!shift.empty() && shift.size() != dim) throw InvalidConfig("domain '" + id + "': shift length must equal dim");
    if (label_permutation) {
        const auto& perm = *label_permutation;
        if (perm.size() != classes) throw InvalidConfig("domain '" + id + "': permutation length must equal K");
        std::vector<bool> seen(classes, false);
        for (auto p : perm) {
            if (p >= classes || seen[p]) throw InvalidConfig("domain '" + id + "': label permutation is not a bijection");
            seen[p] = true;
        }
    }
}

Matrix base_means(std::size_t classes, std::size_t dim, std::uint64_t layout_seed, double radius) {
    std::mt19937_64 rng(layout_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix means(classes, dim);
    for (std::size_t c = 0; c < classes; ++c) {
        double norm = 0.0;
        do {
            norm = 0.0;
            for (auto& v : means.row(c)) {
                v = normal(rng);
                norm += v * v;
            }
        } while (norm == 0.0);
        norm = std::sqrt(norm);
        for (auto& v : means.row(c)) v *= radius / norm;
    }
    return means;
}

Matrix transform_means(const Matrix& means, const DomainSpec& spec) {
    Matrix out = means;
    const double c = std::cos(spec.rotation);
    const double s = std::sin(spec.rotation);
    for (std::size_t k = 0; k < out.rows; ++k) {
        auto row = out.row(k);
        if (spec.rotation != 0.0) {
            const double x = row[0];
            const double y = row[1];
            row[0] = c * x - s * y;
            row[1] = s * x + c * y;
        }
        for (std::size_t j = 0; j < row.size(); ++j) {
            row[j] *= spec.scale;
            if (!spec.shift.empty()) row[j] += spec.shift[j];
        }
    }
    return out;
}

LabeledDataset gen_domain(const DomainSpec& spec) {
    spec.validate();
    const Matrix means = transform_means(base_means(spec.classes, spec.dim, spec.layout_seed, spec.radius), spec);
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    LabeledDataset data;
    data.classes = spec.classes;
    data.features = Matrix(spec.classes * spec.samples_per_class, spec.dim);
    data.labels.resize(data.features.rows);
    std::size_t i = 0;
    for (std::size_t k = 0; k < spec.classes; ++k) {
        for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++i) {
            auto row = data.features.row(i);
            for (std::size_t j = 0; j < spec.dim; ++j) row[j] = means(k, j) + spec.noise * normal(rng);
            data.labels[i] = spec.label_permutation ? (*spec.label_permutation)[k] : k;
        }
    }
    return data;
}

std::string to_string(ShiftProfile profile) {
    switch (profile) {
        case ShiftProfile::Mild: return "mild";
        case ShiftProfile::Strong: return "strong";
        case ShiftProfile::AdversarialOne: return "adversarial-one";
    }
    return "unknown";
}

ShiftProfile shift_profile_from_string(const std::string& name) {
    if (name == "mild") return ShiftProfile::Mild;
    if (name == "strong") return ShiftProfile::Strong;
    if (name == "adversarial-one") return ShiftProfile::AdversarialOne;
    throw InvalidConfig("unknown shift profile '" + name + "' (expected mild, strong or adversarial-one)");
}

std::vector<DomainSpec> benchmark_specs(const BenchmarkOptions& options, DomainSpec* target_spec) {
    if (options.n_sources < 1) throw InvalidConfig("benchmark needs at least one source");
    const ProfileLimits lim = limits_for(options.profile);
    const std::uint64_t layout_seed = splitmix64(options.seed ^ 0x4C41594FULL);

    DomainSpec base;
    base.classes = options.classes;
    base.dim = options.dim;
    base.layout_seed = layout_seed;
    base.samples_per_class = options.samples_per_class;
    base.noise = lim.noise;

    std::mt19937_64 rng(splitmix64(options.seed ^ 0x53484946ULL));
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<DomainSpec> specs;
    const auto n = static_cast<double>(options.n_sources);
    for (std::size_t j = 0; j < options.n_sources; ++j) {
        DomainSpec spec = base;
        spec.id = "source_" + std::to_string(j);
        double frac = static_cast<double>(j + 1) / n;
        const double sign = (j % 2 == 0) ? 1.0 : -1.0;
        spec.rotation = sign * frac * lim.max_rotation;
        spec.scale = 1.0 + frac * lim.max_scale_change;
        std::vector<double> dir(options.dim);
        double norm = 0.0;
        for (auto& v : dir) {
            v = normal(rng);
            norm += v * v;
        }
        norm = std::sqrt(norm);
        spec.shift.resize(options.dim);
        for (std::size_t d = 0; d < options.dim; ++d) spec.shift[d] = frac * lim.max_shift * dir[d] / norm;
        spec.seed = splitmix64(options.seed + 1000 + j);
        specs.push_back(std::move(spec));
    }

    if (options.profile == ShiftProfile::AdversarialOne) {
        // Cyclic shift: every class maps to a different label. The least-shifted
        // source is the one a naive ensemble leans on most.
        std::vector<std::size_t> perm(options.classes);
        for (std::size_t k = 0; k < options.classes; ++k) perm[k] = (k + 1) % options.classes;
        specs.front().label_permutation = perm;
    }

    if (target_spec) {
        *target_spec = base;
        target_spec->id = "target";
        target_spec->seed = splitmix64(options.seed + 999);
    }
    return specs;
}

BenchmarkBundle make_benchmark(const BenchmarkOptions& options) {
    BenchmarkBundle bundle;
    bundle.source_specs = benchmark_specs(options, &bundle.target_spec);
    for (const auto& spec : bundle.source_specs) bundle.sources.push_back(gen_domain(spec));
    bundle.target = gen_domain(bundle.target_spec);
    return bundle;
}

BenchmarkBundle make_benchmark(std::size_t n_sources, ShiftProfile profile, std::uint64_t seed) {
    BenchmarkOptions options;
    options.n_sources = n_sources;
    options.profile = profile;
    options.seed = seed;
    return make_benchmark(options);
}

}  // namespace uad
