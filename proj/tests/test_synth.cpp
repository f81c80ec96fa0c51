#include <cmath>
#include <numbers>

#include "doctest.h"
#include "uad/error.hpp"
#include "uad/pipeline.hpp"
#include "uad/synth.hpp"

using namespace uad;

TEST_CASE("zero-noise identity domain collapses onto base means") {
    DomainSpec spec;
    spec.classes = 2;
    spec.dim = 3;
    spec.noise = 1e-9;
    spec.layout_seed = 4;
    spec.samples_per_class = 25;
    auto data = gen_domain(spec);
    auto means = base_means(2, 3, 4, spec.radius);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        double best = INFINITY;
        std::size_t arg = 0;
        for (std::size_t k = 0; k < 2; ++k) {
            double d = 0;
            for (std::size_t j = 0; j < 3; ++j) d += std::pow(data.features(i, j) - means(k, j), 2);
            if (d < best) {
                best = d;
                arg = k;
            }
        }
        CHECK(best < 1e-12);
        ok += arg == data.labels[i];
    }
    CHECK(ok == data.size());
}

TEST_CASE("base means lie on the sphere") {
    auto m = base_means(5, 8, 17, 5.0);
    for (std::size_t k = 0; k < 5; ++k) {
        double n = 0;
        for (double v : m.row(k)) n += v * v;
        CHECK(std::abs(std::sqrt(n) - 5.0) < 1e-12);
    }
}

TEST_CASE("gen_domain is deterministic and balanced") {
    DomainSpec spec;
    spec.classes = 3;
    spec.samples_per_class = 40;
    spec.seed = 5;
    auto a = gen_domain(spec);
    CHECK(a == gen_domain(spec));
    CHECK(a.size() == 120);
    std::vector<std::size_t> counts(3, 0);
    for (auto y : a.labels) counts[y]++;
    for (auto c : counts) CHECK(c == 40);

    DomainSpec other = spec;
    other.seed = 6;
    CHECK(!(gen_domain(other).features == a.features));
}

TEST_CASE("rotation by pi negates a symmetric 2-d layout") {
    // means (3,0), (-3,0), (0,3), (0,-3) rotate to their negatives
    Matrix means(4, 2, {3, 0, -3, 0, 0, 3, 0, -3});
    DomainSpec spec;
    spec.dim = 2;
    spec.rotation = std::numbers::pi;
    auto t = transform_means(means, spec);
    for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(t.data[i] + means.data[i]) < 1e-12);

    // quarter turn by hand: (x, y) -> (-y, x)
    spec.rotation = std::numbers::pi / 2;
    auto q = transform_means(Matrix(1, 2, {1, 2}), spec);
    CHECK(std::abs(q(0, 0) + 2) < 1e-12);
    CHECK(std::abs(q(0, 1) - 1) < 1e-12);

    spec.rotation = 0.0;
    spec.scale = 2.0;
    spec.shift = {1.0, -1.0};
    auto s = transform_means(Matrix(1, 2, {1, 2}), spec);
    CHECK(s(0, 0) == 3.0);
    CHECK(s(0, 1) == 3.0);
}

TEST_CASE("label permutation changes labels only") {
    DomainSpec spec;
    spec.classes = 3;
    spec.seed = 12;
    auto plain = gen_domain(spec);
    spec.label_permutation = std::vector<std::size_t>{1, 2, 0};
    auto perm = gen_domain(spec);
    CHECK(perm.features == plain.features);
    for (std::size_t i = 0; i < plain.size(); ++i) CHECK(perm.labels[i] == (plain.labels[i] + 1) % 3);
}

TEST_CASE("domain spec validation") {
    DomainSpec spec;
    spec.label_permutation = std::vector<std::size_t>{0, 0, 1, 2};
    CHECK_THROWS_AS(spec.validate(), InvalidConfig);
    spec.label_permutation.reset();
    spec.noise = 0.0;
    CHECK_THROWS_AS(spec.validate(), InvalidConfig);
    spec.noise = 1.0;
    spec.shift = {1.0};
    CHECK_THROWS_AS(spec.validate(), InvalidConfig);
}

TEST_CASE("benchmark bundles") {
    auto one = make_benchmark(1, ShiftProfile::Mild, 3);
    CHECK(one.sources.size() == 1);
    CHECK(one.sources[0].classes == one.target.classes);
    CHECK(one.sources[0].features.cols == one.target.features.cols);

    auto adv = make_benchmark(3, ShiftProfile::AdversarialOne, 3);
    std::size_t permuted = 0;
    for (const auto& s : adv.source_specs) permuted += s.label_permutation.has_value();
    CHECK(permuted == 1);
    CHECK(!adv.target_spec.label_permutation);

    auto strong = make_benchmark(3, ShiftProfile::Strong, 3);
    for (const auto& s : strong.source_specs) CHECK(!s.label_permutation);
    // magnitudes grow with the source index and stay within the profile limits
    double prev_rot = 0.0, prev_shift = 0.0;
    for (const auto& s : strong.source_specs) {
        double sh = 0;
        for (double v : s.shift) sh += v * v;
        sh = std::sqrt(sh);
        CHECK(std::abs(s.rotation) > prev_rot);
        CHECK(sh > prev_shift);
        CHECK(std::abs(s.rotation) <= 60.0 * std::numbers::pi / 180.0 + 1e-12);
        CHECK(sh <= 2.0 + 1e-12);
        prev_rot = std::abs(s.rotation);
        prev_shift = sh;
    }
    for (const auto& s : make_benchmark(3, ShiftProfile::Mild, 3).source_specs) {
        double sh = 0;
        for (double v : s.shift) sh += v * v;
        CHECK(std::abs(s.rotation) <= 15.0 * std::numbers::pi / 180.0 + 1e-12);
        CHECK(std::sqrt(sh) <= 0.5 + 1e-12);
    }

    CHECK(make_benchmark(3, ShiftProfile::Strong, 3).target == strong.target);
    CHECK(!(make_benchmark(3, ShiftProfile::Strong, 4).target == strong.target));
    CHECK(shift_profile_from_string(to_string(ShiftProfile::AdversarialOne)) == ShiftProfile::AdversarialOne);
    CHECK_THROWS_AS(shift_profile_from_string("wild"), InvalidConfig);
}

TEST_CASE("derive_seed streams differ") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(1, 5) == derive_seed(1, 5));
}

TEST_CASE("mild profile: least-shifted source transfers better than most-shifted") {
    double near = 0.0, far = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        BenchmarkOptions opt;
        opt.profile = ShiftProfile::Mild;
        opt.seed = seed;
        auto b = make_benchmark(opt);
        TrainerConfig cfg = PipelineConfig::default_source_trainer();
        cfg.seed = seed;
        near += evaluate(train_source(b.sources.front(), cfg), b.target).accuracy;
        far += evaluate(train_source(b.sources.back(), cfg), b.target).accuracy;
    }
    CHECK(near > far);
}
