#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "tempattn/explain.hpp"
#include "tempattn/rng.hpp"

using namespace tempattn;

namespace {

/// Independent oracle: brute-force all-pairs enumeration.
double cliffs_delta_bruteforce(const std::vector<double>& x, const std::vector<double>& y) {
    long long num = 0;
    for (double xi : x)
        for (double yj : y) {
            if (xi > yj) ++num;
            if (xi < yj) --num;
        }
    return static_cast<double>(num) / (static_cast<double>(x.size()) * y.size());
}

}  // namespace

TEST_CASE("cliffs delta: dominance, symmetry, frozen example") {
    CHECK(explain::cliffs_delta(std::vector<double>{5, 6, 7},
                                std::vector<double>{1, 2, 3}) == 1.0);
    CHECK(explain::cliffs_delta(std::vector<double>{1, 2, 3},
                                std::vector<double>{1, 2, 3}) == 0.0);
    // 9 pairs: 4 greater, 4 less, 1 tie
    CHECK(explain::cliffs_delta(std::vector<double>{1, 2, 3},
                                std::vector<double>{0, 2, 4}) == 0.0);
}

TEST_CASE("cliffs delta: antisymmetry and monotone invariance") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 1 + static_cast<int>(rng.uniform_int(0, 29));
        int m = 1 + static_cast<int>(rng.uniform_int(0, 29));
        std::vector<double> x(n), y(m);
        for (auto& v : x) v = std::floor(rng.uniform(-3, 3));  // tie-heavy
        for (auto& v : y) v = std::floor(rng.uniform(-3, 3));
        double d = explain::cliffs_delta(x, y);
        CHECK(d == -explain::cliffs_delta(y, x));
        auto mono = [](double v) { return std::exp(v) + 2.0 * v; };  // strictly increasing
        std::vector<double> xm(x), ym(y);
        for (auto& v : xm) v = mono(v);
        for (auto& v : ym) v = mono(v);
        CHECK(explain::cliffs_delta(xm, ym) == d);
    }
}

TEST_CASE("cliffs delta matches brute-force enumeration exactly on 1000 instances") {
    Rng rng(101);
    for (int trial = 0; trial < 1000; ++trial) {
        int n = 1 + static_cast<int>(rng.uniform_int(0, 29));
        int m = 1 + static_cast<int>(rng.uniform_int(0, 29));
        std::vector<double> x(n), y(m);
        bool ties = rng.bernoulli(0.5);
        for (auto& v : x) v = ties ? std::floor(rng.uniform(-2, 2)) : rng.normal();
        for (auto& v : y) v = ties ? std::floor(rng.uniform(-2, 2)) : rng.normal();
        CHECK(explain::cliffs_delta(x, y) == cliffs_delta_bruteforce(x, y));
    }
}

TEST_CASE("permutation test: identical constant samples give p = 1") {
    std::vector<double> x{2.5, 2.5, 2.5}, y{2.5, 2.5};
    CHECK(explain::permutation_test(x, y, 1000, 7) == 1.0);
}

TEST_CASE("permutation test: {0,0,0,0} vs {1,1,1,1} near exhaustive 2/70") {
    // All C(8,4)=70 relabelings; only the two perfect separations reach the
    // observed |mean difference| of 1.
    const double exact = 2.0 / 70.0;
    double p = explain::permutation_test(std::vector<double>{0, 0, 0, 0},
                                         std::vector<double>{1, 1, 1, 1}, 20000, 12345);
    CHECK(std::abs(p - exact) < 0.01);
}

TEST_CASE("permutation test: deterministic given seed, in (0,1]") {
    Rng rng(5);
    std::vector<double> x(10), y(12);
    for (auto& v : x) v = rng.normal();
    for (auto& v : y) v = rng.normal(0.5, 1.0);
    double p1 = explain::permutation_test(x, y, 2000, 99);
    double p2 = explain::permutation_test(x, y, 2000, 99);
    CHECK(p1 == p2);
    CHECK(p1 > 0.0);
    CHECK(p1 <= 1.0);
}

TEST_CASE("permutation test: null calibration (reduced)") {
    // Smaller version of the acceptance criterion: fraction of p < 0.05
    // under the null should sit near 0.05.
    Rng rng(2024);
    int reject = 0;
    const int trials = 300;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> x(15), y(15);
        for (auto& v : x) v = rng.normal();
        for (auto& v : y) v = rng.normal();
        double p = explain::permutation_test(x, y, 1000,
                                             derive_seed(7, "cal", {(uint64_t)t}));
        if (p < 0.05) ++reject;
    }
    double frac = static_cast<double>(reject) / trials;
    CHECK(frac > 0.02);
    CHECK(frac < 0.09);
}

TEST_CASE("median_ci: constants and ordering") {
    auto ci = explain::median_ci(std::vector<double>{0.4, 0.4, 0.4}, 0.95, 1000, 1);
    CHECK(ci.median == 0.4);
    CHECK(ci.lo == 0.4);
    CHECK(ci.hi == 0.4);

    auto single = explain::median_ci(std::vector<double>{-0.2}, 0.95, 1000, 1);
    CHECK(single.median == -0.2);
    CHECK(single.lo == -0.2);
    CHECK(single.hi == -0.2);

    Rng rng(17);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> v(1 + rng.uniform_int(0, 40));
        for (auto& x : v) x = rng.normal();
        auto c = explain::median_ci(v, 0.95, 500, t);
        CHECK(c.lo <= c.median);
        CHECK(c.median <= c.hi);
    }
}

TEST_CASE("median_ci: symmetric sample straddles zero") {
    Rng rng(31);
    std::vector<double> v;
    for (int i = 0; i < 100; ++i) {
        double x = rng.normal();
        v.push_back(x);
        v.push_back(-x);
    }
    auto ci = explain::median_ci(v, 0.95, 4000, 9);
    CHECK(std::abs(ci.median) < 0.15);
    CHECK(ci.lo < 0.0);
    CHECK(ci.hi > 0.0);
}

TEST_CASE("partition_frames: quantile conventions") {
    // N=10 distinct weights: only the maximum survives the 0.9 quantile.
    std::vector<double> w;
    for (int i = 1; i <= 10; ++i) w.push_back(0.01 * i);
    auto part = explain::partition_frames(w, 0.9);
    CHECK(part.high.size() == 1);
    CHECK(part.high[0] == 9);
    CHECK(part.low.size() == 9);
    CHECK(!part.degenerate);

    // Sorted triple with linear interpolation: tau = 0.2 + 0.8*(0.7-0.2) = 0.6.
    auto part3 = explain::partition_frames({0.1, 0.2, 0.7}, 0.9);
    CHECK(part3.tau == doctest::Approx(0.6));
    CHECK(part3.high == std::vector<int>{2});

    // Total tie: everything goes high, flagged degenerate.
    auto tied = explain::partition_frames({0.25, 0.25, 0.25, 0.25}, 0.9);
    CHECK(tied.high.size() == 4);
    CHECK(tied.low.empty());
    CHECK(tied.degenerate);

    CHECK_THROWS_AS(explain::partition_frames({1.0}, 0.9), Error);
}

TEST_CASE("partition covers all frames disjointly") {
    Rng rng(41);
    for (int t = 0; t < 200; ++t) {
        int n = 2 + static_cast<int>(rng.uniform_int(0, 58));
        std::vector<double> w(n);
        double sum = 0;
        for (auto& v : w) {
            v = rng.uniform(0.0, 1.0);
            sum += v;
        }
        for (auto& v : w) v /= sum;
        auto part = explain::partition_frames(w, 0.9);
        CHECK(part.high.size() + part.low.size() == static_cast<size_t>(n));
        CHECK(part.high.size() >= 1);
        for (int i : part.high) CHECK(w[i] >= part.tau);
        for (int i : part.low) CHECK(w[i] < part.tau);
    }
}

TEST_CASE("aggregate_attention: single sequence attains 0 and 1") {
    std::vector<std::pair<Label, std::vector<double>>> profiles;
    profiles.emplace_back(Label::Mitosis, std::vector<double>{0.1, 0.2, 0.3, 0.4});
    auto agg = explain::aggregate_attention(profiles, 10);
    const auto& cc = agg.per_class[static_cast<int>(Label::Mitosis)];
    CHECK(cc.n_contributing[0] == 1);
    CHECK(cc.n_contributing[3] == 1);
    CHECK(cc.n_contributing[4] == 0);
    CHECK(cc.normalized[0] == 1.0);  // offset 0 = final frame = 0.4
    CHECK(cc.normalized[3] == 0.0);
    CHECK(cc.mean[0] == 0.4);
}

TEST_CASE("aggregate_attention: offsets align to the final frame") {
    std::vector<std::pair<Label, std::vector<double>>> profiles;
    profiles.emplace_back(Label::Apoptosis, std::vector<double>{0.0, 1.0});
    profiles.emplace_back(Label::Apoptosis, std::vector<double>{0.5, 0.0, 0.5});
    auto agg = explain::aggregate_attention(profiles, 4);
    const auto& cc = agg.per_class[static_cast<int>(Label::Apoptosis)];
    CHECK(cc.mean[0] == doctest::Approx(0.75));  // (1.0 + 0.5)/2
    CHECK(cc.mean[1] == doctest::Approx(0.0));   // (0.0 + 0.0)/2
    CHECK(cc.mean[2] == doctest::Approx(0.5));   // only the longer sequence
    CHECK(cc.n_contributing[2] == 1);
    // normalized spans [0,1]
    double mx = *std::max_element(cc.normalized.begin(), cc.normalized.begin() + 3);
    double mn = *std::min_element(cc.normalized.begin(), cc.normalized.begin() + 3);
    CHECK(mx == 1.0);
    CHECK(mn == 0.0);
}

TEST_CASE("effect categories") {
    CHECK(explain::effect_category(0.0) == "negligible");
    CHECK(explain::effect_category(-0.1) == "negligible");
    CHECK(explain::effect_category(0.2) == "small");
    CHECK(explain::effect_category(-0.4) == "medium");
    CHECK(explain::effect_category(0.6) == "large");
}

TEST_CASE("effect_report: constant feature gives delta 0 and p 1") {
    morphfeat::FeatureTable table;
    for (int f = 0; f < 10; ++f) {
        morphfeat::FeatureVector fv;
        fv.area = 25.0;  // identical across frames
        fv.perimeter = 18.0;
        fv.equiv_diameter = 5.6;
        fv.eccentricity = 0.3;
        fv.solidity = 1.0;
        fv.circularity = 0.97;
        fv.mean_intensity = {0.5};
        table.insert("seq-0", f, fv);
    }
    explain::SequencePartition sp;
    sp.traj_id = "seq-0";
    sp.label = Label::Apoptosis;
    sp.part.tau = 0.5;
    sp.part.high = {7, 8, 9};
    sp.part.low = {0, 1, 2, 3, 4, 5, 6};

    explain::EffectParams params;
    params.permutation_iters = 500;
    params.master_seed = 3;
    auto report = explain::effect_report({sp}, table, params);
    REQUIRE(report.records.size() == 7);  // 6 shape features + 1 channel
    for (const auto& rec : report.records) {
        CHECK(rec.delta == 0.0);
        CHECK(rec.p_value == 1.0);
    }
    for (const auto& s : report.summary) {
        CHECK(s.median_delta == 0.0);
        CHECK(s.category == "negligible");
    }
}

TEST_CASE("effect_report: degenerate and missing sequences are counted") {
    morphfeat::FeatureTable table;
    morphfeat::FeatureVector fv;
    fv.mean_intensity = {0.5};
    table.insert("present", 0, fv);
    table.insert("present", 1, fv);

    explain::SequencePartition degenerate;
    degenerate.traj_id = "present";
    degenerate.label = Label::Mitosis;
    degenerate.part.degenerate = true;

    explain::SequencePartition missing;
    missing.traj_id = "absent";
    missing.label = Label::Mitosis;
    missing.part.high = {0};
    missing.part.low = {1};

    explain::EffectParams params;
    params.permutation_iters = 100;
    auto report = explain::effect_report({degenerate, missing}, table, params);
    CHECK(report.n_excluded_degenerate == 1);
    CHECK(report.n_excluded_missing == 1);
    CHECK(report.records.empty());
}

TEST_CASE("quantile_linear conventions") {
    std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    CHECK(explain::quantile_linear(v, 0.0) == 1.0);
    CHECK(explain::quantile_linear(v, 1.0) == 4.0);
    CHECK(explain::quantile_linear(v, 0.5) == doctest::Approx(2.5));
    CHECK(explain::quantile_linear(v, 0.25) == doctest::Approx(1.75));
}
