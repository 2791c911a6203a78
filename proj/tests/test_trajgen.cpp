#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "tempattn/trajgen.hpp"

using namespace tempattn;
using trajgen::SyntheticSpec;

namespace {

double mask_area(const Trajectory& traj, int t) {
    double area = 0;
    const uint8_t* m = traj.mask(t);
    for (int i = 0; i < traj.frames.h * traj.frames.w; ++i) area += m[i];
    return area;
}

double masked_channel_mean(const Trajectory& traj, int t, int c) {
    const uint8_t* m = traj.mask(t);
    const float* ch = traj.frames.frame(t) +
                      static_cast<size_t>(c) * traj.frames.h * traj.frames.w;
    double sum = 0;
    long long n = 0;
    for (int i = 0; i < traj.frames.h * traj.frames.w; ++i)
        if (m[i]) {
            sum += ch[i];
            ++n;
        }
    return n ? sum / n : 0.0;
}

}  // namespace

TEST_CASE("render_cell: noiseless disk equals mask on that channel") {
    Rng rng(1);
    std::vector<float> frame(32 * 32);
    std::vector<uint8_t> mask(32 * 32);
    trajgen::render_cell(16.0, 16.0, 5.0, 5.0, 0.0, {1.0}, 32, 32, 0.0, rng, frame.data(),
                         mask.data());
    long long count = 0;
    for (int i = 0; i < 32 * 32; ++i) {
        CHECK(frame[i] == static_cast<float>(mask[i]));
        count += mask[i];
    }
    // discrete disk area of radius 5 at a pixel-center grid
    long long expected = 0;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            if ((x - 16) * (x - 16) + (y - 16) * (y - 16) <= 25) ++expected;
    CHECK(count == expected);
}

TEST_CASE("render_cell: zero intensity leaves pure noise, mask unchanged") {
    Rng rng(2);
    std::vector<float> frame(2 * 16 * 16);
    std::vector<uint8_t> mask(16 * 16);
    trajgen::render_cell(8.0, 8.0, 4.0, 3.0, 0.3, {0.0, 0.0}, 16, 16, 0.1, rng,
                         frame.data(), mask.data());
    long long inside = 0;
    for (auto m : mask) inside += m;
    CHECK(inside > 10);
    for (auto v : frame) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
}

TEST_CASE("render_cell: ellipse clipped silently at borders") {
    Rng rng(3);
    std::vector<float> frame(8 * 8);
    std::vector<uint8_t> mask(8 * 8);
    trajgen::render_cell(0.0, 0.0, 5.0, 5.0, 0.0, {1.0}, 8, 8, 0.0, rng, frame.data(),
                         mask.data());
    CHECK(mask[0] == 1);  // corner inside
    CHECK(mask[8 * 8 - 1] == 0);
}

TEST_CASE("render_cell: precondition violations throw") {
    Rng rng(4);
    std::vector<float> frame(4 * 4);
    std::vector<uint8_t> mask(4 * 4);
    CHECK_THROWS_AS(trajgen::render_cell(2, 2, -1.0, 2.0, 0.0, {0.5}, 4, 4, 0.0, rng,
                                         frame.data(), mask.data()),
                    Error);
    CHECK_THROWS_AS(trajgen::render_cell(2, 2, 1.0, 2.0, 0.0, {1.5}, 4, 4, 0.0, rng,
                                         frame.data(), mask.data()),
                    Error);
}

TEST_CASE("mitosis: mean mask area over last w frames exceeds earlier mean") {
    SyntheticSpec spec;
    spec.t_min = 30;
    spec.t_max = 30;
    spec.late_window = 5;
    for (int i = 0; i < 10; ++i) {
        Trajectory traj = trajgen::generate_trajectory(spec, Label::Mitosis, i);
        double late = 0, early = 0;
        for (int t = 0; t < 25; ++t) early += mask_area(traj, t);
        for (int t = 25; t < 30; ++t) late += mask_area(traj, t);
        CHECK(late / 5.0 > early / 25.0);
    }
}

TEST_CASE("apoptosis: designated channel elevated over the signal window") {
    SyntheticSpec spec;
    for (int i = 0; i < 10; ++i) {
        Trajectory traj = trajgen::generate_trajectory(spec, Label::Apoptosis, i);
        const int t = traj.frames.t;
        // Identify elevated frames from the generator's geometry: window is at
        // least half the sequence, so the median masked intensity separates.
        std::vector<double> means(t);
        for (int ti = 0; ti < t; ++ti)
            means[ti] = masked_channel_mean(traj, ti, spec.designated_channel);
        std::vector<double> sorted = means;
        std::sort(sorted.begin(), sorted.end());
        double lo_mean = 0, hi_mean = 0;
        int k = t / 4;
        for (int j = 0; j < k; ++j) {
            lo_mean += sorted[j];
            hi_mean += sorted[t - 1 - j];
        }
        lo_mean /= k;
        hi_mean /= k;
        CHECK(hi_mean - lo_mean >= spec.intensity_gain - 2.0 * spec.noise_std);
    }
}

TEST_CASE("generation is byte-identical for identical seeds") {
    SyntheticSpec spec;
    Trajectory a = trajgen::generate_trajectory(spec, Label::Apoptosis, 7);
    Trajectory b = trajgen::generate_trajectory(spec, Label::Apoptosis, 7);
    CHECK(a.frames.data == b.frames.data);
    CHECK(a.masks == b.masks);
    CHECK(a.traj_id == b.traj_id);
    CHECK(a.generator_seed == b.generator_seed);
    Trajectory c = trajgen::generate_trajectory(spec, Label::Apoptosis, 8);
    CHECK(a.frames.data != c.frames.data);
}

TEST_CASE("property: 1000 random specs produce valid trajectories") {
    Rng rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
        SyntheticSpec spec;
        spec.t_min = 11 + static_cast<int>(rng.uniform_int(0, 3));
        spec.t_max = spec.t_min + static_cast<int>(rng.uniform_int(0, 5));
        spec.height = 8 + static_cast<int>(rng.uniform_int(0, 8));
        spec.width = 8 + static_cast<int>(rng.uniform_int(0, 8));
        spec.channels = 1 + static_cast<int>(rng.uniform_int(0, 2));
        spec.designated_channel = spec.channels - 1;
        spec.late_window = 1 + static_cast<int>(rng.uniform_int(0, spec.t_min - 2));
        spec.noise_std = rng.uniform(0.0, 0.2);
        spec.growth_factor = rng.uniform(1.0, 1.8);
        spec.intensity_gain = rng.uniform(0.0, 0.4);
        spec.clutter_prob = rng.bernoulli(0.2) ? 0.5 : 0.0;
        spec.master_seed = rng.bits();
        Label label = rng.bernoulli(0.5) ? Label::Apoptosis : Label::Mitosis;
        Trajectory traj = trajgen::generate_trajectory(spec, label, trial);
        traj.validate();
        CHECK(traj.frames.t >= spec.t_min);
        CHECK(traj.frames.t <= spec.t_max);
        CHECK(traj.label == label);
        CHECK(traj.has_masks());
    }
}

TEST_CASE("split: exact divisibility oracle 80/10/10 with 16/2/2") {
    std::vector<std::pair<std::string, Label>> labels;
    for (int i = 0; i < 100; ++i)
        labels.emplace_back("id" + std::to_string(i), i < 20 ? Label::Apoptosis
                                                             : Label::Mitosis);
    auto split = trajgen::split_dataset(labels, {0.8, 0.1, 0.1}, 5);
    CHECK(split.train.size() == 80);
    CHECK(split.val.size() == 10);
    CHECK(split.test.size() == 10);
    auto count_apo = [&](const std::vector<std::string>& ids) {
        int n = 0;
        for (const auto& id : ids)
            if (std::stoi(id.substr(2)) < 20) ++n;
        return n;
    };
    CHECK(count_apo(split.train) == 16);
    CHECK(count_apo(split.val) == 2);
    CHECK(count_apo(split.test) == 2);
}

TEST_CASE("split: determinism and disjoint cover") {
    std::vector<std::pair<std::string, Label>> labels;
    for (int i = 0; i < 137; ++i)
        labels.emplace_back("t" + std::to_string(i),
                            i % 5 == 0 ? Label::Apoptosis : Label::Mitosis);
    auto s1 = trajgen::split_dataset(labels, {0.8, 0.1, 0.1}, 42);
    auto s2 = trajgen::split_dataset(labels, {0.8, 0.1, 0.1}, 42);
    CHECK(s1.train == s2.train);
    CHECK(s1.val == s2.val);
    CHECK(s1.test == s2.test);

    std::set<std::string> all;
    for (const auto& id : s1.train) all.insert(id);
    for (const auto& id : s1.val) all.insert(id);
    for (const auto& id : s1.test) all.insert(id);
    CHECK(all.size() == labels.size());
}

TEST_CASE("split: paper test composition 2089 = 439 apoptotic + 1650 mitotic") {
    // 4,390 apoptotic and 16,500 mitotic trajectories at 0.8/0.1/0.1 give the
    // published test-set composition exactly.
    std::vector<std::pair<std::string, Label>> labels;
    for (int i = 0; i < 4390; ++i)
        labels.emplace_back("a" + std::to_string(i), Label::Apoptosis);
    for (int i = 0; i < 16500; ++i)
        labels.emplace_back("m" + std::to_string(i), Label::Mitosis);
    auto split = trajgen::split_dataset(labels, {0.8, 0.1, 0.1}, 3);
    CHECK(split.test.size() == 2089);
    int apo = 0;
    for (const auto& id : split.test) apo += id[0] == 'a';
    CHECK(apo == 439);
    CHECK(static_cast<int>(split.test.size()) - apo == 1650);
}

TEST_CASE("split: stratification within 2 points at realistic sizes") {
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        double frac = rng.uniform(0.15, 0.45);
        int n = 1000 + static_cast<int>(rng.uniform_int(0, 2000));
        std::vector<std::pair<std::string, Label>> labels;
        int n_apo = static_cast<int>(frac * n);
        for (int i = 0; i < n; ++i)
            labels.emplace_back("x" + std::to_string(i),
                                i < n_apo ? Label::Apoptosis : Label::Mitosis);
        double global = static_cast<double>(n_apo) / n;
        auto split = trajgen::split_dataset(labels, {0.8, 0.1, 0.1}, rng.bits());
        for (const auto* bucket : {&split.train, &split.val, &split.test}) {
            int apo = 0;
            for (const auto& id : *bucket) apo += std::stoi(id.substr(1)) < n_apo;
            double dev = std::abs(static_cast<double>(apo) / bucket->size() - global);
            CHECK(dev <= 0.02);
        }
    }
}

TEST_CASE("split: rejects fewer than 10 per class and bad ratios") {
    std::vector<std::pair<std::string, Label>> labels;
    for (int i = 0; i < 9; ++i) labels.emplace_back("a" + std::to_string(i), Label::Apoptosis);
    for (int i = 0; i < 50; ++i) labels.emplace_back("m" + std::to_string(i), Label::Mitosis);
    CHECK_THROWS_AS(trajgen::split_dataset(labels, {0.8, 0.1, 0.1}, 1), Error);
    labels.emplace_back("a9", Label::Apoptosis);
    CHECK_THROWS_AS(trajgen::split_dataset(labels, {0.7, 0.1, 0.1}, 1), Error);
    CHECK_NOTHROW(trajgen::split_dataset(labels, {0.8, 0.1, 0.1}, 1));
}

TEST_CASE("spec validation") {
    SyntheticSpec spec;
    spec.t_min = 10;
    CHECK_THROWS_AS(spec.validate(), Error);
    spec = SyntheticSpec();
    spec.late_window = spec.t_min;
    CHECK_THROWS_AS(spec.validate(), Error);
    spec = SyntheticSpec();
    spec.noise_std = -0.1;
    CHECK_THROWS_AS(spec.validate(), Error);
    CHECK_NOTHROW(SyntheticSpec().validate());
}
