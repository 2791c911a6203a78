#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tempattn/common.hpp"
#include "tempattn/morphfeat.hpp"

namespace tempattn::explain {

/// Linear-interpolation quantile between order statistics. `values` need not
/// be sorted; q in [0, 1].
double quantile_linear(std::vector<double> values, double q);

/// Per-sequence partition of frames into the high-attention set (weights at
/// or above the q-quantile threshold, ties included) and the rest.
struct AttentionPartition {
    double tau = 0.0;
    std::vector<int> high;
    std::vector<int> low;
    bool degenerate = false;  // all weights tied: low empty, skip feature tests
};

AttentionPartition partition_frames(const std::vector<double>& weights, double q = 0.9);

/// Cliff's delta in [-1, 1]: normalized excess of dominating pairs.
/// Internally counted with sorted ranks; exact integer arithmetic until the
/// final division.
double cliffs_delta(std::span<const double> x, std::span<const double> y);

/// Two-sided permutation test on |mean(x) - mean(y)| with add-one smoothing:
/// p = (1 + #{permuted stat >= observed}) / (1 + iterations). Deterministic
/// given the seed. Identical constant samples give p = 1 exactly.
double permutation_test(std::span<const double> x, std::span<const double> y,
                        int iterations, uint64_t seed);

struct MedianCi {
    double median = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

/// Sample median with a percentile-bootstrap confidence interval.
MedianCi median_ci(std::span<const double> values, double level = 0.95,
                   int resamples = 10000, uint64_t seed = 0);

/// Effect size buckets by |median delta|: 0.147 / 0.33 / 0.474.
std::string effect_category(double median_delta);

/// Aggregated, final-frame-aligned attention. Offset 0 is the last frame.
/// Each class curve is min-max normalized over its populated offsets.
struct ClassCurve {
    std::vector<double> mean;
    std::vector<double> normalized;
    std::vector<int> n_contributing;
};

struct AggregatedAttention {
    int window = 50;
    ClassCurve per_class[2];  // indexed by Label
};

AggregatedAttention aggregate_attention(
    const std::vector<std::pair<Label, std::vector<double>>>& profiles, int window = 50);

struct SequencePartition {
    std::string traj_id;
    Label label = Label::Mitosis;
    AttentionPartition part;
};

struct EffectRecord {
    std::string traj_id;
    std::string feature;
    int n_high = 0;
    int n_low = 0;
    double p_value = 1.0;
    double delta = 0.0;
};

struct FeatureSummary {
    std::string feature;
    Label label = Label::Mitosis;
    double median_delta = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::string category;
    int n_sequences = 0;
};

struct EffectReport {
    std::vector<EffectRecord> records;
    std::vector<FeatureSummary> summary;
    int n_excluded_degenerate = 0;
    int n_excluded_missing = 0;  // empty usable high or low set after feature lookup
};

struct EffectParams {
    int permutation_iters = 50000;
    int bootstrap_resamples = 10000;
    double ci_level = 0.95;
    uint64_t master_seed = 0;
};

/// Per-(sequence, feature) permutation tests and Cliff's deltas between high-
/// and low-attention frames, plus per-feature per-class bootstrap medians.
/// Frames absent from the feature table are skipped; test seeds are derived
/// per (sequence, feature) so parallel evaluation is order-independent.
EffectReport effect_report(const std::vector<SequencePartition>& sequences,
                           const morphfeat::FeatureTable& table,
                           const EffectParams& params);

}  // namespace tempattn::explain
