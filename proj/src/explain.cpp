#include "tempattn/explain.hpp"

#include <algorithm>
#include <cmath>

#include "tempattn/rng.hpp"

namespace tempattn::explain {

double quantile_linear(std::vector<double> values, double q) {
    if (values.empty()) throw Error("quantile of empty sample");
    std::sort(values.begin(), values.end());
    if (q <= 0.0) return values.front();
    if (q >= 1.0) return values.back();
    double h = q * static_cast<double>(values.size() - 1);
    size_t i = static_cast<size_t>(h);
    double frac = h - static_cast<double>(i);
    if (i + 1 >= values.size()) return values.back();
    return values[i] + frac * (values[i + 1] - values[i]);
}

AttentionPartition partition_frames(const std::vector<double>& weights, double q) {
    if (weights.size() < 2) throw Error("partition_frames: need at least 2 frames");
    AttentionPartition p;
    p.tau = quantile_linear(weights, q);
    for (int i = 0; i < static_cast<int>(weights.size()); ++i) {
        if (weights[i] >= p.tau)
            p.high.push_back(i);
        else
            p.low.push_back(i);
    }
    p.degenerate = p.low.empty();
    return p;
}

double cliffs_delta(std::span<const double> x, std::span<const double> y) {
    if (x.empty() || y.empty()) throw Error("cliffs_delta: empty sample");
    std::vector<double> ys(y.begin(), y.end());
    std::sort(ys.begin(), ys.end());
    int64_t greater = 0, less = 0;
    for (double xi : x) {
        auto lo = std::lower_bound(ys.begin(), ys.end(), xi);
        auto hi = std::upper_bound(lo, ys.end(), xi);
        greater += lo - ys.begin();         // y_j < x_i
        less += ys.end() - hi;              // y_j > x_i
    }
    return static_cast<double>(greater - less) /
           (static_cast<double>(x.size()) * static_cast<double>(y.size()));
}

double permutation_test(std::span<const double> x, std::span<const double> y,
                        int iterations, uint64_t seed) {
    if (x.empty() || y.empty()) throw Error("permutation_test: empty sample");
    if (iterations < 1) throw Error("permutation_test: iterations must be >= 1");

    std::vector<double> pooled(x.begin(), x.end());
    pooled.insert(pooled.end(), y.begin(), y.end());
    auto [mn, mx] = std::minmax_element(pooled.begin(), pooled.end());
    if (*mn == *mx) return 1.0;  // no variation: every relabeling ties the observed 0

    const size_t n = x.size(), total = pooled.size();
    const double m = static_cast<double>(total - n);
    double sum_all = 0.0;
    for (double v : pooled) sum_all += v;
    double sum_x = 0.0;
    for (double v : x) sum_x += v;
    const double observed =
        std::abs(sum_x / static_cast<double>(n) - (sum_all - sum_x) / m);

    Rng rng(seed);
    int64_t count = 0;
    for (int b = 0; b < iterations; ++b) {
        // Partial Fisher-Yates: first n slots become the permuted x group.
        for (size_t i = 0; i < n; ++i) {
            size_t j = static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(i),
                                                           static_cast<int64_t>(total) - 1));
            std::swap(pooled[i], pooled[j]);
        }
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) s += pooled[i];
        double stat = std::abs(s / static_cast<double>(n) - (sum_all - s) / m);
        if (stat >= observed) ++count;
    }
    return static_cast<double>(1 + count) / static_cast<double>(1 + iterations);
}

MedianCi median_ci(std::span<const double> values, double level, int resamples,
                   uint64_t seed) {
    if (values.empty()) throw Error("median_ci: empty sample");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    auto median_of_sorted = [](const std::vector<double>& v) {
        size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };

    MedianCi out;
    out.median = median_of_sorted(sorted);
    if (sorted.size() == 1 || sorted.front() == sorted.back()) {
        out.lo = out.hi = out.median;
        return out;
    }

    Rng rng(seed);
    const size_t n = sorted.size();
    std::vector<double> buf(n);
    std::vector<double> medians(resamples);
    for (int b = 0; b < resamples; ++b) {
        for (size_t i = 0; i < n; ++i)
            buf[i] = sorted[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(n) - 1))];
        std::sort(buf.begin(), buf.end());
        medians[b] = median_of_sorted(buf);
    }
    out.lo = quantile_linear(medians, (1.0 - level) / 2.0);
    out.hi = quantile_linear(std::move(medians), (1.0 + level) / 2.0);
    return out;
}

std::string effect_category(double median_delta) {
    double a = std::abs(median_delta);
    if (a < 0.147) return "negligible";
    if (a < 0.33) return "small";
    if (a < 0.474) return "medium";
    return "large";
}

AggregatedAttention aggregate_attention(
    const std::vector<std::pair<Label, std::vector<double>>>& profiles, int window) {
    if (window < 1) throw Error("aggregate_attention: window must be >= 1");
    AggregatedAttention agg;
    agg.window = window;
    for (int c = 0; c < 2; ++c) {
        agg.per_class[c].mean.assign(window, 0.0);
        agg.per_class[c].normalized.assign(window, 0.0);
        agg.per_class[c].n_contributing.assign(window, 0);
    }
    for (const auto& [label, weights] : profiles) {
        ClassCurve& cc = agg.per_class[static_cast<int>(label)];
        int n = static_cast<int>(weights.size());
        for (int o = 0; o < std::min(window, n); ++o) {
            cc.mean[o] += weights[n - 1 - o];
            cc.n_contributing[o] += 1;
        }
    }
    for (int c = 0; c < 2; ++c) {
        ClassCurve& cc = agg.per_class[c];
        double mn = 0.0, mx = 0.0;
        bool any = false;
        for (int o = 0; o < window; ++o) {
            if (!cc.n_contributing[o]) continue;
            cc.mean[o] /= cc.n_contributing[o];
            if (!any) {
                mn = mx = cc.mean[o];
                any = true;
            } else {
                mn = std::min(mn, cc.mean[o]);
                mx = std::max(mx, cc.mean[o]);
            }
        }
        if (!any) continue;
        double span = mx - mn;
        for (int o = 0; o < window; ++o) {
            if (!cc.n_contributing[o]) continue;
            cc.normalized[o] = span > 0.0 ? (cc.mean[o] - mn) / span : 0.0;
        }
    }
    return agg;
}

EffectReport effect_report(const std::vector<SequencePartition>& sequences,
                           const morphfeat::FeatureTable& table,
                           const EffectParams& params) {
    EffectReport report;
    const int channels = table.channels();
    const std::vector<std::string> names = morphfeat::feature_names(channels);

    auto feature_value = [&](const morphfeat::FeatureVector& fv, size_t fi) {
        switch (fi) {
            case 0: return fv.area;
            case 1: return fv.perimeter;
            case 2: return fv.equiv_diameter;
            case 3: return fv.eccentricity;
            case 4: return fv.solidity;
            case 5: return fv.circularity;
            default: return fv.mean_intensity[fi - 6];
        }
    };

    // Deltas per feature per class, for the summary pass.
    std::vector<std::vector<double>> deltas[2];
    deltas[0].resize(names.size());
    deltas[1].resize(names.size());

    for (const auto& seq : sequences) {
        if (seq.part.degenerate) {
            ++report.n_excluded_degenerate;
            continue;
        }
        std::vector<const morphfeat::FeatureVector*> high, low;
        for (int f : seq.part.high)
            if (const auto* fv = table.find(seq.traj_id, f)) high.push_back(fv);
        for (int f : seq.part.low)
            if (const auto* fv = table.find(seq.traj_id, f)) low.push_back(fv);
        if (high.empty() || low.empty()) {
            ++report.n_excluded_missing;
            continue;
        }
        std::vector<double> xs(high.size()), ys(low.size());
        for (size_t fi = 0; fi < names.size(); ++fi) {
            for (size_t i = 0; i < high.size(); ++i) xs[i] = feature_value(*high[i], fi);
            for (size_t i = 0; i < low.size(); ++i) ys[i] = feature_value(*low[i], fi);
            uint64_t seed = derive_seed(params.master_seed, "permtest",
                                        {fnv1a64(seq.traj_id), static_cast<uint64_t>(fi)});
            EffectRecord rec;
            rec.traj_id = seq.traj_id;
            rec.feature = names[fi];
            rec.n_high = static_cast<int>(xs.size());
            rec.n_low = static_cast<int>(ys.size());
            rec.p_value = permutation_test(xs, ys, params.permutation_iters, seed);
            rec.delta = cliffs_delta(xs, ys);
            deltas[static_cast<int>(seq.label)][fi].push_back(rec.delta);
            report.records.push_back(std::move(rec));
        }
    }

    for (int c = 0; c < 2; ++c) {
        for (size_t fi = 0; fi < names.size(); ++fi) {
            const auto& ds = deltas[c][fi];
            if (ds.empty()) continue;
            uint64_t seed = derive_seed(params.master_seed, "bootstrap",
                                        {static_cast<uint64_t>(fi), static_cast<uint64_t>(c)});
            MedianCi ci = median_ci(ds, params.ci_level, params.bootstrap_resamples, seed);
            FeatureSummary s;
            s.feature = names[fi];
            s.label = static_cast<Label>(c);
            s.median_delta = ci.median;
            s.ci_low = ci.lo;
            s.ci_high = ci.hi;
            s.category = effect_category(ci.median);
            s.n_sequences = static_cast<int>(ds.size());
            report.summary.push_back(std::move(s));
        }
    }
    return report;
}

}  // namespace tempattn::explain
