#include "tempattn/evalmod.hpp"

#include <cstdio>
#include <cstring>

#include "tempattn/parallel.hpp"

namespace tempattn::eval {

double balanced_accuracy(const ConfusionMatrix& cm) {
    if (cm.tp + cm.fn == 0 || cm.fp + cm.tn == 0)
        throw Error("balanced_accuracy: empty class");
    double r_apo = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
    double r_mito = static_cast<double>(cm.tn) / static_cast<double>(cm.fp + cm.tn);
    return 0.5 * (r_apo + r_mito);
}

double f1_macro(const ConfusionMatrix& cm) {
    if (cm.tp + cm.fn == 0 || cm.fp + cm.tn == 0) throw Error("f1_macro: empty class");
    // Per-class F1 from integer counts; a class with no predicted positives
    // contributes 0 by convention.
    long long denom_apo = 2 * cm.tp + cm.fp + cm.fn;
    long long denom_mito = 2 * cm.tn + cm.fn + cm.fp;
    double f1_apo = denom_apo ? 2.0 * static_cast<double>(cm.tp) /
                                    static_cast<double>(denom_apo)
                              : 0.0;
    double f1_mito = denom_mito ? 2.0 * static_cast<double>(cm.tn) /
                                      static_cast<double>(denom_mito)
                                : 0.0;
    return 0.5 * (f1_apo + f1_mito);
}

double recall_apoptosis(const ConfusionMatrix& cm) {
    if (cm.tp + cm.fn == 0) throw Error("recall: no apoptosis sequences");
    return static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
}

double recall_mitosis(const ConfusionMatrix& cm) {
    if (cm.fp + cm.tn == 0) throw Error("recall: no mitosis sequences");
    return static_cast<double>(cm.tn) / static_cast<double>(cm.fp + cm.tn);
}

std::string to_string(Protocol p) {
    return p == Protocol::TruncateTail ? "truncate_tail" : "keep_last";
}

Protocol protocol_from_string(const std::string& s) {
    if (s == "truncate_tail") return Protocol::TruncateTail;
    if (s == "keep_last") return Protocol::KeepLast;
    throw Error("unknown protocol: " + s);
}

namespace {

/// Copies the frame/mask range [lo, hi) into a fresh evaluation view.
/// min_length is relaxed to 1: these are model inputs, not stored data.
Trajectory slice(const Trajectory& traj, int lo, int hi) {
    Trajectory out;
    const int t = hi - lo;
    out.frames = Video(t, traj.frames.c, traj.frames.h, traj.frames.w);
    std::memcpy(out.frames.data.data(), traj.frames.frame(lo),
                out.frames.data.size() * sizeof(float));
    if (traj.has_masks()) {
        const size_t plane = static_cast<size_t>(traj.frames.h) * traj.frames.w;
        out.masks.assign(traj.masks.begin() + static_cast<long>(plane) * lo,
                         traj.masks.begin() + static_cast<long>(plane) * hi);
    }
    out.label = traj.label;
    out.traj_id = traj.traj_id;
    out.source_id = traj.source_id;
    out.min_length = 1;
    out.generator_seed = traj.generator_seed;
    out.valid_length = t;
    return out;
}

}  // namespace

std::optional<Trajectory> truncate_tail(const Trajectory& traj, int k) {
    if (k < 0) throw Error("truncate_tail: k must be >= 0");
    const int t = traj.frames.t;
    if (t <= k) return std::nullopt;
    if (k == 0) {
        Trajectory out = traj;
        out.valid_length = t;
        return out;
    }
    return slice(traj, 0, t - k);
}

Trajectory keep_last(const Trajectory& traj, int k) {
    if (k < 1) throw Error("keep_last: k must be >= 1");
    const int t = traj.frames.t;
    if (k >= t) {
        Trajectory out = traj;
        out.valid_length = t;
        return out;
    }
    return slice(traj, t - k, t);
}

ConfusionMatrix evaluate(const model::FateModel<float>& m,
                         const std::vector<Trajectory>& set, int threads) {
    std::vector<Label> predicted(set.size());
    parallel_for(static_cast<int>(set.size()), threads,
                 [&](int i) { predicted[i] = m.predict(set[i]).label; });
    ConfusionMatrix cm;
    for (size_t i = 0; i < set.size(); ++i) cm.add(set[i].label, predicted[i]);
    return cm;
}

SweepCurve sweep(const model::FateModel<float>& m, const std::vector<Trajectory>& test,
                 Protocol protocol, const std::vector<int>& ks, int threads) {
    if (ks.empty()) throw Error("sweep: empty k list");
    SweepCurve curve;
    curve.protocol = protocol;
    for (int k : ks) {
        std::vector<Trajectory> views;
        views.reserve(test.size());
        for (const auto& traj : test) {
            if (protocol == Protocol::TruncateTail) {
                if (auto v = truncate_tail(traj, k)) views.push_back(std::move(*v));
            } else {
                views.push_back(keep_last(traj, std::max(1, k)));
            }
        }
        if (views.empty()) {
            std::fprintf(stderr, "sweep: k=%d excludes the entire set, dropped\n", k);
            continue;
        }
        ConfusionMatrix cm = evaluate(m, views, threads);
        SweepPoint pt;
        pt.k = k;
        pt.n = static_cast<int>(views.size());
        pt.bacc = balanced_accuracy(cm);
        pt.f1 = f1_macro(cm);
        pt.recall_apo = recall_apoptosis(cm);
        pt.recall_mito = recall_mitosis(cm);
        curve.points.push_back(pt);
    }
    return curve;
}

}  // namespace tempattn::eval
