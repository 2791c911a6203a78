#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tempattn/common.hpp"
#include "tempattn/model.hpp"

namespace tempattn::eval {

/// Positive class = apoptosis throughout.
struct ConfusionMatrix {
    long long tp = 0, fn = 0, fp = 0, tn = 0;

    long long total() const { return tp + fn + fp + tn; }
    void add(Label truth, Label predicted) {
        if (truth == Label::Apoptosis)
            (predicted == Label::Apoptosis ? tp : fn) += 1;
        else
            (predicted == Label::Apoptosis ? fp : tn) += 1;
    }
};

double balanced_accuracy(const ConfusionMatrix& cm);
double f1_macro(const ConfusionMatrix& cm);
double recall_apoptosis(const ConfusionMatrix& cm);
double recall_mitosis(const ConfusionMatrix& cm);

enum class Protocol { TruncateTail, KeepLast };

std::string to_string(Protocol p);
Protocol protocol_from_string(const std::string& s);

/// Removes the final k frames; sequences with T <= k are excluded
/// (std::nullopt). Surviving frames are byte-identical to the input.
std::optional<Trajectory> truncate_tail(const Trajectory& traj, int k);

/// Keeps the min(k, T) final frames in order; k >= 1.
Trajectory keep_last(const Trajectory& traj, int k);

struct SweepPoint {
    int k = 0;
    int n = 0;
    double bacc = 0.0, f1 = 0.0, recall_apo = 0.0, recall_mito = 0.0;
};

struct SweepCurve {
    Protocol protocol = Protocol::TruncateTail;
    std::vector<SweepPoint> points;
};

ConfusionMatrix evaluate(const model::FateModel<float>& m,
                         const std::vector<Trajectory>& set, int threads);

/// Per k: apply the protocol, run inference, record metrics and the
/// surviving sequence count. A k that excludes every sequence is dropped
/// with a warning on stderr.
SweepCurve sweep(const model::FateModel<float>& m, const std::vector<Trajectory>& test,
                 Protocol protocol, const std::vector<int>& ks, int threads);

}  // namespace tempattn::eval
