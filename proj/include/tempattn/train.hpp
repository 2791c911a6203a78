#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tempattn/common.hpp"
#include "tempattn/model.hpp"

namespace tempattn::train {

struct AugmentProbs {
    double hflip = 0.5;
    double vflip = 0.5;
    double jitter = 0.3;
    double blur = 0.2;
    double endmask = 0.25;
    double endmask_lo = 0.10;
    double endmask_hi = 0.50;
};

struct TrainConfig {
    int batch_size = 4;
    double learning_rate = 1e-5;
    double weight_decay = 1e-3;
    int max_epochs = 86;
    int patience = 10;
    AugmentProbs augment;
    uint64_t master_seed = 42;

    void validate() const {
        if (batch_size < 1) throw Error("train: batch_size must be >= 1");
        if (max_epochs < 1) throw Error("train: max_epochs must be >= 1");
        if (patience < 0) throw Error("train: patience must be >= 0");
        if (!(learning_rate > 0.0)) throw Error("train: learning_rate must be > 0");
        if (weight_decay < 0.0) throw Error("train: weight_decay must be >= 0");
        auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
        if (!prob(augment.hflip) || !prob(augment.vflip) || !prob(augment.jitter) ||
            !prob(augment.blur) || !prob(augment.endmask))
            throw Error("train: augmentation probabilities must be in [0,1]");
        if (!(augment.endmask_lo > 0.0 && augment.endmask_lo < augment.endmask_hi &&
              augment.endmask_hi < 1.0))
            throw Error("train: end-mask fraction range must satisfy 0 < lo < hi < 1");
    }
};

/// Inverse-class-frequency weights; expected per-class draw mass is equal.
/// Throws when only one class is present.
std::vector<double> sampler_weights(const std::vector<Label>& labels);

/// Weighted draw with replacement via inverse-CDF; deterministic per seed.
std::vector<int> weighted_draws(const std::vector<double>& weights, int n, Rng& rng);

/// Stochastic augmentations: flips, per-channel intensity jitter, Gaussian
/// blur, and end-masking (a contiguous tail replaced by zero frames and
/// marked padded via valid_length).
Trajectory augment(const Trajectory& traj, const AugmentProbs& probs, Rng& rng);

struct Collated {
    int padded_length = 0;
    std::vector<Video> frames;                 // zero-padded to padded_length
    std::vector<std::vector<uint8_t>> pad_mask;  // true = real frame
    std::vector<Label> labels;
};

Collated collate(const std::vector<const Trajectory*>& batch);

/// Numerically stable binary cross-entropy with logits; y = 1 for apoptosis.
double bce_with_logits(double logit, double y);

/// Adam with decoupled weight decay over an ordered parameter set.
template <class S>
class AdamW {
public:
    AdamW(const nn::ParamSet<S>& params, double lr, double weight_decay)
        : lr_(lr), wd_(weight_decay) {
        for (const auto& e : params.entries) {
            m_.push_back(nn::Mat<S>::Zero(e.value.rows(), e.value.cols()));
            v_.push_back(nn::Mat<S>::Zero(e.value.rows(), e.value.cols()));
        }
    }

    void step(nn::ParamSet<S>& params, const nn::Grads<S>& g) {
        ++t_;
        const S b1 = static_cast<S>(0.9), b2 = static_cast<S>(0.999);
        const S eps = static_cast<S>(1e-8);
        const S bc1 = S(1) - static_cast<S>(std::pow(0.9, static_cast<double>(t_)));
        const S bc2 = S(1) - static_cast<S>(std::pow(0.999, static_cast<double>(t_)));
        const S lr = static_cast<S>(lr_), wd = static_cast<S>(wd_);
        for (size_t i = 0; i < m_.size(); ++i) {
            m_[i] = b1 * m_[i] + (S(1) - b1) * g.g[i];
            v_[i] = b2 * v_[i] + (S(1) - b2) * g.g[i].cwiseProduct(g.g[i]);
            auto& val = params.entries[i].value;
            val -= lr * ((m_[i] / bc1).array() / ((v_[i] / bc2).array().sqrt() + eps))
                       .matrix();
            val -= (lr * wd) * val;
        }
    }

    int64_t steps() const { return t_; }

private:
    double lr_, wd_;
    int64_t t_ = 0;
    std::vector<nn::Mat<S>> m_, v_;
};

struct TrainLogRow {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_bacc = 0.0;
    double lr = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    nn::ParamSet<float> best_params;
    std::vector<TrainLogRow> log;
    int best_epoch = -1;
    double best_val_loss = 0.0;
};

using EpochCallback = std::function<void(const TrainLogRow&)>;

/// Joint from-scratch optimization of encoder + temporal + head with
/// class-balanced sampling, per-draw augmentation streams and early stopping
/// on validation loss. Deterministic given (data, configs, master seed) and
/// independent of the worker count. Throws on divergence.
TrainResult train_loop(const std::vector<Trajectory>& train_set,
                       const std::vector<Trajectory>& val_set,
                       const model::ModelConfig& mcfg, const TrainConfig& tcfg,
                       int threads, const EpochCallback& on_epoch = {});

}  // namespace tempattn::train
