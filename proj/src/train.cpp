#include "tempattn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>

#include "tempattn/evalmod.hpp"
#include "tempattn/parallel.hpp"

namespace tempattn::train {

std::vector<double> sampler_weights(const std::vector<Label>& labels) {
    long long count[2] = {0, 0};
    for (Label l : labels) ++count[static_cast<int>(l)];
    if (count[0] == 0 || count[1] == 0)
        throw Error("sampler_weights: both classes must be present");
    std::vector<double> w(labels.size());
    for (size_t i = 0; i < labels.size(); ++i)
        w[i] = 1.0 / static_cast<double>(count[static_cast<int>(labels[i])]);
    return w;
}

std::vector<int> weighted_draws(const std::vector<double>& weights, int n, Rng& rng) {
    std::vector<double> cdf(weights.size());
    double acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] < 0.0) throw Error("weighted_draws: negative weight");
        acc += weights[i];
        cdf[i] = acc;
    }
    if (!(acc > 0.0)) throw Error("weighted_draws: zero total weight");
    std::vector<int> draws(n);
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform() * acc;
        draws[i] = static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), u) -
                                    cdf.begin());
        if (draws[i] >= static_cast<int>(weights.size()))
            draws[i] = static_cast<int>(weights.size()) - 1;
    }
    return draws;
}

namespace {

void hflip_inplace(Video& v) {
    for (int t = 0; t < v.t; ++t)
        for (int c = 0; c < v.c; ++c)
            for (int y = 0; y < v.h; ++y)
                for (int x = 0; x < v.w / 2; ++x)
                    std::swap(v.at(t, c, y, x), v.at(t, c, y, v.w - 1 - x));
}

void vflip_inplace(Video& v) {
    for (int t = 0; t < v.t; ++t)
        for (int c = 0; c < v.c; ++c)
            for (int y = 0; y < v.h / 2; ++y)
                for (int x = 0; x < v.w; ++x)
                    std::swap(v.at(t, c, y, x), v.at(t, c, v.h - 1 - y, x));
}

void flip_masks(std::vector<uint8_t>& masks, int t, int h, int w, bool horizontal) {
    for (int ti = 0; ti < t; ++ti) {
        uint8_t* m = masks.data() + static_cast<size_t>(ti) * h * w;
        if (horizontal) {
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w / 2; ++x)
                    std::swap(m[y * w + x], m[y * w + (w - 1 - x)]);
        } else {
            for (int y = 0; y < h / 2; ++y)
                for (int x = 0; x < w; ++x)
                    std::swap(m[y * w + x], m[(h - 1 - y) * w + x]);
        }
    }
}

void gaussian_blur_inplace(Video& v, double sigma) {
    int radius = std::max(1, static_cast<int>(std::ceil(2.5 * sigma)));
    std::vector<float> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double k = std::exp(-0.5 * (i * i) / (sigma * sigma));
        kernel[i + radius] = static_cast<float>(k);
        sum += k;
    }
    for (auto& k : kernel) k = static_cast<float>(k / sum);

    std::vector<float> tmp(static_cast<size_t>(v.h) * v.w);
    for (int t = 0; t < v.t; ++t) {
        for (int c = 0; c < v.c; ++c) {
            float* plane = v.data.data() +
                           (static_cast<size_t>(t) * v.c + c) * v.h * v.w;
            // horizontal pass with edge replication
            for (int y = 0; y < v.h; ++y)
                for (int x = 0; x < v.w; ++x) {
                    float acc = 0.0f;
                    for (int i = -radius; i <= radius; ++i) {
                        int xx = std::clamp(x + i, 0, v.w - 1);
                        acc += kernel[i + radius] * plane[y * v.w + xx];
                    }
                    tmp[y * v.w + x] = acc;
                }
            // vertical pass
            for (int y = 0; y < v.h; ++y)
                for (int x = 0; x < v.w; ++x) {
                    float acc = 0.0f;
                    for (int i = -radius; i <= radius; ++i) {
                        int yy = std::clamp(y + i, 0, v.h - 1);
                        acc += kernel[i + radius] * tmp[yy * v.w + x];
                    }
                    plane[y * v.w + x] = std::clamp(acc, 0.0f, 1.0f);
                }
        }
    }
}

}  // namespace

Trajectory augment(const Trajectory& traj, const AugmentProbs& probs, Rng& rng) {
    Trajectory out = traj;
    out.valid_length = traj.frames.t;

    if (rng.bernoulli(probs.hflip)) {
        hflip_inplace(out.frames);
        if (out.has_masks())
            flip_masks(out.masks, out.frames.t, out.frames.h, out.frames.w, true);
    }
    if (rng.bernoulli(probs.vflip)) {
        vflip_inplace(out.frames);
        if (out.has_masks())
            flip_masks(out.masks, out.frames.t, out.frames.h, out.frames.w, false);
    }
    if (rng.bernoulli(probs.jitter)) {
        for (int c = 0; c < out.frames.c; ++c) {
            float scale = static_cast<float>(rng.uniform(0.9, 1.1));
            float offset = static_cast<float>(rng.uniform(-0.05, 0.05));
            for (int t = 0; t < out.frames.t; ++t) {
                float* plane = out.frames.data.data() +
                               (static_cast<size_t>(t) * out.frames.c + c) *
                                   out.frames.h * out.frames.w;
                for (int i = 0; i < out.frames.h * out.frames.w; ++i)
                    plane[i] = std::clamp(plane[i] * scale + offset, 0.0f, 1.0f);
            }
        }
    }
    if (rng.bernoulli(probs.blur)) {
        gaussian_blur_inplace(out.frames, rng.uniform(0.3, 1.0));
    }
    if (rng.bernoulli(probs.endmask)) {
        const int t = out.frames.t;
        double frac = rng.uniform(probs.endmask_lo, probs.endmask_hi);
        int len = std::clamp(static_cast<int>(std::lround(frac * t)), 1, t - 1);
        out.valid_length = t - len;
        std::memset(out.frames.frame(out.valid_length), 0,
                    (static_cast<size_t>(len) * out.frames.frame_size()) * sizeof(float));
    }
    return out;
}

Collated collate(const std::vector<const Trajectory*>& batch) {
    if (batch.empty()) throw Error("collate: empty batch");
    Collated out;
    out.padded_length = 0;
    for (const auto* traj : batch)
        out.padded_length = std::max(out.padded_length, traj->frames.t);
    for (const auto* traj : batch) {
        const Video& f = traj->frames;
        Video padded(out.padded_length, f.c, f.h, f.w);
        std::memcpy(padded.data.data(), f.data.data(), f.data.size() * sizeof(float));
        out.frames.push_back(std::move(padded));
        std::vector<uint8_t> mask(out.padded_length, 0);
        for (int t = 0; t < traj->valid_length; ++t) mask[t] = 1;
        out.pad_mask.push_back(std::move(mask));
        out.labels.push_back(traj->label);
    }
    return out;
}

double bce_with_logits(double logit, double y) {
    return std::max(logit, 0.0) - logit * y + std::log1p(std::exp(-std::abs(logit)));
}

namespace {

struct ValMetrics {
    double loss = 0.0;
    double bacc = 0.5;
};

ValMetrics validate_epoch(const model::FateModel<float>& m,
                          const std::vector<Trajectory>& val_set, int threads) {
    std::vector<double> losses(val_set.size());
    std::vector<Label> preds(val_set.size());
    parallel_for(static_cast<int>(val_set.size()), threads, [&](int i) {
        auto pred = m.predict(val_set[i]);
        double y = val_set[i].label == Label::Apoptosis ? 1.0 : 0.0;
        losses[i] = bce_with_logits(pred.logit, y);
        preds[i] = pred.label;
    });
    ValMetrics out;
    double sum = 0.0;
    eval::ConfusionMatrix cm;
    for (size_t i = 0; i < val_set.size(); ++i) {
        sum += losses[i];
        cm.add(val_set[i].label, preds[i]);
    }
    out.loss = sum / static_cast<double>(val_set.size());
    out.bacc = (cm.tp + cm.fn > 0 && cm.fp + cm.tn > 0) ? eval::balanced_accuracy(cm) : 0.5;
    return out;
}

}  // namespace

TrainResult train_loop(const std::vector<Trajectory>& train_set,
                       const std::vector<Trajectory>& val_set,
                       const model::ModelConfig& mcfg, const TrainConfig& tcfg,
                       int threads, const EpochCallback& on_epoch) {
    tcfg.validate();
    if (train_set.empty() || val_set.empty())
        throw Error("train_loop: empty train or validation set");

    model::FateModel<float> m(mcfg);
    m.init(tcfg.master_seed);
    AdamW<float> opt(m.params(), tcfg.learning_rate, tcfg.weight_decay);

    std::vector<Label> labels(train_set.size());
    for (size_t i = 0; i < train_set.size(); ++i) labels[i] = train_set[i].label;
    const std::vector<double> weights = sampler_weights(labels);

    const int n = static_cast<int>(train_set.size());
    const int batch = tcfg.batch_size;

    TrainResult result;
    result.best_params = m.params();
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;

    // Per-slot scratch reused across steps to avoid reallocation churn.
    std::vector<nn::Grads<float>> slot_grads;
    for (int i = 0; i < batch; ++i) slot_grads.emplace_back(m.params());
    nn::Grads<float> accum(m.params());

    for (int epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        Rng sampler_rng(derive_seed(tcfg.master_seed, "sampler",
                                    {static_cast<uint64_t>(epoch)}));
        std::vector<int> draws = weighted_draws(weights, n, sampler_rng);

        double loss_sum = 0.0;
        int64_t loss_count = 0;
        const int steps = (n + batch - 1) / batch;
        for (int s = 0; s < steps; ++s) {
            const int b0 = s * batch;
            const int bs = std::min(batch, n - b0);
            std::vector<double> losses(bs, 0.0);
            parallel_for(bs, threads, [&](int k) {
                const int draw_index = b0 + k;
                Rng aug_rng(derive_seed(tcfg.master_seed, "aug",
                                        {static_cast<uint64_t>(epoch),
                                         static_cast<uint64_t>(draw_index)}));
                Trajectory sample = augment(train_set[draws[draw_index]], tcfg.augment,
                                            aug_rng);
                Rng drop_rng(derive_seed(tcfg.master_seed, "dropout",
                                         {static_cast<uint64_t>(epoch),
                                          static_cast<uint64_t>(draw_index)}));
                typename model::FateModel<float>::Cache cache;
                auto pred = m.forward(sample.frames, sample.valid_length, true, drop_rng,
                                      cache);
                const double y = sample.label == Label::Apoptosis ? 1.0 : 0.0;
                losses[k] = bce_with_logits(pred.logit, y);
                const float dlogit = static_cast<float>(
                    (1.0 / (1.0 + std::exp(-pred.logit)) - y) / static_cast<double>(bs));
                slot_grads[k].zero();
                m.backward(cache, dlogit, slot_grads[k]);
            });
            accum.zero();
            double batch_loss = 0.0;
            for (int k = 0; k < bs; ++k) {
                accum.add(slot_grads[k]);
                batch_loss += losses[k];
            }
            batch_loss /= bs;
            if (!std::isfinite(batch_loss))
                throw Error("training diverged: non-finite loss at epoch " +
                            std::to_string(epoch) + " step " + std::to_string(s));
            loss_sum += batch_loss;
            ++loss_count;
            opt.step(m.params(), accum);
        }

        ValMetrics vm = validate_epoch(m, val_set, threads);
        if (!std::isfinite(vm.loss))
            throw Error("training diverged: non-finite validation loss at epoch " +
                        std::to_string(epoch));

        TrainLogRow row;
        row.epoch = epoch;
        row.train_loss = loss_sum / static_cast<double>(loss_count);
        row.val_loss = vm.loss;
        row.val_bacc = vm.bacc;
        row.lr = tcfg.learning_rate;
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                          .count();
        result.log.push_back(row);
        if (on_epoch) on_epoch(row);

        if (vm.loss < best_val) {
            best_val = vm.loss;
            result.best_params = m.params();
            result.best_epoch = epoch;
            since_best = 0;
        } else {
            ++since_best;
            if (since_best > tcfg.patience) break;
        }
    }
    result.best_val_loss = best_val;
    return result;
}

}  // namespace tempattn::train
