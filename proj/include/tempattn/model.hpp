#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tempattn/common.hpp"
#include "tempattn/encoder.hpp"
#include "tempattn/temporal.hpp"

namespace tempattn::model {

struct ModelConfig {
    encoder::EncoderConfig encoder;
    temporal::TemporalConfig temporal;

    void validate() const {
        encoder.validate();
        temporal.validate();
    }
};

/// End-to-end classifier: per-frame conv encoder feeding the temporal
/// transformer. Owns the parameter set; forward works on one sequence at a
/// time (batching is a loop, padding adds nothing to the logit).
template <class S>
class FateModel {
public:
    explicit FateModel(const ModelConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        enc_ = std::make_unique<encoder::ConvEncoder<S>>(cfg_.encoder, params_);
        tem_ = std::make_unique<temporal::TemporalNet<S>>(
            cfg_.temporal, cfg_.encoder.embed_dim, params_);
    }

    void init(uint64_t master_seed) { params_.initialize(derive_seed(master_seed, "init")); }

    struct Cache {
        typename encoder::ConvEncoder<S>::Cache enc;
        typename temporal::TemporalNet<S>::Cache tem;
        std::vector<int> frame_index;    // encoded frame -> sequence position
        std::vector<uint8_t> valid;
        nn::Mat<S> frames;               // encoder input (valid frames only)
        int t_total = 0;
    };

    /// `valid_length` marks the leading real frames; anything beyond is
    /// treated as padding (end-masking semantics).
    temporal::Prediction forward(const Video& video, int valid_length, bool training,
                                 Rng& rng, Cache& cache) const {
        if (video.c != cfg_.encoder.in_channels || video.h != cfg_.encoder.in_h ||
            video.w != cfg_.encoder.in_w)
            throw Error("model: video shape does not match encoder config");
        if (valid_length < 1 || valid_length > video.t)
            throw Error("model: valid_length out of range");

        cache.t_total = video.t;
        cache.valid.assign(video.t, 0);
        for (int t = 0; t < valid_length; ++t) cache.valid[t] = 1;
        return forward_masked(video, cache.valid, training, rng, cache);
    }

    /// General mask variant used by the padding-invariance checks.
    temporal::Prediction forward_masked(const Video& video,
                                        const std::vector<uint8_t>& valid, bool training,
                                        Rng& rng, Cache& cache) const {
        cache.t_total = video.t;
        cache.valid = valid;
        cache.frame_index.clear();
        for (int t = 0; t < video.t; ++t)
            if (valid[t]) cache.frame_index.push_back(t);
        if (cache.frame_index.empty()) throw Error("model: all frames are padding");

        const int hw = cfg_.encoder.in_h * cfg_.encoder.in_w;
        const int c = cfg_.encoder.in_channels;
        const int l = static_cast<int>(cache.frame_index.size());
        cache.frames.resize(c, static_cast<Eigen::Index>(l) * hw);
        for (int k = 0; k < l; ++k) {
            const float* src = video.frame(cache.frame_index[k]);
            for (int ci = 0; ci < c; ++ci)
                for (int i = 0; i < hw; ++i)
                    cache.frames(ci, static_cast<Eigen::Index>(k) * hw + i) =
                        static_cast<S>(src[static_cast<size_t>(ci) * hw + i]);
        }

        nn::Mat<S> emb_valid = enc_->forward(params_, cache.frames, l, cache.enc);
        nn::Mat<S> emb = nn::Mat<S>::Zero(cfg_.encoder.embed_dim, video.t);
        for (int k = 0; k < l; ++k) emb.col(cache.frame_index[k]) = emb_valid.col(k);

        S logit = tem_->forward(params_, emb, valid, training, rng, cache.tem);

        temporal::Prediction pred;
        pred.logit = static_cast<double>(logit);
        pred.probability = 1.0 / (1.0 + std::exp(-pred.logit));
        pred.label = pred.probability >= cfg_.temporal.threshold ? Label::Apoptosis
                                                                 : Label::Mitosis;
        pred.attention = tem_->profile(cache.tem);
        return pred;
    }

    void backward(const Cache& cache, S dlogit, nn::Grads<S>& g) const {
        nn::Mat<S> demb = tem_->backward(params_, cache.tem, dlogit, g);
        const int l = static_cast<int>(cache.frame_index.size());
        nn::Mat<S> demb_valid(cfg_.encoder.embed_dim, l);
        for (int k = 0; k < l; ++k) demb_valid.col(k) = demb.col(cache.frame_index[k]);
        enc_->backward(params_, cache.enc, demb_valid, g);
    }

    temporal::Prediction predict(const Trajectory& traj) const {
        Rng rng(0);
        Cache cache;
        return forward(traj.frames, traj.valid_length, false, rng, cache);
    }

    temporal::AttentionProfile extract_attention(const Trajectory& traj) const {
        return predict(traj).attention;
    }

    nn::ParamSet<S>& params() { return params_; }
    const nn::ParamSet<S>& params() const { return params_; }
    const ModelConfig& config() const { return cfg_; }
    const encoder::ConvEncoder<S>& frame_encoder() const { return *enc_; }
    const temporal::TemporalNet<S>& temporal_net() const { return *tem_; }

private:
    ModelConfig cfg_;
    nn::ParamSet<S> params_;
    std::unique_ptr<encoder::ConvEncoder<S>> enc_;
    std::unique_ptr<temporal::TemporalNet<S>> tem_;
};

}  // namespace tempattn::model
