#pragma once

#include <string>
#include <vector>

#include "tempattn/common.hpp"
#include "tempattn/nn.hpp"

namespace tempattn::encoder {

struct ConvBlockSpec {
    int out_channels = 0;
    int kernel = 3;
    int stride = 2;
};

/// Small convolutional frame encoder: conv blocks with ReLU, spatial mean
/// pool, linear projection to the embedding dimension. Frames are encoded
/// independently, so rows of the embedding sequence never mix time steps.
struct EncoderConfig {
    std::vector<ConvBlockSpec> blocks = {{16, 3, 2}, {32, 3, 2}, {64, 3, 2}};
    int in_channels = 3;
    int in_h = 32;
    int in_w = 32;
    int embed_dim = 64;

    void validate() const {
        if (embed_dim < 8) throw Error("encoder: embed_dim must be >= 8");
        if (blocks.empty()) throw Error("encoder: need at least one conv block");
        int h = in_h, w = in_w;
        for (const auto& b : blocks) {
            if (b.out_channels < 1 || b.kernel < 1 || b.stride < 1)
                throw Error("encoder: bad conv block");
            h = nn::conv_out_dim(h, b.kernel, b.stride);
            w = nn::conv_out_dim(w, b.kernel, b.stride);
            if (h < 1 || w < 1) throw Error("encoder: spatial size collapsed to zero");
        }
    }
};

/// Per-frame embeddings with the padding mask (true = real frame). Pad rows
/// are zero by construction.
template <class S>
struct EmbeddingSequence {
    nn::Mat<S> values;             // (embed_dim, T)
    std::vector<uint8_t> valid;    // size T
};

template <class S>
class ConvEncoder {
public:
    ConvEncoder(const EncoderConfig& cfg, nn::ParamSet<S>& params,
                const std::string& prefix = "encoder")
        : cfg_(cfg) {
        cfg_.validate();
        int c = cfg_.in_channels, h = cfg_.in_h, w = cfg_.in_w;
        for (size_t l = 0; l < cfg_.blocks.size(); ++l) {
            const auto& b = cfg_.blocks[l];
            std::string base = prefix + ".conv" + std::to_string(l);
            w_idx_.push_back(params.add(
                base + ".weight", b.out_channels, c * b.kernel * b.kernel, nn::Init::HeNormal,
                {static_cast<uint32_t>(b.out_channels), static_cast<uint32_t>(c),
                 static_cast<uint32_t>(b.kernel), static_cast<uint32_t>(b.kernel)}));
            b_idx_.push_back(params.add(base + ".bias", b.out_channels, 1, nn::Init::Zero,
                                        {static_cast<uint32_t>(b.out_channels)}));
            in_c_.push_back(c);
            in_h_.push_back(h);
            in_w_.push_back(w);
            c = b.out_channels;
            h = nn::conv_out_dim(h, b.kernel, b.stride);
            w = nn::conv_out_dim(w, b.kernel, b.stride);
            out_h_.push_back(h);
            out_w_.push_back(w);
        }
        last_c_ = c;
        proj_w_ = params.add(prefix + ".proj.weight", cfg_.embed_dim, c,
                             nn::Init::XavierUniform);
        proj_b_ = params.add(prefix + ".proj.bias", cfg_.embed_dim, 1, nn::Init::Zero,
                             {static_cast<uint32_t>(cfg_.embed_dim)});
    }

    struct Cache {
        int frames = 0;
        std::vector<nn::Mat<S>> cols;  // im2col per layer
        std::vector<nn::Mat<S>> acts;  // post-ReLU per layer
        nn::Mat<S> pooled;             // (C_last, T)
    };

    /// `frames_chw` is (C, T*H*W), one frame per contiguous column block.
    /// Returns embeddings (embed_dim, T).
    nn::Mat<S> forward(const nn::ParamSet<S>& p, const nn::Mat<S>& frames_chw, int t,
                       Cache& cache) const {
        if (frames_chw.rows() != cfg_.in_channels ||
            frames_chw.cols() != static_cast<Eigen::Index>(t) * cfg_.in_h * cfg_.in_w)
            throw Error("encoder: input shape mismatch");
        cache.frames = t;
        cache.cols.clear();
        cache.acts.clear();
        const nn::Mat<S>* x = &frames_chw;
        for (size_t l = 0; l < cfg_.blocks.size(); ++l) {
            const auto& b = cfg_.blocks[l];
            cache.cols.push_back(
                nn::im2col(*x, t, in_c_[l], in_h_[l], in_w_[l], b.kernel, b.stride));
            nn::Mat<S> y = p[w_idx_[l]] * cache.cols.back();
            y.colwise() += p[b_idx_[l]].col(0);
            y = y.cwiseMax(S(0));
            cache.acts.push_back(std::move(y));
            x = &cache.acts.back();
        }
        const int p_last = out_h_.back() * out_w_.back();
        cache.pooled.resize(last_c_, t);
        for (int ti = 0; ti < t; ++ti)
            cache.pooled.col(ti) =
                cache.acts.back().middleCols(static_cast<Eigen::Index>(ti) * p_last, p_last)
                    .rowwise()
                    .mean();
        nn::Mat<S> emb = p[proj_w_] * cache.pooled;
        emb.colwise() += p[proj_b_].col(0);
        return emb;
    }

    void backward(const nn::ParamSet<S>& p, const Cache& cache, const nn::Mat<S>& d_emb,
                  nn::Grads<S>& g) const {
        g[proj_w_] += d_emb * cache.pooled.transpose();
        g[proj_b_].col(0) += d_emb.rowwise().sum();
        nn::Mat<S> d_pool = p[proj_w_].transpose() * d_emb;  // (C_last, T)

        const int p_last = out_h_.back() * out_w_.back();
        nn::Mat<S> dy(last_c_, static_cast<Eigen::Index>(cache.frames) * p_last);
        for (int ti = 0; ti < cache.frames; ++ti)
            dy.middleCols(static_cast<Eigen::Index>(ti) * p_last, p_last).colwise() =
                (d_pool.col(ti) / static_cast<S>(p_last)).eval();

        for (int l = static_cast<int>(cfg_.blocks.size()) - 1; l >= 0; --l) {
            const auto& b = cfg_.blocks[l];
            nn::Mat<S> d_pre =
                dy.cwiseProduct((cache.acts[l].array() > S(0)).template cast<S>().matrix());
            g[w_idx_[l]] += d_pre * cache.cols[l].transpose();
            g[b_idx_[l]].col(0) += d_pre.rowwise().sum();
            if (l > 0) {
                nn::Mat<S> d_cols = p[w_idx_[l]].transpose() * d_pre;
                dy = nn::col2im(d_cols, cache.frames, in_c_[l], in_h_[l], in_w_[l],
                                b.kernel, b.stride);
            }
        }
    }

    /// Spec-level operation: embed the valid frames of a video; pad columns
    /// stay zero. Throws if the video shape disagrees with the config.
    EmbeddingSequence<S> embed_frames(const nn::ParamSet<S>& p, const Video& video,
                                      const std::vector<uint8_t>& valid) const {
        if (video.c != cfg_.in_channels || video.h != cfg_.in_h || video.w != cfg_.in_w)
            throw Error("embed_frames: video shape does not match encoder config");
        if (static_cast<int>(valid.size()) != video.t)
            throw Error("embed_frames: pad mask length mismatch");
        std::vector<int> idx;
        for (int t = 0; t < video.t; ++t)
            if (valid[t]) idx.push_back(t);

        EmbeddingSequence<S> out;
        out.valid = valid;
        out.values = nn::Mat<S>::Zero(cfg_.embed_dim, video.t);
        if (idx.empty()) return out;

        nn::Mat<S> frames(cfg_.in_channels, static_cast<Eigen::Index>(idx.size()) *
                                                cfg_.in_h * cfg_.in_w);
        const int hw = cfg_.in_h * cfg_.in_w;
        for (size_t k = 0; k < idx.size(); ++k) {
            const float* src = video.frame(idx[k]);
            for (int c = 0; c < cfg_.in_channels; ++c)
                for (int i = 0; i < hw; ++i)
                    frames(c, static_cast<Eigen::Index>(k) * hw + i) =
                        static_cast<S>(src[static_cast<size_t>(c) * hw + i]);
        }
        Cache cache;
        nn::Mat<S> emb = forward(p, frames, static_cast<int>(idx.size()), cache);
        for (size_t k = 0; k < idx.size(); ++k) out.values.col(idx[k]) = emb.col(k);
        return out;
    }

    const EncoderConfig& config() const { return cfg_; }
    int last_channels() const { return last_c_; }

private:
    EncoderConfig cfg_;
    std::vector<int> w_idx_, b_idx_;
    std::vector<int> in_c_, in_h_, in_w_, out_h_, out_w_;
    int last_c_ = 0;
    int proj_w_ = -1, proj_b_ = -1;
};

}  // namespace tempattn::encoder
