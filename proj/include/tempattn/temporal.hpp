#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tempattn/common.hpp"
#include "tempattn/nn.hpp"

namespace tempattn::temporal {

struct TemporalConfig {
    int n_layers = 8;
    int n_heads = 4;
    int model_dim = 64;
    int ff_dim = 0;  // 0 means 4 * model_dim
    double dropout = 0.1;
    bool positional_encoding = true;
    double threshold = 0.5;  // probability >= threshold predicts apoptosis

    int ff() const { return ff_dim > 0 ? ff_dim : 4 * model_dim; }
    void validate() const {
        if (n_layers < 1 || n_heads < 1) throw Error("temporal: layers/heads must be >= 1");
        if (model_dim % n_heads != 0)
            throw Error("temporal: model_dim must be divisible by n_heads");
        if (model_dim % 2 != 0) throw Error("temporal: model_dim must be even");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("temporal: dropout in [0,1)");
        if (!(threshold > 0.0 && threshold < 1.0)) throw Error("temporal: threshold in (0,1)");
    }
};

/// Sinusoidal positional encoding, position 0 reserved for the CLS slot.
/// entry(pos, 2i) = sin(pos / 10000^(2i/d)), entry(pos, 2i+1) = cos(...).
/// Returned as (d, n) to match the column-per-token layout.
inline nn::Mat<double> positional_encoding(int n, int d) {
    if (d % 2 != 0) throw Error("positional_encoding: dimension must be even");
    if (n < 1) throw Error("positional_encoding: need at least one position");
    nn::Mat<double> pe(d, n);
    for (int pos = 0; pos < n; ++pos) {
        for (int i = 0; i < d / 2; ++i) {
            double freq = std::pow(10000.0, -2.0 * i / static_cast<double>(d));
            pe(2 * i, pos) = std::sin(pos * freq);
            pe(2 * i + 1, pos) = std::cos(pos * freq);
        }
    }
    return pe;
}

/// Final-attention-layer weights over frames: zero at pad positions,
/// summing to one over the rest.
struct AttentionProfile {
    std::vector<double> weights;
    int n_valid = 0;

    void validate() const {
        double sum = 0.0;
        int n = 0;
        for (double w : weights) {
            if (!(w >= 0.0)) throw Error("attention profile: negative or non-finite weight");
            sum += w;
            n += w > 0.0;
        }
        if (std::abs(sum - 1.0) > 1e-5)
            throw Error("attention profile: weights sum to " + std::to_string(sum));
        if (n > n_valid) throw Error("attention profile: mass on pad positions");
    }
};

struct Prediction {
    double logit = 0.0;
    double probability = 0.0;
    Label label = Label::Mitosis;
    AttentionProfile attention;
};

/// Transformer encoder over frame embeddings with a prepended CLS token,
/// pre-norm blocks, padding-masked attention, and a single-head attention
/// pooling layer (CLS queries the frames) wrapped in layer norms. The
/// transformed CLS and the pooled vector are added before the linear head.
template <class S>
class TemporalNet {
public:
    TemporalNet(const TemporalConfig& cfg, int input_dim, nn::ParamSet<S>& params,
                const std::string& prefix = "temporal")
        : cfg_(cfg), in_dim_(input_dim) {
        cfg_.validate();
        const int d = cfg_.model_dim, f = cfg_.ff();
        if (in_dim_ != d) {
            adapter_w_ = params.add(prefix + ".adapter.weight", d, in_dim_,
                                    nn::Init::XavierUniform);
            adapter_b_ = params.add(prefix + ".adapter.bias", d, 1, nn::Init::Zero,
                                    {static_cast<uint32_t>(d)});
        }
        cls_ = params.add(prefix + ".cls", d, 1, nn::Init::Normal002,
                          {static_cast<uint32_t>(d)});
        for (int l = 0; l < cfg_.n_layers; ++l) {
            std::string base = prefix + ".layer" + std::to_string(l);
            Layer lay;
            lay.ln1_g = params.add(base + ".ln1.gamma", d, 1, nn::Init::One);
            lay.ln1_b = params.add(base + ".ln1.beta", d, 1, nn::Init::Zero);
            lay.wq = params.add(base + ".attn.q.weight", d, d, nn::Init::XavierUniform);
            lay.bq = params.add(base + ".attn.q.bias", d, 1, nn::Init::Zero);
            lay.wk = params.add(base + ".attn.k.weight", d, d, nn::Init::XavierUniform);
            lay.bk = params.add(base + ".attn.k.bias", d, 1, nn::Init::Zero);
            lay.wv = params.add(base + ".attn.v.weight", d, d, nn::Init::XavierUniform);
            lay.bv = params.add(base + ".attn.v.bias", d, 1, nn::Init::Zero);
            lay.wo = params.add(base + ".attn.out.weight", d, d, nn::Init::XavierUniform);
            lay.bo = params.add(base + ".attn.out.bias", d, 1, nn::Init::Zero);
            lay.ln2_g = params.add(base + ".ln2.gamma", d, 1, nn::Init::One);
            lay.ln2_b = params.add(base + ".ln2.beta", d, 1, nn::Init::Zero);
            lay.w1 = params.add(base + ".ff.in.weight", f, d, nn::Init::XavierUniform);
            lay.b1 = params.add(base + ".ff.in.bias", f, 1, nn::Init::Zero);
            lay.w2 = params.add(base + ".ff.out.weight", d, f, nn::Init::XavierUniform);
            lay.b2 = params.add(base + ".ff.out.bias", d, 1, nn::Init::Zero);
            layers_.push_back(lay);
        }
        lnf_g_ = params.add(prefix + ".ln_final.gamma", d, 1, nn::Init::One);
        lnf_b_ = params.add(prefix + ".ln_final.beta", d, 1, nn::Init::Zero);
        pq_ = params.add(prefix + ".pool.q.weight", d, d, nn::Init::XavierUniform);
        pq_b_ = params.add(prefix + ".pool.q.bias", d, 1, nn::Init::Zero);
        pk_ = params.add(prefix + ".pool.k.weight", d, d, nn::Init::XavierUniform);
        pk_b_ = params.add(prefix + ".pool.k.bias", d, 1, nn::Init::Zero);
        pv_ = params.add(prefix + ".pool.v.weight", d, d, nn::Init::XavierUniform);
        pv_b_ = params.add(prefix + ".pool.v.bias", d, 1, nn::Init::Zero);
        lnp_g_ = params.add(prefix + ".ln_pool.gamma", d, 1, nn::Init::One);
        lnp_b_ = params.add(prefix + ".ln_pool.beta", d, 1, nn::Init::Zero);
        head_w_ = params.add("head.weight", 1, d, nn::Init::XavierUniform);
        head_b_ = params.add("head.bias", 1, 1, nn::Init::Zero);
    }

    struct LayerCache {
        nn::LayerNormCache<S> ln1, ln2;
        nn::Mat<S> x_in;              // block input (for residual bookkeeping)
        nn::Mat<S> a_in, f_in;        // post-LN inputs
        nn::Mat<S> q, k, v;           // projections
        std::vector<nn::Mat<S>> attn; // per-head attention (N, N)
        nn::Mat<S> ctx;               // concatenated head outputs
        nn::Mat<S> ff_pre, ff_act;    // W1 pre-activation and GELU output
        nn::DropoutCache<S> drop_attn, drop_out, drop_ff;
    };

    struct Cache {
        int t = 0;
        std::vector<uint8_t> key_valid;  // size T+1, slot 0 = CLS
        nn::Mat<S> emb_in;               // (in_dim, T) as given
        nn::Mat<S> x0;                   // tokens after CLS/adapter/PE
        nn::DropoutCache<S> drop_tokens;
        std::vector<LayerCache> layers;
        nn::LayerNormCache<S> lnf;
        nn::Mat<S> x_final, y;           // pre/post final LN
        nn::Vec<S> pool_q, pooled;
        nn::Mat<S> pool_k, pool_v;
        nn::Vec<S> pool_a;               // (T) attention weights, zeros at pads
        nn::LayerNormCache<S> lnp;
        nn::Vec<S> u, z;
        S logit = S(0);
    };

    /// `emb` is (input_dim, T); `valid[t]` marks real frames. Throws when no
    /// frame is valid. Returns the logit; full details live in the cache.
    S forward(const nn::ParamSet<S>& p, const nn::Mat<S>& emb,
              const std::vector<uint8_t>& valid, bool training, Rng& rng,
              Cache& cache) const {
        const int t = static_cast<int>(emb.cols());
        if (emb.rows() != in_dim_) throw Error("temporal: embedding dimension mismatch");
        if (static_cast<int>(valid.size()) != t)
            throw Error("temporal: pad mask length mismatch");
        int n_valid = 0;
        for (uint8_t v : valid) n_valid += v != 0;
        if (n_valid == 0) throw Error("temporal: all positions are padding");

        const int d = cfg_.model_dim;
        const int n = t + 1;
        cache.t = t;
        cache.emb_in = emb;
        cache.key_valid.assign(n, 0);
        cache.key_valid[0] = 1;
        for (int i = 0; i < t; ++i) cache.key_valid[i + 1] = valid[i];

        nn::Mat<S> x(d, n);
        x.col(0) = p[cls_].col(0);
        if (adapter_w_ >= 0) {
            x.rightCols(t) = p[adapter_w_] * emb;
            x.rightCols(t).colwise() += p[adapter_b_].col(0);
        } else {
            x.rightCols(t) = emb;
        }
        if (cfg_.positional_encoding) x += positional_encoding(n, d).template cast<S>();
        nn::dropout_forward(x, static_cast<S>(cfg_.dropout), training, rng,
                            cache.drop_tokens);
        cache.x0 = x;

        cache.layers.assign(layers_.size(), LayerCache{});
        const int dh = d / cfg_.n_heads;
        const S scale = S(1) / std::sqrt(static_cast<S>(dh));
        for (size_t l = 0; l < layers_.size(); ++l) {
            const Layer& ly = layers_[l];
            LayerCache& lc = cache.layers[l];
            lc.x_in = x;
            lc.a_in = nn::layernorm_forward(x, p[ly.ln1_g], p[ly.ln1_b], lc.ln1);
            lc.q = p[ly.wq] * lc.a_in;
            lc.q.colwise() += p[ly.bq].col(0);
            lc.k = p[ly.wk] * lc.a_in;
            lc.k.colwise() += p[ly.bk].col(0);
            lc.v = p[ly.wv] * lc.a_in;
            lc.v.colwise() += p[ly.bv].col(0);

            lc.ctx.resize(d, n);
            lc.attn.assign(cfg_.n_heads, nn::Mat<S>());
            for (int h = 0; h < cfg_.n_heads; ++h) {
                auto qh = lc.q.middleRows(h * dh, dh);
                auto kh = lc.k.middleRows(h * dh, dh);
                auto vh = lc.v.middleRows(h * dh, dh);
                nn::Mat<S> scores = (qh.transpose() * kh) * scale;  // (N, N)
                nn::softmax_rows_masked(scores, cache.key_valid);
                lc.attn[h] = std::move(scores);
                lc.ctx.middleRows(h * dh, dh) = vh * lc.attn[h].transpose();
            }
            if (training && cfg_.dropout > 0.0) {
                // One shared mask applied to the concatenated context keeps
                // the cache small; equivalent to per-head dropout.
                nn::dropout_forward(lc.ctx, static_cast<S>(cfg_.dropout), training, rng,
                                    lc.drop_attn);
            }
            nn::Mat<S> att = p[ly.wo] * lc.ctx;
            att.colwise() += p[ly.bo].col(0);
            nn::dropout_forward(att, static_cast<S>(cfg_.dropout), training, rng,
                                lc.drop_out);
            x += att;

            lc.f_in = nn::layernorm_forward(x, p[ly.ln2_g], p[ly.ln2_b], lc.ln2);
            lc.ff_pre = p[ly.w1] * lc.f_in;
            lc.ff_pre.colwise() += p[ly.b1].col(0);
            lc.ff_act = lc.ff_pre.unaryExpr([](S v) { return nn::gelu_scalar(v); });
            nn::Mat<S> ff = p[ly.w2] * lc.ff_act;
            ff.colwise() += p[ly.b2].col(0);
            nn::dropout_forward(ff, static_cast<S>(cfg_.dropout), training, rng,
                                lc.drop_ff);
            x += ff;
        }

        cache.x_final = x;
        cache.y = nn::layernorm_forward(x, p[lnf_g_], p[lnf_b_], cache.lnf);

        // Attention pooling: CLS output queries the frame outputs.
        cache.pool_q = p[pq_] * cache.y.col(0) + p[pq_b_].col(0);
        cache.pool_k = p[pk_] * cache.y.rightCols(t);
        cache.pool_k.colwise() += p[pk_b_].col(0);
        cache.pool_v = p[pv_] * cache.y.rightCols(t);
        cache.pool_v.colwise() += p[pv_b_].col(0);

        const S pool_scale = S(1) / std::sqrt(static_cast<S>(d));
        nn::Vec<S>& a = cache.pool_a;
        a.resize(t);
        S mx = std::numeric_limits<S>::lowest();
        for (int i = 0; i < t; ++i) {
            if (!valid[i]) continue;
            a[i] = cache.pool_q.dot(cache.pool_k.col(i)) * pool_scale;
            if (a[i] > mx) mx = a[i];
        }
        S sum = S(0);
        for (int i = 0; i < t; ++i) {
            if (valid[i]) {
                a[i] = std::exp(a[i] - mx);
                sum += a[i];
            } else {
                a[i] = S(0);
            }
        }
        for (int i = 0; i < t; ++i) a[i] /= sum;

        cache.pooled = cache.pool_v * a;
        nn::Mat<S> pooled_m = cache.pooled;
        nn::Mat<S> u = nn::layernorm_forward(pooled_m, p[lnp_g_], p[lnp_b_], cache.lnp);
        cache.u = u.col(0);
        cache.z = cache.y.col(0) + cache.u;
        cache.logit = p[head_w_].row(0).dot(cache.z) + p[head_b_](0, 0);
        return cache.logit;
    }

    /// Reverse pass; returns the gradient w.r.t. the input embeddings
    /// (in_dim, T). Pad columns receive zero gradient.
    nn::Mat<S> backward(const nn::ParamSet<S>& p, const Cache& cache, S dlogit,
                        nn::Grads<S>& g) const {
        const int t = cache.t;
        const int d = cfg_.model_dim;
        const int n = t + 1;

        g[head_w_].row(0) += dlogit * cache.z.transpose();
        g[head_b_](0, 0) += dlogit;
        nn::Vec<S> dz = dlogit * p[head_w_].row(0).transpose();

        // z = y.col(0) + u
        nn::Mat<S> dy = nn::Mat<S>::Zero(d, n);
        dy.col(0) += dz;
        nn::Mat<S> du = dz;
        nn::Mat<S> dpooled_m =
            nn::layernorm_backward(du, cache.lnp, p[lnp_g_], g[lnp_g_], g[lnp_b_]);
        nn::Vec<S> dpooled = dpooled_m.col(0);

        // pooled = V a
        nn::Vec<S> da = cache.pool_v.transpose() * dpooled;
        nn::Mat<S> dV = dpooled * cache.pool_a.transpose();

        // softmax over valid frames
        const S pool_scale = S(1) / std::sqrt(static_cast<S>(d));
        S dot = da.dot(cache.pool_a);
        nn::Vec<S> ds(t);
        for (int i = 0; i < t; ++i) ds[i] = cache.pool_a[i] * (da[i] - dot);

        nn::Vec<S> dq = pool_scale * (cache.pool_k * ds);
        nn::Mat<S> dK = pool_scale * (cache.pool_q * ds.transpose());

        g[pq_] += dq * cache.y.col(0).transpose();
        g[pq_b_].col(0) += dq;
        dy.col(0) += p[pq_].transpose() * dq;
        g[pk_] += dK * cache.y.rightCols(t).transpose();
        g[pk_b_].col(0) += dK.rowwise().sum();
        dy.rightCols(t) += p[pk_].transpose() * dK;
        g[pv_] += dV * cache.y.rightCols(t).transpose();
        g[pv_b_].col(0) += dV.rowwise().sum();
        dy.rightCols(t) += p[pv_].transpose() * dV;

        nn::Mat<S> dx = nn::layernorm_backward(dy, cache.lnf, p[lnf_g_], g[lnf_g_], g[lnf_b_]);

        const int dh = d / cfg_.n_heads;
        const S scale = S(1) / std::sqrt(static_cast<S>(dh));
        for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
            const Layer& ly = layers_[l];
            const LayerCache& lc = cache.layers[l];

            // x2 = x1 + dropout(W2 gelu(W1 f_in + b1) + b2)
            nn::Mat<S> dff = dx;
            nn::dropout_backward(dff, lc.drop_ff);
            g[ly.w2] += dff * lc.ff_act.transpose();
            g[ly.b2].col(0) += dff.rowwise().sum();
            nn::Mat<S> dact = p[ly.w2].transpose() * dff;
            nn::Mat<S> dpre = dact.binaryExpr(
                lc.ff_pre, [](S dv, S x) { return dv * nn::gelu_grad_scalar(x); });
            g[ly.w1] += dpre * lc.f_in.transpose();
            g[ly.b1].col(0) += dpre.rowwise().sum();
            nn::Mat<S> df_in = p[ly.w1].transpose() * dpre;
            dx += nn::layernorm_backward(df_in, lc.ln2, p[ly.ln2_g], g[ly.ln2_g],
                                         g[ly.ln2_b]);

            // x1 = x0 + dropout(Wo ctx + bo)
            nn::Mat<S> datt = dx;
            nn::dropout_backward(datt, lc.drop_out);
            g[ly.wo] += datt * lc.ctx.transpose();
            g[ly.bo].col(0) += datt.rowwise().sum();
            nn::Mat<S> dctx = p[ly.wo].transpose() * datt;
            nn::dropout_backward(dctx, lc.drop_attn);

            nn::Mat<S> dq_all(d, n), dk_all(d, n), dv_all(d, n);
            for (int h = 0; h < cfg_.n_heads; ++h) {
                auto vh = lc.v.middleRows(h * dh, dh);
                auto qh = lc.q.middleRows(h * dh, dh);
                auto kh = lc.k.middleRows(h * dh, dh);
                auto dctx_h = dctx.middleRows(h * dh, dh);
                const nn::Mat<S>& attn = lc.attn[h];

                dv_all.middleRows(h * dh, dh) = dctx_h * attn;
                nn::Mat<S> dattn = dctx_h.transpose() * vh;  // (N, N)
                nn::Mat<S> dscore = nn::softmax_rows_backward(dattn, attn);
                dq_all.middleRows(h * dh, dh) = scale * (kh * dscore.transpose());
                dk_all.middleRows(h * dh, dh) = scale * (qh * dscore);
            }
            g[ly.wq] += dq_all * lc.a_in.transpose();
            g[ly.bq].col(0) += dq_all.rowwise().sum();
            g[ly.wk] += dk_all * lc.a_in.transpose();
            g[ly.bk].col(0) += dk_all.rowwise().sum();
            g[ly.wv] += dv_all * lc.a_in.transpose();
            g[ly.bv].col(0) += dv_all.rowwise().sum();
            nn::Mat<S> da_in = p[ly.wq].transpose() * dq_all +
                               p[ly.wk].transpose() * dk_all +
                               p[ly.wv].transpose() * dv_all;
            dx += nn::layernorm_backward(da_in, lc.ln1, p[ly.ln1_g], g[ly.ln1_g],
                                         g[ly.ln1_b]);
        }

        nn::dropout_backward(dx, cache.drop_tokens);
        g[cls_].col(0) += dx.col(0);
        nn::Mat<S> demb;
        if (adapter_w_ >= 0) {
            g[adapter_w_] += dx.rightCols(t) * cache.emb_in.transpose();
            g[adapter_b_].col(0) += dx.rightCols(t).rowwise().sum();
            demb = p[adapter_w_].transpose() * dx.rightCols(t);
        } else {
            demb = dx.rightCols(t);
        }
        for (int i = 0; i < t; ++i)
            if (!cache.key_valid[i + 1]) demb.col(i).setZero();
        return demb;
    }

    /// Pooling-layer weights over frame positions (CLS excluded by design).
    AttentionProfile profile(const Cache& cache) const {
        AttentionProfile prof;
        prof.weights.resize(cache.t);
        prof.n_valid = 0;
        for (int i = 0; i < cache.t; ++i) {
            prof.weights[i] = static_cast<double>(cache.pool_a[i]);
            prof.n_valid += cache.key_valid[i + 1] != 0;
        }
        prof.validate();
        return prof;
    }

    const TemporalConfig& config() const { return cfg_; }
    int input_dim() const { return in_dim_; }

private:
    struct Layer {
        int ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
        int ln2_g, ln2_b, w1, b1, w2, b2;
    };

    TemporalConfig cfg_;
    int in_dim_;
    int adapter_w_ = -1, adapter_b_ = -1;
    int cls_ = -1;
    std::vector<Layer> layers_;
    int lnf_g_ = -1, lnf_b_ = -1;
    int pq_ = -1, pq_b_ = -1, pk_ = -1, pk_b_ = -1, pv_ = -1, pv_b_ = -1;
    int lnp_g_ = -1, lnp_b_ = -1;
    int head_w_ = -1, head_b_ = -1;
};

}  // namespace tempattn::temporal
