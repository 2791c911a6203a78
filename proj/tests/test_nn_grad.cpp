#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "tempattn/encoder.hpp"
#include "tempattn/temporal.hpp"
#include "tempattn/train.hpp"

using namespace tempattn;

// Gradient checking: the double instantiation is compared against central
// finite differences of the double loss (tolerance 1e-5); the float
// instantiation is compared against the same double finite differences at
// identical parameter values (tolerance 1e-3, dominated by float rounding).

namespace {

template <class S>
std::vector<double> flatten_grads(const nn::Grads<S>& g) {
    std::vector<double> out;
    for (const auto& m : g.g)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                out.push_back(static_cast<double>(m(i, j)));
    return out;
}

double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double diff = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

/// Central finite differences over every parameter scalar of a double model.
std::vector<double> finite_diff(nn::ParamSet<double>& params,
                                const std::function<double()>& loss) {
    std::vector<double> fd;
    for (auto& e : params.entries) {
        for (Eigen::Index i = 0; i < e.value.rows(); ++i) {
            for (Eigen::Index j = 0; j < e.value.cols(); ++j) {
                const double v = e.value(i, j);
                const double h = 1e-5 * std::max(1.0, std::abs(v));
                e.value(i, j) = v + h;
                double lp = loss();
                e.value(i, j) = v - h;
                double lm = loss();
                e.value(i, j) = v;
                fd.push_back((lp - lm) / (2.0 * h));
            }
        }
    }
    return fd;
}

template <class S>
void copy_params(const nn::ParamSet<double>& src, nn::ParamSet<S>& dst) {
    REQUIRE(src.entries.size() == dst.entries.size());
    for (size_t i = 0; i < src.entries.size(); ++i)
        dst.entries[i].value = src.entries[i].value.template cast<S>();
}

}  // namespace

TEST_CASE("gradient check: 2-block encoder, D=8") {
    encoder::EncoderConfig cfg;
    cfg.blocks = {{4, 3, 2}, {8, 3, 2}};
    cfg.in_channels = 2;
    cfg.in_h = 8;
    cfg.in_w = 8;
    cfg.embed_dim = 8;

    const int frames = 3;
    nn::ParamSet<double> pd;
    encoder::ConvEncoder<double> enc_d(cfg, pd);
    pd.initialize(21);

    Rng rng(5);
    nn::Mat<double> input(cfg.in_channels, frames * cfg.in_h * cfg.in_w);
    for (Eigen::Index j = 0; j < input.cols(); ++j)
        for (Eigen::Index i = 0; i < input.rows(); ++i) input(i, j) = rng.uniform();
    nn::Mat<double> readout(cfg.embed_dim, frames);
    for (Eigen::Index j = 0; j < readout.cols(); ++j)
        for (Eigen::Index i = 0; i < readout.rows(); ++i) readout(i, j) = rng.normal();

    // Scalar loss mixing every embedding entry.
    auto loss_d = [&]() {
        typename encoder::ConvEncoder<double>::Cache cache;
        nn::Mat<double> emb = enc_d.forward(pd, input, frames, cache);
        return emb.cwiseProduct(readout).sum();
    };

    typename encoder::ConvEncoder<double>::Cache cache_d;
    enc_d.forward(pd, input, frames, cache_d);
    nn::Grads<double> gd(pd);
    enc_d.backward(pd, cache_d, readout, gd);

    std::vector<double> fd = finite_diff(pd, loss_d);
    double err_double = rel_error(flatten_grads(gd), fd);
    CHECK(err_double < 1e-5);

    // Single precision against the double finite differences.
    nn::ParamSet<float> pf;
    encoder::ConvEncoder<float> enc_f(cfg, pf);
    copy_params(pd, pf);
    typename encoder::ConvEncoder<float>::Cache cache_f;
    enc_f.forward(pf, input.cast<float>().eval(), frames, cache_f);
    nn::Grads<float> gf(pf);
    enc_f.backward(pf, cache_f, readout.cast<float>().eval(), gf);
    double err_single = rel_error(flatten_grads(gf), fd);
    CHECK(err_single < 1e-3);

    MESSAGE("encoder grad rel err: double=", err_double, " single=", err_single);
}

namespace {

template <class S>
double temporal_loss(const temporal::TemporalNet<S>& net, const nn::ParamSet<S>& p,
                     const nn::Mat<S>& emb, const std::vector<uint8_t>& valid) {
    Rng rng(0);
    typename temporal::TemporalNet<S>::Cache cache;
    S logit = net.forward(p, emb, valid, false, rng, cache);
    return train::bce_with_logits(static_cast<double>(logit), 1.0);
}

void check_temporal_grads(int in_dim, const std::vector<uint8_t>& valid) {
    temporal::TemporalConfig cfg;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.model_dim = 8;
    cfg.ff_dim = 16;
    cfg.dropout = 0.0;

    const int t = static_cast<int>(valid.size());
    nn::ParamSet<double> pd;
    temporal::TemporalNet<double> net_d(cfg, in_dim, pd);
    pd.initialize(33);

    Rng rng(9);
    nn::Mat<double> emb(in_dim, t);
    for (Eigen::Index j = 0; j < emb.cols(); ++j)
        for (Eigen::Index i = 0; i < emb.rows(); ++i)
            emb(i, j) = valid[j] ? rng.normal() : 0.0;

    auto loss_d = [&]() { return temporal_loss(net_d, pd, emb, valid); };

    typename temporal::TemporalNet<double>::Cache cache;
    Rng fwd_rng(0);
    double logit = net_d.forward(pd, emb, valid, false, fwd_rng, cache);
    double dlogit = 1.0 / (1.0 + std::exp(-logit)) - 1.0;  // d BCE / d logit, y = 1
    nn::Grads<double> gd(pd);
    nn::Mat<double> demb = net_d.backward(pd, cache, dlogit, gd);

    std::vector<double> fd = finite_diff(pd, loss_d);
    double err_double = rel_error(flatten_grads(gd), fd);
    CHECK(err_double < 1e-5);

    // Input-embedding gradient against finite differences (valid frames only).
    std::vector<double> demb_fd, demb_an;
    for (int j = 0; j < t; ++j) {
        if (!valid[j]) continue;
        for (int i = 0; i < in_dim; ++i) {
            const double v = emb(i, j);
            const double h = 1e-5 * std::max(1.0, std::abs(v));
            emb(i, j) = v + h;
            double lp = loss_d();
            emb(i, j) = v - h;
            double lm = loss_d();
            emb(i, j) = v;
            demb_fd.push_back((lp - lm) / (2.0 * h));
            demb_an.push_back(demb(i, j));
        }
    }
    CHECK(rel_error(demb_an, demb_fd) < 1e-5);

    // Float instantiation against the same double finite differences.
    nn::ParamSet<float> pf;
    temporal::TemporalNet<float> net_f(cfg, in_dim, pf);
    copy_params(pd, pf);
    typename temporal::TemporalNet<float>::Cache cache_f;
    Rng fwd_rng_f(0);
    float logit_f =
        net_f.forward(pf, emb.cast<float>().eval(), valid, false, fwd_rng_f, cache_f);
    float dlogit_f = static_cast<float>(1.0 / (1.0 + std::exp(-logit_f)) - 1.0);
    nn::Grads<float> gf(pf);
    net_f.backward(pf, cache_f, dlogit_f, gf);
    double err_single = rel_error(flatten_grads(gf), fd);
    CHECK(err_single < 1e-3);

    MESSAGE("temporal grad rel err: double=", err_double, " single=", err_single);
}

}  // namespace

TEST_CASE("gradient check: attention pooling + one transformer layer, D=8, 2 heads, T=3") {
    check_temporal_grads(8, {1, 1, 1});
}

TEST_CASE("gradient check: temporal net with a padded position") {
    check_temporal_grads(8, {1, 1, 1, 0});
}

TEST_CASE("gradient check: linear adapter path (input dim != model dim)") {
    check_temporal_grads(6, {1, 1, 1});
}

TEST_CASE("gelu gradient matches finite differences") {
    for (double x : {-2.0, -0.5, 0.0, 0.3, 1.7}) {
        double h = 1e-6;
        double fd = (nn::gelu_scalar(x + h) - nn::gelu_scalar(x - h)) / (2 * h);
        CHECK(nn::gelu_grad_scalar(x) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("layernorm forward/backward on a tiny case") {
    nn::Mat<double> x(3, 2);
    x << 1.0, -2.0, 2.0, 0.5, 3.0, 4.0;
    nn::Mat<double> gamma = nn::Mat<double>::Ones(3, 1);
    nn::Mat<double> beta = nn::Mat<double>::Zero(3, 1);
    nn::LayerNormCache<double> cache;
    nn::Mat<double> y = nn::layernorm_forward(x, gamma, beta, cache);
    // per-column mean ~0, variance ~1
    for (int j = 0; j < 2; ++j) {
        CHECK(y.col(j).mean() == doctest::Approx(0.0).epsilon(1e-9));
        CHECK((y.col(j).array() - y.col(j).mean()).square().mean() ==
              doctest::Approx(1.0).epsilon(1e-3));
    }

    // FD on one input entry
    nn::Mat<double> dy(3, 2);
    dy << 0.3, -0.1, 0.7, 0.2, -0.5, 0.4;
    nn::Mat<double> dgamma = nn::Mat<double>::Zero(3, 1), dbeta = nn::Mat<double>::Zero(3, 1);
    nn::Mat<double> dx = nn::layernorm_backward(dy, cache, gamma, dgamma, dbeta);
    const double h = 1e-7;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 2; ++j) {
            nn::Mat<double> xp = x, xm = x;
            xp(i, j) += h;
            xm(i, j) -= h;
            nn::LayerNormCache<double> c1, c2;
            double lp = nn::layernorm_forward(xp, gamma, beta, c1).cwiseProduct(dy).sum();
            double lm = nn::layernorm_forward(xm, gamma, beta, c2).cwiseProduct(dy).sum();
            CHECK(dx(i, j) == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-4));
        }
    }
}
