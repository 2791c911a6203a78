#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "tempattn/common.hpp"
#include "tempattn/rng.hpp"

namespace tempattn::nn {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

enum class Init { Zero, One, XavierUniform, HeNormal, Normal002 };

/// Ordered, named parameter tensors. Registration order fixes both the
/// initialization stream and the checkpoint layout. Values are stored as
/// (rows, cols) matrices; `dims` keeps the logical tensor shape.
template <class S>
struct ParamSet {
    struct Entry {
        std::string name;
        std::vector<uint32_t> dims;
        Init init = Init::Zero;
        Mat<S> value;
    };
    std::vector<Entry> entries;

    int add(std::string name, int rows, int cols, Init init,
            std::vector<uint32_t> dims = {}) {
        Entry e;
        e.name = std::move(name);
        e.dims = dims.empty()
                     ? std::vector<uint32_t>{static_cast<uint32_t>(rows),
                                             static_cast<uint32_t>(cols)}
                     : std::move(dims);
        e.init = init;
        e.value = Mat<S>::Zero(rows, cols);
        entries.push_back(std::move(e));
        return static_cast<int>(entries.size()) - 1;
    }

    Mat<S>& operator[](int i) { return entries[i].value; }
    const Mat<S>& operator[](int i) const { return entries[i].value; }

    void initialize(uint64_t seed) {
        Rng rng(seed);
        for (auto& e : entries) {
            const auto rows = e.value.rows(), cols = e.value.cols();
            switch (e.init) {
                case Init::Zero:
                    e.value.setZero();
                    break;
                case Init::One:
                    e.value.setOnes();
                    break;
                case Init::XavierUniform: {
                    double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
                    for (Eigen::Index j = 0; j < cols; ++j)
                        for (Eigen::Index i = 0; i < rows; ++i)
                            e.value(i, j) = static_cast<S>(rng.uniform(-a, a));
                    break;
                }
                case Init::HeNormal: {
                    double std_ = std::sqrt(2.0 / static_cast<double>(cols));
                    for (Eigen::Index j = 0; j < cols; ++j)
                        for (Eigen::Index i = 0; i < rows; ++i)
                            e.value(i, j) = static_cast<S>(rng.normal(0.0, std_));
                    break;
                }
                case Init::Normal002:
                    for (Eigen::Index j = 0; j < cols; ++j)
                        for (Eigen::Index i = 0; i < rows; ++i)
                            e.value(i, j) = static_cast<S>(rng.normal(0.0, 0.02));
                    break;
            }
        }
    }

    size_t scalar_count() const {
        size_t n = 0;
        for (const auto& e : entries) n += static_cast<size_t>(e.value.size());
        return n;
    }
};

/// Per-worker gradient buffers mirroring a ParamSet.
template <class S>
struct Grads {
    std::vector<Mat<S>> g;

    explicit Grads(const ParamSet<S>& p) {
        g.reserve(p.entries.size());
        for (const auto& e : p.entries) g.push_back(Mat<S>::Zero(e.value.rows(), e.value.cols()));
    }
    Mat<S>& operator[](int i) { return g[i]; }
    void zero() {
        for (auto& m : g) m.setZero();
    }
    void add(const Grads& other, S scale = S(1)) {
        for (size_t i = 0; i < g.size(); ++i) g[i] += scale * other.g[i];
    }
};

// ---------------------------------------------------------------------------
// Primitive ops. Token matrices are (D, N), one column per token.
// ---------------------------------------------------------------------------

template <class S>
struct LayerNormCache {
    Mat<S> xhat;        // (D, N)
    Vec<S> inv_std;     // (N)
};

/// Column-wise layer normalization: y = xhat * gamma + beta per feature.
template <class S>
Mat<S> layernorm_forward(const Mat<S>& x, const Mat<S>& gamma, const Mat<S>& beta,
                         LayerNormCache<S>& cache) {
    const S eps = static_cast<S>(1e-5);
    const Eigen::Index d = x.rows(), n = x.cols();
    cache.xhat.resize(d, n);
    cache.inv_std.resize(n);
    Mat<S> y(d, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        S mu = x.col(j).mean();
        S var = (x.col(j).array() - mu).square().mean();
        S inv = S(1) / std::sqrt(var + eps);
        cache.inv_std[j] = inv;
        cache.xhat.col(j) = (x.col(j).array() - mu) * inv;
        y.col(j) = cache.xhat.col(j).cwiseProduct(gamma.col(0)) + beta.col(0);
    }
    return y;
}

template <class S>
Mat<S> layernorm_backward(const Mat<S>& dy, const LayerNormCache<S>& cache,
                          const Mat<S>& gamma, Mat<S>& dgamma, Mat<S>& dbeta) {
    const Eigen::Index d = dy.rows(), n = dy.cols();
    Mat<S> dx(d, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        Vec<S> dyhat = dy.col(j).cwiseProduct(gamma.col(0));
        S mean_dyhat = dyhat.mean();
        S mean_dyhat_xhat = dyhat.cwiseProduct(cache.xhat.col(j)).mean();
        dx.col(j) = cache.inv_std[j] *
                    (dyhat.array() - mean_dyhat -
                     cache.xhat.col(j).array() * mean_dyhat_xhat)
                        .matrix();
        dgamma.col(0) += dy.col(j).cwiseProduct(cache.xhat.col(j));
        dbeta.col(0) += dy.col(j);
    }
    return dx;
}

template <class S>
inline S gelu_scalar(S x) {
    return static_cast<S>(0.5) * x *
           (S(1) + static_cast<S>(std::erf(static_cast<double>(x) * 0.7071067811865476)));
}

template <class S>
inline S gelu_grad_scalar(S x) {
    double xd = static_cast<double>(x);
    double phi = std::exp(-0.5 * xd * xd) * 0.3989422804014327;  // N(0,1) pdf
    double Phi = 0.5 * (1.0 + std::erf(xd * 0.7071067811865476));
    return static_cast<S>(Phi + xd * phi);
}

/// Row-stochastic masked softmax: softmax over valid key columns per row.
/// Invalid columns come out exactly zero.
template <class S>
void softmax_rows_masked(Mat<S>& scores, const std::vector<uint8_t>& key_valid) {
    const Eigen::Index rows = scores.rows(), cols = scores.cols();
    for (Eigen::Index i = 0; i < rows; ++i) {
        S mx = std::numeric_limits<S>::lowest();
        for (Eigen::Index j = 0; j < cols; ++j)
            if (key_valid[j] && scores(i, j) > mx) mx = scores(i, j);
        S sum = S(0);
        for (Eigen::Index j = 0; j < cols; ++j) {
            if (key_valid[j]) {
                scores(i, j) = std::exp(scores(i, j) - mx);
                sum += scores(i, j);
            } else {
                scores(i, j) = S(0);
            }
        }
        for (Eigen::Index j = 0; j < cols; ++j) scores(i, j) /= sum;
    }
}

/// dS for y = softmax(s) given dy, row-wise; zero rows stay zero.
template <class S>
Mat<S> softmax_rows_backward(const Mat<S>& dy, const Mat<S>& y) {
    Mat<S> ds(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        S dot = dy.row(i).cwiseProduct(y.row(i)).sum();
        ds.row(i) = y.row(i).cwiseProduct((dy.row(i).array() - dot).matrix());
    }
    return ds;
}

template <class S>
struct DropoutCache {
    Mat<S> mask;  // empty when dropout inactive
};

template <class S>
void dropout_forward(Mat<S>& x, S rate, bool training, Rng& rng, DropoutCache<S>& cache) {
    if (!training || rate <= S(0)) {
        cache.mask.resize(0, 0);
        return;
    }
    S keep = S(1) - rate;
    cache.mask.resize(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            cache.mask(i, j) = rng.uniform() < static_cast<double>(rate) ? S(0) : S(1) / keep;
    x = x.cwiseProduct(cache.mask);
}

template <class S>
void dropout_backward(Mat<S>& dx, const DropoutCache<S>& cache) {
    if (cache.mask.size() == 0) return;
    dx = dx.cwiseProduct(cache.mask);
}

// ---------------------------------------------------------------------------
// Convolution via im2col. Activations for a frame stack are (C, T*H*W) with
// column index t*(H*W) + y*W + x; "same"-style zero padding of k/2.
// ---------------------------------------------------------------------------

inline int conv_out_dim(int in, int kernel, int stride) {
    int pad = kernel / 2;
    return (in + 2 * pad - kernel) / stride + 1;
}

template <class S>
Mat<S> im2col(const Mat<S>& x, int frames, int c_in, int h, int w, int kernel,
              int stride) {
    const int pad = kernel / 2;
    const int ho = conv_out_dim(h, kernel, stride), wo = conv_out_dim(w, kernel, stride);
    Mat<S> cols(c_in * kernel * kernel, static_cast<Eigen::Index>(frames) * ho * wo);
    cols.setZero();
    for (int t = 0; t < frames; ++t) {
        const Eigen::Index in_base = static_cast<Eigen::Index>(t) * h * w;
        const Eigen::Index out_base = static_cast<Eigen::Index>(t) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox) {
                Eigen::Index col = out_base + static_cast<Eigen::Index>(oy) * wo + ox;
                int iy0 = oy * stride - pad, ix0 = ox * stride - pad;
                for (int ci = 0; ci < c_in; ++ci) {
                    for (int ky = 0; ky < kernel; ++ky) {
                        int iy = iy0 + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < kernel; ++kx) {
                            int ix = ix0 + kx;
                            if (ix < 0 || ix >= w) continue;
                            cols((ci * kernel + ky) * kernel + kx, col) =
                                x(ci, in_base + static_cast<Eigen::Index>(iy) * w + ix);
                        }
                    }
                }
            }
        }
    }
    return cols;
}

template <class S>
Mat<S> col2im(const Mat<S>& dcols, int frames, int c_in, int h, int w, int kernel,
              int stride) {
    const int pad = kernel / 2;
    const int ho = conv_out_dim(h, kernel, stride), wo = conv_out_dim(w, kernel, stride);
    Mat<S> dx = Mat<S>::Zero(c_in, static_cast<Eigen::Index>(frames) * h * w);
    for (int t = 0; t < frames; ++t) {
        const Eigen::Index in_base = static_cast<Eigen::Index>(t) * h * w;
        const Eigen::Index out_base = static_cast<Eigen::Index>(t) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox) {
                Eigen::Index col = out_base + static_cast<Eigen::Index>(oy) * wo + ox;
                int iy0 = oy * stride - pad, ix0 = ox * stride - pad;
                for (int ci = 0; ci < c_in; ++ci) {
                    for (int ky = 0; ky < kernel; ++ky) {
                        int iy = iy0 + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < kernel; ++kx) {
                            int ix = ix0 + kx;
                            if (ix < 0 || ix >= w) continue;
                            dx(ci, in_base + static_cast<Eigen::Index>(iy) * w + ix) +=
                                dcols((ci * kernel + ky) * kernel + kx, col);
                        }
                    }
                }
            }
        }
    }
    return dx;
}

}  // namespace tempattn::nn
