#pragma once

// Neural-net layers on top of the tensor tape: conv2d (im2col + GEMM),
// batch norm with running statistics, max pooling with argmax routing,
// linear, a single-layer LSTM built from taped primitives, softmax and
// cross-entropy. Convolution parallelizes over batch images only, so
// accumulation order (and therefore every bit of the result) is
// independent of the worker count.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaitfi/parallel.hpp"
#include "gaitfi/tensor.hpp"

namespace gaitfi {

template <class T>
void ensure_finite(const TensorT<T>& t, const std::string& what) {
    if (!t.all_finite()) throw std::runtime_error("non-finite values in " + what);
}

inline int64_t conv_out_dim(int64_t in, int64_t k, int64_t s, int64_t p) {
    return (in + 2 * p - k) / s + 1;
}

namespace detail {

// Scatters x[n] into col [C*kh*kw, Ho*Wo]; out-of-bounds taps read as zero.
template <class T>
void im2col(const T* x, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw, int64_t sh, int64_t sw, int64_t ph,
            int64_t pw, int64_t Ho, int64_t Wo, T* col) {
    const int64_t HW = Ho * Wo;
    for (int64_t c = 0; c < C; ++c) {
        for (int64_t ki = 0; ki < kh; ++ki) {
            for (int64_t kj = 0; kj < kw; ++kj) {
                T* row = col + ((c * kh + ki) * kw + kj) * HW;
                for (int64_t oh = 0; oh < Ho; ++oh) {
                    const int64_t ih = oh * sh + ki - ph;
                    if (ih < 0 || ih >= H) {
                        std::fill_n(row + oh * Wo, Wo, T(0));
                        continue;
                    }
                    const T* src = x + (c * H + ih) * W;
                    for (int64_t ow = 0; ow < Wo; ++ow) {
                        const int64_t iw = ow * sw + kj - pw;
                        row[oh * Wo + ow] = (iw >= 0 && iw < W) ? src[iw] : T(0);
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: accumulates dcol back into dx[n].
template <class T>
void col2im_acc(const T* dcol, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw, int64_t sh, int64_t sw,
                int64_t ph, int64_t pw, int64_t Ho, int64_t Wo, T* dx) {
    const int64_t HW = Ho * Wo;
    for (int64_t c = 0; c < C; ++c) {
        for (int64_t ki = 0; ki < kh; ++ki) {
            for (int64_t kj = 0; kj < kw; ++kj) {
                const T* row = dcol + ((c * kh + ki) * kw + kj) * HW;
                for (int64_t oh = 0; oh < Ho; ++oh) {
                    const int64_t ih = oh * sh + ki - ph;
                    if (ih < 0 || ih >= H) continue;
                    T* dst = dx + (c * H + ih) * W;
                    for (int64_t ow = 0; ow < Wo; ++ow) {
                        const int64_t iw = ow * sw + kj - pw;
                        if (iw >= 0 && iw < W) dst[iw] += row[oh * Wo + ow];
                    }
                }
            }
        }
    }
}

}  // namespace detail

template <class T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& weight, const TensorT<T>& bias,
                  std::array<int64_t, 2> stride, std::array<int64_t, 2> padding) {
    if (input.rank() != 4) throw std::invalid_argument("conv2d: input must be [N,C,H,W], got " + shape_str(input.shape()));
    if (weight.rank() != 4) throw std::invalid_argument("conv2d: weight must be [O,C,kh,kw], got " + shape_str(weight.shape()));
    const int64_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int64_t O = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
    const int64_t sh = stride[0], sw = stride[1], ph = padding[0], pw = padding[1];
    if (weight.dim(1) != C)
        throw std::invalid_argument("conv2d: weight expects " + std::to_string(weight.dim(1)) + " input channels, input has " +
                                    std::to_string(C));
    if (bias.rank() != 1 || bias.dim(0) != O)
        throw std::invalid_argument("conv2d: bias shape " + shape_str(bias.shape()) + " does not match " + std::to_string(O) +
                                    " output channels");
    if (sh < 1 || sw < 1 || ph < 0 || pw < 0) throw std::invalid_argument("conv2d: stride must be >=1 and padding >=0");
    if (kh > H + 2 * ph || kw > W + 2 * pw)
        throw std::invalid_argument("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                                    " exceeds padded input " + std::to_string(H + 2 * ph) + "x" + std::to_string(W + 2 * pw));
    const int64_t Ho = conv_out_dim(H, kh, sh, ph), Wo = conv_out_dim(W, kw, sw, pw);
    const int64_t CKK = C * kh * kw, HW = Ho * Wo;

    TensorT<T> out = TensorT<T>::zeros({N, O, Ho, Wo});
    const T* xp = input.data();
    const T* wp = weight.data();
    const T* bp = bias.data();
    T* op = out.data();
    parallel_for(N, [&](int64_t n) {
        std::vector<T> col(CKK * HW);
        detail::im2col(xp + n * C * H * W, C, H, W, kh, kw, sh, sw, ph, pw, Ho, Wo, col.data());
        T* on = op + n * O * HW;
        for (int64_t o = 0; o < O; ++o) std::fill_n(on + o * HW, HW, bp[o]);
        detail::gemm_acc(wp, col.data(), on, O, CKK, HW);
    });

    if (detail::any_tracked(input, weight, bias)) {
        const bool ndx = detail::tracked(input), ndw = detail::tracked(weight), ndb = detail::tracked(bias);
        Tape<T>::active()->record(out.impl(), [xo = input.impl(), wo = weight.impl(), bo = bias.impl(), oo = out.impl(), N,
                                               C, H, W, O, kh, kw, sh, sw, ph, pw, Ho, Wo, CKK, HW, ndx, ndw, ndb] {
            const T* g = oo->grad.data();
            // Bias grad: plain sums over batch and space.
            if (ndb) {
                std::vector<T>& gb = bo->ensure_grad();
                for (int64_t n = 0; n < N; ++n)
                    for (int64_t o = 0; o < O; ++o) {
                        const T* gn = g + (n * O + o) * HW;
                        T acc = T(0);
                        for (int64_t p = 0; p < HW; ++p) acc += gn[p];
                        gb[o] += acc;
                    }
            }
            // Weight grad: recompute the column matrix per image; the batch
            // loop stays sequential so accumulation order is fixed.
            if (ndw) {
                std::vector<T>& gw = wo->ensure_grad();
                std::vector<T> col(CKK * HW);
                for (int64_t n = 0; n < N; ++n) {
                    detail::im2col(xo->data.data() + n * C * H * W, C, H, W, kh, kw, sh, sw, ph, pw, Ho, Wo, col.data());
                    detail::gemm_bt_acc(g + n * O * HW, col.data(), gw.data(), O, HW, CKK);
                }
            }
            // Input grad: each image owns a disjoint slice of gx.
            if (ndx) {
                std::vector<T>& gx = xo->ensure_grad();
                const T* wp2 = wo->data.data();
                T* gxp = gx.data();
                parallel_for(N, [&](int64_t n) {
                    std::vector<T> dcol(CKK * HW, T(0));
                    detail::gemm_at_acc(wp2, g + n * O * HW, dcol.data(), CKK, O, HW);
                    detail::col2im_acc(dcol.data(), C, H, W, kh, kw, sh, sw, ph, pw, Ho, Wo, gxp + n * C * H * W);
                });
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

template <class T>
struct BatchNorm2d {
    TensorT<T> gamma, beta;               // learnable scale/shift
    TensorT<T> running_mean, running_var;  // eval-mode statistics
    T eps = T(1e-5);
    T momentum = T(0.1);

    static BatchNorm2d make(int64_t channels) {
        BatchNorm2d bn;
        bn.gamma = TensorT<T>::ones({channels});
        bn.beta = TensorT<T>::zeros({channels});
        bn.running_mean = TensorT<T>::zeros({channels});
        bn.running_var = TensorT<T>::ones({channels});
        return bn;
    }
};

// Train mode normalizes with biased batch statistics and folds the unbiased
// variance into the running estimate; eval mode reads the running stats.
template <class T>
TensorT<T> batchnorm2d(const TensorT<T>& input, BatchNorm2d<T>& bn, bool training) {
    if (input.rank() != 4) throw std::invalid_argument("batchnorm2d: input must be [N,C,H,W], got " + shape_str(input.shape()));
    const int64_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    if (bn.gamma.numel() != C)
        throw std::invalid_argument("batchnorm2d: layer has " + std::to_string(bn.gamma.numel()) + " channels, input has " +
                                    std::to_string(C));
    const int64_t m = N * H * W;
    if (training && m < 2) throw std::invalid_argument("batchnorm2d: train mode needs N*H*W >= 2, got " + std::to_string(m));

    TensorT<T> out = TensorT<T>::zeros(input.shape());
    std::vector<T> mean_c(C), inv_std_c(C);
    const T* xp = input.data();
    T* op = out.data();
    const T* gmp = bn.gamma.data();
    const T* btp = bn.beta.data();
    const int64_t HWs = H * W;

    if (training) {
        parallel_for(C, [&](int64_t c) {
            double mu = 0.0;
            for (int64_t n = 0; n < N; ++n) {
                const T* x = xp + (n * C + c) * HWs;
                for (int64_t p = 0; p < HWs; ++p) mu += static_cast<double>(x[p]);
            }
            mu /= static_cast<double>(m);
            double var = 0.0;
            for (int64_t n = 0; n < N; ++n) {
                const T* x = xp + (n * C + c) * HWs;
                for (int64_t p = 0; p < HWs; ++p) {
                    const double d = static_cast<double>(x[p]) - mu;
                    var += d * d;
                }
            }
            var /= static_cast<double>(m);
            mean_c[c] = static_cast<T>(mu);
            const T inv_std = T(1) / std::sqrt(static_cast<T>(var) + bn.eps);
            inv_std_c[c] = inv_std;
            for (int64_t n = 0; n < N; ++n) {
                const T* x = xp + (n * C + c) * HWs;
                T* y = op + (n * C + c) * HWs;
                for (int64_t p = 0; p < HWs; ++p) y[p] = gmp[c] * (x[p] - mean_c[c]) * inv_std + btp[c];
            }
            const T var_unbiased = static_cast<T>(var) * static_cast<T>(m) / static_cast<T>(m - 1);
            bn.running_mean.data()[c] = (T(1) - bn.momentum) * bn.running_mean.data()[c] + bn.momentum * mean_c[c];
            bn.running_var.data()[c] = (T(1) - bn.momentum) * bn.running_var.data()[c] + bn.momentum * var_unbiased;
        });
    } else {
        parallel_for(C, [&](int64_t c) {
            mean_c[c] = bn.running_mean.data()[c];
            const T inv_std = T(1) / std::sqrt(bn.running_var.data()[c] + bn.eps);
            inv_std_c[c] = inv_std;
            for (int64_t n = 0; n < N; ++n) {
                const T* x = xp + (n * C + c) * HWs;
                T* y = op + (n * C + c) * HWs;
                for (int64_t p = 0; p < HWs; ++p) y[p] = gmp[c] * (x[p] - mean_c[c]) * inv_std + btp[c];
            }
        });
    }

    if (detail::any_tracked(input, bn.gamma, bn.beta)) {
        const bool ndx = detail::tracked(input);
        const bool ndg = detail::tracked(bn.gamma), ndb = detail::tracked(bn.beta);
        Tape<T>::active()->record(
            out.impl(), [xo = input.impl(), gmo = bn.gamma.impl(), bto = bn.beta.impl(), oo = out.impl(),
                         mean_c = std::move(mean_c), inv_std_c = std::move(inv_std_c), training, N, C, HWs, m, ndx, ndg,
                         ndb] {
                const T* g = oo->grad.data();
                const T* x = xo->data.data();
                const T* gm = gmo->data.data();
                T* ggamma = ndg ? gmo->ensure_grad().data() : nullptr;
                T* gbeta = ndb ? bto->ensure_grad().data() : nullptr;
                T* gx = ndx ? xo->ensure_grad().data() : nullptr;
                parallel_for(C, [&](int64_t c) {
                    const T mu = mean_c[c], is = inv_std_c[c];
                    double sum_dy = 0.0, sum_dy_xhat = 0.0;
                    for (int64_t n = 0; n < N; ++n) {
                        const T* gn = g + (n * C + c) * HWs;
                        const T* xn = x + (n * C + c) * HWs;
                        for (int64_t p = 0; p < HWs; ++p) {
                            const T xhat = (xn[p] - mu) * is;
                            sum_dy += static_cast<double>(gn[p]);
                            sum_dy_xhat += static_cast<double>(gn[p]) * static_cast<double>(xhat);
                        }
                    }
                    if (ndg) ggamma[c] += static_cast<T>(sum_dy_xhat);
                    if (ndb) gbeta[c] += static_cast<T>(sum_dy);
                    if (!ndx) return;
                    if (training) {
                        // dx = gamma*inv_std*(dy - mean(dy) - xhat*mean(dy*xhat))
                        const T k1 = static_cast<T>(sum_dy / static_cast<double>(m));
                        const T k2 = static_cast<T>(sum_dy_xhat / static_cast<double>(m));
                        for (int64_t n = 0; n < N; ++n) {
                            const T* gn = g + (n * C + c) * HWs;
                            const T* xn = x + (n * C + c) * HWs;
                            T* gxn = gx + (n * C + c) * HWs;
                            for (int64_t p = 0; p < HWs; ++p) {
                                const T xhat = (xn[p] - mu) * is;
                                gxn[p] += gm[c] * is * (gn[p] - k1 - xhat * k2);
                            }
                        }
                    } else {
                        for (int64_t n = 0; n < N; ++n) {
                            const T* gn = g + (n * C + c) * HWs;
                            T* gxn = gx + (n * C + c) * HWs;
                            for (int64_t p = 0; p < HWs; ++p) gxn[p] += gm[c] * is * gn[p];
                        }
                    }
                });
            });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Max pooling
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> maxpool2d(const TensorT<T>& input, std::array<int64_t, 2> kernel, std::array<int64_t, 2> stride) {
    if (input.rank() != 4) throw std::invalid_argument("maxpool2d: input must be [N,C,H,W], got " + shape_str(input.shape()));
    const int64_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int64_t kh = kernel[0], kw = kernel[1], sh = stride[0], sw = stride[1];
    if (kh > H || kw > W)
        throw std::invalid_argument("maxpool2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                                    " larger than input " + std::to_string(H) + "x" + std::to_string(W));
    if (sh < 1 || sw < 1) throw std::invalid_argument("maxpool2d: stride must be >= 1");
    const int64_t Ho = (H - kh) / sh + 1, Wo = (W - kw) / sw + 1;

    TensorT<T> out = TensorT<T>::zeros({N, C, Ho, Wo});
    auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(N * C * Ho * Wo));
    const T* xp = input.data();
    T* op = out.data();
    parallel_for(N * C, [&](int64_t nc) {
        const T* x = xp + nc * H * W;
        T* y = op + nc * Ho * Wo;
        int64_t* am = argmax->data() + nc * Ho * Wo;
        for (int64_t oh = 0; oh < Ho; ++oh)
            for (int64_t ow = 0; ow < Wo; ++ow) {
                T best = x[(oh * sh) * W + ow * sw];
                int64_t best_idx = (oh * sh) * W + ow * sw;
                for (int64_t ki = 0; ki < kh; ++ki)
                    for (int64_t kj = 0; kj < kw; ++kj) {
                        const int64_t idx = (oh * sh + ki) * W + ow * sw + kj;
                        if (x[idx] > best) {  // strict: ties keep the first scan hit
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                y[oh * Wo + ow] = best;
                am[oh * Wo + ow] = best_idx;
            }
    });

    if (detail::any_tracked(input)) {
        Tape<T>::active()->record(out.impl(), [xo = input.impl(), oo = out.impl(), argmax, N, C, H, W, Ho, Wo] {
            const T* g = oo->grad.data();
            std::vector<T>& gx = xo->ensure_grad();
            for (int64_t nc = 0; nc < N * C; ++nc) {
                const int64_t* am = argmax->data() + nc * Ho * Wo;
                const T* gn = g + nc * Ho * Wo;
                T* gxn = gx.data() + nc * H * W;
                for (int64_t p = 0; p < Ho * Wo; ++p) gxn[am[p]] += gn[p];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Linear / LSTM
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> linear(const TensorT<T>& input, const TensorT<T>& weight, const TensorT<T>& bias) {
    if (input.rank() != 2 || weight.rank() != 2 || input.dim(1) != weight.dim(0))
        throw std::invalid_argument("linear: input " + shape_str(input.shape()) + " incompatible with weight " +
                                    shape_str(weight.shape()));
    if (bias.rank() != 1 || bias.dim(0) != weight.dim(1))
        throw std::invalid_argument("linear: bias " + shape_str(bias.shape()) + " does not match output dim " +
                                    std::to_string(weight.dim(1)));
    return add_rowvec(matmul(input, weight), bias);
}

// Gate blocks are packed [input, forget, cell, output] along the 4H axis.
template <class T>
struct LstmParams {
    TensorT<T> wx;  // [F, 4H]
    TensorT<T> wh;  // [H, 4H]
    TensorT<T> b;   // [4H]
    int64_t hidden = 0;

    static LstmParams make(std::mt19937_64& rng, int64_t in_features, int64_t hidden) {
        LstmParams p;
        p.hidden = hidden;
        const T bx = T(1) / std::sqrt(static_cast<T>(in_features));
        const T bh = T(1) / std::sqrt(static_cast<T>(hidden));
        p.wx = TensorT<T>::uniform(rng, {in_features, 4 * hidden}, -bx, bx);
        p.wh = TensorT<T>::uniform(rng, {hidden, 4 * hidden}, -bh, bh);
        p.b = TensorT<T>::zeros({4 * hidden});
        for (int64_t j = hidden; j < 2 * hidden; ++j) p.b.data()[j] = T(1);  // open forget gate at init
        return p;
    }
};

enum class LstmFeature { LastHidden, TemporalMean };

// Returns the sequence feature: final hidden state by default, or the mean
// of all hidden states when configured. Backprop through time falls out of
// the tape.
template <class T>
TensorT<T> lstm_forward(const std::vector<TensorT<T>>& inputs, const LstmParams<T>& params,
                        LstmFeature feature = LstmFeature::LastHidden) {
    if (inputs.empty()) throw std::invalid_argument("lstm_forward: empty input sequence");
    const int64_t N = inputs[0].dim(0);
    const int64_t F = inputs[0].dim(1);
    if (params.wx.dim(0) != F)
        throw std::invalid_argument("lstm_forward: step features " + std::to_string(F) + " do not match wx " +
                                    shape_str(params.wx.shape()));
    const int64_t Hn = params.hidden;
    for (const auto& x : inputs)
        if (x.rank() != 2 || x.dim(0) != N || x.dim(1) != F)
            throw std::invalid_argument("lstm_forward: all steps must share shape [" + std::to_string(N) + ", " +
                                        std::to_string(F) + "]");

    TensorT<T> h = TensorT<T>::zeros({N, Hn});
    TensorT<T> c = TensorT<T>::zeros({N, Hn});
    TensorT<T> h_sum;
    for (const auto& x : inputs) {
        TensorT<T> gates = add_rowvec(add(matmul(x, params.wx), matmul(h, params.wh)), params.b);
        TensorT<T> gi = sigmoid(slice_cols(gates, 0, Hn));
        TensorT<T> gf = sigmoid(slice_cols(gates, Hn, 2 * Hn));
        TensorT<T> gg = tanh_op(slice_cols(gates, 2 * Hn, 3 * Hn));
        TensorT<T> go = sigmoid(slice_cols(gates, 3 * Hn, 4 * Hn));
        c = add(mul(gf, c), mul(gi, gg));
        h = mul(go, tanh_op(c));
        if (feature == LstmFeature::TemporalMean) h_sum = h_sum.defined() ? add(h_sum, h) : h;
    }
    if (feature == LstmFeature::TemporalMean) return scale(h_sum, T(1) / static_cast<T>(inputs.size()));
    return h;
}

// ---------------------------------------------------------------------------
// Softmax / cross-entropy
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> softmax(const TensorT<T>& logits) {
    if (logits.rank() != 2) throw std::invalid_argument("softmax: expected [N,K], got " + shape_str(logits.shape()));
    const int64_t N = logits.dim(0), K = logits.dim(1);
    TensorT<T> out = TensorT<T>::zeros(logits.shape());
    for (int64_t n = 0; n < N; ++n) {
        const T* z = logits.data() + n * K;
        T* s = out.data() + n * K;
        T zmax = z[0];
        for (int64_t k = 1; k < K; ++k) zmax = std::max(zmax, z[k]);
        double denom = 0.0;
        for (int64_t k = 0; k < K; ++k) {
            s[k] = std::exp(z[k] - zmax);
            denom += static_cast<double>(s[k]);
        }
        for (int64_t k = 0; k < K; ++k) s[k] = static_cast<T>(static_cast<double>(s[k]) / denom);
    }
    if (detail::any_tracked(logits)) {
        Tape<T>::active()->record(out.impl(), [zo = logits.impl(), oo = out.impl(), N, K] {
            const std::vector<T>& g = oo->grad;
            const std::vector<T>& s = oo->data;
            std::vector<T>& gz = zo->ensure_grad();
            for (int64_t n = 0; n < N; ++n) {
                double dot = 0.0;
                for (int64_t k = 0; k < K; ++k) dot += static_cast<double>(g[n * K + k]) * static_cast<double>(s[n * K + k]);
                for (int64_t k = 0; k < K; ++k)
                    gz[n * K + k] += s[n * K + k] * (g[n * K + k] - static_cast<T>(dot));
            }
        });
    }
    return out;
}

template <class T>
TensorT<T> one_hot(const std::vector<int64_t>& labels, int64_t num_classes) {
    TensorT<T> y = TensorT<T>::zeros({static_cast<int64_t>(labels.size()), num_classes});
    for (size_t n = 0; n < labels.size(); ++n) {
        if (labels[n] < 0 || labels[n] >= num_classes)
            throw std::invalid_argument("one_hot: label " + std::to_string(labels[n]) + " outside [0, " +
                                        std::to_string(num_classes) + ")");
        y.data()[static_cast<int64_t>(n) * num_classes + labels[n]] = T(1);
    }
    return y;
}

// Mean over rows of -sum_k y*log(max(p, 1e-12)). Labels are one-hot rows.
template <class T>
TensorT<T> cross_entropy(const TensorT<T>& probs, const TensorT<T>& onehot) {
    detail::check_same_shape(probs, onehot, "cross_entropy");
    if (probs.rank() != 2) throw std::invalid_argument("cross_entropy: expected [N,K], got " + shape_str(probs.shape()));
    const int64_t N = probs.dim(0), K = probs.dim(1);
    constexpr double kFloor = 1e-12;
    double loss = 0.0;
    for (int64_t i = 0; i < N * K; ++i)
        if (onehot.data()[i] != T(0))
            loss -= static_cast<double>(onehot.data()[i]) * std::log(std::max(static_cast<double>(probs.data()[i]), kFloor));
    TensorT<T> out = TensorT<T>::scalar(static_cast<T>(loss / static_cast<double>(N)));
    if (detail::any_tracked(probs)) {
        Tape<T>::active()->record(out.impl(), [po = probs.impl(), yo = onehot.impl(), oo = out.impl(), N, K] {
            const T g = oo->grad[0];
            std::vector<T>& gp = po->ensure_grad();
            for (int64_t i = 0; i < N * K; ++i)
                if (yo->data[i] != T(0))
                    gp[i] -= g * yo->data[i] / std::max(po->data[i], T(1e-12)) / static_cast<T>(N);
        });
    }
    return out;
}

}  // namespace gaitfi
