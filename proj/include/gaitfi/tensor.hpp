#pragma once

// Dense row-major N-d tensors with a reverse-mode autodiff tape.
//
// TensorT is a value type over shared storage (copies alias the same
// buffer, like the usual tensor-library convention). Differentiable ops
// are free functions; they record a backward closure on the active tape
// when any input is tracked. TensorT<float> is the production type,
// TensorT<double> exists so finite-difference checks can run at 64-bit
// precision through the same code path.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace gaitfi {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) {
        if (d < 0) throw std::invalid_argument("tensor: negative extent in shape");
        n *= d;
    }
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

template <class T>
class Tape;

template <class T>
struct TensorImpl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // allocated lazily, same length as data when present
    bool requires_grad = false;

    // Tape membership (valid only while tape_ exists with matching generation).
    Tape<T>* tape = nullptr;
    uint64_t tape_gen = 0;

    int64_t numel() const { return static_cast<int64_t>(data.size()); }

    std::vector<T>& ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), T(0));
        return grad;
    }
};

template <class T>
class TensorT {
  public:
    TensorT() = default;

    static TensorT zeros(Shape shape) {
        TensorT t;
        t.impl_ = std::make_shared<TensorImpl<T>>();
        t.impl_->shape = std::move(shape);
        t.impl_->data.assign(shape_numel(t.impl_->shape), T(0));
        return t;
    }

    static TensorT full(Shape shape, T value) {
        TensorT t = zeros(std::move(shape));
        std::fill(t.data(), t.data() + t.numel(), value);
        return t;
    }

    static TensorT ones(Shape shape) { return full(std::move(shape), T(1)); }

    static TensorT from(std::vector<T> values, Shape shape) {
        if (static_cast<int64_t>(values.size()) != shape_numel(shape))
            throw std::invalid_argument("tensor: data length " + std::to_string(values.size()) +
                                        " does not match shape " + shape_str(shape));
        TensorT t;
        t.impl_ = std::make_shared<TensorImpl<T>>();
        t.impl_->shape = std::move(shape);
        t.impl_->data = std::move(values);
        return t;
    }

    static TensorT scalar(T value) { return from({value}, {}); }

    static TensorT uniform(std::mt19937_64& rng, Shape shape, T lo, T hi) {
        TensorT t = zeros(std::move(shape));
        std::uniform_real_distribution<double> dist(static_cast<double>(lo), static_cast<double>(hi));
        for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = static_cast<T>(dist(rng));
        return t;
    }

    static TensorT randn(std::mt19937_64& rng, Shape shape, T mean = T(0), T stddev = T(1)) {
        TensorT t = zeros(std::move(shape));
        std::normal_distribution<double> dist(static_cast<double>(mean), static_cast<double>(stddev));
        for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = static_cast<T>(dist(rng));
        return t;
    }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int64_t dim(size_t i) const { return impl_->shape.at(i); }
    size_t rank() const { return impl_->shape.size(); }
    int64_t numel() const { return impl_ ? impl_->numel() : 0; }

    T* data() { return impl_->data.data(); }
    const T* data() const { return impl_->data.data(); }
    std::vector<T>& vec() { return impl_->data; }
    const std::vector<T>& vec() const { return impl_->data; }

    T item() const {
        if (numel() != 1) throw std::invalid_argument("tensor: item() on non-scalar " + shape_str(shape()));
        return impl_->data[0];
    }

    bool requires_grad() const { return impl_ && impl_->requires_grad; }
    TensorT& set_requires_grad(bool v) {
        impl_->requires_grad = v;
        return *this;
    }

    bool has_grad() const { return impl_ && !impl_->grad.empty(); }
    // Gradient accumulated by backward passes; zero tensor if none was recorded.
    TensorT grad() const {
        TensorT g = zeros(impl_->shape);
        if (!impl_->grad.empty()) std::copy(impl_->grad.begin(), impl_->grad.end(), g.data());
        return g;
    }
    void zero_grad() {
        if (impl_) impl_->grad.clear();
    }

    // Deep copy of values; result is a fresh untracked leaf.
    TensorT clone() const {
        TensorT t;
        t.impl_ = std::make_shared<TensorImpl<T>>();
        t.impl_->shape = impl_->shape;
        t.impl_->data = impl_->data;
        return t;
    }

    bool all_finite() const {
        for (const T& v : impl_->data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::shared_ptr<TensorImpl<T>>& impl() { return impl_; }
    const std::shared_ptr<TensorImpl<T>>& impl() const { return impl_; }

  private:
    std::shared_ptr<TensorImpl<T>> impl_;
};

using Tensor = TensorT<float>;

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

template <class T>
class GradMode {
  public:
    static bool enabled() { return flag(); }
    static void set(bool v) { flag() = v; }

  private:
    static bool& flag() {
        thread_local bool f = true;
        return f;
    }
};

template <class T>
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    ~Tape() {
        if (active() == this) active() = nullptr;
    }

    static Tape*& active() {
        thread_local Tape* t = nullptr;
        return t;
    }

    uint64_t generation() const { return gen_; }
    size_t size() const { return nodes_.size(); }

    bool tracks(const std::shared_ptr<TensorImpl<T>>& impl) const {
        return impl && impl->tape == this && impl->tape_gen == gen_;
    }

    void record(std::shared_ptr<TensorImpl<T>> out, std::function<void()> backward) {
        out->tape = this;
        out->tape_gen = gen_;
        nodes_.push_back(Node{std::move(backward), std::move(out)});
    }

    // Reverse sweep from a scalar root. Gradients accumulate additively into
    // every tracked leaf; intermediate grad buffers are released as soon as
    // their producing node has consumed them.
    void backward(const TensorT<T>& root) {
        if (root.numel() != 1)
            throw std::invalid_argument("backward: root must be scalar, got " + shape_str(root.shape()));
        if (!tracks(root.impl()))
            throw std::invalid_argument("backward: root is not on the tape");
        root.impl()->ensure_grad()[0] += T(1);
        // Find the node that produced the root; all later nodes are irrelevant.
        size_t start = nodes_.size();
        while (start > 0 && nodes_[start - 1].out != root.impl()) --start;
        for (size_t i = start; i-- > 0;) {
            Node& node = nodes_[i];
            if (!node.out->grad.empty()) {
                node.backward();
                if (!node.out->requires_grad) node.out->grad.clear();
            }
        }
    }

    void clear() {
        nodes_.clear();
        ++gen_;
    }

  private:
    struct Node {
        std::function<void()> backward;
        std::shared_ptr<TensorImpl<T>> out;
    };
    std::vector<Node> nodes_;
    uint64_t gen_ = 1;
};

// Activates a tape for the current scope.
template <class T>
class TapeScope {
  public:
    explicit TapeScope(Tape<T>& tape) : prev_(Tape<T>::active()) { Tape<T>::active() = &tape; }
    ~TapeScope() { Tape<T>::active() = prev_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

  private:
    Tape<T>* prev_;
};

template <class T>
class NoGradGuard {
  public:
    NoGradGuard() : prev_(GradMode<T>::enabled()) { GradMode<T>::set(false); }
    ~NoGradGuard() { GradMode<T>::set(prev_); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

namespace detail {

template <class T>
bool tracked(const TensorT<T>& t) {
    Tape<T>* tape = Tape<T>::active();
    if (!tape || !GradMode<T>::enabled()) return false;
    return t.requires_grad() || tape->tracks(t.impl());
}

template <class T, class... Ts>
bool any_tracked(const TensorT<T>& first, const Ts&... rest) {
    return tracked(first) || (tracked(rest) || ...);
}

template <class T>
std::vector<T>& grad_of(const TensorT<T>& t) {
    return t.impl()->ensure_grad();
}

template <class T>
void check_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    detail::check_same_shape(a, b, "add");
    TensorT<T> out = TensorT<T>::zeros(a.shape());
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] + pb[i];
    if (detail::any_tracked(a, b)) {
        const bool na = detail::tracked(a), nb = detail::tracked(b);
        Tape<T>::active()->record(out.impl(), [ao = a.impl(), bo = b.impl(), oo = out.impl(), na, nb] {
            const std::vector<T>& g = oo->grad;
            if (na) {
                std::vector<T>& ga = ao->ensure_grad();
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (nb) {
                std::vector<T>& gb = bo->ensure_grad();
                for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        });
    }
    return out;
}

template <class T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
    detail::check_same_shape(a, b, "sub");
    TensorT<T> out = TensorT<T>::zeros(a.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
    if (detail::any_tracked(a, b)) {
        const bool na = detail::tracked(a), nb = detail::tracked(b);
        Tape<T>::active()->record(out.impl(), [ao = a.impl(), bo = b.impl(), oo = out.impl(), na, nb] {
            const std::vector<T>& g = oo->grad;
            if (na) {
                std::vector<T>& ga = ao->ensure_grad();
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (nb) {
                std::vector<T>& gb = bo->ensure_grad();
                for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        });
    }
    return out;
}

template <class T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
    detail::check_same_shape(a, b, "mul");
    TensorT<T> out = TensorT<T>::zeros(a.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    if (detail::any_tracked(a, b)) {
        const bool na = detail::tracked(a), nb = detail::tracked(b);
        Tape<T>::active()->record(out.impl(), [ao = a.impl(), bo = b.impl(), oo = out.impl(), na, nb] {
            const std::vector<T>& g = oo->grad;
            if (na) {
                std::vector<T>& ga = ao->ensure_grad();
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bo->data[i];
            }
            if (nb) {
                std::vector<T>& gb = bo->ensure_grad();
                for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ao->data[i];
            }
        });
    }
    return out;
}

template <class T>
TensorT<T> scale(const TensorT<T>& a, T c) {
    TensorT<T> out = TensorT<T>::zeros(a.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] * c;
    if (detail::any_tracked(a)) {
        Tape<T>::active()->record(out.impl(), [ao = a.impl(), oo = out.impl(), c] {
            const std::vector<T>& g = oo->grad;
            std::vector<T>& ga = ao->ensure_grad();
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
        });
    }
    return out;
}

template <class T>
TensorT<T> relu(const TensorT<T>& a) {
    TensorT<T> out = TensorT<T>::zeros(a.shape());
    const T* pa = a.data();
    T* po = out.data();
    for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] > T(0) ? pa[i] : T(0);
    if (detail::any_tracked(a)) {
        Tape<T>::active()->record(out.impl(), [ao = a.impl(), oo = out.impl()] {
            const std::vector<T>& g = oo->grad;
            std::vector<T>& ga = ao->ensure_grad();
            const std::vector<T>& x = ao->data;
            for (size_t i = 0; i < g.size(); ++i)
                if (x[i] > T(0)) ga[i] += g[i];  // gradient defined as 0 at x == 0
        });
    }
    return out;
}

template <class T>
TensorT<T> sigmoid(const TensorT<T>& a) {
    TensorT<T> out = TensorT<T>::zeros(a.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = T(1) / (T(1) + std::exp(-a.data()[i]));
    if (detail::any_tracked(a)) {
        Tape<T>::active()->record(out.impl(), [ao = a.impl(), oo = out.impl()] {
            const std::vector<T>& g = oo->grad;
            std::vector<T>& ga = ao->ensure_grad();
            const std::vector<T>& y = oo->data;
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (T(1) - y[i]);
        });
    }
    return out;
}

template <class T>
TensorT<T> tanh_op(const TensorT<T>& a) {
    TensorT<T> out = TensorT<T>::zeros(a.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = std::tanh(a.data()[i]);
    if (detail::any_tracked(a)) {
        Tape<T>::active()->record(out.impl(), [ao = a.impl(), oo = out.impl()] {
            const std::vector<T>& g = oo->grad;
            std::vector<T>& ga = ao->ensure_grad();
            const std::vector<T>& y = oo->data;
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (T(1) - y[i] * y[i]);
        });
    }
    return out;
}

// Sum of all elements, accumulated in double regardless of T.
template <class T>
TensorT<T> sum(const TensorT<T>& a) {
    double acc = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) acc += static_cast<double>(a.data()[i]);
    TensorT<T> out = TensorT<T>::scalar(static_cast<T>(acc));
    if (detail::any_tracked(a)) {
        Tape<T>::active()->record(out.impl(), [ao = a.impl(), oo = out.impl()] {
            const T g = oo->grad[0];
            std::vector<T>& ga = ao->ensure_grad();
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += g;
        });
    }
    return out;
}

template <class T>
TensorT<T> mean(const TensorT<T>& a) {
    if (a.numel() == 0) throw std::invalid_argument("mean: empty tensor");
    return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

// Copying reshape; gradient flows back element-for-element.
template <class T>
TensorT<T> reshape(const TensorT<T>& a, Shape shape) {
    if (shape_numel(shape) != a.numel())
        throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    TensorT<T> out = TensorT<T>::from(a.vec(), std::move(shape));
    if (detail::any_tracked(a)) {
        Tape<T>::active()->record(out.impl(), [ao = a.impl(), oo = out.impl()] {
            const std::vector<T>& g = oo->grad;
            std::vector<T>& ga = ao->ensure_grad();
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Matrix ops
// ---------------------------------------------------------------------------

namespace detail {

// Register-tiled GEMM microkernels. Each computes a 4-row by kGemmTile-column
// block of C in a stack tile so the compiler keeps the accumulators in vector
// registers across the whole k loop; four rows share every loaded B vector,
// which breaks the FMA latency chain a single-row saxpy would serialize on.
// Per output element the k-summation stays in ascending order, so results are
// reproducible run to run.
inline constexpr int64_t kGemmTile = 32;

// C[M,N] += A[M,K] * B[K,N], all row-major.
template <class T>
void gemm_acc(const T* A, const T* B, T* C, int64_t M, int64_t K, int64_t N) {
    const int64_t jt = N - N % kGemmTile;
    int64_t i = 0;
    for (; i + 4 <= M; i += 4) {
        const T* a0 = A + i * K;
        const T* a1 = a0 + K;
        const T* a2 = a1 + K;
        const T* a3 = a2 + K;
        T* c0 = C + i * N;
        T* c1 = c0 + N;
        T* c2 = c1 + N;
        T* c3 = c2 + N;
        for (int64_t j0 = 0; j0 < jt; j0 += kGemmTile) {
            T acc0[kGemmTile] = {}, acc1[kGemmTile] = {}, acc2[kGemmTile] = {}, acc3[kGemmTile] = {};
            for (int64_t k = 0; k < K; ++k) {
                const T* b = B + k * N + j0;
                const T x0 = a0[k], x1 = a1[k], x2 = a2[k], x3 = a3[k];
                for (int64_t j = 0; j < kGemmTile; ++j) {
                    const T bj = b[j];
                    acc0[j] += x0 * bj;
                    acc1[j] += x1 * bj;
                    acc2[j] += x2 * bj;
                    acc3[j] += x3 * bj;
                }
            }
            for (int64_t j = 0; j < kGemmTile; ++j) {
                c0[j0 + j] += acc0[j];
                c1[j0 + j] += acc1[j];
                c2[j0 + j] += acc2[j];
                c3[j0 + j] += acc3[j];
            }
        }
        if (jt < N) {
            for (int64_t k = 0; k < K; ++k) {
                const T* b = B + k * N;
                const T x0 = a0[k], x1 = a1[k], x2 = a2[k], x3 = a3[k];
                for (int64_t j = jt; j < N; ++j) {
                    const T bj = b[j];
                    c0[j] += x0 * bj;
                    c1[j] += x1 * bj;
                    c2[j] += x2 * bj;
                    c3[j] += x3 * bj;
                }
            }
        }
    }
    for (; i < M; ++i) {
        T* c = C + i * N;
        const T* arow = A + i * K;
        for (int64_t k = 0; k < K; ++k) {
            const T a = arow[k];
            const T* b = B + k * N;
            for (int64_t j = 0; j < N; ++j) c[j] += a * b[j];
        }
    }
}

// C[M,N] += A^T * B where A is [K,M] row-major. Same tile as gemm_acc; the
// four broadcast scalars per k step are adjacent in A's row k.
template <class T>
void gemm_at_acc(const T* A, const T* B, T* C, int64_t M, int64_t K, int64_t N) {
    const int64_t jt = N - N % kGemmTile;
    int64_t i = 0;
    for (; i + 4 <= M; i += 4) {
        T* c0 = C + i * N;
        T* c1 = c0 + N;
        T* c2 = c1 + N;
        T* c3 = c2 + N;
        for (int64_t j0 = 0; j0 < jt; j0 += kGemmTile) {
            T acc0[kGemmTile] = {}, acc1[kGemmTile] = {}, acc2[kGemmTile] = {}, acc3[kGemmTile] = {};
            for (int64_t k = 0; k < K; ++k) {
                const T* a = A + k * M + i;
                const T* b = B + k * N + j0;
                const T x0 = a[0], x1 = a[1], x2 = a[2], x3 = a[3];
                for (int64_t j = 0; j < kGemmTile; ++j) {
                    const T bj = b[j];
                    acc0[j] += x0 * bj;
                    acc1[j] += x1 * bj;
                    acc2[j] += x2 * bj;
                    acc3[j] += x3 * bj;
                }
            }
            for (int64_t j = 0; j < kGemmTile; ++j) {
                c0[j0 + j] += acc0[j];
                c1[j0 + j] += acc1[j];
                c2[j0 + j] += acc2[j];
                c3[j0 + j] += acc3[j];
            }
        }
        if (jt < N) {
            for (int64_t k = 0; k < K; ++k) {
                const T* a = A + k * M + i;
                const T* b = B + k * N;
                const T x0 = a[0], x1 = a[1], x2 = a[2], x3 = a[3];
                for (int64_t j = jt; j < N; ++j) {
                    const T bj = b[j];
                    c0[j] += x0 * bj;
                    c1[j] += x1 * bj;
                    c2[j] += x2 * bj;
                    c3[j] += x3 * bj;
                }
            }
        }
    }
    for (; i < M; ++i) {
        T* c = C + i * N;
        for (int64_t k = 0; k < K; ++k) {
            const T a = A[k * M + i];
            const T* b = B + k * N;
            for (int64_t j = 0; j < N; ++j) c[j] += a * b[j];
        }
    }
}

// C[M,N] += A * B^T where B is [N,K] row-major. A naive dot-product kernel
// here is a serial reduction the compiler may not vectorize, so transpose B
// into scratch once (cheap next to the 2*M*N*K flops) and reuse gemm_acc.
template <class T>
void gemm_bt_acc(const T* A, const T* B, T* C, int64_t M, int64_t K, int64_t N) {
    thread_local std::vector<T> scratch;
    scratch.resize(static_cast<size_t>(K) * N);
    T* BT = scratch.data();
    constexpr int64_t kBlk = 32;
    for (int64_t n0 = 0; n0 < N; n0 += kBlk) {
        const int64_t n1 = std::min(n0 + kBlk, N);
        for (int64_t k0 = 0; k0 < K; k0 += kBlk) {
            const int64_t k1 = std::min(k0 + kBlk, K);
            for (int64_t n = n0; n < n1; ++n)
                for (int64_t k = k0; k < k1; ++k) BT[k * N + n] = B[n * K + k];
        }
    }
    gemm_acc(A, BT, C, M, K, N);
}

}  // namespace detail

template <class T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                                    shape_str(b.shape()));
    const int64_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
    TensorT<T> out = TensorT<T>::zeros({M, N});
    detail::gemm_acc(a.data(), b.data(), out.data(), M, K, N);
    if (detail::any_tracked(a, b)) {
        const bool na = detail::tracked(a), nb = detail::tracked(b);
        Tape<T>::active()->record(out.impl(), [ao = a.impl(), bo = b.impl(), oo = out.impl(), M, K, N, na, nb] {
            const T* g = oo->grad.data();
            // dA = dC * B^T, dB = A^T * dC
            if (na) detail::gemm_bt_acc(g, bo->data.data(), ao->ensure_grad().data(), M, N, K);
            if (nb) detail::gemm_at_acc(ao->data.data(), g, bo->ensure_grad().data(), K, M, N);
        });
    }
    return out;
}

// out[n, :] = a[n, :] + bias (bias broadcast over rows).
template <class T>
TensorT<T> add_rowvec(const TensorT<T>& a, const TensorT<T>& bias) {
    if (a.rank() != 2 || bias.rank() != 1 || bias.dim(0) != a.dim(1))
        throw std::invalid_argument("add_rowvec: shapes " + shape_str(a.shape()) + " + " + shape_str(bias.shape()));
    const int64_t N = a.dim(0), G = a.dim(1);
    TensorT<T> out = TensorT<T>::zeros(a.shape());
    for (int64_t n = 0; n < N; ++n)
        for (int64_t j = 0; j < G; ++j) out.data()[n * G + j] = a.data()[n * G + j] + bias.data()[j];
    if (detail::any_tracked(a, bias)) {
        const bool na = detail::tracked(a), nb = detail::tracked(bias);
        Tape<T>::active()->record(out.impl(), [ao = a.impl(), bo = bias.impl(), oo = out.impl(), N, G, na, nb] {
            const std::vector<T>& g = oo->grad;
            if (na) {
                std::vector<T>& ga = ao->ensure_grad();
                for (int64_t i = 0; i < N * G; ++i) ga[i] += g[i];
            }
            if (nb) {
                std::vector<T>& gb = bo->ensure_grad();
                for (int64_t n = 0; n < N; ++n)
                    for (int64_t j = 0; j < G; ++j) gb[j] += g[n * G + j];
            }
        });
    }
    return out;
}

// Rows of `a` selected by index; backward scatter-adds.
template <class T>
TensorT<T> gather_rows(const TensorT<T>& a, std::vector<int64_t> rows) {
    if (a.rank() != 2) throw std::invalid_argument("gather_rows: expected rank-2, got " + shape_str(a.shape()));
    const int64_t R = a.dim(0), C = a.dim(1);
    for (int64_t r : rows)
        if (r < 0 || r >= R) throw std::invalid_argument("gather_rows: row index out of range");
    TensorT<T> out = TensorT<T>::zeros({static_cast<int64_t>(rows.size()), C});
    for (size_t i = 0; i < rows.size(); ++i)
        std::copy_n(a.data() + rows[i] * C, C, out.data() + static_cast<int64_t>(i) * C);
    if (detail::any_tracked(a)) {
        Tape<T>::active()->record(out.impl(), [ao = a.impl(), oo = out.impl(), rows = std::move(rows), C] {
            const std::vector<T>& g = oo->grad;
            std::vector<T>& ga = ao->ensure_grad();
            for (size_t i = 0; i < rows.size(); ++i)
                for (int64_t j = 0; j < C; ++j) ga[rows[i] * C + j] += g[static_cast<int64_t>(i) * C + j];
        });
    }
    return out;
}

// Column-range slice of a rank-2 tensor.
template <class T>
TensorT<T> slice_cols(const TensorT<T>& a, int64_t begin, int64_t end) {
    if (a.rank() != 2 || begin < 0 || end > a.dim(1) || begin >= end)
        throw std::invalid_argument("slice_cols: bad range on " + shape_str(a.shape()));
    const int64_t N = a.dim(0), C = a.dim(1), W = end - begin;
    TensorT<T> out = TensorT<T>::zeros({N, W});
    for (int64_t n = 0; n < N; ++n) std::copy_n(a.data() + n * C + begin, W, out.data() + n * W);
    if (detail::any_tracked(a)) {
        Tape<T>::active()->record(out.impl(), [ao = a.impl(), oo = out.impl(), begin, N, C, W] {
            const std::vector<T>& g = oo->grad;
            std::vector<T>& ga = ao->ensure_grad();
            for (int64_t n = 0; n < N; ++n)
                for (int64_t j = 0; j < W; ++j) ga[n * C + begin + j] += g[n * W + j];
        });
    }
    return out;
}

// Concatenate two rank-2 tensors along columns: [N,A] ++ [N,B] -> [N,A+B].
template <class T>
TensorT<T> concat_cols(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0))
        throw std::invalid_argument("concat_cols: shapes " + shape_str(a.shape()) + " ++ " + shape_str(b.shape()));
    const int64_t N = a.dim(0), A = a.dim(1), B = b.dim(1);
    TensorT<T> out = TensorT<T>::zeros({N, A + B});
    for (int64_t n = 0; n < N; ++n) {
        std::copy_n(a.data() + n * A, A, out.data() + n * (A + B));
        std::copy_n(b.data() + n * B, B, out.data() + n * (A + B) + A);
    }
    if (detail::any_tracked(a, b)) {
        const bool na = detail::tracked(a), nb = detail::tracked(b);
        Tape<T>::active()->record(out.impl(), [ao = a.impl(), bo = b.impl(), oo = out.impl(), N, A, B, na, nb] {
            const std::vector<T>& g = oo->grad;
            for (int64_t n = 0; n < N; ++n) {
                if (na) {
                    std::vector<T>& ga = ao->ensure_grad();
                    for (int64_t j = 0; j < A; ++j) ga[n * A + j] += g[n * (A + B) + j];
                }
                if (nb) {
                    std::vector<T>& gb = bo->ensure_grad();
                    for (int64_t j = 0; j < B; ++j) gb[n * B + j] += g[n * (A + B) + A + j];
                }
            }
        });
    }
    return out;
}

}  // namespace gaitfi
