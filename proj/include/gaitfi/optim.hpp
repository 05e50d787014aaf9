#pragma once

// Bias-corrected Adam. Moment tensors sit in the state, aligned index-for-
// index with the parameter list handed to init().

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gaitfi/tensor.hpp"

namespace gaitfi {

template <class T>
struct AdamState {
    T lr = T(1e-3);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
    int64_t step = 0;
    std::vector<TensorT<T>> m, v;

    static AdamState init(const std::vector<TensorT<T>>& params, T lr = T(1e-3)) {
        AdamState s;
        s.lr = lr;
        s.m.reserve(params.size());
        s.v.reserve(params.size());
        for (const auto& p : params) {
            s.m.push_back(TensorT<T>::zeros(p.shape()));
            s.v.push_back(TensorT<T>::zeros(p.shape()));
        }
        return s;
    }
};

// One update over all parameters from their accumulated gradients; grads are
// consumed (cleared) afterwards.
template <class T>
void adam_step(std::vector<TensorT<T>>& params, AdamState<T>& state) {
    if (params.size() != state.m.size())
        throw std::invalid_argument("adam_step: state tracks " + std::to_string(state.m.size()) + " params, got " +
                                    std::to_string(params.size()));
    state.step += 1;
    const T bc1 = T(1) - std::pow(state.beta1, static_cast<T>(state.step));
    const T bc2 = T(1) - std::pow(state.beta2, static_cast<T>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        TensorT<T>& p = params[i];
        if (state.m[i].shape() != p.shape())
            throw std::invalid_argument("adam_step: moment/param shape mismatch at index " + std::to_string(i));
        TensorT<T> g = p.grad();
        T* pd = p.data();
        T* md = state.m[i].data();
        T* vd = state.v[i].data();
        const T* gd = g.data();
        for (int64_t j = 0; j < p.numel(); ++j) {
            md[j] = state.beta1 * md[j] + (T(1) - state.beta1) * gd[j];
            vd[j] = state.beta2 * vd[j] + (T(1) - state.beta2) * gd[j] * gd[j];
            const T mhat = md[j] / bc1;
            const T vhat = vd[j] / bc2;
            pd[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
        p.zero_grad();
    }
}

}  // namespace gaitfi
