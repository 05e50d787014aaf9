#pragma once

// Central finite-difference verification of tape gradients. Runs the given
// forward closure under a fresh tape for the analytic pass, then re-runs it
// untaped with each checked parameter element nudged +/- h. Error metric is
// |analytic - numeric| / max(1, |analytic|, |numeric|), so near-zero
// gradients are compared absolutely.
//
// Meant to be instantiated with T = double: probes at h = 1e-3 against a
// float32 forward would drown in rounding noise long before the tolerance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gaitfi/tensor.hpp"

namespace gaitfi {

struct GradCheckReport {
    double max_err = 0.0;
    int64_t checked = 0;
    std::string worst_param;
    int64_t worst_index = -1;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

template <class T, class Forward>
GradCheckReport gradcheck(Forward&& forward, std::vector<std::pair<std::string, TensorT<T>>>& params, T h,
                          int64_t stride = 1) {
    if (stride < 1) stride = 1;
    for (auto& [name, p] : params) {
        p.set_requires_grad(true);
        p.zero_grad();
    }

    std::vector<std::vector<T>> analytic;
    {
        Tape<T> tape;
        TapeScope<T> scope(tape);
        TensorT<T> loss = forward();
        tape.backward(loss);
        for (auto& [name, p] : params) {
            TensorT<T> g = p.grad();
            analytic.emplace_back(g.vec());
            p.zero_grad();
        }
    }

    GradCheckReport rep;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        TensorT<T>& p = params[pi].second;
        T* d = p.data();
        for (int64_t j = 0; j < p.numel(); j += stride) {
            const T keep = d[j];
            d[j] = keep + h;
            const double fp = static_cast<double>(forward().item());
            d[j] = keep - h;
            const double fm = static_cast<double>(forward().item());
            d[j] = keep;
            const double numeric = (fp - fm) / (2.0 * static_cast<double>(h));
            const double a = static_cast<double>(analytic[pi][j]);
            const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
            const double err = std::abs(a - numeric) / denom;
            ++rep.checked;
            if (err > rep.max_err) {
                rep.max_err = err;
                rep.worst_param = params[pi].first;
                rep.worst_index = j;
                rep.worst_analytic = a;
                rep.worst_numeric = numeric;
            }
        }
    }
    return rep;
}

}  // namespace gaitfi
