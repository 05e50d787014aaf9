#pragma once

// Batch-hard triplet loss over embedding rows. Implemented as one fused
// taped op: the hardest positive/negative selection is a subgradient choice,
// so the backward applies the hinge only where it is active.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gaitfi/tensor.hpp"

namespace gaitfi {

// Squared Euclidean distance between two rows, accumulated in double.
template <class T>
double sq_dist_rows(const T* a, const T* b, int64_t d) {
    double acc = 0.0;
    for (int64_t i = 0; i < d; ++i) {
        const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += diff * diff;
    }
    return acc;
}

// Single-triplet hinge: max(||a-p||^2 - ||a-n||^2 + margin, 0).
template <class T>
T triplet_term(const std::vector<T>& anchor, const std::vector<T>& positive, const std::vector<T>& negative, T margin) {
    if (anchor.size() != positive.size() || anchor.size() != negative.size())
        throw std::invalid_argument("triplet_term: embedding dims differ");
    const double v = sq_dist_rows(anchor.data(), positive.data(), static_cast<int64_t>(anchor.size())) -
                     sq_dist_rows(anchor.data(), negative.data(), static_cast<int64_t>(anchor.size())) +
                     static_cast<double>(margin);
    return v > 0.0 ? static_cast<T>(v) : T(0);
}

// For each anchor: hardest positive = max same-label distance (excluding the
// anchor itself), hardest negative = min other-label distance; loss is the
// mean hinge over anchors that have at least one positive. Ties resolve to
// the lowest row index.
template <class T>
TensorT<T> batch_hard_triplet(const TensorT<T>& emb, const std::vector<int64_t>& labels, T margin) {
    if (emb.rank() != 2) throw std::invalid_argument("batch_hard_triplet: embeddings must be [B,D]");
    const int64_t B = emb.dim(0), D = emb.dim(1);
    if (static_cast<int64_t>(labels.size()) != B)
        throw std::invalid_argument("batch_hard_triplet: " + std::to_string(labels.size()) + " labels for " +
                                    std::to_string(B) + " rows");
    if (margin <= T(0)) throw std::invalid_argument("batch_hard_triplet: margin must be > 0");

    const T* z = emb.data();
    std::vector<int64_t> pos_idx(B, -1), neg_idx(B, -1);
    std::vector<double> d_ap(B, 0.0), d_an(B, 0.0);
    int64_t valid = 0;
    double loss = 0.0;
    for (int64_t a = 0; a < B; ++a) {
        double best_p = -1.0, best_n = 0.0;
        int64_t pi = -1, ni = -1;
        for (int64_t j = 0; j < B; ++j) {
            if (j == a) continue;
            const double d = sq_dist_rows(z + a * D, z + j * D, D);
            if (labels[j] == labels[a]) {
                if (d > best_p) {
                    best_p = d;
                    pi = j;
                }
            } else if (ni < 0 || d < best_n) {
                best_n = d;
                ni = j;
            }
        }
        if (pi < 0 || ni < 0) continue;  // anchor without a positive (or negative) is skipped
        pos_idx[a] = pi;
        neg_idx[a] = ni;
        d_ap[a] = best_p;
        d_an[a] = best_n;
        const double hinge = best_p - best_n + static_cast<double>(margin);
        loss += hinge > 0.0 ? hinge : 0.0;
        ++valid;
    }
    if (valid == 0) throw std::invalid_argument("batch_hard_triplet: no anchor has both a positive and a negative");
    TensorT<T> out = TensorT<T>::scalar(static_cast<T>(loss / static_cast<double>(valid)));

    if (detail::any_tracked(emb)) {
        Tape<T>::active()->record(out.impl(), [zo = emb.impl(), oo = out.impl(), pos_idx = std::move(pos_idx),
                                               neg_idx = std::move(neg_idx), d_ap = std::move(d_ap),
                                               d_an = std::move(d_an), margin, B, D, valid] {
            const T g = oo->grad[0];
            const T w = g / static_cast<T>(valid);
            std::vector<T>& gz = zo->ensure_grad();
            const std::vector<T>& zd = zo->data;
            for (int64_t a = 0; a < B; ++a) {
                if (pos_idx[a] < 0) continue;
                if (d_ap[a] - d_an[a] + static_cast<double>(margin) <= 0.0) continue;  // inactive hinge
                const int64_t p = pos_idx[a], n = neg_idx[a];
                for (int64_t k = 0; k < D; ++k) {
                    const T ap = zd[a * D + k] - zd[p * D + k];
                    const T an = zd[a * D + k] - zd[n * D + k];
                    gz[a * D + k] += w * T(2) * (ap - an);
                    gz[p * D + k] -= w * T(2) * ap;
                    gz[n * D + k] += w * T(2) * an;
                }
            }
        });
    }
    return out;
}

}  // namespace gaitfi
