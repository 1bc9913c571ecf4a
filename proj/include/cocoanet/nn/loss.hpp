#pragma once

#include <cmath>

#include "../core/tensor.hpp"
#include "../core/warnings.hpp"

namespace cocoanet {

inline constexpr double kProbFloor = 1e-12;

// Categorical cross-entropy against one-hot targets, averaged over the
// batch. Operates on probabilities (the models end in softmax), so a zero
// probability at the true class would blow up; such entries are clamped to
// 1e-12 and flagged through the warnings registry ("loss_prob_clamped").
template <typename T>
T cross_entropy(const Tensor<T>& probs, const Tensor<T>& onehot) {
    if (probs.rank() != 2 || !probs.same_shape(onehot))
        throw std::invalid_argument("cross_entropy: probabilities " + probs.shape_str() +
                                    " vs targets " + onehot.shape_str());
    const std::size_t n = probs.dim(0), c = probs.dim(1);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            const T y = onehot[i * c + j];
            if (y == T{0}) continue;
            double p = static_cast<double>(probs[i * c + j]);
            if (p < kProbFloor) {
                warnings::raise("loss_prob_clamped",
                                "cross_entropy: probability at a true class underflowed; "
                                "clamped to 1e-12");
                p = kProbFloor;
            }
            total -= static_cast<double>(y) * std::log(p);
        }
    }
    return static_cast<T>(total / static_cast<double>(n));
}

// d(loss)/d(probs): -y / (N * clamp(p)). Zero rows stay zero, so the softmax
// backward immediately upstream turns this into the familiar (p - y)/N.
template <typename T>
Tensor<T> cross_entropy_grad(const Tensor<T>& probs, const Tensor<T>& onehot) {
    if (probs.rank() != 2 || !probs.same_shape(onehot))
        throw std::invalid_argument("cross_entropy_grad: probabilities " + probs.shape_str() +
                                    " vs targets " + onehot.shape_str());
    const std::size_t n = probs.dim(0), c = probs.dim(1);
    Tensor<T> g(probs.shape());
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n * c; ++i) {
        const T y = onehot[i];
        if (y == T{0}) continue;
        const double p = std::max(static_cast<double>(probs[i]), kProbFloor);
        g[i] = static_cast<T>(-static_cast<double>(y) * inv_n / p);
    }
    return g;
}

// Index of the largest entry in row r of a [N, C] tensor; ties go to the
// lowest index.
template <typename T>
std::size_t argmax_row(const Tensor<T>& rows, std::size_t r) {
    const std::size_t c = rows.dim(rows.rank() - 1);
    const T* p = rows.data() + r * c;
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j)
        if (p[j] > p[best]) best = j;
    return best;
}

} // namespace cocoanet
