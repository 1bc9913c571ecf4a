#pragma once

// Finite-difference gradient verification. Layers run in double; central
// differences with h = 1e-5 give ~1e-10 truncation error, far below the
// 1e-4 relative tolerance used throughout.

#include <cmath>
#include <functional>
#include <string>

#include <catch2/catch_amalgamated.hpp>
#include <cocoanet/core/rng.hpp>
#include <cocoanet/core/tensor.hpp>
#include <cocoanet/nn/layer.hpp>

namespace gradcheck {

using cocoanet::Rng;
using cocoanet::Tensor;
using cocoanet::TensorD;

inline constexpr double kStep = 1e-5;
inline constexpr double kTol = 1e-4;

inline double rel_err(double analytic, double numeric) {
    const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
    return std::fabs(analytic - numeric) / denom;
}

// Scalar objective: sum of the forward output weighted by a fixed random
// tensor, so every output element influences the loss.
struct Harness {
    // Re-runs the full forward pass and returns the weighted sum. Must be
    // deterministic across calls (stochastic layers replay their stream).
    std::function<double()> loss;
    // Runs forward once, backprops the weight tensor, leaves gradients in
    // place. Called once before probing.
    std::function<void()> backprop;
};

// Verifies d(loss)/d(x[i]) for every element of `x` against the analytic
// gradient left in `grad` by backprop().
inline void check_tensor(const Harness& h, TensorD& x, const TensorD& grad,
                         const std::string& what) {
    REQUIRE(grad.same_shape(x));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + kStep;
        const double up = h.loss();
        x[i] = keep - kStep;
        const double down = h.loss();
        x[i] = keep;
        const double numeric = (up - down) / (2.0 * kStep);
        const double err = rel_err(grad[i], numeric);
        INFO(what << "[" << i << "]: analytic " << grad[i] << " numeric " << numeric
                  << " rel err " << err);
        REQUIRE(err < kTol);
    }
}

inline TensorD random_tensor(const std::vector<std::size_t>& shape, Rng& rng, double scale = 1.0) {
    TensorD t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, scale);
    return t;
}

inline double weighted_sum(const TensorD& y, const TensorD& w) {
    REQUIRE(y.same_shape(w));
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
    return s;
}

} // namespace gradcheck
