#pragma once

#include <functional>
#include <string>

#include "../core/tensor.hpp"

namespace cocoanet {

// A named tensor owned by a layer. Gradients are allocated on first use and
// accumulate across backward calls until zero_grad, so gradients of a sum of
// losses equal the sum of gradients. Non-trainable params (batch-norm running
// stats) ride along for checkpointing but are skipped by the optimizer.
template <typename T>
struct Param {
    Tensor<T> value;
    Tensor<T> grad;
    bool trainable = true;

    void ensure_grad() {
        if (!grad.same_shape(value)) grad = Tensor<T>(value.shape());
    }

    void zero_grad() {
        ensure_grad();
        grad.zero();
    }
};

// Visitation order is the registration order of a depth-first walk over the
// model; it is the canonical ordering for the optimizer state and the
// checkpoint tensor index. Names are dot-qualified ("stage2.block0.bn1.gamma").
template <typename T>
using ParamVisitor = std::function<void(const std::string&, Param<T>&)>;

} // namespace cocoanet
