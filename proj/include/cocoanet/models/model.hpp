#pragma once

#include <memory>
#include <string>
#include <vector>

#include "../nn/layer.hpp"
#include "spec.hpp"

namespace cocoanet {

// A built network plus its blueprint. Owns the train/eval mode switch and the
// per-forward rng plumbing so callers never hand-thread contexts through the
// layer stack. Forward rejects anything that is not an RGB crop batch of the
// contract size.
template <typename T>
class ModelInstance {
public:
    ModelInstance(ArchitectureSpec spec, std::unique_ptr<Sequential<T>> net)
        : spec_(std::move(spec)), net_(std::move(net)) {}

    Tensor<T> forward(const Tensor<T>& images, Rng* rng = nullptr) {
        if (images.rank() != 4 || images.dim(1) != kInputChannels ||
            images.dim(2) != kInputSize || images.dim(3) != kInputSize) {
            throw std::invalid_argument(
                std::string(family_name(spec_.family)) + ": expected input [N," +
                std::to_string(kInputChannels) + "," + std::to_string(kInputSize) + "," +
                std::to_string(kInputSize) + "], got " + images.shape_str());
        }
        RunContext ctx{mode_, rng};
        return net_->forward(images, ctx);
    }

    Tensor<T> backward(const Tensor<T>& grad_probs) { return net_->backward(grad_probs); }

    void set_mode(Mode m) { mode_ = m; }
    Mode mode() const { return mode_; }

    void visit_params(const ParamVisitor<T>& visit) { net_->visit_params(visit, ""); }

    // Canonical optimizer ordering: trainable params in visitation order.
    std::vector<Param<T>*> trainable_params() {
        std::vector<Param<T>*> out;
        visit_params([&](const std::string&, Param<T>& p) {
            if (p.trainable) out.push_back(&p);
        });
        return out;
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        visit_params([&](const std::string&, Param<T>& p) {
            if (p.trainable) n += p.value.size();
        });
        return n;
    }

    void zero_grads() {
        visit_params([](const std::string&, Param<T>& p) {
            if (p.trainable) p.zero_grad();
        });
    }

    Sequential<T>& net() { return *net_; }
    const ArchitectureSpec& spec() const { return spec_; }

private:
    ArchitectureSpec spec_;
    std::unique_ptr<Sequential<T>> net_;
    Mode mode_ = Mode::Eval;
};

} // namespace cocoanet
