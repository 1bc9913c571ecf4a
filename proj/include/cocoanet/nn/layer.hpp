#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "../core/rng.hpp"
#include "../core/tensor.hpp"
#include "param.hpp"

namespace cocoanet {

enum class Mode { Train, Eval };

// Passed down the forward chain. The rng pointer is only consumed by
// stochastic layers in train mode; deterministic layers never touch it.
struct RunContext {
    Mode mode = Mode::Eval;
    Rng* rng = nullptr;
};

template <typename T>
class Layer {
public:
    explicit Layer(std::string name) : name_(std::move(name)) {}
    virtual ~Layer() = default;

    Layer(const Layer&) = delete;
    Layer& operator=(const Layer&) = delete;

    virtual Tensor<T> forward(const Tensor<T>& x, const RunContext& ctx) = 0;

    // Consumes the cached activations from the matching forward; a second
    // backward without a fresh forward is a contract breach and throws.
    virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;

    virtual void visit_params(const ParamVisitor<T>& visit, const std::string& prefix) {
        (void)visit;
        (void)prefix;
    }

    const std::string& name() const { return name_; }

protected:
    [[noreturn]] void missing_forward() const {
        throw std::logic_error(name_ + ": backward called before forward");
    }

    void check_rank(const Tensor<T>& x, std::size_t rank, const char* what) const {
        if (x.rank() != rank) {
            throw std::invalid_argument(name_ + ": " + what + " must have rank " +
                                        std::to_string(rank) + ", got shape " + x.shape_str());
        }
    }

private:
    std::string name_;
};

// Plain chain of layers. Owns its children; forward threads the activation
// through in order, backward in reverse. Composite blocks with residual
// wiring (bottlenecks, transformer blocks) are layers of their own rather
// than special edges here.
template <typename T>
class Sequential : public Layer<T> {
public:
    explicit Sequential(std::string name) : Layer<T>(std::move(name)) {}

    template <typename L>
    L& add(std::unique_ptr<L> layer) {
        L& ref = *layer;
        layers_.push_back(std::move(layer));
        return ref;
    }

    std::size_t size() const { return layers_.size(); }
    Layer<T>& operator[](std::size_t i) { return *layers_[i]; }
    const Layer<T>& operator[](std::size_t i) const { return *layers_[i]; }

    Layer<T>* find(const std::string& child_name) {
        for (auto& l : layers_)
            if (l->name() == child_name) return l.get();
        return nullptr;
    }

    Tensor<T> forward(const Tensor<T>& x, const RunContext& ctx) override {
        if (layers_.empty()) throw std::logic_error(this->name() + ": empty sequential");
        Tensor<T> cur = layers_.front()->forward(x, ctx);
        for (std::size_t i = 1; i < layers_.size(); ++i)
            cur = layers_[i]->forward(cur, ctx);
        return cur;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        if (layers_.empty()) throw std::logic_error(this->name() + ": empty sequential");
        Tensor<T> cur = layers_.back()->backward(grad_out);
        for (std::size_t i = layers_.size() - 1; i-- > 0;)
            cur = layers_[i]->backward(cur);
        return cur;
    }

    void visit_params(const ParamVisitor<T>& visit, const std::string& prefix) override {
        for (auto& l : layers_)
            l->visit_params(visit, prefix + l->name() + ".");
    }

private:
    std::vector<std::unique_ptr<Layer<T>>> layers_;
};

} // namespace cocoanet
