#pragma once

#include <string>
#include <vector>

#include "layer.hpp"

namespace cocoanet {

// Elementwise max(0, x). The byte mask (not the input) is cached: backward
// only needs to know which side of zero each element fell on.
template <typename T>
class ReLU final : public Layer<T> {
public:
    explicit ReLU(std::string name) : Layer<T>(std::move(name)) {}

    Tensor<T> forward(const Tensor<T>& x, const RunContext&) override {
        out_shape_ = x.shape();
        mask_.resize(x.size());
        Tensor<T> y(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) {
            const bool pos = x[i] > T{0};
            mask_[i] = pos;
            y[i] = pos ? x[i] : T{0};
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        if (mask_.empty()) this->missing_forward();
        if (grad_out.size() != mask_.size())
            throw std::invalid_argument(this->name() + ": gradient shape " +
                                        grad_out.shape_str() + " does not match forward output");
        Tensor<T> grad_in(out_shape_);
        for (std::size_t i = 0; i < grad_out.size(); ++i)
            grad_in[i] = mask_[i] ? grad_out[i] : T{0};
        mask_.clear();
        mask_.shrink_to_fit();
        return grad_in;
    }

private:
    std::vector<unsigned char> mask_;
    std::vector<std::size_t> out_shape_;
};

// [N, d1, d2, ...] -> [N, d1*d2*...]. Pure reshape; backward restores the
// original shape.
template <typename T>
class Flatten final : public Layer<T> {
public:
    explicit Flatten(std::string name) : Layer<T>(std::move(name)) {}

    Tensor<T> forward(const Tensor<T>& x, const RunContext&) override {
        if (x.rank() < 2)
            throw std::invalid_argument(this->name() + ": input must have rank >= 2, got " +
                                        x.shape_str());
        in_shape_ = x.shape();
        return x.reshaped({x.dim(0), x.size() / x.dim(0)});
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        if (in_shape_.empty()) this->missing_forward();
        Tensor<T> g = grad_out.reshaped(in_shape_);
        in_shape_.clear();
        return g;
    }

private:
    std::vector<std::size_t> in_shape_;
};

} // namespace cocoanet
