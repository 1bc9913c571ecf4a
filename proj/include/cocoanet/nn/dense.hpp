#pragma once

#include <string>

#include "../core/blas.hpp"
#include "../core/rng.hpp"
#include "layer.hpp"

namespace cocoanet {

// Affine map y = x W + b with W stored [d_in, d_out]. Inputs of rank > 2 are
// treated as (prod of leading dims) rows over the trailing feature axis, so
// the same layer serves classifier heads ([N, d]) and per-token projections
// ([B, T, d]).
template <typename T>
class Dense final : public Layer<T> {
public:
    Dense(std::string name, std::size_t d_in, std::size_t d_out, Rng& rng)
        : Layer<T>(std::move(name)), d_in_(d_in), d_out_(d_out) {
        if (d_in == 0 || d_out == 0)
            throw std::invalid_argument(this->name() + ": zero-width dense layer");
        weight_.value = Tensor<T>({d_in, d_out});
        init::kaiming_uniform(weight_.value, d_in, rng);
        bias_.value = Tensor<T>({d_out});
    }

    Tensor<T> forward(const Tensor<T>& x, const RunContext&) override {
        if (x.rank() < 2 || x.dim(x.rank() - 1) != d_in_) {
            throw std::invalid_argument(this->name() + ": expected trailing dimension " +
                                        std::to_string(d_in_) + ", got shape " + x.shape_str());
        }
        input_ = x;
        const std::size_t rows = x.size() / d_in_;
        std::vector<std::size_t> out_shape(x.shape().begin(), x.shape().end() - 1);
        out_shape.push_back(d_out_);
        Tensor<T> y(std::move(out_shape));
        blas::gemm(false, false, static_cast<int>(rows), static_cast<int>(d_out_),
                   static_cast<int>(d_in_), T{1}, x.data(), static_cast<int>(d_in_),
                   weight_.value.data(), static_cast<int>(d_out_), T{0}, y.data(),
                   static_cast<int>(d_out_));
        for (std::size_t r = 0; r < rows; ++r) {
            T* row = y.data() + r * d_out_;
            for (std::size_t j = 0; j < d_out_; ++j) row[j] += bias_.value[j];
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        if (input_.empty()) this->missing_forward();
        const std::size_t rows = input_.size() / d_in_;
        if (grad_out.size() != rows * d_out_)
            throw std::invalid_argument(this->name() + ": gradient shape " +
                                        grad_out.shape_str() + " does not match forward output");
        weight_.ensure_grad();
        bias_.ensure_grad();

        // dW += x^T gy ; db += column sums ; dx = gy W^T
        blas::gemm(true, false, static_cast<int>(d_in_), static_cast<int>(d_out_),
                   static_cast<int>(rows), T{1}, input_.data(), static_cast<int>(d_in_),
                   grad_out.data(), static_cast<int>(d_out_), T{1}, weight_.grad.data(),
                   static_cast<int>(d_out_));
        for (std::size_t r = 0; r < rows; ++r) {
            const T* row = grad_out.data() + r * d_out_;
            for (std::size_t j = 0; j < d_out_; ++j) bias_.grad[j] += row[j];
        }
        Tensor<T> grad_in(input_.shape());
        blas::gemm(false, true, static_cast<int>(rows), static_cast<int>(d_in_),
                   static_cast<int>(d_out_), T{1}, grad_out.data(), static_cast<int>(d_out_),
                   weight_.value.data(), static_cast<int>(d_out_), T{0}, grad_in.data(),
                   static_cast<int>(d_in_));
        input_.release();
        return grad_in;
    }

    void visit_params(const ParamVisitor<T>& visit, const std::string& prefix) override {
        visit(prefix + "weight", weight_);
        visit(prefix + "bias", bias_);
    }

    Param<T>& weight() { return weight_; }
    Param<T>& bias() { return bias_; }

private:
    std::size_t d_in_, d_out_;
    Param<T> weight_;
    Param<T> bias_;
    Tensor<T> input_;
};

} // namespace cocoanet
