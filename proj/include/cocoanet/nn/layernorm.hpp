#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "../core/warnings.hpp"
#include "layer.hpp"

namespace cocoanet {

// Normalizes each row over the trailing axis, then applies the learned
// per-feature affine. Unlike batch norm there are no running statistics;
// train and eval are the same map. A width-1 axis is legal but degenerate
// (every xhat is exactly 0), so it is flagged once.
template <typename T>
class LayerNorm final : public Layer<T> {
public:
    LayerNorm(std::string name, std::size_t width, double eps = 1e-6)
        : Layer<T>(std::move(name)), width_(width), eps_(eps) {
        if (width == 0) throw std::invalid_argument(this->name() + ": zero width");
        if (width == 1)
            warnings::raise("layernorm_width1",
                            this->name() + ": width-1 layer norm always outputs its bias");
        gamma_.value = Tensor<T>::full({width}, T{1});
        beta_.value = Tensor<T>({width});
    }

    Tensor<T> forward(const Tensor<T>& x, const RunContext&) override {
        if (x.rank() < 2 || x.dim(x.rank() - 1) != width_)
            throw std::invalid_argument(this->name() + ": expected trailing dimension " +
                                        std::to_string(width_) + ", got shape " + x.shape_str());
        const std::size_t rows = x.size() / width_;
        xhat_ = Tensor<T>(x.shape());
        inv_std_.assign(rows, T{});
        Tensor<T> y(x.shape());
        for (std::size_t r = 0; r < rows; ++r) {
            const T* p = x.data() + r * width_;
            double s = 0.0;
            for (std::size_t j = 0; j < width_; ++j) s += p[j];
            const double mean = s / static_cast<double>(width_);
            double sq = 0.0;
            for (std::size_t j = 0; j < width_; ++j) {
                const double d = p[j] - mean;
                sq += d * d;
            }
            const double var = sq / static_cast<double>(width_);
            const T inv = static_cast<T>(1.0 / std::sqrt(var + eps_));
            inv_std_[r] = inv;
            T* xh = xhat_.data() + r * width_;
            T* py = y.data() + r * width_;
            for (std::size_t j = 0; j < width_; ++j) {
                const T h = static_cast<T>((p[j] - mean) * inv);
                xh[j] = h;
                py[j] = gamma_.value[j] * h + beta_.value[j];
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        if (xhat_.empty()) this->missing_forward();
        if (!grad_out.same_shape(xhat_))
            throw std::invalid_argument(this->name() + ": gradient shape " +
                                        grad_out.shape_str() + " does not match forward output");
        gamma_.ensure_grad();
        beta_.ensure_grad();
        const std::size_t rows = xhat_.size() / width_;
        Tensor<T> grad_in(xhat_.shape());
        for (std::size_t r = 0; r < rows; ++r) {
            const T* gy = grad_out.data() + r * width_;
            const T* xh = xhat_.data() + r * width_;
            T* gx = grad_in.data() + r * width_;
            // h = gy * gamma; dx = inv_std * (h - mean(h) - xhat * mean(h * xhat))
            double sum_h = 0.0, sum_h_xhat = 0.0;
            for (std::size_t j = 0; j < width_; ++j) {
                const double h = static_cast<double>(gy[j]) * gamma_.value[j];
                sum_h += h;
                sum_h_xhat += h * xh[j];
                gamma_.grad[j] += static_cast<T>(static_cast<double>(gy[j]) * xh[j]);
                beta_.grad[j] += gy[j];
            }
            const double mean_h = sum_h / static_cast<double>(width_);
            const double mean_h_xhat = sum_h_xhat / static_cast<double>(width_);
            for (std::size_t j = 0; j < width_; ++j) {
                const double h = static_cast<double>(gy[j]) * gamma_.value[j];
                gx[j] = static_cast<T>(inv_std_[r] * (h - mean_h - xh[j] * mean_h_xhat));
            }
        }
        xhat_.release();
        inv_std_.clear();
        return grad_in;
    }

    void visit_params(const ParamVisitor<T>& visit, const std::string& prefix) override {
        visit(prefix + "gamma", gamma_);
        visit(prefix + "beta", beta_);
    }

    Param<T>& gamma() { return gamma_; }
    Param<T>& beta() { return beta_; }

private:
    std::size_t width_;
    double eps_;
    Param<T> gamma_, beta_;
    Tensor<T> xhat_;
    std::vector<T> inv_std_;
};

} // namespace cocoanet
