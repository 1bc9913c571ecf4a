#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "layer.hpp"

namespace cocoanet {

// Per-channel batch normalization over NCHW. Train mode normalizes with the
// biased batch variance and folds the unbiased estimate into the running
// stats (momentum 0.1); eval mode uses the running stats only, making the
// layer a per-channel affine map. Train mode is the single writer of the
// running buffers, which travel through checkpoints as non-trainable params.
template <typename T>
class BatchNorm2d final : public Layer<T> {
public:
    BatchNorm2d(std::string name, std::size_t channels, double momentum = 0.1, double eps = 1e-5)
        : Layer<T>(std::move(name)), channels_(channels), momentum_(momentum), eps_(eps) {
        if (channels == 0) throw std::invalid_argument(this->name() + ": zero channels");
        gamma_.value = Tensor<T>::full({channels}, T{1});
        beta_.value = Tensor<T>({channels});
        running_mean_.value = Tensor<T>({channels});
        running_mean_.trainable = false;
        running_var_.value = Tensor<T>::full({channels}, T{1});
        running_var_.trainable = false;
    }

    Tensor<T> forward(const Tensor<T>& x, const RunContext& ctx) override {
        this->check_rank(x, 4, "input");
        if (x.dim(1) != channels_)
            throw std::invalid_argument(this->name() + ": expected " + std::to_string(channels_) +
                                        " channels, got shape " + x.shape_str());
        const std::size_t n = x.dim(0), plane = x.dim(2) * x.dim(3);
        train_mode_ = (ctx.mode == Mode::Train);
        if (train_mode_ && n < 2)
            throw std::invalid_argument(this->name() +
                                        ": batch statistics need at least 2 samples, got " +
                                        std::to_string(n));

        const std::size_t count = n * plane;
        inv_std_.assign(channels_, T{});
        xhat_ = Tensor<T>(x.shape());
        Tensor<T> y(x.shape());

        for (std::size_t c = 0; c < channels_; ++c) {
            T mean, var;
            if (train_mode_) {
                double s = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const T* p = x.data() + (i * channels_ + c) * plane;
                    for (std::size_t q = 0; q < plane; ++q) s += p[q];
                }
                mean = static_cast<T>(s / static_cast<double>(count));
                double sq = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const T* p = x.data() + (i * channels_ + c) * plane;
                    for (std::size_t q = 0; q < plane; ++q) {
                        const double d = static_cast<double>(p[q]) - static_cast<double>(mean);
                        sq += d * d;
                    }
                }
                var = static_cast<T>(sq / static_cast<double>(count));
                const double unbiased =
                    count > 1 ? sq / static_cast<double>(count - 1) : static_cast<double>(var);
                running_mean_.value[c] = static_cast<T>(
                    (1.0 - momentum_) * running_mean_.value[c] + momentum_ * mean);
                running_var_.value[c] = static_cast<T>(
                    (1.0 - momentum_) * running_var_.value[c] + momentum_ * unbiased);
            } else {
                mean = running_mean_.value[c];
                var = running_var_.value[c];
            }
            const T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var) + eps_));
            inv_std_[c] = inv;
            const T g = gamma_.value[c], b = beta_.value[c];
            for (std::size_t i = 0; i < n; ++i) {
                const T* p = x.data() + (i * channels_ + c) * plane;
                T* xh = xhat_.data() + (i * channels_ + c) * plane;
                T* py = y.data() + (i * channels_ + c) * plane;
                for (std::size_t q = 0; q < plane; ++q) {
                    const T h = (p[q] - mean) * inv;
                    xh[q] = h;
                    py[q] = g * h + b;
                }
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

        const std::size_t n = xhat_.dim(0), plane = xhat_.dim(2) * xhat_.dim(3);
        const std::size_t count = n * plane;
        Tensor<T> grad_in(xhat_.shape());

        for (std::size_t c = 0; c < channels_; ++c) {
            double sum_gy = 0.0, sum_gy_xhat = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const T* gy = grad_out.data() + (i * channels_ + c) * plane;
                const T* xh = xhat_.data() + (i * channels_ + c) * plane;
                for (std::size_t q = 0; q < plane; ++q) {
                    sum_gy += gy[q];
                    sum_gy_xhat += static_cast<double>(gy[q]) * xh[q];
                }
            }
            gamma_.grad[c] += static_cast<T>(sum_gy_xhat);
            beta_.grad[c] += static_cast<T>(sum_gy);

            const T g_inv = gamma_.value[c] * inv_std_[c];
            if (train_mode_) {
                // Batch statistics couple every element in the channel:
                // dx = gamma/std * (gy - mean(gy) - xhat * mean(gy*xhat))
                const T mean_gy = static_cast<T>(sum_gy / static_cast<double>(count));
                const T mean_gy_xhat = static_cast<T>(sum_gy_xhat / static_cast<double>(count));
                for (std::size_t i = 0; i < n; ++i) {
                    const T* gy = grad_out.data() + (i * channels_ + c) * plane;
                    const T* xh = xhat_.data() + (i * channels_ + c) * plane;
                    T* gx = grad_in.data() + (i * channels_ + c) * plane;
                    for (std::size_t q = 0; q < plane; ++q)
                        gx[q] = g_inv * (gy[q] - mean_gy - xh[q] * mean_gy_xhat);
                }
            } else {
                for (std::size_t i = 0; i < n; ++i) {
                    const T* gy = grad_out.data() + (i * channels_ + c) * plane;
                    T* gx = grad_in.data() + (i * channels_ + c) * plane;
                    for (std::size_t q = 0; q < plane; ++q) gx[q] = g_inv * gy[q];
                }
            }
        }
        xhat_.release();
        inv_std_.clear();
        return grad_in;
    }

    void visit_params(const ParamVisitor<T>& visit, const std::string& prefix) override {
        visit(prefix + "gamma", gamma_);
        visit(prefix + "beta", beta_);
        visit(prefix + "running_mean", running_mean_);
        visit(prefix + "running_var", running_var_);
    }

    Param<T>& gamma() { return gamma_; }
    Param<T>& beta() { return beta_; }
    Param<T>& running_mean() { return running_mean_; }
    Param<T>& running_var() { return running_var_; }

private:
    std::size_t channels_;
    double momentum_, eps_;
    bool train_mode_ = false;
    Param<T> gamma_, beta_, running_mean_, running_var_;
    Tensor<T> xhat_;
    std::vector<T> inv_std_;
};

} // namespace cocoanet
