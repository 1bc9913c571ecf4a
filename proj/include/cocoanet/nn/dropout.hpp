#pragma once

#include <string>
#include <vector>

#include "layer.hpp"

namespace cocoanet {

// Inverted dropout: surviving activations are scaled by 1/(1-rate) at train
// time so eval is a bit-exact identity. Rate 0 and eval mode skip the rng
// entirely, which keeps deterministic replays possible when dropout is
// disabled mid-experiment.
template <typename T>
class Dropout final : public Layer<T> {
public:
    Dropout(std::string name, double rate) : Layer<T>(std::move(name)), rate_(rate) {
        if (rate < 0.0 || rate >= 1.0)
            throw std::invalid_argument(this->name() + ": rate must lie in [0, 1), got " +
                                        std::to_string(rate));
    }

    Tensor<T> forward(const Tensor<T>& x, const RunContext& ctx) override {
        active_ = (ctx.mode == Mode::Train && rate_ > 0.0);
        out_size_ = x.size();
        if (!active_) return x;
        if (!ctx.rng)
            throw std::logic_error(this->name() + ": train-mode dropout needs a seeded generator");
        const T keep_scale = static_cast<T>(1.0 / (1.0 - rate_));
        scale_.resize(x.size());
        Tensor<T> y(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) {
            const T s = ctx.rng->bernoulli(rate_) ? T{0} : keep_scale;
            scale_[i] = s;
            y[i] = x[i] * s;
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        if (out_size_ == 0 || grad_out.size() != out_size_)
            throw std::invalid_argument(this->name() + ": gradient shape " +
                                        grad_out.shape_str() + " does not match forward output");
        out_size_ = 0;
        if (!active_) return grad_out;
        Tensor<T> grad_in(grad_out.shape());
        for (std::size_t i = 0; i < grad_out.size(); ++i) grad_in[i] = grad_out[i] * scale_[i];
        scale_.clear();
        scale_.shrink_to_fit();
        return grad_in;
    }

    double rate() const { return rate_; }

private:
    double rate_;
    bool active_ = false;
    std::size_t out_size_ = 0;
    std::vector<T> scale_;
};

} // namespace cocoanet
