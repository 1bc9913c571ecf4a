#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "layer.hpp"

namespace cocoanet {

// Max pooling over NCHW, square window. Zero padding only widens the index
// range; padded positions are never selected (they are skipped, not treated
// as zeros), which requires pad <= window/2 so every output sees at least one
// real element. Ties go to the first element in row-major scan order.
template <typename T>
class MaxPool2d final : public Layer<T> {
public:
    MaxPool2d(std::string name, int window, int stride, int pad = 0)
        : Layer<T>(std::move(name)), window_(window), stride_(stride), pad_(pad) {
        if (window <= 0 || stride <= 0 || pad < 0 || pad > window / 2)
            throw std::invalid_argument(this->name() + ": bad pooling geometry");
    }

    Tensor<T> forward(const Tensor<T>& x, const RunContext&) override {
        this->check_rank(x, 4, "input");
        const long h = static_cast<long>(x.dim(2));
        const long w = static_cast<long>(x.dim(3));
        const long oh = (h + 2L * pad_ - window_) / stride_ + 1;
        const long ow = (w + 2L * pad_ - window_) / stride_ + 1;
        if (oh < 1 || ow < 1)
            throw std::invalid_argument(this->name() + ": input " + x.shape_str() +
                                        " smaller than pooling window");
        const std::size_t n = x.dim(0), c = x.dim(1);
        in_shape_ = x.shape();
        Tensor<T> out({n, c, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
        argmax_.assign(out.size(), 0);

        const std::size_t plane = static_cast<std::size_t>(h) * w;
        std::size_t o = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                const T* p = x.data() + (i * c + ch) * plane;
                for (long r = 0; r < oh; ++r) {
                    for (long q = 0; q < ow; ++q, ++o) {
                        T best = -std::numeric_limits<T>::infinity();
                        std::int32_t best_ix = -1;
                        for (int ki = 0; ki < window_; ++ki) {
                            const long ih = r * stride_ - pad_ + ki;
                            if (ih < 0 || ih >= h) continue;
                            for (int kj = 0; kj < window_; ++kj) {
                                const long iw = q * stride_ - pad_ + kj;
                                if (iw < 0 || iw >= w) continue;
                                const T v = p[ih * w + iw];
                                if (v > best) {
                                    best = v;
                                    best_ix = static_cast<std::int32_t>(ih * w + iw);
                                }
                            }
                        }
                        out[o] = best;
                        argmax_[o] = best_ix;
                    }
                }
            }
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        if (in_shape_.empty()) this->missing_forward();
        if (grad_out.size() != argmax_.size())
            throw std::invalid_argument(this->name() + ": gradient shape " +
                                        grad_out.shape_str() + " does not match forward output");
        Tensor<T> grad_in(in_shape_);
        const std::size_t n = in_shape_[0], c = in_shape_[1];
        const std::size_t plane = in_shape_[2] * in_shape_[3];
        const std::size_t out_plane = grad_out.size() / (n * c);
        std::size_t o = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t ch = 0; ch < c; ++ch) {
                T* g = grad_in.data() + (i * c + ch) * plane;
                for (std::size_t q = 0; q < out_plane; ++q, ++o) g[argmax_[o]] += grad_out[o];
            }
        in_shape_.clear();
        argmax_.clear();
        argmax_.shrink_to_fit();
        return grad_in;
    }

private:
    int window_, stride_, pad_;
    std::vector<std::size_t> in_shape_;
    std::vector<std::int32_t> argmax_;
};

// [N,C,H,W] -> [N,C] spatial mean.
template <typename T>
class GlobalAvgPool final : public Layer<T> {
public:
    explicit GlobalAvgPool(std::string name) : Layer<T>(std::move(name)) {}

    Tensor<T> forward(const Tensor<T>& x, const RunContext&) override {
        this->check_rank(x, 4, "input");
        in_shape_ = x.shape();
        const std::size_t n = x.dim(0), c = x.dim(1);
        const std::size_t plane = x.dim(2) * x.dim(3);
        Tensor<T> out({n, c});
        const T inv = T{1} / static_cast<T>(plane);
        for (std::size_t i = 0; i < n * c; ++i) {
            const T* p = x.data() + i * plane;
            T s{};
            for (std::size_t q = 0; q < plane; ++q) s += p[q];
            out[i] = s * inv;
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        if (in_shape_.empty()) this->missing_forward();
        Tensor<T> grad_in(in_shape_);
        const std::size_t plane = in_shape_[2] * in_shape_[3];
        const T inv = T{1} / static_cast<T>(plane);
        for (std::size_t i = 0; i < grad_out.size(); ++i) {
            T* g = grad_in.data() + i * plane;
            const T v = grad_out[i] * inv;
            for (std::size_t q = 0; q < plane; ++q) g[q] = v;
        }
        in_shape_.clear();
        return grad_in;
    }

private:
    std::vector<std::size_t> in_shape_;
};

} // namespace cocoanet
