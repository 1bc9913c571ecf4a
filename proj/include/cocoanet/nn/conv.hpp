#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "../core/blas.hpp"
#include "../core/rng.hpp"
#include "layer.hpp"

namespace cocoanet {

// floor((H + 2*pad - k) / stride) + 1 per spatial axis.
inline std::pair<long, long> conv_output_hw(long h, long w, int k, int stride, int pad) {
    const long oh = (h + 2L * pad - k) / stride + 1;
    const long ow = (w + 2L * pad - k) / stride + 1;
    return {oh, ow};
}

namespace detail {

// Grow-only per-thread arenas for the im2col matrices; the largest layer in
// any of the models tops out around 30 MB, so these are kept hot instead of
// reallocated per call.
template <typename T>
std::vector<T>& conv_scratch_a() {
    thread_local std::vector<T> v;
    return v;
}
template <typename T>
std::vector<T>& conv_scratch_b() {
    thread_local std::vector<T> v;
    return v;
}

// x is one image [C,H,W]; col is [C*k*k, OH*OW] row-major. Out-of-bounds
// taps contribute zeros. The stride-1 case copies contiguous spans.
template <typename T>
void im2col(const T* x, int c_in, int h, int w, int k, int stride, int pad,
            int oh, int ow, T* col) {
    const std::size_t plane = static_cast<std::size_t>(oh) * ow;
    for (int c = 0; c < c_in; ++c) {
        const T* xc = x + static_cast<std::size_t>(c) * h * w;
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                T* row = col + (static_cast<std::size_t>(c * k + ki) * k + kj) * plane;
                const int base = kj - pad;
                for (int r = 0; r < oh; ++r) {
                    const int ih = r * stride - pad + ki;
                    T* dst = row + static_cast<std::size_t>(r) * ow;
                    if (ih < 0 || ih >= h) {
                        std::fill(dst, dst + ow, T{});
                        continue;
                    }
                    const T* src = xc + static_cast<std::size_t>(ih) * w;
                    if (stride == 1) {
                        const int lo = std::max(0, -base);
                        const int hi = std::min(ow, w - base);
                        std::fill(dst, dst + std::min(std::max(lo, 0), ow), T{});
                        if (lo < hi) std::copy(src + lo + base, src + hi + base, dst + lo);
                        std::fill(dst + std::max(hi, 0), dst + ow, T{});
                    } else {
                        for (int q = 0; q < ow; ++q) {
                            const int iw = q * stride + base;
                            dst[q] = (iw >= 0 && iw < w) ? src[iw] : T{};
                        }
                    }
                }
            }
        }
    }
}

// Scatter-add inverse of im2col; x must be zeroed by the caller.
template <typename T>
void col2im(const T* col, int c_in, int h, int w, int k, int stride, int pad,
            int oh, int ow, T* x) {
    const std::size_t plane = static_cast<std::size_t>(oh) * ow;
    for (int c = 0; c < c_in; ++c) {
        T* xc = x + static_cast<std::size_t>(c) * h * w;
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const T* row = col + (static_cast<std::size_t>(c * k + ki) * k + kj) * plane;
                const int base = kj - pad;
                for (int r = 0; r < oh; ++r) {
                    const int ih = r * stride - pad + ki;
                    if (ih < 0 || ih >= h) continue;
                    T* dst = xc + static_cast<std::size_t>(ih) * w;
                    const T* src = row + static_cast<std::size_t>(r) * ow;
                    for (int q = 0; q < ow; ++q) {
                        const int iw = q * stride + base;
                        if (iw >= 0 && iw < w) dst[iw] += src[q];
                    }
                }
            }
        }
    }
}

} // namespace detail

// 2D convolution over NCHW batches, square kernel, zero padding. The inner
// product runs as one GEMM per image: weights [OC, C*k*k] times the im2col
// matrix [C*k*k, OH*OW]. Backward recomputes im2col from the cached input
// instead of caching the column matrices (they dwarf the activations).
template <typename T>
class Conv2d final : public Layer<T> {
public:
    Conv2d(std::string name, std::size_t in_ch, std::size_t out_ch, int kernel,
           int stride, int pad, bool with_bias, Rng& rng)
        : Layer<T>(std::move(name)), in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel),
          stride_(stride), pad_(pad), with_bias_(with_bias) {
        if (kernel <= 0 || stride <= 0 || pad < 0 || in_ch == 0 || out_ch == 0)
            throw std::invalid_argument(this->name() + ": bad conv geometry");
        weight_.value = Tensor<T>({out_ch, in_ch, static_cast<std::size_t>(kernel),
                                   static_cast<std::size_t>(kernel)});
        init::kaiming_uniform(weight_.value, in_ch * kernel * kernel, rng);
        if (with_bias_) bias_.value = Tensor<T>({out_ch});
    }

    Tensor<T> forward(const Tensor<T>& x, const RunContext&) override {
        this->check_rank(x, 4, "input");
        if (x.dim(1) != in_ch_) {
            throw std::invalid_argument(this->name() + ": expected " + std::to_string(in_ch_) +
                                        " input channels, got shape " + x.shape_str());
        }
        const auto n = x.dim(0);
        const auto h = static_cast<long>(x.dim(2));
        const auto w = static_cast<long>(x.dim(3));
        const auto [oh, ow] = conv_output_hw(h, w, kernel_, stride_, pad_);
        if (oh < 1 || ow < 1) {
            throw std::invalid_argument(this->name() + ": input " + x.shape_str() +
                                        " too small for kernel " + std::to_string(kernel_) +
                                        " stride " + std::to_string(stride_) +
                                        " pad " + std::to_string(pad_));
        }
        input_ = x;

        const std::size_t plane = static_cast<std::size_t>(oh) * static_cast<std::size_t>(ow);
        const std::size_t ckk = in_ch_ * kernel_ * kernel_;
        auto& col = detail::conv_scratch_a<T>();
        col.resize(ckk * plane);

        Tensor<T> out({n, out_ch_, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
        const std::size_t in_stride = in_ch_ * h * w;
        const std::size_t out_stride = out_ch_ * plane;
        for (std::size_t i = 0; i < n; ++i) {
            detail::im2col(x.data() + i * in_stride, static_cast<int>(in_ch_), static_cast<int>(h),
                           static_cast<int>(w), kernel_, stride_, pad_, static_cast<int>(oh),
                           static_cast<int>(ow), col.data());
            blas::gemm(false, false, static_cast<int>(out_ch_), static_cast<int>(plane),
                       static_cast<int>(ckk), T{1}, weight_.value.data(), static_cast<int>(ckk),
                       col.data(), static_cast<int>(plane), T{0}, out.data() + i * out_stride,
                       static_cast<int>(plane));
            if (with_bias_) {
                T* o = out.data() + i * out_stride;
                for (std::size_t oc = 0; oc < out_ch_; ++oc) {
                    const T b = bias_.value[oc];
                    T* po = o + oc * plane;
                    for (std::size_t p = 0; p < plane; ++p) po[p] += b;
                }
            }
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        if (input_.empty()) this->missing_forward();
        const auto n = input_.dim(0);
        const auto h = static_cast<long>(input_.dim(2));
        const auto w = static_cast<long>(input_.dim(3));
        const auto [oh, ow] = conv_output_hw(h, w, kernel_, stride_, pad_);
        const std::size_t plane = static_cast<std::size_t>(oh) * static_cast<std::size_t>(ow);
        if (grad_out.rank() != 4 || grad_out.dim(0) != n || grad_out.dim(1) != out_ch_ ||
            grad_out.dim(2) != static_cast<std::size_t>(oh) ||
            grad_out.dim(3) != static_cast<std::size_t>(ow)) {
            throw std::invalid_argument(this->name() + ": gradient shape " + grad_out.shape_str() +
                                        " does not match forward output");
        }

        weight_.ensure_grad();
        if (with_bias_) bias_.ensure_grad();

        const std::size_t ckk = in_ch_ * kernel_ * kernel_;
        auto& col = detail::conv_scratch_a<T>();
        auto& gcol = detail::conv_scratch_b<T>();
        col.resize(ckk * plane);
        gcol.resize(ckk * plane);

        Tensor<T> grad_in(input_.shape());
        const std::size_t in_stride = in_ch_ * h * w;
        const std::size_t out_stride = out_ch_ * plane;
        for (std::size_t i = 0; i < n; ++i) {
            const T* gy = grad_out.data() + i * out_stride;
            detail::im2col(input_.data() + i * in_stride, static_cast<int>(in_ch_),
                           static_cast<int>(h), static_cast<int>(w), kernel_, stride_, pad_,
                           static_cast<int>(oh), static_cast<int>(ow), col.data());
            // dW += gy * col^T
            blas::gemm(false, true, static_cast<int>(out_ch_), static_cast<int>(ckk),
                       static_cast<int>(plane), T{1}, gy, static_cast<int>(plane), col.data(),
                       static_cast<int>(plane), T{1}, weight_.grad.data(), static_cast<int>(ckk));
            if (with_bias_) {
                for (std::size_t oc = 0; oc < out_ch_; ++oc) {
                    T s{};
                    const T* p = gy + oc * plane;
                    for (std::size_t q = 0; q < plane; ++q) s += p[q];
                    bias_.grad[oc] += s;
                }
            }
            // d(col) = W^T * gy, scattered back through col2im
            blas::gemm(true, false, static_cast<int>(ckk), static_cast<int>(plane),
                       static_cast<int>(out_ch_), T{1}, weight_.value.data(),
                       static_cast<int>(ckk), gy, static_cast<int>(plane), T{0}, gcol.data(),
                       static_cast<int>(plane));
            detail::col2im(gcol.data(), static_cast<int>(in_ch_), static_cast<int>(h),
                           static_cast<int>(w), kernel_, stride_, pad_, static_cast<int>(oh),
                           static_cast<int>(ow), grad_in.data() + i * in_stride);
        }
        input_.release();
        return grad_in;
    }

    void visit_params(const ParamVisitor<T>& visit, const std::string& prefix) override {
        visit(prefix + "weight", weight_);
        if (with_bias_) visit(prefix + "bias", bias_);
    }

    Param<T>& weight() { return weight_; }
    Param<T>& bias() { return bias_; }

private:
    std::size_t in_ch_, out_ch_;
    int kernel_, stride_, pad_;
    bool with_bias_;
    Param<T> weight_;
    Param<T> bias_;
    Tensor<T> input_;
};

} // namespace cocoanet
