#pragma once

#include <string>
#include <vector>

#include "layer.hpp"

namespace cocoanet {

// Cuts [N,C,H,W] into non-overlapping P x P patches and flattens each to a
// row: output [N, (H/P)*(W/P), P*P*C]. Patches are ordered row-major over the
// patch grid; inside a patch, features run pixel-major with channels last
// (feature = (r*P + c)*C + ch), matching the "flattened patch" convention a
// linear embedding expects. Backward is the exact inverse scatter.
template <typename T>
class Patchify final : public Layer<T> {
public:
    Patchify(std::string name, int patch) : Layer<T>(std::move(name)), patch_(patch) {
        if (patch <= 0) throw std::invalid_argument(this->name() + ": bad patch size");
    }

    Tensor<T> forward(const Tensor<T>& x, const RunContext&) override {
        this->check_rank(x, 4, "input");
        const std::size_t h = x.dim(2), w = x.dim(3);
        const std::size_t p = static_cast<std::size_t>(patch_);
        if (h % p != 0 || w % p != 0)
            throw std::invalid_argument(this->name() + ": spatial dims of " + x.shape_str() +
                                        " are not divisible by patch size " + std::to_string(patch_));
        in_shape_ = x.shape();
        const std::size_t n = x.dim(0), c = x.dim(1);
        const std::size_t gh = h / p, gw = w / p;
        Tensor<T> out({n, gh * gw, p * p * c});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t ch = 0; ch < c; ++ch) {
                const T* src = x.data() + (i * c + ch) * h * w;
                for (std::size_t pr = 0; pr < gh; ++pr)
                    for (std::size_t pc = 0; pc < gw; ++pc) {
                        T* row = out.data() + (i * gh * gw + pr * gw + pc) * (p * p * c);
                        for (std::size_t r = 0; r < p; ++r)
                            for (std::size_t q = 0; q < p; ++q)
                                row[(r * p + q) * c + ch] = src[(pr * p + r) * w + pc * p + q];
                    }
            }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        if (in_shape_.empty()) this->missing_forward();
        const std::size_t n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
        const std::size_t p = static_cast<std::size_t>(patch_);
        const std::size_t gh = h / p, gw = w / p;
        if (grad_out.rank() != 3 || grad_out.dim(0) != n || grad_out.dim(1) != gh * gw ||
            grad_out.dim(2) != p * p * c)
            throw std::invalid_argument(this->name() + ": gradient shape " +
                                        grad_out.shape_str() + " does not match forward output");
        Tensor<T> grad_in(in_shape_);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t ch = 0; ch < c; ++ch) {
                T* dst = grad_in.data() + (i * c + ch) * h * w;
                for (std::size_t pr = 0; pr < gh; ++pr)
                    for (std::size_t pc = 0; pc < gw; ++pc) {
                        const T* row = grad_out.data() + (i * gh * gw + pr * gw + pc) * (p * p * c);
                        for (std::size_t r = 0; r < p; ++r)
                            for (std::size_t q = 0; q < p; ++q)
                                dst[(pr * p + r) * w + pc * p + q] = row[(r * p + q) * c + ch];
                    }
            }
        in_shape_.clear();
        return grad_in;
    }

private:
    int patch_;
    std::vector<std::size_t> in_shape_;
};

} // namespace cocoanet
