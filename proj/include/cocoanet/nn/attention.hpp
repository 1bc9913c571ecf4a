#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "../core/blas.hpp"
#include "../core/rng.hpp"
#include "layer.hpp"
#include "softmax.hpp"

namespace cocoanet {

// Multi-head self-attention over [B, T, D]. Q/K/V/output projections are
// D x D; heads are views into the feature axis (stride D), so no head
// reshuffling copies are made. Scores are scaled by 1/sqrt(D/heads) per
// head, softmaxed row-wise, and optionally hit by inverted dropout on the
// probabilities before multiplying V. The pre-dropout probabilities are the
// ones exposed for inspection; each of their rows sums to 1.
template <typename T>
class MultiHeadSelfAttention final : public Layer<T> {
public:
    MultiHeadSelfAttention(std::string name, std::size_t dim, std::size_t heads,
                           double attn_dropout, Rng& rng)
        : Layer<T>(std::move(name)), dim_(dim), heads_(heads), rate_(attn_dropout) {
        if (heads == 0 || dim == 0 || dim % heads != 0)
            throw std::invalid_argument(this->name() + ": embedding dim " + std::to_string(dim) +
                                        " is not divisible by " + std::to_string(heads) + " heads");
        if (rate_ < 0.0 || rate_ >= 1.0)
            throw std::invalid_argument(this->name() + ": dropout rate must lie in [0, 1)");
        for (Param<T>* w : {&wq_, &wk_, &wv_, &wo_}) {
            w->value = Tensor<T>({dim, dim});
            init::kaiming_uniform(w->value, dim, rng);
        }
        for (Param<T>* b : {&bq_, &bk_, &bv_, &bo_}) b->value = Tensor<T>({dim});
    }

    Tensor<T> forward(const Tensor<T>& x, const RunContext& ctx) override {
        this->check_rank(x, 3, "input");
        if (x.dim(2) != dim_)
            throw std::invalid_argument(this->name() + ": expected embedding dim " +
                                        std::to_string(dim_) + ", got shape " + x.shape_str());
        const std::size_t b = x.dim(0), t = x.dim(1);
        const std::size_t dh = dim_ / heads_;
        const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

        input_ = x;
        q_ = project(x, wq_, bq_);
        k_ = project(x, wk_, bk_);
        v_ = project(x, wv_, bv_);

        attn_ = Tensor<T>({b, heads_, t, t});
        drop_active_ = (ctx.mode == Mode::Train && rate_ > 0.0);
        if (drop_active_) {
            if (!ctx.rng)
                throw std::logic_error(this->name() +
                                       ": train-mode attention dropout needs a seeded generator");
            drop_scale_.resize(attn_.size());
        }

        out_pre_ = Tensor<T>({b, t, dim_});
        const T keep_scale = static_cast<T>(1.0 / (1.0 - rate_));
        std::vector<T> ad(t * t);
        for (std::size_t ib = 0; ib < b; ++ib) {
            for (std::size_t h = 0; h < heads_; ++h) {
                const T* qh = q_.data() + ib * t * dim_ + h * dh;
                const T* kh = k_.data() + ib * t * dim_ + h * dh;
                const T* vh = v_.data() + ib * t * dim_ + h * dh;
                T* a = attn_.data() + (ib * heads_ + h) * t * t;
                // scores = scale * Qh Kh^T, then row softmax
                blas::gemm(false, true, static_cast<int>(t), static_cast<int>(t),
                           static_cast<int>(dh), scale, qh, static_cast<int>(dim_), kh,
                           static_cast<int>(dim_), T{0}, a, static_cast<int>(t));
                detail::softmax_rows(a, t, t);

                const T* probs = a;
                if (drop_active_) {
                    T* mask = drop_scale_.data() + (ib * heads_ + h) * t * t;
                    for (std::size_t i = 0; i < t * t; ++i) {
                        const T s = ctx.rng->bernoulli(rate_) ? T{0} : keep_scale;
                        mask[i] = s;
                        ad[i] = a[i] * s;
                    }
                    probs = ad.data();
                }
                blas::gemm(false, false, static_cast<int>(t), static_cast<int>(dh),
                           static_cast<int>(t), T{1}, probs, static_cast<int>(t), vh,
                           static_cast<int>(dim_), T{0},
                           out_pre_.data() + ib * t * dim_ + h * dh, static_cast<int>(dim_));
            }
        }
        return project(out_pre_, wo_, bo_);
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        if (input_.empty()) this->missing_forward();
        if (!grad_out.same_shape(input_))
            throw std::invalid_argument(this->name() + ": gradient shape " +
                                        grad_out.shape_str() + " does not match forward output");
        const std::size_t b = input_.dim(0), t = input_.dim(1);
        const std::size_t dh = dim_ / heads_;
        const std::size_t rows = b * t;
        const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

        // Output projection first: dWo += out_pre^T gy, d(out_pre) = gy Wo^T.
        Tensor<T> g_pre(out_pre_.shape());
        project_backward(out_pre_, grad_out, wo_, bo_, g_pre);

        Tensor<T> gq({b, t, dim_}), gk({b, t, dim_}), gv({b, t, dim_});
        std::vector<T> gad(t * t), ad(t * t);
        for (std::size_t ib = 0; ib < b; ++ib) {
            for (std::size_t h = 0; h < heads_; ++h) {
                const T* qh = q_.data() + ib * t * dim_ + h * dh;
                const T* kh = k_.data() + ib * t * dim_ + h * dh;
                const T* vh = v_.data() + ib * t * dim_ + h * dh;
                const T* a = attn_.data() + (ib * heads_ + h) * t * t;
                const T* gph = g_pre.data() + ib * t * dim_ + h * dh;
                const T* mask =
                    drop_active_ ? drop_scale_.data() + (ib * heads_ + h) * t * t : nullptr;

                // post-dropout probabilities actually used against V
                if (mask) {
                    for (std::size_t i = 0; i < t * t; ++i) ad[i] = a[i] * mask[i];
                } else {
                    std::copy(a, a + t * t, ad.begin());
                }

                // d(ad) = g_pre_h V^T ; dV_h = ad^T g_pre_h
                blas::gemm(false, true, static_cast<int>(t), static_cast<int>(t),
                           static_cast<int>(dh), T{1}, gph, static_cast<int>(dim_), vh,
                           static_cast<int>(dim_), T{0}, gad.data(), static_cast<int>(t));
                blas::gemm(true, false, static_cast<int>(t), static_cast<int>(dh),
                           static_cast<int>(t), T{1}, ad.data(), static_cast<int>(t), gph,
                           static_cast<int>(dim_), T{0}, gv.data() + ib * t * dim_ + h * dh,
                           static_cast<int>(dim_));

                // back through dropout, then softmax (on the pre-dropout probs)
                if (mask)
                    for (std::size_t i = 0; i < t * t; ++i) gad[i] *= mask[i];
                detail::softmax_backward_rows(a, gad.data(), gad.data(), t, t);

                // scores = scale * Qh Kh^T
                blas::gemm(false, false, static_cast<int>(t), static_cast<int>(dh),
                           static_cast<int>(t), scale, gad.data(), static_cast<int>(t), kh,
                           static_cast<int>(dim_), T{0}, gq.data() + ib * t * dim_ + h * dh,
                           static_cast<int>(dim_));
                blas::gemm(true, false, static_cast<int>(t), static_cast<int>(dh),
                           static_cast<int>(t), scale, gad.data(), static_cast<int>(t), qh,
                           static_cast<int>(dim_), T{0}, gk.data() + ib * t * dim_ + h * dh,
                           static_cast<int>(dim_));
            }
        }

        Tensor<T> grad_in(input_.shape());
        project_backward(input_, gq, wq_, bq_, grad_in, false);
        project_backward(input_, gk, wk_, bk_, grad_in, true);
        project_backward(input_, gv, wv_, bv_, grad_in, true);

        (void)rows;
        input_.release();
        q_.release();
        k_.release();
        v_.release();
        out_pre_.release();
        drop_scale_.clear();
        drop_scale_.shrink_to_fit();
        return grad_in;
    }

    void visit_params(const ParamVisitor<T>& visit, const std::string& prefix) override {
        visit(prefix + "wq", wq_);
        visit(prefix + "bq", bq_);
        visit(prefix + "wk", wk_);
        visit(prefix + "bk", bk_);
        visit(prefix + "wv", wv_);
        visit(prefix + "bv", bv_);
        visit(prefix + "wo", wo_);
        visit(prefix + "bo", bo_);
    }

    // Pre-dropout attention probabilities of the latest forward, [B,H,T,T].
    const Tensor<T>& last_attention() const { return attn_; }

    std::size_t heads() const { return heads_; }

private:
    Tensor<T> project(const Tensor<T>& x, Param<T>& w, Param<T>& bias) {
        const std::size_t rows = x.size() / dim_;
        Tensor<T> y(x.shape());
        blas::gemm(false, false, static_cast<int>(rows), static_cast<int>(dim_),
                   static_cast<int>(dim_), T{1}, x.data(), static_cast<int>(dim_),
                   w.value.data(), static_cast<int>(dim_), T{0}, y.data(),
                   static_cast<int>(dim_));
        for (std::size_t r = 0; r < rows; ++r) {
            T* row = y.data() + r * dim_;
            for (std::size_t j = 0; j < dim_; ++j) row[j] += bias.value[j];
        }
        return y;
    }

    // Accumulates dW += x^T gy and db, and writes (or adds) gy W^T into gx.
    void project_backward(const Tensor<T>& x, const Tensor<T>& gy, Param<T>& w, Param<T>& bias,
                          Tensor<T>& gx, bool accumulate_gx = false) {
        const std::size_t rows = x.size() / dim_;
        w.ensure_grad();
        bias.ensure_grad();
        blas::gemm(true, false, static_cast<int>(dim_), static_cast<int>(dim_),
                   static_cast<int>(rows), T{1}, x.data(), static_cast<int>(dim_), gy.data(),
                   static_cast<int>(dim_), T{1}, w.grad.data(), static_cast<int>(dim_));
        for (std::size_t r = 0; r < rows; ++r) {
            const T* row = gy.data() + r * dim_;
            for (std::size_t j = 0; j < dim_; ++j) bias.grad[j] += row[j];
        }
        blas::gemm(false, true, static_cast<int>(rows), static_cast<int>(dim_),
                   static_cast<int>(dim_), T{1}, gy.data(), static_cast<int>(dim_),
                   w.value.data(), static_cast<int>(dim_), accumulate_gx ? T{1} : T{0},
                   gx.data(), static_cast<int>(dim_));
    }

    std::size_t dim_, heads_;
    double rate_;
    bool drop_active_ = false;
    Param<T> wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
    Tensor<T> input_, q_, k_, v_, out_pre_, attn_;
    std::vector<T> drop_scale_;
};

} // namespace cocoanet
