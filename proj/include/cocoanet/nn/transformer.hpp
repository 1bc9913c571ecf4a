#pragma once

#include <memory>
#include <string>

#include "activation.hpp"
#include "attention.hpp"
#include "dense.hpp"
#include "dropout.hpp"
#include "layer.hpp"
#include "layernorm.hpp"

namespace cocoanet {

namespace detail {
template <typename T>
Tensor<T> add_same_shape(const Tensor<T>& a, const Tensor<T>& b) {
    Tensor<T> y(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
    return y;
}
} // namespace detail

// Prepends the learnable class token and adds learned 1D position embeddings:
// [B, N, D] -> [B, N+1, D] with the class token at index 0. Both embeddings
// are ordinary trainable params; position row 0 belongs to the class token.
template <typename T>
class TokenEmbedding final : public Layer<T> {
public:
    TokenEmbedding(std::string name, std::size_t num_patches, std::size_t dim, Rng& rng)
        : Layer<T>(std::move(name)), num_patches_(num_patches), dim_(dim) {
        cls_.value = Tensor<T>({1, dim});
        init::trunc_normal(cls_.value, 0.02, rng);
        pos_.value = Tensor<T>({num_patches + 1, dim});
        init::trunc_normal(pos_.value, 0.02, rng);
    }

    Tensor<T> forward(const Tensor<T>& x, const RunContext&) override {
        this->check_rank(x, 3, "input");
        if (x.dim(1) != num_patches_ || x.dim(2) != dim_)
            throw std::invalid_argument(this->name() + ": expected [batch, " +
                                        std::to_string(num_patches_) + ", " + std::to_string(dim_) +
                                        "], got " + x.shape_str());
        batch_ = x.dim(0);
        Tensor<T> y({batch_, num_patches_ + 1, dim_});
        for (std::size_t b = 0; b < batch_; ++b) {
            T* out = y.data() + b * (num_patches_ + 1) * dim_;
            for (std::size_t j = 0; j < dim_; ++j) out[j] = cls_.value[j] + pos_.value[j];
            const T* in = x.data() + b * num_patches_ * dim_;
            for (std::size_t t = 0; t < num_patches_; ++t) {
                const T* pos = pos_.value.data() + (t + 1) * dim_;
                T* row = out + (t + 1) * dim_;
                const T* src = in + t * dim_;
                for (std::size_t j = 0; j < dim_; ++j) row[j] = src[j] + pos[j];
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        if (batch_ == 0) this->missing_forward();
        if (grad_out.rank() != 3 || grad_out.dim(0) != batch_ ||
            grad_out.dim(1) != num_patches_ + 1 || grad_out.dim(2) != dim_)
            throw std::invalid_argument(this->name() + ": gradient shape " +
                                        grad_out.shape_str() + " does not match forward output");
        cls_.ensure_grad();
        pos_.ensure_grad();
        Tensor<T> grad_in({batch_, num_patches_, dim_});
        for (std::size_t b = 0; b < batch_; ++b) {
            const T* g = grad_out.data() + b * (num_patches_ + 1) * dim_;
            for (std::size_t j = 0; j < dim_; ++j) cls_.grad[j] += g[j];
            for (std::size_t t = 0; t <= num_patches_; ++t) {
                const T* row = g + t * dim_;
                T* gp = pos_.grad.data() + t * dim_;
                for (std::size_t j = 0; j < dim_; ++j) gp[j] += row[j];
            }
            T* gi = grad_in.data() + b * num_patches_ * dim_;
            std::copy(g + dim_, g + (num_patches_ + 1) * dim_, gi);
        }
        batch_ = 0;
        return grad_in;
    }

    void visit_params(const ParamVisitor<T>& visit, const std::string& prefix) override {
        visit(prefix + "cls", cls_);
        visit(prefix + "pos", pos_);
    }

private:
    std::size_t num_patches_, dim_;
    std::size_t batch_ = 0;
    Param<T> cls_, pos_;
};

// Picks the class-token state: [B, T, D] -> [B, D] at index 0.
template <typename T>
class ClassTokenPool final : public Layer<T> {
public:
    explicit ClassTokenPool(std::string name) : Layer<T>(std::move(name)) {}

    Tensor<T> forward(const Tensor<T>& x, const RunContext&) override {
        this->check_rank(x, 3, "input");
        in_shape_ = x.shape();
        const std::size_t b = x.dim(0), t = x.dim(1), d = x.dim(2);
        Tensor<T> y({b, d});
        for (std::size_t i = 0; i < b; ++i)
            std::copy(x.data() + i * t * d, x.data() + i * t * d + d, y.data() + i * d);
        return y;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        if (in_shape_.empty()) this->missing_forward();
        const std::size_t b = in_shape_[0], t = in_shape_[1], d = in_shape_[2];
        if (grad_out.rank() != 2 || grad_out.dim(0) != b || grad_out.dim(1) != d)
            throw std::invalid_argument(this->name() + ": gradient shape " +
                                        grad_out.shape_str() + " does not match forward output");
        Tensor<T> grad_in(in_shape_);
        for (std::size_t i = 0; i < b; ++i)
            std::copy(grad_out.data() + i * d, grad_out.data() + (i + 1) * d,
                      grad_in.data() + i * t * d);
        in_shape_.clear();
        return grad_in;
    }

private:
    std::vector<std::size_t> in_shape_;
};

// Pre-norm encoder block: x + MSA(LN(x)), then + MLP(LN(.)) where the MLP is
// Dense -> ReLU -> Dropout -> Dense. Residual wiring lives here so the block
// composes like any other layer.
template <typename T>
class TransformerBlock final : public Layer<T> {
public:
    TransformerBlock(std::string name, std::size_t dim, std::size_t heads,
                     std::size_t mlp_hidden, double attn_dropout, double ff_dropout, Rng& rng)
        : Layer<T>(std::move(name)),
          ln1_("ln1", dim),
          msa_("msa", dim, heads, attn_dropout, rng),
          ln2_("ln2", dim),
          fc1_("fc1", dim, mlp_hidden, rng),
          act_("relu"),
          drop_("drop", ff_dropout),
          fc2_("fc2", mlp_hidden, dim, rng) {}

    Tensor<T> forward(const Tensor<T>& x, const RunContext& ctx) override {
        Tensor<T> a = detail::add_same_shape(x, msa_.forward(ln1_.forward(x, ctx), ctx));
        Tensor<T> m = fc2_.forward(
            drop_.forward(act_.forward(fc1_.forward(ln2_.forward(a, ctx), ctx), ctx), ctx), ctx);
        Tensor<T> y = detail::add_same_shape(a, m);
        has_state_ = true;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        if (!has_state_) this->missing_forward();
        has_state_ = false;
        Tensor<T> g = ln2_.backward(
            fc1_.backward(act_.backward(drop_.backward(fc2_.backward(grad_out)))));
        Tensor<T> ga = detail::add_same_shape(grad_out, g);
        Tensor<T> g2 = ln1_.backward(msa_.backward(ga));
        return detail::add_same_shape(ga, g2);
    }

    void visit_params(const ParamVisitor<T>& visit, const std::string& prefix) override {
        ln1_.visit_params(visit, prefix + "ln1.");
        msa_.visit_params(visit, prefix + "msa.");
        ln2_.visit_params(visit, prefix + "ln2.");
        fc1_.visit_params(visit, prefix + "fc1.");
        fc2_.visit_params(visit, prefix + "fc2.");
    }

    MultiHeadSelfAttention<T>& attention() { return msa_; }

private:
    LayerNorm<T> ln1_;
    MultiHeadSelfAttention<T> msa_;
    LayerNorm<T> ln2_;
    Dense<T> fc1_;
    ReLU<T> act_;
    Dropout<T> drop_;
    Dense<T> fc2_;
    bool has_state_ = false;
};

} // namespace cocoanet
