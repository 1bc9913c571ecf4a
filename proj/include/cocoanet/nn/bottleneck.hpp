#pragma once

#include <memory>
#include <string>

#include "activation.hpp"
#include "batchnorm.hpp"
#include "conv.hpp"
#include "layer.hpp"
#include "transformer.hpp"

namespace cocoanet {

// Residual bottleneck: 1x1 (stride) -> 3x3 -> 1x1 convolutions, each followed
// by batch norm, ReLU after the first two and after the residual add. The
// shortcut is the identity when shapes allow, otherwise a strided 1x1
// projection with its own batch norm. Downsampling stages stride the first
// 1x1. Convolutions carry no bias; the batch norms own the affine terms.
template <typename T>
class Bottleneck final : public Layer<T> {
public:
    Bottleneck(std::string name, std::size_t in_ch, std::size_t mid_ch, std::size_t out_ch,
               int stride, Rng& rng)
        : Layer<T>(std::move(name)),
          conv1_("conv1", in_ch, mid_ch, 1, stride, 0, false, rng),
          bn1_("bn1", mid_ch),
          relu1_("relu1"),
          conv2_("conv2", mid_ch, mid_ch, 3, 1, 1, false, rng),
          bn2_("bn2", mid_ch),
          relu2_("relu2"),
          conv3_("conv3", mid_ch, out_ch, 1, 1, 0, false, rng),
          bn3_("bn3", out_ch),
          relu_out_("relu_out"),
          projected_(in_ch != out_ch || stride != 1) {
        if (projected_) {
            proj_conv_ = std::make_unique<Conv2d<T>>("proj_conv", in_ch, out_ch, 1, stride, 0,
                                                     false, rng);
            proj_bn_ = std::make_unique<BatchNorm2d<T>>("proj_bn", out_ch);
        }
    }

    Tensor<T> forward(const Tensor<T>& x, const RunContext& ctx) override {
        Tensor<T> main = bn1_.forward(conv1_.forward(x, ctx), ctx);
        main = relu1_.forward(main, ctx);
        main = relu2_.forward(bn2_.forward(conv2_.forward(main, ctx), ctx), ctx);
        main = bn3_.forward(conv3_.forward(main, ctx), ctx);
        Tensor<T> shortcut =
            projected_ ? proj_bn_->forward(proj_conv_->forward(x, ctx), ctx) : x;
        has_state_ = true;
        return relu_out_.forward(detail::add_same_shape(main, shortcut), ctx);
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        if (!has_state_) this->missing_forward();
        has_state_ = false;
        Tensor<T> g = relu_out_.backward(grad_out);
        Tensor<T> g_main =
            conv1_.backward(bn1_.backward(relu1_.backward(conv2_.backward(bn2_.backward(
                relu2_.backward(conv3_.backward(bn3_.backward(g))))))));
        Tensor<T> g_short = projected_ ? proj_conv_->backward(proj_bn_->backward(g)) : g;
        return detail::add_same_shape(g_main, g_short);
    }

    void visit_params(const ParamVisitor<T>& visit, const std::string& prefix) override {
        conv1_.visit_params(visit, prefix + "conv1.");
        bn1_.visit_params(visit, prefix + "bn1.");
        conv2_.visit_params(visit, prefix + "conv2.");
        bn2_.visit_params(visit, prefix + "bn2.");
        conv3_.visit_params(visit, prefix + "conv3.");
        bn3_.visit_params(visit, prefix + "bn3.");
        if (projected_) {
            proj_conv_->visit_params(visit, prefix + "proj_conv.");
            proj_bn_->visit_params(visit, prefix + "proj_bn.");
        }
    }

    bool projected() const { return projected_; }

private:
    Conv2d<T> conv1_;
    BatchNorm2d<T> bn1_;
    ReLU<T> relu1_;
    Conv2d<T> conv2_;
    BatchNorm2d<T> bn2_;
    ReLU<T> relu2_;
    Conv2d<T> conv3_;
    BatchNorm2d<T> bn3_;
    ReLU<T> relu_out_;
    bool projected_;
    std::unique_ptr<Conv2d<T>> proj_conv_;
    std::unique_ptr<BatchNorm2d<T>> proj_bn_;
    bool has_state_ = false;
};

} // namespace cocoanet
