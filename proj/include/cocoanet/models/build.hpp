#pragma once

#include <memory>
#include <string>

#include "../nn/activation.hpp"
#include "../nn/attention.hpp"
#include "../nn/batchnorm.hpp"
#include "../nn/bottleneck.hpp"
#include "../nn/conv.hpp"
#include "../nn/dense.hpp"
#include "../nn/dropout.hpp"
#include "../nn/patchify.hpp"
#include "../nn/pool.hpp"
#include "../nn/softmax.hpp"
#include "../nn/transformer.hpp"
#include "model.hpp"
#include "spec.hpp"

namespace cocoanet {

namespace detail {

// Thirteen 3x3 convolutions in five blocks, each block closed by 2x2/2 max
// pooling, then the 4096-4096 classifier with dropout. Convolutions keep
// their biases (no batch norm anywhere in this family).
template <typename T>
std::unique_ptr<Sequential<T>> build_vgg16(const ArchitectureSpec& spec, Rng& rng) {
    auto net = std::make_unique<Sequential<T>>("net");
    const std::size_t widths[5] = {64, 128, 256, 512, 512};
    const int convs_per_block[5] = {2, 2, 3, 3, 3};
    std::size_t in_ch = kInputChannels;
    for (int b = 0; b < 5; ++b) {
        for (int c = 0; c < convs_per_block[b]; ++c) {
            const std::string tag = std::to_string(b + 1) + "_" + std::to_string(c + 1);
            net->add(std::make_unique<Conv2d<T>>("conv" + tag, in_ch, widths[b], 3, 1, 1, true,
                                                 rng));
            net->add(std::make_unique<ReLU<T>>("relu" + tag));
            in_ch = widths[b];
        }
        net->add(std::make_unique<MaxPool2d<T>>("pool" + std::to_string(b + 1), 2, 2));
    }
    // 512 channels at 7x7 after five halvings of 224.
    const std::size_t flat = 512 * (kInputSize / 32) * (kInputSize / 32);
    net->add(std::make_unique<Flatten<T>>("flatten"));
    net->add(std::make_unique<Dense<T>>("fc1", flat, 4096, rng));
    net->add(std::make_unique<ReLU<T>>("relu_fc1"));
    net->add(std::make_unique<Dropout<T>>("drop1", spec.ff_dropout));
    net->add(std::make_unique<Dense<T>>("fc2", 4096, 4096, rng));
    net->add(std::make_unique<ReLU<T>>("relu_fc2"));
    net->add(std::make_unique<Dropout<T>>("drop2", spec.ff_dropout));
    net->add(std::make_unique<Dense<T>>("fc3", 4096, spec.num_classes, rng));
    net->add(std::make_unique<Softmax<T>>("softmax"));
    return net;
}

// 7x7/2 stem into four stages of bottlenecks (3,4,6,3); stage-opening blocks
// stride 2 except the first, which only projects 64 -> 256 channels.
template <typename T>
std::unique_ptr<Sequential<T>> build_resnet50(const ArchitectureSpec& spec, Rng& rng) {
    auto net = std::make_unique<Sequential<T>>("net");
    net->add(std::make_unique<Conv2d<T>>("stem_conv", kInputChannels, 64, 7, 2, 3, false, rng));
    net->add(std::make_unique<BatchNorm2d<T>>("stem_bn", 64));
    net->add(std::make_unique<ReLU<T>>("stem_relu"));
    net->add(std::make_unique<MaxPool2d<T>>("stem_pool", 3, 2, 1));

    const int blocks[4] = {3, 4, 6, 3};
    const std::size_t mids[4] = {64, 128, 256, 512};
    std::size_t in_ch = 64;
    for (int s = 0; s < 4; ++s) {
        auto stage = std::make_unique<Sequential<T>>("stage" + std::to_string(s + 1));
        const std::size_t out_ch = mids[s] * 4;
        for (int b = 0; b < blocks[s]; ++b) {
            const int stride = (b == 0 && s > 0) ? 2 : 1;
            stage->add(std::make_unique<Bottleneck<T>>("block" + std::to_string(b), in_ch,
                                                       mids[s], out_ch, stride, rng));
            in_ch = out_ch;
        }
        net->add(std::move(stage));
    }
    net->add(std::make_unique<GlobalAvgPool<T>>("gap"));
    net->add(std::make_unique<Dense<T>>("fc", in_ch, spec.num_classes, rng));
    net->add(std::make_unique<Softmax<T>>("softmax"));
    return net;
}

// Patch cutting, linear embedding, class token + position embeddings, a
// stack of pre-norm encoder blocks, final layer norm, then a classifier on
// the class-token state.
template <typename T>
std::unique_ptr<Sequential<T>> build_vit(const ArchitectureSpec& spec, Rng& rng) {
    const auto& v = spec.vit;
    const std::size_t patch_dim =
        static_cast<std::size_t>(v.patch_size) * v.patch_size * kInputChannels;
    auto net = std::make_unique<Sequential<T>>("net");
    net->add(std::make_unique<Patchify<T>>("patchify", v.patch_size));
    net->add(std::make_unique<Dense<T>>("patch_embed", patch_dim, v.embed_dim, rng));
    net->add(std::make_unique<TokenEmbedding<T>>("tokens", spec.num_patches(), v.embed_dim, rng));
    auto encoder = std::make_unique<Sequential<T>>("encoder");
    for (int d = 0; d < v.depth; ++d)
        encoder->add(std::make_unique<TransformerBlock<T>>(
            "block" + std::to_string(d), v.embed_dim, v.heads, v.mlp_hidden, v.attn_dropout,
            spec.ff_dropout, rng));
    net->add(std::move(encoder));
    net->add(std::make_unique<LayerNorm<T>>("ln_final", v.embed_dim));
    net->add(std::make_unique<ClassTokenPool<T>>("pool"));
    if (v.head_kind == "mlp") {
        net->add(std::make_unique<Dense<T>>("head_fc1", v.embed_dim, v.head_hidden, rng));
        net->add(std::make_unique<ReLU<T>>("head_relu"));
        net->add(std::make_unique<Dense<T>>("head_fc2", v.head_hidden, spec.num_classes, rng));
    } else {
        net->add(std::make_unique<Dense<T>>("head_fc", v.embed_dim, spec.num_classes, rng));
    }
    net->add(std::make_unique<Softmax<T>>("softmax"));
    return net;
}

} // namespace detail

// Deterministic: the same (spec, seed) always yields bit-identical initial
// weights, independent of previously built models.
template <typename T>
ModelInstance<T> build_model(const ArchitectureSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(spec.family) + 1));
    std::unique_ptr<Sequential<T>> net;
    switch (spec.family) {
        case Family::Vgg16: net = detail::build_vgg16<T>(spec, rng); break;
        case Family::Resnet50: net = detail::build_resnet50<T>(spec, rng); break;
        case Family::Vit: net = detail::build_vit<T>(spec, rng); break;
    }
    return ModelInstance<T>(spec, std::move(net));
}

} // namespace cocoanet
