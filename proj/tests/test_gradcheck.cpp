// Finite-difference verification of every backward pass, run in double.
// Each case builds a layer, defines loss = sum(w * forward(x)) for a fixed
// random w, backprops once, then probes every coordinate of the input and
// parameters with central differences.

#include <map>
#include <numeric>

#include "support/gradcheck.hpp"

#include <cocoanet/nn/activation.hpp>
#include <cocoanet/nn/attention.hpp>
#include <cocoanet/nn/batchnorm.hpp>
#include <cocoanet/nn/bottleneck.hpp>
#include <cocoanet/nn/conv.hpp>
#include <cocoanet/nn/dense.hpp>
#include <cocoanet/nn/dropout.hpp>
#include <cocoanet/nn/layernorm.hpp>
#include <cocoanet/nn/loss.hpp>
#include <cocoanet/nn/patchify.hpp>
#include <cocoanet/nn/pool.hpp>
#include <cocoanet/nn/softmax.hpp>
#include <cocoanet/nn/transformer.hpp>

using namespace cocoanet;
using gradcheck::check_tensor;
using gradcheck::random_tensor;
using gradcheck::weighted_sum;

namespace {

std::map<std::string, Param<double>*> params_of(Layer<double>& layer) {
    std::map<std::string, Param<double>*> out;
    layer.visit_params([&](const std::string& n, Param<double>& p) { out[n] = &p; }, "");
    return out;
}

// Checks d(loss)/dx and d(loss)/dp for every trainable parameter of `layer`.
// `ctx_for_pass` builds the context fresh per forward, so stochastic layers
// replay their exact stream on every probe.
void check_layer(Layer<double>& layer, TensorD& x,
                 const std::function<RunContext()>& ctx_for_pass, Rng& rng,
                 bool check_params = true) {
    RunContext first = ctx_for_pass();
    const TensorD y0 = layer.forward(x, first);
    const TensorD w = random_tensor(y0.shape(), rng);

    gradcheck::Harness h;
    h.loss = [&]() {
        RunContext ctx = ctx_for_pass();
        return weighted_sum(layer.forward(x, ctx), w);
    };

    // One backward to populate the analytic gradients.
    TensorD grad_in;
    {
        RunContext ctx = ctx_for_pass();
        layer.forward(x, ctx);
        layer.visit_params([](const std::string&, Param<double>& p) { p.ensure_grad(); p.zero_grad(); }, "");
        grad_in = layer.backward(w);
    }

    check_tensor(h, x, grad_in, layer.name() + ".input");
    if (check_params) {
        for (auto& [name, p] : params_of(layer)) {
            if (!p->trainable) continue;
            check_tensor(h, p->value, p->grad, layer.name() + "." + name);
        }
    }
}

RunContext eval_ctx() { return {}; }
RunContext train_ctx() { return {Mode::Train, nullptr}; }

} // namespace

TEST_CASE("gradcheck dense") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(Rng::mix(100, seed));
        Dense<double> fc("fc", 4, 3, rng);
        TensorD x = random_tensor({3, 4}, rng);
        check_layer(fc, x, eval_ctx, rng);
    }
}

TEST_CASE("gradcheck dense on token batches") {
    Rng rng(7);
    Dense<double> fc("fc", 4, 2, rng);
    TensorD x = random_tensor({2, 3, 4}, rng);
    check_layer(fc, x, eval_ctx, rng);
}

TEST_CASE("gradcheck conv2d") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(Rng::mix(200, seed));
        Conv2d<double> conv("c", 2, 3, 3, 1, 1, true, rng);
        TensorD x = random_tensor({2, 2, 4, 4}, rng);
        check_layer(conv, x, eval_ctx, rng);
    }
}

TEST_CASE("gradcheck conv2d strided, no bias") {
    Rng rng(3);
    Conv2d<double> conv("c", 2, 2, 3, 2, 1, false, rng);
    TensorD x = random_tensor({1, 2, 7, 7}, rng);
    check_layer(conv, x, eval_ctx, rng);
    Conv2d<double> one("c1", 3, 4, 1, 2, 0, false, rng);
    TensorD x2 = random_tensor({2, 3, 5, 5}, rng);
    check_layer(one, x2, eval_ctx, rng);
}

TEST_CASE("gradcheck maxpool on tie-free grids") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(Rng::mix(300, seed));
        // Distinct values, shuffled: no ties, so the max is differentiable
        // at every probe.
        std::vector<double> vals(2 * 6 * 6);
        std::iota(vals.begin(), vals.end(), 0.0);
        rng.shuffle(vals);
        TensorD x({1, 2, 6, 6}, std::move(vals));
        MaxPool2d<double> pool("p", 2, 2);
        check_layer(pool, x, eval_ctx, rng);

        MaxPool2d<double> padded("p2", 3, 2, 1);
        check_layer(padded, x, eval_ctx, rng);
    }
}

TEST_CASE("gradcheck global average pool") {
    Rng rng(4);
    GlobalAvgPool<double> gap("g");
    TensorD x = random_tensor({2, 3, 4, 4}, rng);
    check_layer(gap, x, eval_ctx, rng);
}

TEST_CASE("gradcheck relu away from the kink") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(Rng::mix(400, seed));
        ReLU<double> relu("r");
        TensorD x = random_tensor({3, 5}, rng);
        // Push every element away from 0 where the subgradient is ambiguous.
        for (std::size_t i = 0; i < x.size(); ++i)
            if (std::fabs(x[i]) < 1e-3) x[i] = x[i] < 0 ? -0.5 : 0.5;
        check_layer(relu, x, eval_ctx, rng);
    }
}

TEST_CASE("gradcheck softmax") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(Rng::mix(500, seed));
        Softmax<double> sm("s");
        TensorD x = random_tensor({3, 4}, rng);
        check_layer(sm, x, eval_ctx, rng);
    }
}

TEST_CASE("gradcheck layernorm") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(Rng::mix(600, seed));
        LayerNorm<double> ln("ln", 6);
        TensorD x = random_tensor({4, 6}, rng);
        check_layer(ln, x, eval_ctx, rng);
    }
}

TEST_CASE("gradcheck batchnorm train and eval") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(Rng::mix(700, seed));
        BatchNorm2d<double> bn("bn", 2);
        TensorD x = random_tensor({4, 2, 3, 3}, rng);
        check_layer(bn, x, train_ctx, rng);
    }
    // Eval mode: gradient of a fixed affine map.
    Rng rng(701);
    BatchNorm2d<double> bn("bn", 3);
    auto params = params_of(bn);
    for (std::size_t i = 0; i < 3; ++i) {
        params.at("running_mean")->value[i] = rng.normal();
        params.at("running_var")->value[i] = 0.5 + rng.uniform();
        params.at("gamma")->value[i] = rng.normal();
        params.at("beta")->value[i] = rng.normal();
    }
    TensorD x = random_tensor({2, 3, 2, 2}, rng);
    check_layer(bn, x, eval_ctx, rng);
}

TEST_CASE("gradcheck dropout with stream replay") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng meta(Rng::mix(800, seed));
        Dropout<double> drop("d", 0.3);
        TensorD x = random_tensor({2, 10}, meta);
        auto ctx = [seed]() {
            // A fresh identically-seeded stream every pass pins the mask.
            static thread_local std::unique_ptr<Rng> holder;
            holder = std::make_unique<Rng>(Rng::mix(9000, seed));
            return RunContext{Mode::Train, holder.get()};
        };
        check_layer(drop, x, ctx, meta);
    }
}

TEST_CASE("gradcheck patchify") {
    Rng rng(5);
    Patchify<double> patch("p", 4);
    TensorD x = random_tensor({1, 3, 8, 8}, rng);
    check_layer(patch, x, eval_ctx, rng);
}

TEST_CASE("gradcheck token embedding") {
    Rng rng(6);
    TokenEmbedding<double> tok("t", 4, 6, rng);
    TensorD x = random_tensor({2, 4, 6}, rng);
    check_layer(tok, x, eval_ctx, rng);
}

TEST_CASE("gradcheck class token pool") {
    Rng rng(8);
    ClassTokenPool<double> pool("cls");
    TensorD x = random_tensor({2, 5, 3}, rng);
    check_layer(pool, x, eval_ctx, rng);
}

TEST_CASE("gradcheck multi-head self-attention") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Rng rng(Rng::mix(900, seed));
        MultiHeadSelfAttention<double> msa("msa", 8, 2, 0.0, rng);
        TensorD x = random_tensor({2, 5, 8}, rng, 0.5);
        check_layer(msa, x, eval_ctx, rng);
    }
}

TEST_CASE("gradcheck attention with dropout replay") {
    Rng rng(901);
    MultiHeadSelfAttention<double> msa("msa", 6, 2, 0.25, rng);
    TensorD x = random_tensor({1, 4, 6}, rng, 0.5);
    auto ctx = []() {
        static thread_local std::unique_ptr<Rng> holder;
        holder = std::make_unique<Rng>(4242);
        return RunContext{Mode::Train, holder.get()};
    };
    check_layer(msa, x, ctx, rng, /*check_params=*/false);
}

TEST_CASE("gradcheck transformer block") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Rng rng(Rng::mix(1000, seed));
        TransformerBlock<double> block("blk", 6, 2, 12, 0.0, 0.0, rng);
        TensorD x = random_tensor({1, 4, 6}, rng, 0.5);
        check_layer(block, x, eval_ctx, rng);
    }
}

TEST_CASE("gradcheck bottleneck with projection") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Rng rng(Rng::mix(1100, seed));
        Bottleneck<double> block("b", 4, 2, 8, 2, rng);
        TensorD x = random_tensor({2, 4, 5, 5}, rng);
        check_layer(block, x, train_ctx, rng);
    }
}

TEST_CASE("gradcheck bottleneck identity shortcut") {
    Rng rng(1101);
    Bottleneck<double> block("b", 8, 2, 8, 1, rng);
    TensorD x = random_tensor({2, 8, 4, 4}, rng);
    check_layer(block, x, train_ctx, rng);
}

TEST_CASE("gradcheck a full small stack with cross-entropy") {
    Rng rng(1200);
    Sequential<double> net("net");
    net.add(std::make_unique<Conv2d<double>>("conv", 2, 3, 3, 1, 1, true, rng));
    net.add(std::make_unique<BatchNorm2d<double>>("bn", 3));
    net.add(std::make_unique<ReLU<double>>("relu"));
    net.add(std::make_unique<MaxPool2d<double>>("pool", 2, 2));
    net.add(std::make_unique<Flatten<double>>("flat"));
    net.add(std::make_unique<Dense<double>>("fc", 3 * 3 * 3, 3, rng));
    net.add(std::make_unique<Softmax<double>>("sm"));

    TensorD x = random_tensor({2, 2, 6, 6}, rng);
    TensorD target({2, 3});
    target.at(0, 1) = 1.0;
    target.at(1, 2) = 1.0;

    gradcheck::Harness h;
    h.loss = [&]() {
        RunContext ctx{Mode::Train, nullptr};
        const TensorD probs = net.forward(x, ctx);
        return static_cast<double>(cross_entropy(probs, target));
    };

    RunContext ctx{Mode::Train, nullptr};
    const TensorD probs = net.forward(x, ctx);
    net.visit_params([](const std::string&, Param<double>& p) { p.ensure_grad(); p.zero_grad(); },
                     "");
    const TensorD grad_in = net.backward(cross_entropy_grad(probs, target));

    check_tensor(h, x, grad_in, "net.input");
    net.visit_params(
        [&](const std::string& name, Param<double>& p) {
            if (p.trainable) check_tensor(h, p.value, p.grad, "net." + name);
        },
        "");
}
