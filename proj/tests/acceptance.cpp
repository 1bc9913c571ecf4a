// Release gate for the toolkit. Each numbered criterion prints one verdict
// line ("criterion N: PASS/FAIL - detail") as it finishes; a recap block and
// an acceptance_report.txt file are emitted when the run ends. Criterion 1
// (training the full KaraAgroAI corpus end to end, hours of compute) is
// reported as SKIPPED and lives in the README as a documented recipe; the
// gating checks are criteria 2-9.
//
// Criterion 6 compares the split tool against reference per-class split
// tallies whose class fractions are not all equal; a single rounded-fraction
// rule cannot land within the stated tolerance of them. The check is
// computed and reported faithfully (expected verdict: FAIL) rather than
// widened until it passes; determinism and self-consistency of the split
// rule are still asserted hard.

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "support/gradcheck.hpp"

#include <cocoanet/core/jsonutil.hpp>
#include <cocoanet/data/image.hpp>
#include <cocoanet/data/loader.hpp>
#include <cocoanet/data/manifest.hpp>
#include <cocoanet/data/preprocess.hpp>
#include <cocoanet/eval/metrics.hpp>
#include <cocoanet/models/build.hpp>
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
#include <cocoanet/train/adam.hpp>
#include <cocoanet/train/checkpoint.hpp>
#include <cocoanet/train/schedule.hpp>
#include <cocoanet/train/trainer.hpp>

using namespace cocoanet;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------- verdicts

struct Verdict {
    std::string status; // "PASS" | "FAIL" | "SKIPPED"
    std::string detail;
};

std::map<int, Verdict>& verdicts() {
    static std::map<int, Verdict> v;
    return v;
}

// Note the distinct names: a "PASS"/"FAIL" literal passed to an overload
// set with a bool parameter would bind to bool (pointer conversion beats
// the user-defined one to std::string) and recurse.
void record_status(int id, const std::string& status, const std::string& detail) {
    verdicts()[id] = {status, detail};
    std::printf("criterion %d: %s - %s\n", id, status.c_str(), detail.c_str());
    std::fflush(stdout);
}

void record(int id, bool pass, const std::string& detail) {
    record_status(id, pass ? "PASS" : "FAIL", detail);
}

std::string with_commas(std::size_t n) {
    std::string s = std::to_string(n);
    for (auto i = static_cast<std::ptrdiff_t>(s.size()) - 3; i > 0; i -= 3)
        s.insert(static_cast<std::size_t>(i), ",");
    return s;
}

std::string one_decimal(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

fs::path fresh_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("cocoanet_acceptance_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// ------------------------------------------------- gradient audit plumbing

struct GradStats {
    double max_err = 0.0;
    std::size_t coords = 0;
};

std::map<std::string, Param<double>*> params_of(Layer<double>& layer) {
    std::map<std::string, Param<double>*> out;
    layer.visit_params([&](const std::string& n, Param<double>& p) { out[n] = &p; }, "");
    return out;
}

// Central finite differences on every coordinate of `x`, compared against
// the analytic gradient already left in `grad`.
void probe_tensor(const gradcheck::Harness& h, TensorD& x, const TensorD& grad,
                  const std::string& what, GradStats& st) {
    REQUIRE(grad.same_shape(x));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + gradcheck::kStep;
        const double up = h.loss();
        x[i] = keep - gradcheck::kStep;
        const double down = h.loss();
        x[i] = keep;
        const double numeric = (up - down) / (2.0 * gradcheck::kStep);
        const double err = gradcheck::rel_err(grad[i], numeric);
        st.max_err = std::max(st.max_err, err);
        ++st.coords;
        INFO(what << "[" << i << "]: analytic " << grad[i] << " numeric " << numeric
                  << " rel err " << err);
        REQUIRE(err < gradcheck::kTol);
    }
}

// Checks d(loss)/dx and d(loss)/dp for a layer under loss = sum(w * y).
// `ctx_for_pass` is rebuilt per forward so stochastic layers replay their
// stream bit for bit on every probe.
void audit_layer(Layer<double>& layer, TensorD& x,
                 const std::function<RunContext()>& ctx_for_pass, Rng& rng, GradStats& st,
                 bool check_params = true) {
    RunContext first = ctx_for_pass();
    const TensorD y0 = layer.forward(x, first);
    const TensorD w = gradcheck::random_tensor(y0.shape(), rng);

    gradcheck::Harness h;
    h.loss = [&]() {
        RunContext ctx = ctx_for_pass();
        return gradcheck::weighted_sum(layer.forward(x, ctx), w);
    };

    TensorD grad_in;
    {
        RunContext ctx = ctx_for_pass();
        layer.forward(x, ctx);
        layer.visit_params(
            [](const std::string&, Param<double>& p) {
                p.ensure_grad();
                p.zero_grad();
            },
            "");
        grad_in = layer.backward(w);
    }

    probe_tensor(h, x, grad_in, layer.name() + ".input", st);
    if (check_params) {
        for (auto& [name, p] : params_of(layer)) {
            if (!p->trainable) continue;
            probe_tensor(h, p->value, p->grad, layer.name() + "." + name, st);
        }
    }
}

RunContext eval_ctx() { return {}; }
RunContext train_ctx() { return {Mode::Train, nullptr}; }

// -------------------------------------------------------- synthetic images

Image noisy_solid(int w, int h, std::array<int, 3> base, Rng& rng) {
    Image img;
    img.width = w;
    img.height = h;
    img.rgb.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < img.rgb.size(); ++i) {
        const int noise = static_cast<int>(rng.uniform(-10.0, 10.0));
        img.rgb[i] = static_cast<std::uint8_t>(std::clamp(base[i % 3] + noise, 0, 255));
    }
    return img;
}

// Three maximally separable classes: 20 images each, 64x64, one dominant
// channel per class plus mild pixel noise. The eval resize path upscales
// them to the 224x224 network input.
DatasetManifest write_overfit_dataset(const fs::path& root) {
    const std::vector<std::string> classes = {"blue_leaf", "green_leaf", "red_leaf"};
    const std::array<std::array<int, 3>, 3> bases = {{{40, 40, 200}, {40, 200, 40}, {200, 40, 40}}};
    DatasetManifest m;
    m.class_names = classes;
    m.seed = 42;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        fs::create_directories(root / classes[c]);
        for (int i = 0; i < 20; ++i) {
            Rng rng(Rng::mix(99, c, static_cast<std::uint64_t>(i)));
            const Image img = noisy_solid(64, 64, bases[c], rng);
            const std::string rel = classes[c] + "/img_" + std::to_string(i) + ".png";
            encode_png(root / rel, img);
            m.entries.push_back({rel, classes[c], Split::Train});
        }
    }
    return m;
}

// ------------------------------------------------------------ overfit loop

struct OverfitResult {
    bool reached = false;
    int steps = 0;
    double secs = 0.0;
};

// Plain training loop: shuffled batches of 16, cross-entropy, Adam(0.9,
// 0.999), constant lr. Accuracy is a sliding window over the last 4 train
// batches (64 >= 60 samples, so a full pass over the set); success means
// every sample in the window was classified correctly before its update.
OverfitResult run_overfit(Family family, double lr, const SampleSource& source) {
    constexpr std::uint64_t kSeed = 42;
    constexpr int kMaxSteps = 200;
    constexpr double kMaxSecs = 600.0;

    ArchitectureSpec spec = ArchitectureSpec::make_default(family);
    spec.num_classes = 3;
    spec.ff_dropout = 0.0;
    spec.vit.attn_dropout = 0.0;

    ModelInstance<float> model = build_model<float>(spec, kSeed);
    model.set_mode(Mode::Train);
    std::vector<NamedParam<float>> named;
    model.visit_params([&](const std::string& n, Param<float>& p) {
        if (p.trainable) named.push_back({n, &p});
    });
    Adam<float> opt(0.9, 0.999, 1e-8, 0.0);

    std::vector<std::size_t> pool(source.manifest().entries.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});

    const auto t0 = Clock::now();
    OverfitResult res;
    std::deque<std::pair<int, int>> window; // (correct, batch size)
    for (long epoch = 0; !res.reached && res.steps < kMaxSteps; ++epoch) {
        Rng order(Rng::mix(kSeed, 0x62617463ull, static_cast<std::uint64_t>(epoch)));
        const auto plan = plan_batches(pool, 16, order);
        for (std::size_t bi = 0; bi < plan.size(); ++bi) {
            auto [images, targets] = source.assemble(plan[bi], /*train=*/true, kSeed, epoch);
            Rng drop(Rng::mix(kSeed, 0x64726F70ull, static_cast<std::uint64_t>(epoch), bi));
            const TensorF probs = model.forward(images, &drop);

            int correct = 0;
            for (std::size_t r = 0; r < plan[bi].size(); ++r)
                if (argmax_row(probs, r) == argmax_row(targets, r)) ++correct;
            window.emplace_back(correct, static_cast<int>(plan[bi].size()));
            if (window.size() > 4) window.pop_front();

            int win_correct = 0, win_total = 0;
            for (const auto& [c, n] : window) {
                win_correct += c;
                win_total += n;
            }
            if (window.size() == 4 && win_correct == win_total) {
                res.reached = true;
                break;
            }

            const TensorF grad = cross_entropy_grad(probs, targets);
            model.zero_grads();
            model.backward(grad);
            opt.step(named, lr);
            ++res.steps;
            if (res.steps >= kMaxSteps || seconds_since(t0) > kMaxSecs) break;
        }
        if (seconds_since(t0) > kMaxSecs) break;
    }
    res.secs = seconds_since(t0);
    return res;
}

// --------------------------------------------------- checkpoint byte tools

std::vector<unsigned char> slurp(const fs::path& f) {
    std::ifstream is(f, std::ios::binary);
    REQUIRE(is.good());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& f, const std::vector<unsigned char>& bytes) {
    std::ofstream os(f, std::ios::binary | std::ios::trunc);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    REQUIRE(os.good());
}

std::uint64_t header_len_of(const std::vector<unsigned char>& bytes) {
    REQUIRE(bytes.size() >= 12);
    std::uint64_t len = 0;
    for (int i = 7; i >= 0; --i) len = (len << 8) | bytes[4 + static_cast<std::size_t>(i)];
    return len;
}

std::vector<unsigned char> set_header_len(std::vector<unsigned char> bytes, std::uint64_t len) {
    for (int i = 0; i < 8; ++i)
        bytes[4 + static_cast<std::size_t>(i)] = static_cast<unsigned char>((len >> (8 * i)) & 0xff);
    return bytes;
}

// Re-writes the JSON header through `mutate`, fixing up the stored length.
std::vector<unsigned char> with_header(const std::vector<unsigned char>& base,
                                       const std::function<void(jsonutil::json&)>& mutate) {
    const std::uint64_t len = header_len_of(base);
    jsonutil::json j =
        jsonutil::json::parse(std::string(base.begin() + 12, base.begin() + 12 + static_cast<std::ptrdiff_t>(len)));
    mutate(j);
    const std::string s = j.dump();
    std::vector<unsigned char> out(base.begin(), base.begin() + 4);
    out.resize(12);
    for (int i = 0; i < 8; ++i)
        out[4 + static_cast<std::size_t>(i)] =
            static_cast<unsigned char>((static_cast<std::uint64_t>(s.size()) >> (8 * i)) & 0xff);
    out.insert(out.end(), s.begin(), s.end());
    out.insert(out.end(), base.begin() + 12 + static_cast<std::ptrdiff_t>(len), base.end());
    return out;
}

CheckpointErrorKind kind_of(const fs::path& f) {
    try {
        (void)load_checkpoint(f);
    } catch (const CheckpointError& e) {
        return e.kind();
    }
    FAIL("expected a checkpoint error for " << f.string());
    return CheckpointErrorKind::Io; // unreachable
}

ArchitectureSpec tiny_vit_spec() {
    ArchitectureSpec s = ArchitectureSpec::make_default(Family::Vit);
    s.num_classes = 3;
    s.ff_dropout = 0.2;
    s.vit.patch_size = 32;
    s.vit.depth = 1;
    s.vit.embed_dim = 32;
    s.vit.heads = 2;
    s.vit.mlp_hidden = 16;
    s.vit.head_kind = "linear";
    return s;
}

std::vector<std::pair<std::string, const Tensor<float>*>> dump_params(ModelInstance<float>& m) {
    std::vector<std::pair<std::string, const Tensor<float>*>> out;
    m.visit_params([&](const std::string& n, Param<float>& p) { out.emplace_back(n, &p.value); });
    return out;
}

// Runs the CLI binary through the shell; returns its exit status.
int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + COCOANET_CLI_PATH + "\" " + args;
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

} // namespace

// --------------------------------------------------------------- criteria

TEST_CASE("criterion 1: full-scale training is a documented recipe") {
    record_status(1, "SKIPPED",
                  "training the full 17,703-image KaraAgroAI corpus takes hours of compute; the "
                  "README documents the recipe and the reference results it targets");
}

TEST_CASE("criterion 2: finite-difference gradient audit") {
    const auto t0 = Clock::now();
    GradStats st;
    int suites = 0;

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        // Dense, on row batches and on token batches.
        {
            Rng rng(Rng::mix(2100, seed));
            Dense<double> fc("fc", 4, 3, rng);
            TensorD x = gradcheck::random_tensor({3, 4}, rng);
            audit_layer(fc, x, eval_ctx, rng, st);
            Dense<double> tok("fct", 4, 2, rng);
            TensorD xt = gradcheck::random_tensor({2, 3, 4}, rng);
            audit_layer(tok, xt, eval_ctx, rng, st);
        }
        // Convolutions: padded 3x3 with bias, strided 3x3 without, 1x1.
        {
            Rng rng(Rng::mix(2200, seed));
            Conv2d<double> conv("c", 2, 3, 3, 1, 1, true, rng);
            TensorD x = gradcheck::random_tensor({2, 2, 4, 4}, rng);
            audit_layer(conv, x, eval_ctx, rng, st);
            Conv2d<double> strided("cs", 2, 2, 3, 2, 1, false, rng);
            TensorD xs = gradcheck::random_tensor({1, 2, 7, 7}, rng);
            audit_layer(strided, xs, eval_ctx, rng, st);
            Conv2d<double> one("c1", 3, 4, 1, 2, 0, false, rng);
            TensorD x1 = gradcheck::random_tensor({2, 3, 5, 5}, rng);
            audit_layer(one, x1, eval_ctx, rng, st);
        }
        // Max pooling on tie-free grids (distinct shuffled values).
        {
            Rng rng(Rng::mix(2300, seed));
            std::vector<double> vals(2 * 6 * 6);
            std::iota(vals.begin(), vals.end(), 0.0);
            rng.shuffle(vals);
            TensorD x({1, 2, 6, 6}, std::move(vals));
            MaxPool2d<double> pool("p", 2, 2);
            audit_layer(pool, x, eval_ctx, rng, st);
            MaxPool2d<double> padded("p2", 3, 2, 1);
            audit_layer(padded, x, eval_ctx, rng, st);
        }
        // Pooling, activations, normalizers.
        {
            Rng rng(Rng::mix(2400, seed));
            GlobalAvgPool<double> gap("g");
            TensorD xg = gradcheck::random_tensor({2, 3, 4, 4}, rng);
            audit_layer(gap, xg, eval_ctx, rng, st);

            ReLU<double> relu("r");
            TensorD xr = gradcheck::random_tensor({3, 5}, rng);
            for (std::size_t i = 0; i < xr.size(); ++i)
                if (std::fabs(xr[i]) < 1e-3) xr[i] = xr[i] < 0 ? -0.5 : 0.5;
            audit_layer(relu, xr, eval_ctx, rng, st);

            Softmax<double> sm("s");
            TensorD xm = gradcheck::random_tensor({3, 4}, rng);
            audit_layer(sm, xm, eval_ctx, rng, st);

            LayerNorm<double> ln("ln", 6);
            TensorD xl = gradcheck::random_tensor({4, 6}, rng);
            audit_layer(ln, xl, eval_ctx, rng, st);

            BatchNorm2d<double> bn("bn", 2);
            TensorD xb = gradcheck::random_tensor({4, 2, 3, 3}, rng);
            audit_layer(bn, xb, train_ctx, rng, st);
        }
        // Batchnorm in eval mode: a fixed affine map.
        {
            Rng rng(Rng::mix(2450, seed));
            BatchNorm2d<double> bn("bne", 3);
            auto params = params_of(bn);
            for (std::size_t i = 0; i < 3; ++i) {
                params.at("running_mean")->value[i] = rng.normal();
                params.at("running_var")->value[i] = 0.5 + rng.uniform();
                params.at("gamma")->value[i] = rng.normal();
                params.at("beta")->value[i] = rng.normal();
            }
            TensorD x = gradcheck::random_tensor({2, 3, 2, 2}, rng);
            audit_layer(bn, x, eval_ctx, rng, st);
        }
        // Dropout: the mask is pinned by replaying an identically seeded
        // stream on every probe.
        {
            Rng meta(Rng::mix(2500, seed));
            Dropout<double> drop("d", 0.3);
            TensorD x = gradcheck::random_tensor({2, 10}, meta);
            auto ctx = [seed]() {
                static thread_local std::unique_ptr<Rng> holder;
                holder = std::make_unique<Rng>(Rng::mix(9100, seed));
                return RunContext{Mode::Train, holder.get()};
            };
            audit_layer(drop, x, ctx, meta, st);
        }
        // Transformer pieces.
        {
            Rng rng(Rng::mix(2600, seed));
            Patchify<double> patch("pt", 4);
            TensorD xp = gradcheck::random_tensor({1, 3, 8, 8}, rng);
            audit_layer(patch, xp, eval_ctx, rng, st);

            TokenEmbedding<double> tok("te", 4, 6, rng);
            TensorD xe = gradcheck::random_tensor({2, 4, 6}, rng);
            audit_layer(tok, xe, eval_ctx, rng, st);

            ClassTokenPool<double> pool("cls");
            TensorD xc = gradcheck::random_tensor({2, 5, 3}, rng);
            audit_layer(pool, xc, eval_ctx, rng, st);

            MultiHeadSelfAttention<double> msa("msa", 8, 2, 0.0, rng);
            TensorD xa = gradcheck::random_tensor({2, 5, 8}, rng, 0.5);
            audit_layer(msa, xa, eval_ctx, rng, st);

            TransformerBlock<double> block("blk", 6, 2, 12, 0.0, 0.0, rng);
            TensorD xt = gradcheck::random_tensor({1, 4, 6}, rng, 0.5);
            audit_layer(block, xt, eval_ctx, rng, st);
        }
        // Attention dropout, stream-replayed; parameters are covered by the
        // deterministic attention audit above.
        {
            Rng rng(Rng::mix(2700, seed));
            MultiHeadSelfAttention<double> msa("msad", 6, 2, 0.25, rng);
            TensorD x = gradcheck::random_tensor({1, 4, 6}, rng, 0.5);
            auto ctx = [seed]() {
                static thread_local std::unique_ptr<Rng> holder;
                holder = std::make_unique<Rng>(Rng::mix(9200, seed));
                return RunContext{Mode::Train, holder.get()};
            };
            audit_layer(msa, x, ctx, rng, st, /*check_params=*/false);
        }
        // Residual bottlenecks, with and without a projection shortcut.
        {
            Rng rng(Rng::mix(2800, seed));
            Bottleneck<double> proj("b", 4, 2, 8, 2, rng);
            TensorD xp = gradcheck::random_tensor({2, 4, 5, 5}, rng);
            audit_layer(proj, xp, train_ctx, rng, st);
            Bottleneck<double> ident("bi", 8, 2, 8, 1, rng);
            TensorD xi = gradcheck::random_tensor({2, 8, 4, 4}, rng);
            audit_layer(ident, xi, train_ctx, rng, st);
        }
        // A conv stack under the actual cross-entropy loss.
        {
            Rng rng(Rng::mix(2900, seed));
            Sequential<double> net("net");
            net.add(std::make_unique<Conv2d<double>>("conv", 2, 3, 3, 1, 1, true, rng));
            net.add(std::make_unique<BatchNorm2d<double>>("bn", 3));
            net.add(std::make_unique<ReLU<double>>("relu"));
            net.add(std::make_unique<MaxPool2d<double>>("pool", 2, 2));
            net.add(std::make_unique<Flatten<double>>("flat"));
            net.add(std::make_unique<Dense<double>>("fc", 3 * 3 * 3, 3, rng));
            net.add(std::make_unique<Softmax<double>>("sm"));

            TensorD x = gradcheck::random_tensor({2, 2, 6, 6}, rng);
            TensorD target({2, 3});
            target.at(0, 1) = 1.0;
            target.at(1, 2) = 1.0;

            gradcheck::Harness h;
            h.loss = [&]() {
                RunContext ctx{Mode::Train, nullptr};
                return static_cast<double>(cross_entropy(net.forward(x, ctx), target));
            };
            RunContext ctx{Mode::Train, nullptr};
            const TensorD probs = net.forward(x, ctx);
            net.visit_params(
                [](const std::string&, Param<double>& p) {
                    p.ensure_grad();
                    p.zero_grad();
                },
                "");
            const TensorD grad_in = net.backward(cross_entropy_grad(probs, target));
            probe_tensor(h, x, grad_in, "net.input", st);
            net.visit_params(
                [&](const std::string& name, Param<double>& p) {
                    if (p.trainable) probe_tensor(h, p.value, p.grad, "net." + name, st);
                },
                "");
        }
        if (seed == 0) suites = 21;
    }

    const double secs = seconds_since(t0);
    REQUIRE(secs < 300.0);
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "%d layer suites x 10 seeds, %s coordinates checked, max rel err %.2e "
                  "(central differences, h=1e-5, tol 1e-4), %.1f s",
                  suites, with_commas(st.coords).c_str(), st.max_err, secs);
    record(2, true, buf);
}

TEST_CASE("criterion 3: parameter counts") {
    const auto t0 = Clock::now();
    std::size_t n_vgg = 0, n_res = 0, n_vit = 0;
    {
        ArchitectureSpec s = ArchitectureSpec::make_default(Family::Vgg16);
        s.num_classes = 1000;
        n_vgg = build_model<float>(s, 1).parameter_count();
    }
    {
        ArchitectureSpec s = ArchitectureSpec::make_default(Family::Resnet50);
        n_res = build_model<float>(s, 1).parameter_count();
    }
    {
        ArchitectureSpec s = ArchitectureSpec::make_default(Family::Vit);
        n_vit = build_model<float>(s, 1).parameter_count();
    }

    REQUIRE(n_vgg == 138357544u);
    const double res_dev = std::fabs(static_cast<double>(n_res) - 23.5e6) / 23.5e6;
    const double vit_dev = std::fabs(static_cast<double>(n_vit) - 6.8e6) / 6.8e6;
    REQUIRE(res_dev <= 0.01);
    REQUIRE(vit_dev <= 0.05);

    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "vgg16(1000) = %s exactly; resnet50(3) = %s (%.2f%% from 23.5M); "
                  "vit = %s (%.2f%% from 6.8M); %.1f s",
                  with_commas(n_vgg).c_str(), with_commas(n_res).c_str(), 100.0 * res_dev,
                  with_commas(n_vit).c_str(), 100.0 * vit_dev, seconds_since(t0));
    record(3, true, buf);
}

TEST_CASE("criterion 4: metric oracle") {
    // Part 1: 1,000 random confusion matrices against a brute-force oracle
    // written with the same arithmetic expressions, compared exactly.
    Rng rng(4400);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 2 + rng.next_u64() % 5;
        ConfusionMatrix cm(k);
        for (std::size_t t = 0; t < k; ++t)
            for (std::size_t p = 0; p < k; ++p) cm.add(t, p, rng.next_u64() % 200);
        if (trial % 10 == 0) {
            // Exercise the zero-denominator path: erase one class's row and
            // another's column by rebuilding without them.
            ConfusionMatrix z(k);
            const std::size_t dead_row = rng.next_u64() % k;
            const std::size_t dead_col = rng.next_u64() % k;
            for (std::size_t t = 0; t < k; ++t)
                for (std::size_t p = 0; p < k; ++p)
                    if (t != dead_row && p != dead_col) z.add(t, p, cm.at(t, p));
            cm = z;
        }
        if (cm.total() == 0) cm.add(0, 0, 1);

        std::vector<std::string> names;
        for (std::size_t c = 0; c < k; ++c) names.push_back("class" + std::to_string(c));
        const MetricsReport rep = compute_metrics(cm, names);

        double macro_p = 0, macro_r = 0, macro_f = 0;
        std::size_t correct = 0;
        for (std::size_t c = 0; c < k; ++c) {
            const double tp = static_cast<double>(cm.at(c, c));
            const double col = static_cast<double>(cm.col_sum(c));
            const double row = static_cast<double>(cm.row_sum(c));
            const double p = col == 0.0 ? 0.0 : 100.0 * tp / col;
            const double r = row == 0.0 ? 0.0 : 100.0 * tp / row;
            const double f1 = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
            REQUIRE(rep.per_class[c].precision == p);
            REQUIRE(rep.per_class[c].recall == r);
            REQUIRE(rep.per_class[c].f1 == f1);
            macro_p += p;
            macro_r += r;
            macro_f += f1;
            correct += cm.at(c, c);
        }
        REQUIRE(rep.macro.precision == macro_p / static_cast<double>(k));
        REQUIRE(rep.macro.recall == macro_r / static_cast<double>(k));
        REQUIRE(rep.macro.f1 == macro_f / static_cast<double>(k));
        REQUIRE(rep.accuracy ==
                100.0 * static_cast<double>(correct) / static_cast<double>(cm.total()));
    }

    // Part 2: the reference per-class rows for the resnet50 recipe on the
    // KaraAgroAI dataset. Their macro average must land on the reference
    // overall row (93.75 recall, 94.34 F1) at two decimals.
    const double recall[3] = {85.66, 100.0, 95.59};
    const double f1[3] = {91.70, 95.09, 96.24};
    const double macro_r = (recall[0] + recall[1] + recall[2]) / 3.0;
    const double macro_f = (f1[0] + f1[1] + f1[2]) / 3.0;
    REQUIRE(detail::metric_fixed(round2(macro_r)) == "93.75");
    REQUIRE(detail::metric_fixed(round2(macro_f)) == "94.34");

    record(4, true,
           "1,000 random confusion matrices match the brute-force oracle exactly "
           "(per-class P/R/F1, macros, accuracy); reference resnet50 class rows average to "
           "93.75 recall / 94.34 F1 at two decimals");
}

TEST_CASE("criterion 5: overfit smoke test") {
    const fs::path root = fresh_dir("overfit");
    const DatasetManifest manifest = write_overfit_dataset(root);
    AugmentationPolicy policy;
    policy.enabled = false;
    const SampleSource source(root, manifest, NormalizationStats{}, policy);

    struct Run {
        Family family;
        const char* name;
        double lr;
    };
    const Run runs[] = {
        {Family::Vit, "vit", 1e-3},
        {Family::Resnet50, "resnet50", 1e-3},
        {Family::Vgg16, "vgg16", 2e-4},
    };

    std::string detail;
    for (const Run& r : runs) {
        const OverfitResult res = run_overfit(r.family, r.lr, source);
        INFO(r.name << ": reached=" << res.reached << " steps=" << res.steps
                    << " secs=" << res.secs);
        REQUIRE(res.reached);
        REQUIRE(res.steps <= 200);
        REQUIRE(res.secs < 600.0);
        if (!detail.empty()) detail += "; ";
        detail += std::string(r.name) + " 100% train accuracy after " +
                  std::to_string(res.steps) + " steps (" + one_decimal(res.secs) + " s)";
    }
    fs::remove_all(root);
    record(5, true, detail + "; caps: 200 steps / 600 s per model, batch 16, single-threaded");
}

TEST_CASE("criterion 6: split determinism and fidelity") {
    // A synthetic corpus with the real per-class file counts. One tiny PNG
    // is copied under three class directories; the split tool scans it and
    // assigns 80/10/10 with a fixed seed.
    const fs::path root = fresh_dir("split_tree");
    const std::array<std::pair<std::string, int>, 3> classes = {
        {{"anthracnose", 5162}, {"cssvd", 7292}, {"healthy", 5249}}};

    const fs::path proto = root / "proto.png";
    {
        Image img;
        img.width = 8;
        img.height = 8;
        img.rgb.assign(8 * 8 * 3, 120);
        encode_png(proto, img);
    }
    for (const auto& [name, count] : classes) {
        fs::create_directories(root / name);
        for (int i = 0; i < count; ++i) {
            char leaf[32];
            std::snprintf(leaf, sizeof leaf, "img_%05d.png", i);
            fs::copy_file(proto, root / name / leaf);
        }
    }
    fs::remove(proto);

    // Manifests are written outside the scanned tree so the second scan
    // sees an identical corpus.
    const fs::path m1_out = root.parent_path() / "cocoanet_acceptance_manifest_a.json";
    const fs::path m2_out = root.parent_path() / "cocoanet_acceptance_manifest_b.json";
    const std::string common = " --seed 42 --ratios 0.8 0.1 0.1 > /dev/null 2> /dev/null";
    REQUIRE(run_cli("split --data \"" + root.string() + "\" --out \"" + m1_out.string() + "\"" +
                    common) == 0);
    REQUIRE(run_cli("split --data \"" + root.string() + "\" --out \"" + m2_out.string() + "\"" +
                    common) == 0);

    const auto bytes_a = slurp(m1_out);
    const auto bytes_b = slurp(m2_out);
    REQUIRE(bytes_a == bytes_b); // bit-reproducible under a fixed seed

    const DatasetManifest split = DatasetManifest::load(m1_out);
    REQUIRE(split.class_names ==
            std::vector<std::string>{"anthracnose", "cssvd", "healthy"});

    // counts[class][0..2] = train, val, test
    std::array<std::array<long, 3>, 3> counts{};
    for (const auto& e : split.entries) {
        const std::size_t c = split.class_index(e.label);
        const int s = e.split == Split::Train ? 0 : e.split == Split::Val ? 1 : 2;
        ++counts[c][s];
    }
    // The rounded-fraction rule's own contract: val = test = round(n/10).
    const std::array<std::array<long, 3>, 3> rule = {
        {{4130, 516, 516}, {5834, 729, 729}, {4199, 525, 525}}};
    REQUIRE(counts == rule);

    const std::array<std::array<long, 3>, 3> reference = {
        {{4131, 515, 516}, {5838, 727, 727}, {4207, 521, 521}}};
    long max_cell_gap = 0;
    std::array<long, 3> totals{}, ref_totals{};
    std::string residuals;
    for (std::size_t c = 0; c < 3; ++c) {
        for (int s = 0; s < 3; ++s) {
            max_cell_gap = std::max(max_cell_gap, std::labs(counts[c][s] - reference[c][s]));
            totals[static_cast<std::size_t>(s)] += counts[c][s];
            ref_totals[static_cast<std::size_t>(s)] += reference[c][s];
        }
        residuals += split.class_names[c] + " " + std::to_string(counts[c][0]) + "/" +
                     std::to_string(counts[c][1]) + "/" + std::to_string(counts[c][2]) +
                     " vs " + std::to_string(reference[c][0]) + "/" +
                     std::to_string(reference[c][1]) + "/" + std::to_string(reference[c][2]) +
                     (c + 1 < 3 ? ", " : "");
    }
    long max_total_gap = 0;
    for (std::size_t s = 0; s < 3; ++s)
        max_total_gap = std::max(max_total_gap, std::labs(totals[s] - ref_totals[s]));

    const bool fidelity = max_cell_gap <= 3 && max_total_gap <= 9;
    fs::remove_all(root);
    fs::remove(m1_out);
    fs::remove(m2_out);

    record(6, fidelity,
           "bit-reproducible under seed 42; train/val/test per class: " + residuals +
               "; largest per-cell gap " + std::to_string(max_cell_gap) + " (allowed 3), " +
               "largest split-total gap " + std::to_string(max_total_gap) + " (allowed 9). " +
               "The reference tallies use unequal per-class fractions (80.03-80.15% train), " +
               "which no single rounded-fraction rule reproduces; the divergence is " +
               "documented rather than tuned away");
}

TEST_CASE("criterion 7: learning-rate schedules") {
    Schedule halve{ScheduleKind::HalvePerEpoch, 1e-3, 20};
    REQUIRE(lr_at(halve, 0) == 1e-3);
    REQUIRE(lr_at(halve, 1) == 5e-4);
    for (long e = 0; e < 20; ++e) REQUIRE(lr_at(halve, e) == std::ldexp(1e-3, static_cast<int>(-e)));

    Schedule plateau{ScheduleKind::PlateauDiv10, 1e-3, 20};
    REQUIRE(lr_at(plateau, 3, 0) == 1e-3);
    REQUIRE_THAT(lr_at(plateau, 3, 1), Catch::Matchers::WithinRel(1e-4, 1e-12));
    REQUIRE(lr_at(plateau, 0, 1) == lr_at(plateau, 19, 1)); // event-driven, not epoch-driven

    record(7, true,
           "halving gives lr(e) = 1e-3 * 2^-e exactly for 20 epochs (epoch 1 = 5e-4); one "
           "plateau event divides the base rate by 10 (1e-4 within 1e-12)");
}

TEST_CASE("criterion 8: checkpoint round trip and corruption fixtures") {
    const fs::path dir = fresh_dir("checkpoint");

    // Bit-identical save -> load for the three full-size architectures.
    std::string detail = "bit-identical round trip:";
    for (const Family family : {Family::Vit, Family::Resnet50, Family::Vgg16}) {
        ArchitectureSpec spec = ArchitectureSpec::make_default(family);
        ModelInstance<float> model = build_model<float>(spec, 7);
        const fs::path file = dir / (std::string(family_name(family)) + ".ckpt");
        save_checkpoint(file, model, 3, jsonutil::json{{"val_macro_f1", 91.25}},
                        {0.3, 0.4, 0.5}, nullptr, {"anthracnose", "cssvd", "healthy"});

        CheckpointMeta meta;
        ModelInstance<float> loaded = load_checkpoint(file, nullptr, &meta);
        REQUIRE(meta.arch.family == family);
        REQUIRE(meta.epoch == 3);
        REQUIRE(meta.channel_means == std::array<double, 3>{0.3, 0.4, 0.5});
        REQUIRE(meta.class_names == std::vector<std::string>{"anthracnose", "cssvd", "healthy"});

        const auto a = dump_params(model);
        const auto b = dump_params(loaded);
        REQUIRE(a.size() == b.size());
        std::size_t floats = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            REQUIRE(a[i].first == b[i].first);
            REQUIRE(a[i].second->same_shape(*b[i].second));
            REQUIRE(std::memcmp(a[i].second->data(), b[i].second->data(),
                                a[i].second->size() * sizeof(float)) == 0);
            floats += a[i].second->size();
        }
        detail += std::string(" ") + family_name(family) + " (" + with_commas(floats) +
                  " values, " + std::to_string(fs::file_size(file) / (1024 * 1024)) + " MiB)";
        fs::remove(file);
    }

    // Corruption fixtures: every documented failure category, raised from
    // doctored copies of a small valid checkpoint.
    const fs::path base_file = dir / "fixture.ckpt";
    {
        ModelInstance<float> tiny = build_model<float>(tiny_vit_spec(), 5);
        save_checkpoint(base_file, tiny, 0, jsonutil::json::object(), {0, 0, 0});
    }
    const std::vector<unsigned char> base = slurp(base_file);
    const fs::path f = dir / "doctored.ckpt";
    int fixtures = 0;

    REQUIRE(kind_of(dir / "missing.ckpt") == CheckpointErrorKind::Io);
    ++fixtures;
    spit(f, {'C', 'K'});
    REQUIRE(kind_of(f) == CheckpointErrorKind::Truncated);
    ++fixtures;
    {
        auto bad = base;
        bad[0] = 'X';
        spit(f, bad);
        REQUIRE(kind_of(f) == CheckpointErrorKind::BadMagic);
        ++fixtures;
    }
    spit(f, {base.begin(), base.begin() + 4}); // magic only, no header length
    REQUIRE(kind_of(f) == CheckpointErrorKind::Truncated);
    ++fixtures;
    spit(f, set_header_len(base, 1ull << 40)); // absurd header length
    REQUIRE(kind_of(f) == CheckpointErrorKind::BadHeader);
    ++fixtures;
    spit(f, set_header_len(base, base.size())); // header claims to run past EOF
    REQUIRE(kind_of(f) == CheckpointErrorKind::Truncated);
    ++fixtures;
    {
        auto garbage = base;
        const std::uint64_t len = header_len_of(base);
        for (std::uint64_t i = 0; i < len; ++i) garbage[12 + i] = 'x';
        spit(f, garbage);
        REQUIRE(kind_of(f) == CheckpointErrorKind::BadHeader);
        ++fixtures;
    }
    spit(f, with_header(base, [](jsonutil::json& j) { j["version"] = 99; }));
    REQUIRE(kind_of(f) == CheckpointErrorKind::VersionMismatch);
    ++fixtures;
    {
        auto cut = base;
        cut.resize(cut.size() - 4); // payload ends inside a tensor
        spit(f, cut);
        REQUIRE(kind_of(f) == CheckpointErrorKind::Truncated);
        ++fixtures;
    }
    spit(f, with_header(base, [](jsonutil::json& j) {
             j["tensors"][0]["shape"][0] = j["tensors"][0]["shape"][0].get<std::size_t>() + 1;
         }));
    REQUIRE(kind_of(f) == CheckpointErrorKind::ShapeMismatch);
    ++fixtures;

    fs::remove_all(dir);
    record(8, true,
           detail + "; " + std::to_string(fixtures) +
               " corruption fixtures raise the documented categories (Io, BadMagic, "
               "Truncated, BadHeader, VersionMismatch, ShapeMismatch)");
}

TEST_CASE("criterion 9: probability and shape contracts") {
    double max_dev = 0.0;
    for (const Family family : {Family::Vit, Family::Resnet50, Family::Vgg16}) {
        ArchitectureSpec spec = ArchitectureSpec::make_default(family);
        ModelInstance<float> model = build_model<float>(spec, 11);
        model.set_mode(Mode::Eval);

        Rng rng(Rng::mix(9900, static_cast<std::uint64_t>(family)));
        TensorF x({2, 3, 224, 224});
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = static_cast<float>(rng.uniform());
        const TensorF probs = model.forward(x);

        REQUIRE(probs.rank() == 2);
        REQUIRE(probs.dim(0) == 2);
        REQUIRE(probs.dim(1) == 3);
        for (std::size_t r = 0; r < 2; ++r) {
            double sum = 0.0;
            for (std::size_t c = 0; c < 3; ++c) {
                const float p = probs.at(r, c);
                REQUIRE(p >= 0.0f);
                REQUIRE(p <= 1.0f);
                sum += p;
            }
            max_dev = std::max(max_dev, std::fabs(sum - 1.0));
            REQUIRE_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-6));
        }
    }

    const ArchitectureSpec vit = ArchitectureSpec::make_default(Family::Vit);
    REQUIRE(vit.vit.patch_size == 16);
    REQUIRE(vit.sequence_length() == 197); // (224/16)^2 patches + class token

    char buf[192];
    std::snprintf(buf, sizeof buf,
                  "batch-2 eval forwards give [2,3] probability rows on all three families, "
                  "max |row sum - 1| = %.1e (tol 1e-6); vit sequence length 197 for patch 16",
                  max_dev);
    record(9, true, buf);
}

// Declared last so it runs after every criterion: prints the combined
// verdict block and writes it to acceptance_report.txt in the working
// directory. Criteria that crashed before recording show up as FAIL.
TEST_CASE("acceptance recap") {
    for (int id = 1; id <= 9; ++id)
        if (!verdicts().count(id))
            verdicts()[id] = {"FAIL", "aborted before a verdict was recorded"};
    std::string block = "==== acceptance recap ====\n";
    for (const auto& [id, v] : verdicts())
        block += "criterion " + std::to_string(id) + ": " + v.status + " - " + v.detail + "\n";
    block += "==========================\n";
    std::fputs(block.c_str(), stdout);
    std::fflush(stdout);
    std::ofstream os("acceptance_report.txt", std::ios::trunc);
    os << block;
    REQUIRE(os.good());
}
