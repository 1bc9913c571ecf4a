#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "../data/loader.hpp"
#include "../eval/metrics.hpp"
#include "../models/model.hpp"
#include "../nn/loss.hpp"
#include "adam.hpp"
#include "checkpoint.hpp"
#include "schedule.hpp"

namespace cocoanet {

// Optimization recipe for one run. `momentum` is accepted so existing run
// configs parse, but the optimizer is Adam and its moment coefficients are
// beta1/beta2; the value is recorded and otherwise ignored.
struct TrainConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.0;
    double momentum = 0.0;
    std::size_t batch_size = 64;
    long epochs = 20;
    ScheduleKind scheduler = ScheduleKind::HalvePerEpoch;
    int early_stop_patience = 5;
    std::uint64_t seed = 42;

    void validate() const {
        if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
        if (beta1 < 0.0 || beta1 >= 1.0) throw ConfigError("train.beta1 must lie in [0, 1)");
        if (beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("train.beta2 must lie in [0, 1)");
        if (weight_decay < 0.0) throw ConfigError("train.weight_decay must be >= 0");
        if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
        if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
        if (early_stop_patience < 1) throw ConfigError("train.early_stop_patience must be >= 1");
    }

    static TrainConfig default_for(Family f) {
        TrainConfig c;
        switch (f) {
        case Family::Vgg16:
            c.lr = 1e-2;
            c.beta1 = 0.0;
            c.weight_decay = 5e-4;
            break;
        case Family::Resnet50:
            c.lr = 1e-3;
            c.weight_decay = 1e-4;
            break;
        case Family::Vit:
            c.lr = 1e-3;
            c.weight_decay = 0.03;
            break;
        }
        return c;
    }
};

struct EpochStats {
    double mean_loss = 0.0;
    double accuracy = 0.0; // percent
};

struct EpochRecord {
    long epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    double val_macro_f1 = 0.0;
    double seconds = 0.0;
};

struct FitResult {
    std::vector<EpochRecord> history;
    long best_epoch = -1;
    double best_val_macro_f1 = 0.0;
    std::filesystem::path best_checkpoint;
    std::filesystem::path last_checkpoint;
    bool stopped_early = false;
    int plateau_events = 0;
};

// Shuffles the pool and cuts it into batch_size groups. A trailing group of
// one sample is folded into its predecessor because batch statistics need at
// least two rows; the group count for n = q*b + 1 is therefore q, not q + 1.
inline std::vector<std::vector<std::size_t>> plan_batches(const std::vector<std::size_t>& pool,
                                                          std::size_t batch_size, Rng& rng) {
    if (batch_size == 0) throw std::invalid_argument("plan_batches: batch_size must be >= 1");
    std::vector<std::size_t> order = pool;
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> plan;
    for (std::size_t i = 0; i < order.size(); i += batch_size) {
        const std::size_t end = std::min(order.size(), i + batch_size);
        plan.emplace_back(order.begin() + i, order.begin() + end);
    }
    if (plan.size() >= 2 && plan.back().size() == 1) {
        plan[plan.size() - 2].push_back(plan.back()[0]);
        plan.pop_back();
    }
    return plan;
}

namespace detail {

template <typename T>
std::vector<NamedParam<T>> named_trainable(ModelInstance<T>& model) {
    std::vector<NamedParam<T>> out;
    model.visit_params([&](const std::string& name, Param<T>& p) {
        if (p.trainable) out.push_back({name, &p});
    });
    return out;
}

} // namespace detail

// One pass over the training split. Batch order comes from a stream keyed on
// (seed, epoch); dropout inside batch i draws from (seed, epoch, i). Both are
// independent of the per-sample augmentation streams, so changing the batch
// size never perturbs the pixels a given image contributes.
inline EpochStats train_epoch(ModelInstance<float>& model, const SampleSource& source,
                              const std::vector<std::size_t>& train_indices,
                              Adam<float>& optimizer, double lr, std::size_t batch_size,
                              std::uint64_t seed, long epoch) {
    if (train_indices.empty()) throw InputError("train_epoch: the training split is empty");
    model.set_mode(Mode::Train);
    auto params = detail::named_trainable(model);

    Rng order_rng(Rng::mix(seed, 0x62617463ull, static_cast<std::uint64_t>(epoch)));
    const auto plan = plan_batches(train_indices, batch_size, order_rng);

    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0;
    for (std::size_t bi = 0; bi < plan.size(); ++bi) {
        Rng drop_rng(Rng::mix(seed, 0x64726F70ull, static_cast<std::uint64_t>(epoch),
                              static_cast<std::uint64_t>(bi)));
        auto [images, targets] = source.assemble(plan[bi], true, seed, epoch);
        TensorF probs = model.forward(images, &drop_rng);

        const std::size_t b = plan[bi].size();
        loss_sum += static_cast<double>(cross_entropy(probs, targets)) * static_cast<double>(b);
        for (std::size_t r = 0; r < b; ++r)
            if (argmax_row(probs, r) == argmax_row(targets, r)) ++correct;
        seen += b;

        TensorF grad = cross_entropy_grad(probs, targets);
        model.zero_grads();
        model.backward(grad);
        optimizer.step(params, lr);
    }

    EpochStats s;
    s.mean_loss = loss_sum / static_cast<double>(seen);
    s.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(seen);
    return s;
}

// Deterministic pass over a held-out split: eval preprocessing, eval mode,
// batches in manifest order. Returns the full per-class report with mean loss.
inline MetricsReport evaluate(ModelInstance<float>& model, const SampleSource& source,
                              const std::vector<std::size_t>& indices,
                              std::size_t batch_size, const std::string& split_name,
                              long epoch = -1) {
    if (indices.empty())
        throw InputError("evaluate: no samples in split \"" + split_name + "\"");
    model.set_mode(Mode::Eval);
    ConfusionMatrix cm(source.num_classes());
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < indices.size(); i += batch_size) {
        const std::size_t end = std::min(indices.size(), i + batch_size);
        std::vector<std::size_t> group(indices.begin() + i, indices.begin() + end);
        auto [images, targets] = source.assemble(group, false, 0, 0);
        TensorF probs = model.forward(images);
        loss_sum += static_cast<double>(cross_entropy(probs, targets)) *
                    static_cast<double>(group.size());
        for (std::size_t r = 0; r < group.size(); ++r)
            cm.add(source.label_of(group[r]), argmax_row(probs, r));
    }
    MetricsReport r = compute_metrics(cm, source.manifest().class_names,
                                      family_name(model.spec().family), epoch, split_name);
    r.mean_loss = loss_sum / static_cast<double>(indices.size());
    return r;
}

// Full training loop: schedule-driven lr, early stopping on validation
// macro-F1, best/last checkpoints under out_dir, best weights restored into
// the model before returning. The plateau schedule divides by 10 every time
// validation loss fails to improve by more than 1e-4 for two consecutive
// epochs.
inline FitResult fit(ModelInstance<float>& model, const SampleSource& source,
                     const TrainConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    const auto train_ix = source.manifest().indices_of(Split::Train);
    const auto val_ix = source.manifest().indices_of(Split::Val);
    if (train_ix.empty()) throw InputError("fit: manifest has no training samples");
    if (val_ix.empty()) throw InputError("fit: manifest has no validation samples");
    std::filesystem::create_directories(out_dir);

    Adam<float> optimizer(cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay);
    Schedule sched{cfg.scheduler, cfg.lr, cfg.epochs};
    EarlyStopper stopper(cfg.early_stop_patience);

    FitResult result;
    result.best_checkpoint = out_dir / "best.ckpt";
    result.last_checkpoint = out_dir / "last.ckpt";

    double best_val_loss = std::numeric_limits<double>::infinity();
    int flat_streak = 0;
    bool wrote_best = false;

    for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at(sched, epoch, result.plateau_events);
        const auto t0 = std::chrono::steady_clock::now();
        const EpochStats train = train_epoch(model, source, train_ix, optimizer, lr,
                                             cfg.batch_size, cfg.seed, epoch);
        const MetricsReport val =
            evaluate(model, source, val_ix, cfg.batch_size, "val", epoch);
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        EpochRecord rec{epoch,    lr,           train.mean_loss, train.accuracy,
                        val.mean_loss, val.accuracy, val.macro.f1,    seconds};
        result.history.push_back(rec);

        const bool improved = stopper.observe(epoch, val.macro.f1);
        jsonutil::json metrics = {{"train_loss", train.mean_loss},
                                  {"train_accuracy", train.accuracy},
                                  {"val_loss", val.mean_loss},
                                  {"val_accuracy", val.accuracy},
                                  {"val_macro_f1", val.macro.f1},
                                  {"lr", lr}};
        save_checkpoint(result.last_checkpoint, model, epoch, metrics,
                        source.stats().mean_rgb, &optimizer, source.manifest().class_names);
        if (improved) {
            save_checkpoint(result.best_checkpoint, model, epoch, metrics,
                            source.stats().mean_rgb, nullptr, source.manifest().class_names);
            wrote_best = true;
        }

        std::fprintf(stderr,
                     "epoch %ld/%ld  lr %.3g  train loss %.4f acc %.2f%%  "
                     "val loss %.4f acc %.2f%% macro-F1 %.2f%%  (%.1fs)%s\n",
                     epoch + 1, cfg.epochs, lr, train.mean_loss, train.accuracy, val.mean_loss,
                     val.accuracy, val.macro.f1, seconds, improved ? "  *" : "");

        if (val.mean_loss < best_val_loss - 1e-4) {
            best_val_loss = val.mean_loss;
            flat_streak = 0;
        } else if (++flat_streak == 2) {
            ++result.plateau_events;
            flat_streak = 0;
        }

        if (stopper.should_stop()) {
            result.stopped_early = true;
            std::fprintf(stderr, "early stop: no macro-F1 gain for %d epochs\n",
                         stopper.epochs_since_improvement());
            break;
        }
    }

    result.best_epoch = stopper.best_epoch();
    result.best_val_macro_f1 = stopper.best_score();
    if (wrote_best) load_params_into(result.best_checkpoint, model);
    return result;
}

} // namespace cocoanet
