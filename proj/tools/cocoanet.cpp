// Command-line front end: dataset splitting, training, evaluation, single
// image prediction, checkpoint/manifest inspection. Exit codes: 0 success,
// 2 bad input or usage, 3 runtime failure.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <cocoanet/cocoanet.hpp>

namespace cn = cocoanet;
namespace fs = std::filesystem;

namespace {

void print_split_table(const cn::DatasetManifest& m, std::FILE* out) {
    std::fprintf(out, "%-24s %8s %8s %8s %8s\n", "class", "train", "val", "test", "total");
    std::size_t tv[3] = {0, 0, 0};
    for (const auto& cls : m.class_names) {
        const std::size_t a = m.count(cn::Split::Train, cls);
        const std::size_t b = m.count(cn::Split::Val, cls);
        const std::size_t c = m.count(cn::Split::Test, cls);
        tv[0] += a;
        tv[1] += b;
        tv[2] += c;
        std::fprintf(out, "%-24s %8zu %8zu %8zu %8zu\n", cls.c_str(), a, b, c, a + b + c);
    }
    std::fprintf(out, "%-24s %8zu %8zu %8zu %8zu\n", "total", tv[0], tv[1], tv[2],
                 tv[0] + tv[1] + tv[2]);
}

bool has_channel_means(const cn::DatasetManifest& m) {
    return m.channel_means[0] != 0.0 || m.channel_means[1] != 0.0 || m.channel_means[2] != 0.0;
}

struct SplitArgs {
    std::string data, out;
    std::uint64_t seed = 42;
    std::vector<double> ratios{0.8, 0.1, 0.1};
};

int cmd_split(const SplitArgs& a) {
    cn::DatasetManifest m = cn::scan_dataset(a.data);
    m = cn::stratified_split(std::move(m), {a.ratios[0], a.ratios[1], a.ratios[2]}, a.seed);
    if (!a.out.empty()) {
        if (fs::path(a.out).has_parent_path())
            fs::create_directories(fs::path(a.out).parent_path());
        m.save(a.out);
    }
    print_split_table(m, stdout);
    if (!a.out.empty()) std::fprintf(stderr, "wrote %s\n", a.out.c_str());
    return 0;
}

struct TrainArgs {
    std::string config, model, data, manifest, out;
    long epochs = -1;
    long long seed = -1;
    long batch = -1;
};

// Loads the manifest if present, otherwise scans and splits 80/10/10.
// Channel means are computed on first use and persisted into the manifest.
cn::DatasetManifest resolve_manifest(const fs::path& root, const fs::path& manifest_path,
                                     std::uint64_t seed) {
    cn::DatasetManifest m;
    if (fs::exists(manifest_path)) {
        m = cn::DatasetManifest::load(manifest_path);
    } else {
        std::fprintf(stderr, "no manifest at %s; scanning %s\n", manifest_path.string().c_str(),
                     root.string().c_str());
        m = cn::stratified_split(cn::scan_dataset(root), {0.8, 0.1, 0.1}, seed);
        if (manifest_path.has_parent_path())
            fs::create_directories(manifest_path.parent_path());
        m.save(manifest_path);
    }
    if (!has_channel_means(m)) {
        std::fprintf(stderr, "computing training-set channel means\n");
        m.channel_means = cn::compute_channel_means(root, m).mean_rgb;
        m.save(manifest_path);
    }
    return m;
}

int cmd_train(const TrainArgs& a) {
    cn::RunConfig cfg;
    if (!a.config.empty())
        cfg = cn::RunConfig::from_file(a.config);
    else if (!a.model.empty())
        cfg = cn::RunConfig::defaults_for(cn::family_from_string(a.model));
    else
        throw cn::InputError("train needs --config or --model");
    if (!a.model.empty() && !a.config.empty() &&
        a.model != cn::family_name(cfg.model.family))
        throw cn::InputError("--model disagrees with the config's model.family");

    if (!a.data.empty()) cfg.data_root = a.data;
    if (!a.manifest.empty()) cfg.manifest_path = a.manifest;
    if (!a.out.empty()) cfg.output_dir = a.out;
    if (a.epochs > 0) cfg.train.epochs = a.epochs;
    if (a.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(a.seed);
    if (a.batch > 0) cfg.train.batch_size = static_cast<std::size_t>(a.batch);
    cfg.train.validate();
    if (cfg.data_root.empty()) throw cn::InputError("no dataset root (config data.root or --data)");

    const fs::path out_dir = cfg.output_dir;
    fs::create_directories(out_dir);
    const fs::path manifest_path =
        cfg.manifest_path.empty() ? out_dir / "manifest.json" : fs::path(cfg.manifest_path);
    cfg.manifest_path = manifest_path.string();

    cn::DatasetManifest manifest =
        resolve_manifest(cfg.data_root, manifest_path, cfg.train.seed);
    if (manifest.class_names.size() != cfg.model.num_classes)
        throw cn::InputError("manifest has " + std::to_string(manifest.class_names.size()) +
                             " classes but the model is configured for " +
                             std::to_string(cfg.model.num_classes));

    cn::AugmentationPolicy policy = cfg.augmentation;
    if (policy.enabled && policy.color_aug == cn::AugmentationPolicy::ColorAug::PcaLighting) {
        std::fprintf(stderr, "computing training-set color statistics\n");
        policy.pca = cn::compute_color_stats(cfg.data_root, manifest);
    }

    cfg.save(out_dir / "resolved_config.json");

    cn::ModelInstance<float> model = cn::build_model<float>(cfg.model, cfg.train.seed);
    std::fprintf(stderr, "%s: %zu trainable parameters\n", cn::family_name(cfg.model.family),
                 model.parameter_count());

    cn::NormalizationStats stats{manifest.channel_means};
    cn::SampleSource source(cfg.data_root, manifest, stats, policy);
    cn::FitResult result = cn::fit(model, source, cfg.train, out_dir);

    cn::jsonutil::json history = cn::jsonutil::json::array();
    for (const auto& r : result.history)
        history.push_back({{"epoch", r.epoch},
                           {"lr", r.lr},
                           {"train_loss", r.train_loss},
                           {"train_accuracy", r.train_accuracy},
                           {"val_loss", r.val_loss},
                           {"val_accuracy", r.val_accuracy},
                           {"val_macro_f1", r.val_macro_f1},
                           {"seconds", r.seconds}});
    {
        std::ofstream os(out_dir / "history.json");
        os << history.dump(2) << "\n";
    }
    std::fprintf(stderr, "best epoch %ld  val macro-F1 %.2f%%%s\n", result.best_epoch + 1,
                 result.best_val_macro_f1, result.stopped_early ? "  (stopped early)" : "");

    const auto test_ix = manifest.indices_of(cn::Split::Test);
    if (!test_ix.empty()) {
        cn::MetricsReport report = cn::evaluate(model, source, test_ix, cfg.train.batch_size,
                                                "test", result.best_epoch);
        cn::write_reports(report, out_dir);
        std::fputs(cn::render_text(report).c_str(), stdout);
    }
    return 0;
}

struct EvalArgs {
    std::string checkpoint, data, manifest, split = "test", report;
    long batch = 64;
};

int cmd_eval(const EvalArgs& a) {
    cn::CheckpointMeta meta;
    cn::ModelInstance<float> model = cn::load_checkpoint(a.checkpoint, nullptr, &meta);
    cn::DatasetManifest manifest = cn::DatasetManifest::load(a.manifest);
    if (!meta.class_names.empty() && meta.class_names != manifest.class_names)
        throw cn::InputError("checkpoint and manifest disagree on the class list");

    cn::NormalizationStats stats{meta.channel_means};
    if (!(stats.mean_rgb[0] != 0 || stats.mean_rgb[1] != 0 || stats.mean_rgb[2] != 0))
        stats.mean_rgb = manifest.channel_means;

    cn::AugmentationPolicy policy;
    policy.enabled = false;
    cn::SampleSource source(a.data, manifest, stats, policy);

    const cn::Split split = cn::split_from_string(a.split);
    const auto indices = manifest.indices_of(split);
    cn::MetricsReport report = cn::evaluate(model, source, indices,
                                            static_cast<std::size_t>(a.batch), a.split,
                                            meta.epoch);
    std::fputs(cn::render_text(report).c_str(), stdout);
    if (!a.report.empty()) {
        fs::create_directories(a.report);
        cn::write_reports(report, a.report);
        std::fprintf(stderr, "wrote report.{json,csv,txt} under %s\n", a.report.c_str());
    }
    return 0;
}

struct PredictArgs {
    std::string checkpoint;
    std::vector<std::string> images;
};

int cmd_predict(const PredictArgs& a) {
    cn::CheckpointMeta meta;
    cn::ModelInstance<float> model = cn::load_checkpoint(a.checkpoint, nullptr, &meta);
    model.set_mode(cn::Mode::Eval);
    cn::NormalizationStats stats{meta.channel_means};

    std::vector<std::string> names = meta.class_names;
    if (names.size() != meta.arch.num_classes) {
        names.clear();
        for (std::size_t i = 0; i < meta.arch.num_classes; ++i)
            names.push_back("class" + std::to_string(i));
    }

    for (const auto& path : a.images) {
        const cn::Image img = cn::decode_image(path);
        cn::TensorF x = cn::preprocess_eval(img, stats)
                            .reshaped({1, cn::kInputChannels, cn::kInputSize, cn::kInputSize});
        const cn::TensorF probs = model.forward(x);
        const std::size_t best = cn::argmax_row(probs, 0);
        std::printf("%s\t%s\t%.4f\n", path.c_str(), names[best].c_str(),
                    static_cast<double>(probs[best]));
        for (std::size_t c = 0; c < names.size(); ++c)
            std::fprintf(stderr, "  %-24s %.4f\n", names[c].c_str(),
                         static_cast<double>(probs[c]));
    }
    return 0;
}

struct InfoArgs {
    std::string checkpoint, manifest;
};

int cmd_info(const InfoArgs& a) {
    if (!a.checkpoint.empty()) {
        const cn::CheckpointMeta meta = cn::read_checkpoint_meta(a.checkpoint);
        std::printf("architecture: %s\n", meta.arch.to_json().dump().c_str());
        std::printf("epoch: %ld\n", meta.epoch);
        std::printf("channel_means: [%.6f, %.6f, %.6f]\n", meta.channel_means[0],
                    meta.channel_means[1], meta.channel_means[2]);
        if (!meta.class_names.empty()) {
            std::string joined;
            for (const auto& n : meta.class_names) {
                if (!joined.empty()) joined += ", ";
                joined += n;
            }
            std::printf("classes: %s\n", joined.c_str());
        }
        if (!meta.metrics.is_null()) std::printf("metrics: %s\n", meta.metrics.dump().c_str());
        std::printf("optimizer_state: %s\n", meta.has_optimizer ? "yes" : "no");
    }
    if (!a.manifest.empty()) {
        const cn::DatasetManifest m = cn::DatasetManifest::load(a.manifest);
        std::printf("seed: %llu\n", static_cast<unsigned long long>(m.seed));
        print_split_table(m, stdout);
    }
    if (a.checkpoint.empty() && a.manifest.empty())
        throw cn::InputError("info needs --checkpoint and/or --manifest");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    cn::configure_parallelism();

    CLI::App app{"cocoa leaf disease classification toolkit"};
    app.require_subcommand(1);

    SplitArgs sa;
    auto* split = app.add_subcommand("split", "scan a dataset and write a split manifest");
    split->add_option("--data", sa.data, "dataset root (per-class subdirectories)")->required();
    split->add_option("--out", sa.out, "manifest file to write")->required();
    split->add_option("--seed", sa.seed, "split seed");
    split->add_option("--ratios", sa.ratios, "train val test fractions")->expected(3);

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "train a model and report on the test split");
    train->add_option("--config", ta.config, "run config JSON");
    train->add_option("--model", ta.model, "model family (vgg16, resnet50, vit)");
    train->add_option("--data", ta.data, "dataset root (overrides config)");
    train->add_option("--manifest", ta.manifest, "manifest path (overrides config)");
    train->add_option("--out", ta.out, "output directory (overrides config)");
    train->add_option("--epochs", ta.epochs, "epoch count (overrides config)");
    train->add_option("--seed", ta.seed, "seed (overrides config)");
    train->add_option("--batch", ta.batch, "batch size (overrides config)");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a manifest split");
    eval->add_option("--checkpoint", ea.checkpoint, "checkpoint file")->required();
    eval->add_option("--data", ea.data, "dataset root")->required();
    eval->add_option("--manifest", ea.manifest, "manifest file")->required();
    eval->add_option("--split", ea.split, "train, val or test");
    eval->add_option("--batch", ea.batch, "evaluation batch size");
    eval->add_option("--report", ea.report, "directory for report.{json,csv,txt}");

    PredictArgs pa;
    auto* predict = app.add_subcommand("predict", "classify images with a checkpoint");
    predict->add_option("--checkpoint", pa.checkpoint, "checkpoint file")->required();
    predict->add_option("images", pa.images, "image files")->required();

    InfoArgs ia;
    auto* info = app.add_subcommand("info", "describe a checkpoint or manifest");
    info->add_option("--checkpoint", ia.checkpoint, "checkpoint file");
    info->add_option("--manifest", ia.manifest, "manifest file");

    try {
        app.parse(argc, argv);
        if (split->parsed()) return cmd_split(sa);
        if (train->parsed()) return cmd_train(ta);
        if (eval->parsed()) return cmd_eval(ea);
        if (predict->parsed()) return cmd_predict(pa);
        if (info->parsed()) return cmd_info(ia);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const cn::InputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const cn::RuntimeFailure& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
}
