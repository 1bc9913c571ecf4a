#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "core/jsonutil.hpp"
#include "core/warnings.hpp"
#include "data/preprocess.hpp"
#include "models/spec.hpp"
#include "train/trainer.hpp"

namespace cocoanet {

inline const char* color_aug_name(AugmentationPolicy::ColorAug c) {
    return c == AugmentationPolicy::ColorAug::PcaLighting ? "pca_lighting" : "none";
}

inline AugmentationPolicy::ColorAug color_aug_from_string(const std::string& s) {
    if (s == "none") return AugmentationPolicy::ColorAug::None;
    if (s == "pca_lighting") return AugmentationPolicy::ColorAug::PcaLighting;
    throw ConfigError("unknown color_aug \"" + s + "\" (expected none or pca_lighting)");
}

// A whole run in one JSON document: architecture, optimization recipe, data
// location, augmentation knobs, output directory. The model family picks the
// defaults for everything else, so a minimal config is just
// {"model": {"family": "resnet50"}, "data": {"root": "..."}}. Unknown keys
// are rejected everywhere.
struct RunConfig {
    ArchitectureSpec model;
    TrainConfig train;
    AugmentationPolicy augmentation;
    std::string data_root;
    std::string manifest_path; // empty: the caller decides where it lives
    std::string output_dir;

    static RunConfig defaults_for(Family f) {
        RunConfig c;
        c.model = ArchitectureSpec::make_default(f);
        c.train = TrainConfig::default_for(f);
        c.augmentation = AugmentationPolicy::for_family(f);
        c.output_dir = std::string("runs/") + family_name(f);
        return c;
    }

    static RunConfig from_json(const jsonutil::json& j) {
        jsonutil::require_known_keys(j, "config", {"model", "train", "data", "output"});
        if (!j.contains("model")) throw ConfigError("config.model is required");
        const ArchitectureSpec spec = ArchitectureSpec::from_json(j.at("model"), "model");
        RunConfig c = defaults_for(spec.family);
        c.model = spec;

        if (j.contains("train")) {
            const auto& t = j.at("train");
            jsonutil::require_known_keys(
                t, "train",
                {"lr", "beta1", "beta2", "batch_size", "weight_decay", "epochs", "scheduler",
                 "dropout_attention", "dropout_feedforward", "momentum", "seed",
                 "early_stop_patience"});
            c.train.lr = jsonutil::get_number(t, "train", "lr", c.train.lr);
            c.train.beta1 = jsonutil::get_number(t, "train", "beta1", c.train.beta1);
            c.train.beta2 = jsonutil::get_number(t, "train", "beta2", c.train.beta2);
            c.train.batch_size = static_cast<std::size_t>(jsonutil::get_integer(
                t, "train", "batch_size", static_cast<long>(c.train.batch_size)));
            c.train.weight_decay =
                jsonutil::get_number(t, "train", "weight_decay", c.train.weight_decay);
            c.train.epochs = jsonutil::get_integer(t, "train", "epochs", c.train.epochs);
            if (t.contains("scheduler"))
                c.train.scheduler =
                    schedule_from_string(jsonutil::get_string(t, "train", "scheduler", ""));
            if (t.contains("momentum")) {
                c.train.momentum = jsonutil::get_number(t, "train", "momentum", 0.0);
                warnings::raise("momentum_ignored",
                                "train.momentum is recorded but not used; the optimizer is "
                                "Adam and its moments come from beta1/beta2");
            }
            c.train.seed = static_cast<std::uint64_t>(
                jsonutil::get_integer(t, "train", "seed", static_cast<long>(c.train.seed)));
            c.train.early_stop_patience = static_cast<int>(jsonutil::get_integer(
                t, "train", "early_stop_patience", c.train.early_stop_patience));
            if (t.contains("dropout_feedforward"))
                c.model.ff_dropout =
                    jsonutil::get_number(t, "train", "dropout_feedforward", c.model.ff_dropout);
            if (t.contains("dropout_attention")) {
                const double v = jsonutil::get_number(t, "train", "dropout_attention", 0.0);
                if (c.model.family != Family::Vit) {
                    if (v != 0.0)
                        throw ConfigError(
                            "train.dropout_attention applies only to the vit family");
                } else {
                    c.model.vit.attn_dropout = v;
                }
            }
        }

        if (j.contains("data")) {
            const auto& d = j.at("data");
            jsonutil::require_known_keys(d, "data", {"root", "manifest", "augmentation"});
            c.data_root = jsonutil::get_string(d, "data", "root", "");
            c.manifest_path = jsonutil::get_string(d, "data", "manifest", "");
            if (d.contains("augmentation")) {
                const auto& a = d.at("augmentation");
                jsonutil::require_known_keys(a, "data.augmentation",
                                             {"enabled", "scale_jitter", "crop", "hflip_prob",
                                              "color_aug", "lighting_std"});
                c.augmentation.enabled =
                    jsonutil::get_bool(a, "data.augmentation", "enabled", c.augmentation.enabled);
                if (a.contains("scale_jitter")) {
                    const auto& r = a.at("scale_jitter");
                    if (!r.is_array() || r.size() != 2 || !r.at(0).is_number_integer() ||
                        !r.at(1).is_number_integer())
                        throw ConfigError(
                            "data.augmentation.scale_jitter: expected [low, high] integers");
                    c.augmentation.scale_jitter = {r.at(0).get<int>(), r.at(1).get<int>()};
                }
                c.augmentation.crop = static_cast<int>(jsonutil::get_integer(
                    a, "data.augmentation", "crop", c.augmentation.crop));
                c.augmentation.hflip_prob = jsonutil::get_number(
                    a, "data.augmentation", "hflip_prob", c.augmentation.hflip_prob);
                if (a.contains("color_aug"))
                    c.augmentation.color_aug = color_aug_from_string(
                        jsonutil::get_string(a, "data.augmentation", "color_aug", ""));
                c.augmentation.lighting_std = jsonutil::get_number(
                    a, "data.augmentation", "lighting_std", c.augmentation.lighting_std);
            }
        }

        if (j.contains("output")) {
            jsonutil::require_known_keys(j.at("output"), "output", {"dir"});
            c.output_dir = jsonutil::get_string(j.at("output"), "output", "dir", c.output_dir);
        }

        c.model.validate();
        c.train.validate();
        c.augmentation.validate();
        return c;
    }

    static RunConfig from_file(const std::filesystem::path& file) {
        std::ifstream is(file);
        if (!is) throw InputError(file.string() + ": cannot open config");
        jsonutil::json j;
        try {
            j = jsonutil::json::parse(is);
        } catch (const std::exception& e) {
            throw ConfigError(file.string() + ": " + e.what());
        }
        return from_json(j);
    }

    // Every knob spelled out, suitable for dumping next to a run's outputs.
    jsonutil::json to_json() const {
        jsonutil::json t = {{"lr", train.lr},
                            {"beta1", train.beta1},
                            {"beta2", train.beta2},
                            {"batch_size", train.batch_size},
                            {"weight_decay", train.weight_decay},
                            {"epochs", train.epochs},
                            {"scheduler", schedule_name(train.scheduler)},
                            {"momentum", train.momentum},
                            {"seed", train.seed},
                            {"early_stop_patience", train.early_stop_patience},
                            {"dropout_feedforward", model.ff_dropout}};
        if (model.family == Family::Vit) t["dropout_attention"] = model.vit.attn_dropout;
        jsonutil::json j;
        j["model"] = model.to_json();
        j["train"] = t;
        j["data"] = {{"root", data_root},
                     {"manifest", manifest_path},
                     {"augmentation",
                      {{"enabled", augmentation.enabled},
                       {"scale_jitter", augmentation.scale_jitter},
                       {"crop", augmentation.crop},
                       {"hflip_prob", augmentation.hflip_prob},
                       {"color_aug", color_aug_name(augmentation.color_aug)},
                       {"lighting_std", augmentation.lighting_std}}}};
        j["output"] = {{"dir", output_dir}};
        return j;
    }

    void save(const std::filesystem::path& file) const {
        std::ofstream os(file);
        if (!os) throw RuntimeFailure(file.string() + ": cannot write config");
        os << to_json().dump(2) << "\n";
    }
};

} // namespace cocoanet
