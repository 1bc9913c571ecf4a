#pragma once

#include <string>

#include "../core/jsonutil.hpp"

namespace cocoanet {

// All three networks consume fixed-size RGB crops.
inline constexpr std::size_t kInputSize = 224;
inline constexpr std::size_t kInputChannels = 3;

enum class Family { Vgg16, Resnet50, Vit };

inline const char* family_name(Family f) {
    switch (f) {
        case Family::Vgg16: return "vgg16";
        case Family::Resnet50: return "resnet50";
        case Family::Vit: return "vit";
    }
    return "?";
}

inline Family family_from_string(const std::string& s) {
    if (s == "vgg16") return Family::Vgg16;
    if (s == "resnet50") return Family::Resnet50;
    if (s == "vit") return Family::Vit;
    throw ConfigError("unknown model family \"" + s + "\" (expected vgg16, resnet50 or vit)");
}

// Transformer geometry. head_kind selects between a linear classifier and a
// one-hidden-layer MLP on the class token.
struct VitConfig {
    int patch_size = 16;
    int depth = 8;
    std::size_t embed_dim = 256;
    std::size_t heads = 8;
    std::size_t mlp_hidden = 1024;
    std::string head_kind = "mlp"; // "mlp" | "linear"
    std::size_t head_hidden = 256;
    double attn_dropout = 0.5;
};

// Everything needed to rebuild a network deterministically; travels inside
// checkpoint headers so an evaluator never has to guess the topology.
struct ArchitectureSpec {
    Family family = Family::Resnet50;
    std::size_t num_classes = 3;
    // Classifier dropout for VGG16, encoder-MLP dropout for the ViT;
    // ResNet50 trains without dropout.
    double ff_dropout = 0.0;
    VitConfig vit;

    static ArchitectureSpec make_default(Family f) {
        ArchitectureSpec s;
        s.family = f;
        switch (f) {
            case Family::Vgg16: s.ff_dropout = 0.5; break;
            case Family::Resnet50: s.ff_dropout = 0.0; break;
            case Family::Vit: s.ff_dropout = 0.2; break;
        }
        return s;
    }

    void validate() const {
        if (num_classes < 2) throw ConfigError("model.num_classes must be at least 2");
        if (ff_dropout < 0.0 || ff_dropout >= 1.0)
            throw ConfigError("model.ff_dropout must lie in [0, 1)");
        if (family == Family::Resnet50 && ff_dropout != 0.0)
            throw ConfigError("resnet50 has no dropout layers; model.ff_dropout must be 0");
        if (family == Family::Vit) {
            if (vit.patch_size <= 0 || kInputSize % vit.patch_size != 0)
                throw ConfigError("model.vit.patch_size must divide " +
                                  std::to_string(kInputSize));
            if (vit.depth <= 0) throw ConfigError("model.vit.depth must be positive");
            if (vit.embed_dim == 0 || vit.heads == 0 || vit.embed_dim % vit.heads != 0)
                throw ConfigError("model.vit.embed_dim must be divisible by model.vit.heads");
            if (vit.mlp_hidden == 0) throw ConfigError("model.vit.mlp_hidden must be positive");
            if (vit.head_kind != "mlp" && vit.head_kind != "linear")
                throw ConfigError("model.vit.head must be \"mlp\" or \"linear\"");
            if (vit.head_kind == "mlp" && vit.head_hidden == 0)
                throw ConfigError("model.vit.head_hidden must be positive for the mlp head");
            if (vit.attn_dropout < 0.0 || vit.attn_dropout >= 1.0)
                throw ConfigError("model.vit.attn_dropout must lie in [0, 1)");
        }
    }

    std::size_t patches_per_side() const {
        return kInputSize / static_cast<std::size_t>(vit.patch_size);
    }
    std::size_t num_patches() const { return patches_per_side() * patches_per_side(); }
    // Patch tokens plus the class token.
    std::size_t sequence_length() const { return num_patches() + 1; }

    jsonutil::json to_json() const {
        jsonutil::json j;
        j["family"] = family_name(family);
        j["num_classes"] = num_classes;
        j["ff_dropout"] = ff_dropout;
        if (family == Family::Vit) {
            j["vit"] = {{"patch_size", vit.patch_size},
                        {"depth", vit.depth},
                        {"embed_dim", vit.embed_dim},
                        {"heads", vit.heads},
                        {"mlp_hidden", vit.mlp_hidden},
                        {"head", vit.head_kind},
                        {"head_hidden", vit.head_hidden},
                        {"attn_dropout", vit.attn_dropout}};
        }
        return j;
    }

    static ArchitectureSpec from_json(const jsonutil::json& j, const std::string& where) {
        jsonutil::require_known_keys(j, where, {"family", "num_classes", "ff_dropout", "vit"});
        if (!j.contains("family")) throw ConfigError(where + ".family is required");
        ArchitectureSpec s = make_default(family_from_string(
            jsonutil::get_string(j, where, "family", "")));
        s.num_classes = static_cast<std::size_t>(
            jsonutil::get_integer(j, where, "num_classes", static_cast<long>(s.num_classes)));
        s.ff_dropout = jsonutil::get_number(j, where, "ff_dropout", s.ff_dropout);
        if (j.contains("vit")) {
            if (s.family != Family::Vit)
                throw ConfigError(where + ".vit is only valid for family \"vit\"");
            const auto& v = j.at("vit");
            const std::string w = where + ".vit";
            jsonutil::require_known_keys(v, w,
                                         {"patch_size", "depth", "embed_dim", "heads",
                                          "mlp_hidden", "head", "head_hidden", "attn_dropout"});
            s.vit.patch_size =
                static_cast<int>(jsonutil::get_integer(v, w, "patch_size", s.vit.patch_size));
            s.vit.depth = static_cast<int>(jsonutil::get_integer(v, w, "depth", s.vit.depth));
            s.vit.embed_dim = static_cast<std::size_t>(
                jsonutil::get_integer(v, w, "embed_dim", static_cast<long>(s.vit.embed_dim)));
            s.vit.heads = static_cast<std::size_t>(
                jsonutil::get_integer(v, w, "heads", static_cast<long>(s.vit.heads)));
            s.vit.mlp_hidden = static_cast<std::size_t>(
                jsonutil::get_integer(v, w, "mlp_hidden", static_cast<long>(s.vit.mlp_hidden)));
            s.vit.head_kind = jsonutil::get_string(v, w, "head", s.vit.head_kind);
            s.vit.head_hidden = static_cast<std::size_t>(
                jsonutil::get_integer(v, w, "head_hidden", static_cast<long>(s.vit.head_hidden)));
            s.vit.attn_dropout = jsonutil::get_number(v, w, "attn_dropout", s.vit.attn_dropout);
        }
        s.validate();
        return s;
    }
};

} // namespace cocoanet
