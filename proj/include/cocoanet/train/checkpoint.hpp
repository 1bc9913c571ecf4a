#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "../core/jsonutil.hpp"
#include "../models/build.hpp"
#include "adam.hpp"

namespace cocoanet {

// Checkpoint container: "CKV1" magic, a little-endian u64 header length, a
// UTF-8 JSON header, then raw float32 payload. The header carries the full
// architecture spec, the epoch, arbitrary metrics, the training channel
// means, and a tensor index (name, shape, byte offset into the payload).
// Optimizer moments are an optional second index into the same payload.
// Non-trainable running stats are ordinary index entries, so a loaded model
// evaluates identically without a warm-up pass.

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is little-endian float32");

inline constexpr char kCheckpointMagic[4] = {'C', 'K', 'V', '1'};
inline constexpr int kCheckpointVersion = 1;

enum class CheckpointErrorKind { Io, BadMagic, Truncated, BadHeader, VersionMismatch,
                                 ShapeMismatch };

class CheckpointError final : public InputError {
public:
    CheckpointError(CheckpointErrorKind kind, const std::string& what)
        : InputError(what), kind_(kind) {}
    CheckpointErrorKind kind() const { return kind_; }

private:
    CheckpointErrorKind kind_;
};

struct CheckpointMeta {
    int version = kCheckpointVersion;
    ArchitectureSpec arch;
    long epoch = -1;
    jsonutil::json metrics;
    std::array<double, 3> channel_means{};
    std::vector<std::string> class_names;
    bool has_optimizer = false;
};

namespace detail {

struct TensorIndexEntry {
    std::string name;
    std::vector<std::size_t> shape;
    std::uint64_t offset = 0; // bytes from payload start
};

inline jsonutil::json index_to_json(const std::vector<TensorIndexEntry>& ix) {
    jsonutil::json j = jsonutil::json::array();
    for (const auto& e : ix)
        j.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", e.offset}});
    return j;
}

inline std::vector<TensorIndexEntry> index_from_json(const jsonutil::json& j,
                                                     const char* what) {
    if (!j.is_array())
        throw CheckpointError(CheckpointErrorKind::BadHeader,
                              std::string(what) + " index is not an array");
    std::vector<TensorIndexEntry> out;
    for (const auto& e : j) {
        if (!e.is_object() || !e.contains("name") || !e.contains("shape") ||
            !e.contains("offset"))
            throw CheckpointError(CheckpointErrorKind::BadHeader,
                                  std::string(what) + " index entry is malformed");
        TensorIndexEntry t;
        t.name = e.at("name").get<std::string>();
        for (const auto& d : e.at("shape")) t.shape.push_back(d.get<std::size_t>());
        t.offset = e.at("offset").get<std::uint64_t>();
        out.push_back(std::move(t));
    }
    return out;
}

inline std::size_t volume(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return shape.empty() ? 0 : n;
}

} // namespace detail

inline void save_checkpoint(const std::filesystem::path& file, ModelInstance<float>& model,
                            long epoch, const jsonutil::json& metrics,
                            const std::array<double, 3>& channel_means,
                            const Adam<float>* optimizer = nullptr,
                            const std::vector<std::string>& class_names = {}) {
    std::vector<detail::TensorIndexEntry> model_ix;
    std::vector<const Tensor<float>*> payload;
    std::uint64_t offset = 0;
    model.visit_params([&](const std::string& name, Param<float>& p) {
        model_ix.push_back({name, p.value.shape(), offset});
        payload.push_back(&p.value);
        offset += p.value.size() * sizeof(float);
    });

    jsonutil::json header;
    header["version"] = kCheckpointVersion;
    header["arch"] = model.spec().to_json();
    header["epoch"] = epoch;
    header["metrics"] = metrics;
    header["channel_means"] = channel_means;
    if (!class_names.empty()) {
        if (class_names.size() != model.spec().num_classes)
            throw std::invalid_argument("save_checkpoint: class name count does not match "
                                        "the model's output width");
        header["class_names"] = class_names;
    }
    header["tensors"] = detail::index_to_json(model_ix);

    if (optimizer && optimizer->steps_taken() > 0) {
        std::vector<detail::TensorIndexEntry> opt_ix;
        std::vector<std::string> trainable_names;
        model.visit_params([&](const std::string& name, Param<float>& p) {
            if (p.trainable) trainable_names.push_back(name);
        });
        const auto& m1 = optimizer->moments1();
        const auto& m2 = optimizer->moments2();
        if (m1.size() != trainable_names.size())
            throw std::logic_error("save_checkpoint: optimizer does not match this model");
        for (std::size_t i = 0; i < m1.size(); ++i) {
            opt_ix.push_back({"m." + trainable_names[i], m1[i].shape(), offset});
            payload.push_back(&m1[i]);
            offset += m1[i].size() * sizeof(float);
        }
        for (std::size_t i = 0; i < m2.size(); ++i) {
            opt_ix.push_back({"v." + trainable_names[i], m2[i].shape(), offset});
            payload.push_back(&m2[i]);
            offset += m2[i].size() * sizeof(float);
        }
        header["optimizer"] = {{"step", optimizer->steps_taken()},
                               {"tensors", detail::index_to_json(opt_ix)}};
    }

    const std::string head = header.dump();
    std::ofstream os(file, std::ios::binary);
    if (!os)
        throw RuntimeFailure(file.string() + ": cannot open checkpoint for writing");
    os.write(kCheckpointMagic, 4);
    const std::uint64_t head_len = head.size();
    os.write(reinterpret_cast<const char*>(&head_len), sizeof head_len);
    os.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const Tensor<float>* t : payload)
        os.write(reinterpret_cast<const char*>(t->data()),
                 static_cast<std::streamsize>(t->size() * sizeof(float)));
    if (!os) throw RuntimeFailure(file.string() + ": checkpoint write failed");
}

namespace detail {

struct OpenCheckpoint {
    jsonutil::json header;
    std::uint64_t payload_start = 0;
};

inline OpenCheckpoint open_checkpoint(std::ifstream& is, const std::string& name) {
    if (!is) throw CheckpointError(CheckpointErrorKind::Io, name + ": cannot open checkpoint");
    char magic[4];
    if (!is.read(magic, 4))
        throw CheckpointError(CheckpointErrorKind::Truncated, name + ": shorter than its magic");
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw CheckpointError(CheckpointErrorKind::BadMagic,
                              name + ": not a checkpoint (bad magic)");
    std::uint64_t head_len = 0;
    if (!is.read(reinterpret_cast<char*>(&head_len), sizeof head_len))
        throw CheckpointError(CheckpointErrorKind::Truncated, name + ": missing header length");
    if (head_len == 0 || head_len > (1ull << 30))
        throw CheckpointError(CheckpointErrorKind::BadHeader,
                              name + ": implausible header length");
    std::string head(head_len, '\0');
    if (!is.read(head.data(), static_cast<std::streamsize>(head_len)))
        throw CheckpointError(CheckpointErrorKind::Truncated, name + ": truncated header");
    OpenCheckpoint out;
    try {
        out.header = jsonutil::json::parse(head);
    } catch (const std::exception& e) {
        throw CheckpointError(CheckpointErrorKind::BadHeader,
                              name + ": header is not valid JSON (" + e.what() + ")");
    }
    if (!out.header.is_object() || !out.header.contains("version") ||
        !out.header.at("version").is_number_integer())
        throw CheckpointError(CheckpointErrorKind::BadHeader, name + ": header lacks a version");
    if (out.header.at("version").get<int>() != kCheckpointVersion)
        throw CheckpointError(CheckpointErrorKind::VersionMismatch,
                              name + ": checkpoint version " +
                                  std::to_string(out.header.at("version").get<int>()) +
                                  " is not supported (expected " +
                                  std::to_string(kCheckpointVersion) + ")");
    out.payload_start = 4 + sizeof head_len + head_len;
    return out;
}

inline CheckpointMeta meta_from_header(const jsonutil::json& h, const std::string& name) {
    CheckpointMeta meta;
    meta.version = h.at("version").get<int>();
    if (!h.contains("arch"))
        throw CheckpointError(CheckpointErrorKind::BadHeader,
                              name + ": header lacks the architecture spec");
    try {
        meta.arch = ArchitectureSpec::from_json(h.at("arch"), "checkpoint.arch");
    } catch (const ConfigError& e) {
        throw CheckpointError(CheckpointErrorKind::BadHeader, name + ": " + e.what());
    }
    meta.epoch = h.contains("epoch") ? h.at("epoch").get<long>() : -1;
    if (h.contains("metrics")) meta.metrics = h.at("metrics");
    if (h.contains("channel_means") && h.at("channel_means").is_array() &&
        h.at("channel_means").size() == 3)
        for (int i = 0; i < 3; ++i) meta.channel_means[i] = h.at("channel_means").at(i).get<double>();
    if (h.contains("class_names") && h.at("class_names").is_array())
        for (const auto& n : h.at("class_names"))
            meta.class_names.push_back(n.get<std::string>());
    meta.has_optimizer = h.contains("optimizer");
    return meta;
}

inline void read_tensor_at(std::ifstream& is, std::uint64_t payload_start,
                           const TensorIndexEntry& e, Tensor<float>& into,
                           const std::string& name) {
    if (into.shape() != e.shape)
        throw CheckpointError(CheckpointErrorKind::ShapeMismatch,
                              name + ": tensor \"" + e.name + "\" has shape " +
                                  Tensor<float>::shape_string(e.shape) + " but the model expects " +
                                  into.shape_str());
    is.clear();
    is.seekg(static_cast<std::streamoff>(payload_start + e.offset));
    if (!is.read(reinterpret_cast<char*>(into.data()),
                 static_cast<std::streamsize>(into.size() * sizeof(float))))
        throw CheckpointError(CheckpointErrorKind::Truncated,
                              name + ": payload ends inside tensor \"" + e.name + "\"");
}

} // namespace detail

inline CheckpointMeta read_checkpoint_meta(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    const auto open = detail::open_checkpoint(is, file.string());
    return detail::meta_from_header(open.header, file.string());
}

// Overwrites the params of an already-built model from the file; the
// architectures must agree exactly. The tensor sets must match one to one.
inline CheckpointMeta load_params_into(const std::filesystem::path& file,
                                       ModelInstance<float>& model) {
    std::ifstream is(file, std::ios::binary);
    const auto open = detail::open_checkpoint(is, file.string());
    const CheckpointMeta meta = detail::meta_from_header(open.header, file.string());
    if (meta.arch.to_json() != model.spec().to_json())
        throw CheckpointError(CheckpointErrorKind::ShapeMismatch,
                              file.string() + ": checkpoint architecture " +
                                  meta.arch.to_json().dump() + " does not match the model");
    if (!open.header.contains("tensors"))
        throw CheckpointError(CheckpointErrorKind::BadHeader,
                              file.string() + ": header lacks a tensor index");
    const auto index = detail::index_from_json(open.header.at("tensors"), "tensor");

    std::map<std::string, Param<float>*> by_name;
    model.visit_params([&](const std::string& n, Param<float>& p) { by_name[n] = &p; });
    std::size_t matched = 0;
    for (const auto& e : index) {
        auto it = by_name.find(e.name);
        if (it == by_name.end())
            throw CheckpointError(CheckpointErrorKind::ShapeMismatch,
                                  file.string() + ": tensor \"" + e.name +
                                      "\" has no home in this model");
        detail::read_tensor_at(is, open.payload_start, e, it->second->value, file.string());
        ++matched;
    }
    if (matched != by_name.size())
        throw CheckpointError(CheckpointErrorKind::ShapeMismatch,
                              file.string() + ": checkpoint covers " + std::to_string(matched) +
                                  " of " + std::to_string(by_name.size()) + " model tensors");
    return meta;
}

// Rebuilds the architecture named in the header and fills in every tensor.
// Optionally restores Adam moments when the file carries them.
inline ModelInstance<float> load_checkpoint(const std::filesystem::path& file,
                                            Adam<float>* optimizer = nullptr,
                                            CheckpointMeta* meta_out = nullptr) {
    const CheckpointMeta meta = read_checkpoint_meta(file);
    ModelInstance<float> model = build_model<float>(meta.arch, 0);
    load_params_into(file, model);

    if (optimizer && meta.has_optimizer) {
        std::ifstream is(file, std::ios::binary);
        const auto open = detail::open_checkpoint(is, file.string());
        const auto& opt = open.header.at("optimizer");
        if (!opt.is_object() || !opt.contains("step") || !opt.contains("tensors"))
            throw CheckpointError(CheckpointErrorKind::BadHeader,
                                  file.string() + ": malformed optimizer block");
        const auto ix = detail::index_from_json(opt.at("tensors"), "optimizer");
        std::vector<std::string> names;
        std::vector<Tensor<float>> m1, m2;
        model.visit_params([&](const std::string& n, Param<float>& p) {
            if (p.trainable) names.push_back(n);
        });
        if (ix.size() != names.size() * 2)
            throw CheckpointError(CheckpointErrorKind::ShapeMismatch,
                                  file.string() + ": optimizer index does not cover the model");
        auto read_moment = [&](const std::string& prefix, std::vector<Tensor<float>>& dst) {
            for (const auto& n : names) {
                const std::string want = prefix + n;
                const detail::TensorIndexEntry* found = nullptr;
                for (const auto& e : ix)
                    if (e.name == want) {
                        found = &e;
                        break;
                    }
                if (!found)
                    throw CheckpointError(CheckpointErrorKind::ShapeMismatch,
                                          file.string() + ": optimizer tensor \"" + want +
                                              "\" is missing");
                Tensor<float> t(found->shape);
                detail::read_tensor_at(is, open.payload_start, *found, t, file.string());
                dst.push_back(std::move(t));
            }
        };
        read_moment("m.", m1);
        read_moment("v.", m2);
        optimizer->restore(opt.at("step").get<long long>(), std::move(m1), std::move(m2));
    }
    if (meta_out) *meta_out = meta;
    return model;
}

} // namespace cocoanet
