#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "../core/jsonutil.hpp"
#include "../core/rng.hpp"
#include "../core/warnings.hpp"
#include "image.hpp"
#include "labels.hpp"

namespace cocoanet {

enum class Split { Unassigned, Train, Val, Test };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
        case Split::Unassigned: return "unassigned";
    }
    return "?";
}

inline Split split_from_string(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    if (s == "unassigned") return Split::Unassigned;
    throw InputError("unknown split \"" + s + "\" (expected train, val or test)");
}

struct ManifestEntry {
    std::string path; // relative to the dataset root, forward slashes
    std::string label;
    Split split = Split::Unassigned;
};

// The dataset's ground truth: which files exist, what class each belongs to,
// and which split owns it. The seed and training-set channel means ride
// along so evaluation and resumed runs reproduce the exact preprocessing.
struct DatasetManifest {
    std::vector<std::string> class_names;
    std::uint64_t seed = 0;
    std::array<double, 3> channel_means{};
    std::vector<ManifestEntry> entries;

    std::size_t class_index(const std::string& label) const {
        return label_index(class_names, label);
    }

    std::vector<std::size_t> indices_of(Split s) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < entries.size(); ++i)
            if (entries[i].split == s) out.push_back(i);
        return out;
    }

    std::size_t count(Split s, const std::string& label) const {
        std::size_t n = 0;
        for (const auto& e : entries)
            if (e.split == s && e.label == label) ++n;
        return n;
    }

    std::size_t count(Split s) const {
        std::size_t n = 0;
        for (const auto& e : entries)
            if (e.split == s) ++n;
        return n;
    }

    jsonutil::json to_json() const {
        jsonutil::json j;
        j["class_names"] = class_names;
        j["seed"] = seed;
        j["channel_means"] = channel_means;
        j["entries"] = jsonutil::json::array();
        for (const auto& e : entries)
            j["entries"].push_back(
                {{"path", e.path}, {"label", e.label}, {"split", split_name(e.split)}});
        return j;
    }

    static DatasetManifest from_json(const jsonutil::json& j) {
        jsonutil::require_known_keys(j, "manifest",
                                     {"class_names", "seed", "channel_means", "entries"});
        DatasetManifest m;
        if (!j.contains("class_names") || !j.at("class_names").is_array())
            throw InputError("manifest: class_names array is required");
        for (const auto& c : j.at("class_names")) {
            if (!c.is_string()) throw InputError("manifest: class_names must be strings");
            m.class_names.push_back(c.get<std::string>());
        }
        if (m.class_names.empty()) throw InputError("manifest: class_names is empty");
        if (j.contains("seed")) {
            if (!j.at("seed").is_number_integer() && !j.at("seed").is_number_unsigned())
                throw InputError("manifest: seed must be an integer");
            m.seed = j.at("seed").get<std::uint64_t>();
        }
        if (j.contains("channel_means")) {
            const auto& cm = j.at("channel_means");
            if (!cm.is_array() || cm.size() != 3)
                throw InputError("manifest: channel_means must hold 3 numbers");
            for (int i = 0; i < 3; ++i) m.channel_means[i] = cm.at(i).get<double>();
        }
        if (!j.contains("entries") || !j.at("entries").is_array())
            throw InputError("manifest: entries array is required");
        for (const auto& e : j.at("entries")) {
            jsonutil::require_known_keys(e, "manifest.entries[]", {"path", "label", "split"});
            ManifestEntry me;
            me.path = jsonutil::get_string(e, "manifest.entries[]", "path", "");
            me.label = jsonutil::get_string(e, "manifest.entries[]", "label", "");
            if (me.path.empty() || me.label.empty())
                throw InputError("manifest: every entry needs path and label");
            me.split = split_from_string(
                jsonutil::get_string(e, "manifest.entries[]", "split", "unassigned"));
            m.class_index(me.label); // rejects labels outside class_names
            m.entries.push_back(std::move(me));
        }
        return m;
    }

    void save(const std::filesystem::path& file) const {
        std::ofstream os(file);
        if (!os) throw RuntimeFailure(file.string() + ": cannot open for writing");
        os << to_json().dump(2) << '\n';
        if (!os) throw RuntimeFailure(file.string() + ": write failed");
    }

    static DatasetManifest load(const std::filesystem::path& file) {
        std::ifstream is(file);
        if (!is) throw InputError(file.string() + ": cannot open manifest");
        jsonutil::json j;
        try {
            is >> j;
        } catch (const std::exception& e) {
            throw InputError(file.string() + ": manifest is not valid JSON (" + e.what() + ")");
        }
        return from_json(j);
    }
};

// Expects root/<ClassName>/<image files>. Class and file order are sorted
// byte-wise so the manifest is independent of directory enumeration order.
// Files that fail a header probe are skipped with a warning; a class whose
// directory yields nothing decodable is an error.
inline DatasetManifest scan_dataset(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root))
        throw InputError(root.string() +
                         ": dataset root must be a directory of per-class subdirectories");
    std::vector<std::string> classes;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) classes.push_back(entry.path().filename().string());
    std::sort(classes.begin(), classes.end());
    if (classes.empty())
        throw InputError(root.string() + ": no class subdirectories found (expected layout: " +
                         root.string() + "/<ClassName>/<images>)");

    DatasetManifest m;
    m.class_names = classes;
    for (const auto& cls : classes) {
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(root / cls))
            if (entry.is_regular_file() && has_image_extension(entry.path()))
                files.push_back(entry.path().filename().string());
        std::sort(files.begin(), files.end());
        std::size_t kept = 0;
        for (const auto& f : files) {
            const fs::path full = root / cls / f;
            if (!probe_image(full)) {
                std::fprintf(stderr, "warning: skipping undecodable image: %s\n",
                             full.string().c_str());
                warnings::raise("undecodable_image", "dataset scan skipped undecodable images");
                continue;
            }
            m.entries.push_back({cls + "/" + f, cls, Split::Unassigned});
            ++kept;
        }
        if (kept == 0)
            throw InputError(root.string() + "/" + cls + ": no decodable images in class \"" +
                             cls + "\"");
    }
    return m;
}

// Per class: n_test = round(ratio_test * n), n_val = round(ratio_val * n),
// the remainder trains. Assignment shuffles each class with its own
// substream of the seed, so the result is bit-reproducible and independent
// of other classes.
inline DatasetManifest stratified_split(DatasetManifest m,
                                        std::array<double, 3> ratios, // train, val, test
                                        std::uint64_t seed) {
    const double sum = ratios[0] + ratios[1] + ratios[2];
    if (ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0 || std::fabs(sum - 1.0) > 1e-9)
        throw InputError("split ratios must be non-negative and sum to 1");

    for (std::size_t ci = 0; ci < m.class_names.size(); ++ci) {
        const std::string& cls = m.class_names[ci];
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < m.entries.size(); ++i)
            if (m.entries[i].label == cls) members.push_back(i);

        const auto n = static_cast<long long>(members.size());
        const long long n_test = std::llround(ratios[2] * static_cast<double>(n));
        const long long n_val = std::llround(ratios[1] * static_cast<double>(n));
        const long long n_train = n - n_test - n_val;
        if (n_train < 1 || (ratios[1] > 0 && n_val < 1) || (ratios[2] > 0 && n_test < 1))
            throw InputError("class \"" + cls + "\" has too few images (" + std::to_string(n) +
                             ") to populate all splits");

        Rng rng(Rng::mix(seed, 0x73706C6974ull, ci)); // per-class substream
        rng.shuffle(members);
        for (long long k = 0; k < n; ++k) {
            Split s = Split::Train;
            if (k < n_test)
                s = Split::Test;
            else if (k < n_test + n_val)
                s = Split::Val;
            m.entries[members[static_cast<std::size_t>(k)]].split = s;
        }
    }
    m.seed = seed;
    return m;
}

} // namespace cocoanet
