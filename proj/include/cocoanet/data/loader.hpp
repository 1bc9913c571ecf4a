#pragma once

#include <filesystem>
#include <vector>

#include "preprocess.hpp"

namespace cocoanet {

// Binds a dataset root, its manifest, and the preprocessing knobs into a
// batch assembler. Each training sample gets its own rng stream derived from
// (seed, epoch, entry index), so an identically configured run reproduces
// every augmentation bit for bit no matter how batches are grouped.
class SampleSource {
public:
    SampleSource(std::filesystem::path root, const DatasetManifest& manifest,
                 NormalizationStats stats, AugmentationPolicy policy,
                 ImageLoader loader = default_image_loader())
        : root_(std::move(root)), manifest_(&manifest), stats_(stats),
          policy_(std::move(policy)), loader_(std::move(loader)) {}

    std::size_t num_classes() const { return manifest_->class_names.size(); }

    std::size_t label_of(std::size_t entry_index) const {
        return manifest_->class_index(manifest_->entries[entry_index].label);
    }

    TensorF load_train(std::size_t entry_index, std::uint64_t seed, long epoch) const {
        const Image img = loader_(root_ / manifest_->entries[entry_index].path);
        Rng rng(Rng::mix(seed, 0x617567ull, static_cast<std::uint64_t>(epoch),
                         static_cast<std::uint64_t>(entry_index)));
        return augment_train(img, policy_, stats_, rng);
    }

    TensorF load_eval(std::size_t entry_index) const {
        const Image img = loader_(root_ / manifest_->entries[entry_index].path);
        return preprocess_eval(img, stats_);
    }

    // Stacks the given entries into ([B,3,224,224], one-hot [B,classes]).
    std::pair<TensorF, TensorF> assemble(const std::vector<std::size_t>& entry_indices,
                                         bool train, std::uint64_t seed, long epoch) const {
        if (entry_indices.empty()) throw std::invalid_argument("assemble: empty batch");
        const std::size_t b = entry_indices.size();
        const std::size_t c = num_classes();
        TensorF images({b, kInputChannels, kInputSize, kInputSize});
        TensorF targets({b, c});
        const std::size_t sample_sz = kInputChannels * kInputSize * kInputSize;
        for (std::size_t i = 0; i < b; ++i) {
            const std::size_t e = entry_indices[i];
            TensorF chw = train ? load_train(e, seed, epoch) : load_eval(e);
            if (chw.size() != sample_sz)
                throw RuntimeFailure("assemble: preprocessing yielded " + chw.shape_str());
            std::copy_n(chw.data(), sample_sz, images.data() + i * sample_sz);
            targets[i * c + label_of(e)] = 1.0f;
        }
        return {std::move(images), std::move(targets)};
    }

    const DatasetManifest& manifest() const { return *manifest_; }
    const NormalizationStats& stats() const { return stats_; }
    const AugmentationPolicy& policy() const { return policy_; }

private:
    std::filesystem::path root_;
    const DatasetManifest* manifest_;
    NormalizationStats stats_;
    AugmentationPolicy policy_;
    ImageLoader loader_;
};

} // namespace cocoanet
