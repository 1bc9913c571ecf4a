#pragma once

#include <array>
#include <filesystem>
#include <functional>

#include "../core/rng.hpp"
#include "../models/spec.hpp"
#include "image.hpp"
#include "image_ops.hpp"
#include "manifest.hpp"

namespace cocoanet {

// Injectable decoder so tests can feed synthetic pixels without touching
// disk; production code uses decode_image.
using ImageLoader = std::function<Image(const std::filesystem::path&)>;

inline ImageLoader default_image_loader() {
    return [](const std::filesystem::path& p) { return decode_image(p); };
}

// Per-channel means of the training split in [0,1] units, taken over the
// raw full-resolution pixels.
struct NormalizationStats {
    std::array<double, 3> mean_rgb{};
};

// RGB covariance eigenstructure of the training split, for lighting noise.
struct PcaColorStats {
    std::array<double, 3> eigenvalues{};
    std::array<std::array<double, 3>, 3> eigenvectors{};
};

inline constexpr std::size_t kEvalResize = 256;

struct AugmentationPolicy {
    bool enabled = true;
    // Shorter-side target drawn uniformly from this inclusive range.
    std::array<int, 2> scale_jitter = {256, 256};
    int crop = static_cast<int>(kInputSize);
    double hflip_prob = 0.5;
    enum class ColorAug { None, PcaLighting } color_aug = ColorAug::None;
    double lighting_std = 0.1;
    PcaColorStats pca; // filled by compute_color_stats when lighting is on

    void validate() const {
        if (crop <= 0) throw ConfigError("augmentation.crop must be positive");
        if (scale_jitter[0] > scale_jitter[1])
            throw ConfigError("augmentation.scale_jitter range is inverted");
        if (scale_jitter[0] < crop)
            throw ConfigError("augmentation.scale_jitter must not fall below the crop size");
        if (hflip_prob < 0.0 || hflip_prob > 1.0)
            throw ConfigError("augmentation.hflip_prob must lie in [0, 1]");
        if (lighting_std < 0.0) throw ConfigError("augmentation.lighting_std must be >= 0");
    }

    static AugmentationPolicy for_family(Family f) {
        AugmentationPolicy p;
        if (f == Family::Resnet50) {
            p.scale_jitter = {256, 480};
            p.color_aug = ColorAug::PcaLighting;
        }
        return p;
    }
};

inline NormalizationStats compute_channel_means(const std::filesystem::path& root,
                                                const DatasetManifest& manifest,
                                                const ImageLoader& loader =
                                                    default_image_loader()) {
    double sums[3] = {0, 0, 0};
    std::size_t pixels = 0;
    for (const auto& e : manifest.entries) {
        if (e.split != Split::Train) continue;
        const Image img = loader(root / e.path);
        const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
        const std::uint8_t* p = img.rgb.data();
        for (std::size_t i = 0; i < n; ++i) {
            sums[0] += p[3 * i + 0];
            sums[1] += p[3 * i + 1];
            sums[2] += p[3 * i + 2];
        }
        pixels += n;
    }
    if (pixels == 0) throw InputError("compute_channel_means: training split is empty");
    NormalizationStats s;
    for (int c = 0; c < 3; ++c) s.mean_rgb[c] = sums[c] / (255.0 * static_cast<double>(pixels));
    return s;
}

inline PcaColorStats compute_color_stats(const std::filesystem::path& root,
                                         const DatasetManifest& manifest,
                                         const ImageLoader& loader = default_image_loader()) {
    // Covariance of [0,1] RGB over every training pixel.
    double sum[3] = {0, 0, 0};
    double prod[3][3] = {};
    double pixels = 0;
    for (const auto& e : manifest.entries) {
        if (e.split != Split::Train) continue;
        const Image img = loader(root / e.path);
        const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
        const std::uint8_t* p = img.rgb.data();
        for (std::size_t i = 0; i < n; ++i) {
            const double v[3] = {p[3 * i] / 255.0, p[3 * i + 1] / 255.0, p[3 * i + 2] / 255.0};
            for (int a = 0; a < 3; ++a) {
                sum[a] += v[a];
                for (int b = a; b < 3; ++b) prod[a][b] += v[a] * v[b];
            }
        }
        pixels += static_cast<double>(n);
    }
    if (pixels == 0) throw InputError("compute_color_stats: training split is empty");
    std::array<std::array<double, 3>, 3> cov{};
    for (int a = 0; a < 3; ++a)
        for (int b = a; b < 3; ++b) {
            const double c = prod[a][b] / pixels - (sum[a] / pixels) * (sum[b] / pixels);
            cov[a][b] = cov[b][a] = c;
        }
    const Sym3Eigen eig = sym3_eigen(cov);
    PcaColorStats out;
    out.eigenvalues = eig.values;
    out.eigenvectors = eig.vectors;
    return out;
}

// Deterministic eval path: shorter side to 256, center 224 crop, subtract
// the training means.
inline TensorF preprocess_eval(const Image& img, const NormalizationStats& stats) {
    TensorF chw = resize_shorter_side(image_to_chw(img), kEvalResize);
    chw = center_crop(chw, kInputSize);
    subtract_mean_inplace(chw, stats.mean_rgb);
    return chw;
}

// Train path. Draw order from the per-sample stream is fixed (scale, crop
// row, crop col, flip, lighting alphas) so a replay with the same stream is
// bit-identical. With the policy disabled this is exactly preprocess_eval
// and the stream goes untouched.
inline TensorF augment_train(const Image& img, const AugmentationPolicy& policy,
                             const NormalizationStats& stats, Rng& rng) {
    if (!policy.enabled) return preprocess_eval(img, stats);
    policy.validate();

    int target = policy.scale_jitter[0];
    if (policy.scale_jitter[1] > policy.scale_jitter[0])
        target += static_cast<int>(
            rng.bounded(static_cast<std::uint64_t>(policy.scale_jitter[1] -
                                                   policy.scale_jitter[0] + 1)));
    TensorF chw = resize_shorter_side(image_to_chw(img), static_cast<std::size_t>(target));

    const std::size_t crop_sz = static_cast<std::size_t>(policy.crop);
    const std::size_t top = static_cast<std::size_t>(rng.bounded(chw.dim(1) - crop_sz + 1));
    const std::size_t left = static_cast<std::size_t>(rng.bounded(chw.dim(2) - crop_sz + 1));
    chw = crop(chw, top, left, crop_sz);

    if (rng.bernoulli(policy.hflip_prob)) hflip_inplace(chw);

    if (policy.color_aug == AugmentationPolicy::ColorAug::PcaLighting) {
        const std::array<double, 3> alpha = {rng.normal(0.0, policy.lighting_std),
                                             rng.normal(0.0, policy.lighting_std),
                                             rng.normal(0.0, policy.lighting_std)};
        add_pca_lighting_inplace(chw, policy.pca.eigenvectors, policy.pca.eigenvalues, alpha);
    }
    subtract_mean_inplace(chw, stats.mean_rgb);
    return chw;
}

} // namespace cocoanet
