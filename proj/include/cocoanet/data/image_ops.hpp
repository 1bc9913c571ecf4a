#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "../core/tensor.hpp"
#include "image.hpp"

namespace cocoanet {

// Geometry and color transforms all operate on [3, H, W] float tensors with
// values nominally in [0, 1]; mean subtraction happens last in the pipeline,
// so augmentations see the raw scale.

inline TensorF image_to_chw(const Image& img) {
    if (img.width <= 0 || img.height <= 0)
        throw std::invalid_argument("image_to_chw: empty image");
    TensorF t({3, static_cast<std::size_t>(img.height), static_cast<std::size_t>(img.width)});
    const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
    const std::uint8_t* src = img.rgb.data();
    float* r = t.data();
    float* g = r + plane;
    float* b = g + plane;
    constexpr float inv = 1.0f / 255.0f;
    for (std::size_t i = 0; i < plane; ++i) {
        r[i] = static_cast<float>(src[3 * i + 0]) * inv;
        g[i] = static_cast<float>(src[3 * i + 1]) * inv;
        b[i] = static_cast<float>(src[3 * i + 2]) * inv;
    }
    return t;
}

// Separable bilinear resampling with half-pixel centers:
// src = (dst + 0.5) * (in/out) - 0.5, edges clamped. Deterministic by
// construction; no SIMD, no platform-dependent rounding.
inline TensorF resize_bilinear(const TensorF& chw, std::size_t out_h, std::size_t out_w) {
    if (chw.rank() != 3) throw std::invalid_argument("resize_bilinear: expected [C,H,W]");
    if (out_h == 0 || out_w == 0) throw std::invalid_argument("resize_bilinear: empty target");
    const std::size_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
    if (h == out_h && w == out_w) return chw;
    TensorF out({c, out_h, out_w});
    const double sy = static_cast<double>(h) / out_h;
    const double sx = static_cast<double>(w) / out_w;

    std::vector<std::size_t> x0(out_w), x1(out_w);
    std::vector<float> fx(out_w);
    for (std::size_t j = 0; j < out_w; ++j) {
        double src = (j + 0.5) * sx - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(w - 1));
        const std::size_t lo = static_cast<std::size_t>(src);
        x0[j] = lo;
        x1[j] = std::min(lo + 1, w - 1);
        fx[j] = static_cast<float>(src - lo);
    }
    for (std::size_t ch = 0; ch < c; ++ch) {
        const float* plane = chw.data() + ch * h * w;
        float* dst = out.data() + ch * out_h * out_w;
        for (std::size_t i = 0; i < out_h; ++i) {
            double src = (i + 0.5) * sy - 0.5;
            src = std::clamp(src, 0.0, static_cast<double>(h - 1));
            const std::size_t y0 = static_cast<std::size_t>(src);
            const std::size_t y1 = std::min(y0 + 1, h - 1);
            const float fy = static_cast<float>(src - y0);
            const float* row0 = plane + y0 * w;
            const float* row1 = plane + y1 * w;
            float* orow = dst + i * out_w;
            for (std::size_t j = 0; j < out_w; ++j) {
                const float top = row0[x0[j]] + (row0[x1[j]] - row0[x0[j]]) * fx[j];
                const float bot = row1[x0[j]] + (row1[x1[j]] - row1[x0[j]]) * fx[j];
                orow[j] = top + (bot - top) * fy;
            }
        }
    }
    return out;
}

// Scales so the shorter side equals `target`; the other side is
// floor(other * target / shorter), aspect preserved.
inline TensorF resize_shorter_side(const TensorF& chw, std::size_t target) {
    if (chw.rank() != 3) throw std::invalid_argument("resize_shorter_side: expected [C,H,W]");
    const std::size_t h = chw.dim(1), w = chw.dim(2);
    if (target == 0) throw std::invalid_argument("resize_shorter_side: zero target");
    if (h <= w) {
        const std::size_t ow = (w * target) / h;
        return resize_bilinear(chw, target, std::max<std::size_t>(ow, 1));
    }
    const std::size_t oh = (h * target) / w;
    return resize_bilinear(chw, std::max<std::size_t>(oh, 1), target);
}

inline TensorF crop(const TensorF& chw, std::size_t top, std::size_t left, std::size_t size) {
    if (chw.rank() != 3) throw std::invalid_argument("crop: expected [C,H,W]");
    const std::size_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
    if (top + size > h || left + size > w)
        throw std::invalid_argument("crop: " + std::to_string(size) + " at (" +
                                    std::to_string(top) + "," + std::to_string(left) +
                                    ") exceeds " + chw.shape_str());
    TensorF out({c, size, size});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < size; ++i)
            std::copy_n(chw.data() + (ch * h + top + i) * w + left, size,
                        out.data() + (ch * size + i) * size);
    return out;
}

inline TensorF center_crop(const TensorF& chw, std::size_t size) {
    return crop(chw, (chw.dim(1) - size) / 2, (chw.dim(2) - size) / 2, size);
}

inline void hflip_inplace(TensorF& chw) {
    if (chw.rank() != 3) throw std::invalid_argument("hflip: expected [C,H,W]");
    const std::size_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < h; ++i) {
            float* row = chw.data() + (ch * h + i) * w;
            std::reverse(row, row + w);
        }
}

inline void subtract_mean_inplace(TensorF& chw, const std::array<double, 3>& mean) {
    if (chw.rank() != 3 || chw.dim(0) != 3)
        throw std::invalid_argument("subtract_mean: expected [3,H,W]");
    const std::size_t plane = chw.dim(1) * chw.dim(2);
    for (std::size_t ch = 0; ch < 3; ++ch) {
        const float m = static_cast<float>(mean[ch]);
        float* p = chw.data() + ch * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] -= m;
    }
}

// Eigen decomposition of a symmetric 3x3 by cyclic Jacobi rotations.
// values are sorted descending; vectors[k] is the unit eigenvector paired
// with values[k].
struct Sym3Eigen {
    std::array<double, 3> values{};
    std::array<std::array<double, 3>, 3> vectors{};
};

inline Sym3Eigen sym3_eigen(std::array<std::array<double, 3>, 3> a) {
    std::array<std::array<double, 3>, 3> v = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    for (int sweep = 0; sweep < 64; ++sweep) {
        int p = 0, q = 1;
        double biggest = std::fabs(a[0][1]);
        if (std::fabs(a[0][2]) > biggest) { biggest = std::fabs(a[0][2]); p = 0; q = 2; }
        if (std::fabs(a[1][2]) > biggest) { biggest = std::fabs(a[1][2]); p = 1; q = 2; }
        if (biggest < 1e-14) break;

        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        const double apq = a[p][q];
        a[p][p] -= t * apq;
        a[q][q] += t * apq;
        a[p][q] = a[q][p] = 0.0;
        for (int r = 0; r < 3; ++r) {
            if (r == p || r == q) continue;
            const double arp = a[r][p], arq = a[r][q];
            a[r][p] = a[p][r] = c * arp - s * arq;
            a[r][q] = a[q][r] = s * arp + c * arq;
        }
        for (int r = 0; r < 3; ++r) {
            const double vrp = v[r][p], vrq = v[r][q];
            v[r][p] = c * vrp - s * vrq;
            v[r][q] = s * vrp + c * vrq;
        }
    }
    Sym3Eigen out;
    std::array<int, 3> order = {0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int x, int y) { return a[x][x] > a[y][y]; });
    for (int k = 0; k < 3; ++k) {
        out.values[k] = a[order[k]][order[k]];
        for (int r = 0; r < 3; ++r) out.vectors[k][r] = v[r][order[k]];
    }
    return out;
}

// AlexNet-style lighting noise: each pixel's RGB is shifted by
// sum_k alpha_k * lambda_k * e_k using the training set's RGB covariance
// eigenstructure. alphas are drawn once per image.
inline void add_pca_lighting_inplace(TensorF& chw,
                                     const std::array<std::array<double, 3>, 3>& eigvecs,
                                     const std::array<double, 3>& eigvals,
                                     const std::array<double, 3>& alpha) {
    if (chw.rank() != 3 || chw.dim(0) != 3)
        throw std::invalid_argument("pca_lighting: expected [3,H,W]");
    std::array<float, 3> shift{};
    for (int ch = 0; ch < 3; ++ch) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += alpha[k] * eigvals[k] * eigvecs[k][ch];
        shift[ch] = static_cast<float>(s);
    }
    const std::size_t plane = chw.dim(1) * chw.dim(2);
    for (std::size_t ch = 0; ch < 3; ++ch) {
        float* p = chw.data() + ch * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] += shift[ch];
    }
}

} // namespace cocoanet
