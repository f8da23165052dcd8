#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gatenet/metrics.hpp"
#include "gatenet/netpbm.hpp"
#include "gatenet/rng.hpp"
#include "gatenet/tensor.hpp"

namespace gatenet {

// Planar RGB in [0,1], channel-major (3, h, w).
struct ImageRGB {
    int h = 0, w = 0;
    std::vector<float> v;

    ImageRGB() = default;
    ImageRGB(int h_, int w_) : h(h_), w(w_), v(3ull * h_ * w_, 0.0f) {}

    float& at(int c, int y, int x) {
        return v[(static_cast<std::size_t>(c) * h + y) * w + x];
    }
    float at(int c, int y, int x) const {
        return v[(static_cast<std::size_t>(c) * h + y) * w + x];
    }
};

struct Sample {
    ImageRGB image;
    BinaryMask mask;

    void validate() const {
        require(image.h == mask.h && image.w == mask.w, "Sample: image ", image.h, "x",
                image.w, " vs mask ", mask.h, "x", mask.w);
    }
};

inline ImageRGB image_from_ppm(const std::string& path) {
    const PnmData d = read_pnm(path, '6');
    ImageRGB img(d.height, d.width);
    for (int y = 0; y < d.height; ++y)
        for (int x = 0; x < d.width; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) =
                    d.bytes[(static_cast<std::size_t>(y) * d.width + x) * 3 + c] / 255.0f;
    return img;
}

inline void save_image_ppm(const std::string& path, const ImageRGB& img) {
    PnmData d;
    d.width = img.w;
    d.height = img.h;
    d.channels = 3;
    d.bytes.resize(3ull * img.h * img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c)
                d.bytes[(static_cast<std::size_t>(y) * img.w + x) * 3 + c] =
                    quantize_unit_byte(img.at(c, y, x));
    write_pnm(path, d);
}

inline void save_mask_pgm(const std::string& path, const BinaryMask& m) {
    PnmData d;
    d.width = m.w;
    d.height = m.h;
    d.channels = 1;
    d.bytes.resize(m.size());
    for (std::size_t i = 0; i < m.v.size(); ++i) d.bytes[i] = m.v[i] ? 255 : 0;
    write_pnm(path, d);
}

// Dataset directory layout: <dir>/images/NNNN.ppm + <dir>/masks/NNNN.pgm,
// matched by stem.
inline std::vector<Sample> load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path images = fs::path(dir) / "images";
    const fs::path masks = fs::path(dir) / "masks";
    if (!fs::is_directory(images) || !fs::is_directory(masks))
        throw DataError(strcat_all("load_dataset: ", dir,
                                   " must contain images/ and masks/ subdirectories"));
    std::vector<fs::path> image_files;
    for (const auto& e : fs::directory_iterator(images))
        if (e.is_regular_file() && e.path().extension() == ".ppm")
            image_files.push_back(e.path());
    std::sort(image_files.begin(), image_files.end());
    if (image_files.empty())
        throw DataError(strcat_all("load_dataset: no .ppm images in ", images.string()));

    std::vector<Sample> out;
    out.reserve(image_files.size());
    for (const auto& ip : image_files) {
        const fs::path mp = masks / (ip.stem().string() + ".pgm");
        if (!fs::exists(mp))
            throw DataError(strcat_all("load_dataset: missing mask for ", ip.filename().string()));
        Sample s;
        s.image = image_from_ppm(ip.string());
        s.mask = mask_from_pgm(mp.string());
        s.validate();
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Augmentation / resize
// ---------------------------------------------------------------------------

struct AugmentationConfig {
    double hflip_prob = 0.5;
    double max_rotation_deg = 15.0;
    double jitter_lo = 0.8;
    double jitter_hi = 1.2;
};

namespace detail_aug {

inline float sample_bilinear_clamped(const ImageRGB& img, int c, double sy, double sx) {
    sy = std::clamp(sy, 0.0, static_cast<double>(img.h - 1));
    sx = std::clamp(sx, 0.0, static_cast<double>(img.w - 1));
    const int y0 = static_cast<int>(std::floor(sy));
    const int x0 = static_cast<int>(std::floor(sx));
    const int y1 = std::min(y0 + 1, img.h - 1);
    const int x1 = std::min(x0 + 1, img.w - 1);
    const float fy = static_cast<float>(sy - y0);
    const float fx = static_cast<float>(sx - x0);
    const float top = img.at(c, y0, x0) + fx * (img.at(c, y0, x1) - img.at(c, y0, x0));
    const float bot = img.at(c, y1, x0) + fx * (img.at(c, y1, x1) - img.at(c, y1, x0));
    return top + fy * (bot - top);
}

inline float luminance(float r, float g, float b) {
    return 0.299f * r + 0.587f * g + 0.114f * b;
}

}  // namespace detail_aug

inline Sample hflip(const Sample& s) {
    Sample out;
    out.image = ImageRGB(s.image.h, s.image.w);
    out.mask = BinaryMask(s.mask.h, s.mask.w);
    for (int y = 0; y < s.image.h; ++y)
        for (int x = 0; x < s.image.w; ++x) {
            const int sx = s.image.w - 1 - x;
            for (int c = 0; c < 3; ++c) out.image.at(c, y, x) = s.image.at(c, y, sx);
            out.mask.at(y, x) = s.mask.at(y, sx);
        }
    return out;
}

// Rotation about the image center. Image samples bilinearly with edge clamp;
// the mask samples nearest-neighbor and re-binarizes (outside -> background).
inline Sample rotate(const Sample& s, double degrees) {
    if (degrees == 0.0) return s;
    const double rad = degrees * 3.14159265358979323846 / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cy = (s.image.h - 1) / 2.0, cx = (s.image.w - 1) / 2.0;
    Sample out;
    out.image = ImageRGB(s.image.h, s.image.w);
    out.mask = BinaryMask(s.mask.h, s.mask.w);
    for (int y = 0; y < s.image.h; ++y)
        for (int x = 0; x < s.image.w; ++x) {
            const double dy = y - cy, dx = x - cx;
            const double sy = cy + (-sn * dx + cs * dy);
            const double sx = cx + (cs * dx + sn * dy);
            for (int c = 0; c < 3; ++c)
                out.image.at(c, y, x) = detail_aug::sample_bilinear_clamped(s.image, c, sy, sx);
            const int ny = static_cast<int>(std::lround(sy));
            const int nx = static_cast<int>(std::lround(sx));
            out.mask.at(y, x) =
                (ny >= 0 && ny < s.mask.h && nx >= 0 && nx < s.mask.w) ? s.mask.at(ny, nx) : 0;
        }
    return out;
}

// Photometric jitter touches the image only, never the mask. A factor of
// exactly 1.0 is the identity for its stage.
inline void jitter_photometric(ImageRGB& img, double brightness, double saturation,
                               double contrast) {
    const std::size_t n = static_cast<std::size_t>(img.h) * img.w;
    if (brightness != 1.0 || saturation != 1.0) {
        for (std::size_t i = 0; i < n; ++i) {
            float r = img.v[i] * static_cast<float>(brightness);
            float g = img.v[n + i] * static_cast<float>(brightness);
            float b = img.v[2 * n + i] * static_cast<float>(brightness);
            if (saturation != 1.0) {
                const float gray = detail_aug::luminance(r, g, b);
                r = gray + static_cast<float>(saturation) * (r - gray);
                g = gray + static_cast<float>(saturation) * (g - gray);
                b = gray + static_cast<float>(saturation) * (b - gray);
            }
            img.v[i] = r;
            img.v[n + i] = g;
            img.v[2 * n + i] = b;
        }
    }
    if (contrast != 1.0) {
        float mean_gray = 0.0f;
        for (std::size_t i = 0; i < n; ++i)
            mean_gray += detail_aug::luminance(img.v[i], img.v[n + i], img.v[2 * n + i]);
        mean_gray /= static_cast<float>(n);
        for (std::size_t i = 0; i < 3 * n; ++i)
            img.v[i] = mean_gray + static_cast<float>(contrast) * (img.v[i] - mean_gray);
    }
    for (std::size_t i = 0; i < 3 * n; ++i) img.v[i] = std::clamp(img.v[i], 0.0f, 1.0f);
}

inline Sample augment(const Sample& s, const AugmentationConfig& cfg, Rng& rng) {
    s.validate();
    Sample out = s;
    if (rng.bernoulli(cfg.hflip_prob)) out = hflip(out);
    const double deg = rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg);
    out = rotate(out, deg);
    const double brightness = rng.uniform(cfg.jitter_lo, cfg.jitter_hi);
    const double saturation = rng.uniform(cfg.jitter_lo, cfg.jitter_hi);
    const double contrast = rng.uniform(cfg.jitter_lo, cfg.jitter_hi);
    jitter_photometric(out.image, brightness, saturation, contrast);
    return out;
}

// Bilinear (half-pixel centers) for the image, nearest for the mask.
inline Sample resize_sample(const Sample& s, int size) {
    require(size > 0 && size % 2 == 0, "resize_sample: target size must be even, got ", size);
    if (s.image.h == size && s.image.w == size) return s;
    Sample out;
    out.image = ImageRGB(size, size);
    out.mask = BinaryMask(size, size);
    const double sy_scale = static_cast<double>(s.image.h) / size;
    const double sx_scale = static_cast<double>(s.image.w) / size;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double sy = (y + 0.5) * sy_scale - 0.5;
            const double sx = (x + 0.5) * sx_scale - 0.5;
            for (int c = 0; c < 3; ++c)
                out.image.at(c, y, x) = detail_aug::sample_bilinear_clamped(s.image, c, sy, sx);
            const int ny = std::clamp(static_cast<int>(std::lround(sy)), 0, s.mask.h - 1);
            const int nx = std::clamp(static_cast<int>(std::lround(sx)), 0, s.mask.w - 1);
            out.mask.at(y, x) = s.mask.at(ny, nx);
        }
    return out;
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

// Deterministic shuffled index batches; the final partial batch is kept.
inline std::vector<std::vector<int>> make_batches(std::size_t n, int batch_size,
                                                  uint64_t shuffle_seed) {
    require(batch_size >= 1, "make_batches: batch_size must be >= 1");
    std::vector<int> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
    Rng rng(shuffle_seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)));
        std::swap(order[i - 1], order[j]);
    }
    std::vector<std::vector<int>> out;
    for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(n, i + static_cast<std::size_t>(batch_size));
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

// Materialize (b,3,S,S) images and (b,1,S,S) {0,1} masks.
template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> to_batch(const std::vector<Sample>& samples,
                                           const std::vector<int>& indices) {
    require(!indices.empty(), "to_batch: empty batch");
    const Sample& first = samples.at(static_cast<std::size_t>(indices[0]));
    const int h = first.image.h, w = first.image.w;
    Tensor4<T> images(static_cast<int>(indices.size()), 3, h, w);
    Tensor4<T> masks(static_cast<int>(indices.size()), 1, h, w);
    for (std::size_t bi = 0; bi < indices.size(); ++bi) {
        const Sample& s = samples.at(static_cast<std::size_t>(indices[bi]));
        require(s.image.h == h && s.image.w == w, "to_batch: inconsistent sample sizes");
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    images.at(static_cast<int>(bi), c, y, x) = static_cast<T>(s.image.at(c, y, x));
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                masks.at(static_cast<int>(bi), 0, y, x) = static_cast<T>(s.mask.at(y, x));
    }
    return {std::move(images), std::move(masks)};
}

}  // namespace gatenet
