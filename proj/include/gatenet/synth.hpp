#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "gatenet/data.hpp"
#include "gatenet/rng.hpp"

namespace gatenet {

// Synthetic salient-object scenes: a textured background with low-contrast
// clutter, plus 1..max_shapes clearly contrasting foreground shapes whose
// exact rasterization is the ground-truth mask. Generation is a pure
// function of (seed, index).
struct SynthSpec {
    uint64_t seed = 1;
    int count = 100;
    int size = 64;
    int min_shapes = 1;
    int max_shapes = 3;
    int max_distractors = 3;
    double contrast_lo = 0.1;
    double contrast_hi = 0.6;
    double fg_lo = 0.02;
    double fg_hi = 0.6;

    void validate() const {
        require(count > 0, "SynthSpec: count must be positive, got ", count);
        require(size > 0 && size % 2 == 0, "SynthSpec: size must be even and positive, got ",
                size);
        require(min_shapes >= 1 && max_shapes >= min_shapes, "SynthSpec: bad shape counts");
        require(contrast_lo > 0 && contrast_hi >= contrast_lo && contrast_hi <= 1.0,
                "SynthSpec: bad contrast range");
        require(fg_lo > 0 && fg_hi > fg_lo && fg_hi < 1.0, "SynthSpec: bad coverage range");
    }
};

struct ShapeSpec {
    enum class Kind { ellipse, rectangle, blob };
    Kind kind = Kind::ellipse;
    double cx = 0, cy = 0;  // center in pixel coordinates
    double rx = 1, ry = 1;  // radii / half extents
    double angle = 0;       // rotation in radians
    std::array<double, 3> blob_amp{};    // radial harmonics 2..4
    std::array<double, 3> blob_phase{};
    float r = 0, g = 0, b = 0;
};

// Point-in-shape predicate evaluated at pixel centers. Blobs are
// star-convex: inside iff the radial distance is below a smooth periodic
// radius function, which rasterizes exactly.
inline bool shape_contains(const ShapeSpec& s, double px, double py) {
    const double dx = px - s.cx, dy = py - s.cy;
    const double cs = std::cos(s.angle), sn = std::sin(s.angle);
    const double u = cs * dx + sn * dy;
    const double v = -sn * dx + cs * dy;
    switch (s.kind) {
        case ShapeSpec::Kind::ellipse:
            return (u / s.rx) * (u / s.rx) + (v / s.ry) * (v / s.ry) <= 1.0;
        case ShapeSpec::Kind::rectangle:
            return std::abs(u) <= s.rx && std::abs(v) <= s.ry;
        case ShapeSpec::Kind::blob: {
            const double rho = std::sqrt(u * u + v * v);
            const double phi = std::atan2(v, u);
            double radius = 1.0;
            for (int k = 0; k < 3; ++k)
                radius += s.blob_amp[static_cast<std::size_t>(k)] *
                          std::cos((k + 2) * phi + s.blob_phase[static_cast<std::size_t>(k)]);
            return rho <= s.rx * radius;
        }
    }
    return false;
}

struct SynthSample {
    Sample sample;
    std::vector<ShapeSpec> shapes;  // foreground shapes only (mask = their union)
};

namespace detail_synth {

inline void hsv_to_rgb(double h, double s, double v, float& r, float& g, float& b) {
    h = h - std::floor(h);
    const double hh = h * 6.0;
    const int i = static_cast<int>(hh) % 6;
    const double f = hh - std::floor(hh);
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    double rr = 0, gg = 0, bb = 0;
    switch (i) {
        case 0: rr = v; gg = t; bb = p; break;
        case 1: rr = q; gg = v; bb = p; break;
        case 2: rr = p; gg = v; bb = t; break;
        case 3: rr = p; gg = q; bb = v; break;
        case 4: rr = t; gg = p; bb = v; break;
        default: rr = v; gg = p; bb = q; break;
    }
    r = static_cast<float>(rr);
    g = static_cast<float>(gg);
    b = static_cast<float>(bb);
}

// One octave of value noise: a small lattice of random offsets, bilinearly
// interpolated across the image.
inline void add_value_noise(std::vector<float>& field, int size, int cells, double amp,
                            Rng& rng) {
    std::vector<double> lattice(static_cast<std::size_t>(cells + 1) * (cells + 1));
    for (double& v : lattice) v = rng.uniform(-1.0, 1.0);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double u = static_cast<double>(x) / size * cells;
            const double w = static_cast<double>(y) / size * cells;
            const int x0 = static_cast<int>(u), y0 = static_cast<int>(w);
            const double fx = u - x0, fy = w - y0;
            auto L = [&](int yy, int xx) {
                return lattice[static_cast<std::size_t>(yy) * (cells + 1) + xx];
            };
            const double top = L(y0, x0) + fx * (L(y0, x0 + 1) - L(y0, x0));
            const double bot = L(y0 + 1, x0) + fx * (L(y0 + 1, x0 + 1) - L(y0 + 1, x0));
            field[static_cast<std::size_t>(y) * size + x] +=
                static_cast<float>(amp * (top + fy * (bot - top)));
        }
}

inline ShapeSpec random_shape(Rng& rng, int size, double min_radius_frac,
                              double max_radius_frac) {
    ShapeSpec s;
    const int k = rng.uniform_int(3);
    s.kind = k == 0 ? ShapeSpec::Kind::ellipse
                    : (k == 1 ? ShapeSpec::Kind::rectangle : ShapeSpec::Kind::blob);
    s.cx = rng.uniform(0.22, 0.78) * size;
    s.cy = rng.uniform(0.22, 0.78) * size;
    s.rx = rng.uniform(min_radius_frac, max_radius_frac) * size;
    s.ry = rng.uniform(min_radius_frac, max_radius_frac) * size;
    s.angle = rng.uniform(0.0, 3.14159265358979323846);
    if (s.kind == ShapeSpec::Kind::blob) {
        for (int i = 0; i < 3; ++i) {
            s.blob_amp[static_cast<std::size_t>(i)] = rng.uniform(-0.13, 0.13);
            s.blob_phase[static_cast<std::size_t>(i)] = rng.uniform(0.0, 6.28318530717958648);
        }
    }
    return s;
}

inline void paint_shape(ImageRGB& img, const ShapeSpec& s) {
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            if (shape_contains(s, x + 0.5, y + 0.5)) {
                img.at(0, y, x) = s.r;
                img.at(1, y, x) = s.g;
                img.at(2, y, x) = s.b;
            }
}

}  // namespace detail_synth

inline SynthSample generate_sample(const SynthSpec& spec, int index) {
    spec.validate();
    Rng rng(mix_seed(spec.seed, static_cast<uint64_t>(index), 0xDA7AULL));
    const int S = spec.size;

    const double bg_hue = rng.uniform(0.0, 1.0);
    const double bg_sat = rng.uniform(0.05, 0.35);
    const double bg_val = rng.uniform(0.35, 0.65);

    SynthSample out;
    out.sample.image = ImageRGB(S, S);
    out.sample.mask = BinaryMask(S, S);
    ImageRGB& img = out.sample.image;

    float br, bg, bb;
    detail_synth::hsv_to_rgb(bg_hue, bg_sat, bg_val, br, bg, bb);
    std::vector<float> noise(static_cast<std::size_t>(S) * S, 0.0f);
    detail_synth::add_value_noise(noise, S, 4, 0.05, rng);
    detail_synth::add_value_noise(noise, S, 8, 0.025, rng);
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
            const float n = noise[static_cast<std::size_t>(y) * S + x];
            img.at(0, y, x) = std::clamp(br + n, 0.0f, 1.0f);
            img.at(1, y, x) = std::clamp(bg + n, 0.0f, 1.0f);
            img.at(2, y, x) = std::clamp(bb + n, 0.0f, 1.0f);
        }

    // Low-contrast clutter; never enters the mask.
    const int n_distractors = rng.uniform_int(spec.max_distractors + 1);
    for (int d = 0; d < n_distractors; ++d) {
        ShapeSpec s = detail_synth::random_shape(rng, S, 0.05, 0.18);
        const double dv = rng.uniform(0.03, 0.08) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
        const double dh = rng.uniform(-0.05, 0.05);
        detail_synth::hsv_to_rgb(bg_hue + dh, bg_sat, std::clamp(bg_val + dv, 0.0, 1.0), s.r,
                                 s.g, s.b);
        detail_synth::paint_shape(img, s);
    }

    // Salient foreground: distinct hue, luminance contrast at least
    // contrast_lo away from the background, coverage within [fg_lo, fg_hi].
    const int n_fg = spec.min_shapes + rng.uniform_int(spec.max_shapes - spec.min_shapes + 1);
    std::vector<ShapeSpec> shapes;
    for (int attempt = 0; attempt < 64; ++attempt) {
        shapes.clear();
        for (int i = 0; i < n_fg; ++i) {
            ShapeSpec s = detail_synth::random_shape(rng, S, 0.10, 0.26);
            const double contrast = rng.uniform(spec.contrast_lo, spec.contrast_hi);
            const bool up = rng.bernoulli(0.5);
            double fv = up ? bg_val + contrast : bg_val - contrast;
            if (fv > 0.98 || fv < 0.02) fv = up ? bg_val - contrast : bg_val + contrast;
            const double fh = bg_hue + rng.uniform(0.25, 0.75);
            const double fs = rng.uniform(0.45, 0.95);
            detail_synth::hsv_to_rgb(fh, fs, fv, s.r, s.g, s.b);
            shapes.push_back(s);
        }
        std::size_t covered = 0;
        for (int y = 0; y < S; ++y)
            for (int x = 0; x < S; ++x)
                for (const ShapeSpec& s : shapes)
                    if (shape_contains(s, x + 0.5, y + 0.5)) {
                        ++covered;
                        break;
                    }
        const double frac = static_cast<double>(covered) / (static_cast<double>(S) * S);
        if (frac >= spec.fg_lo && frac <= spec.fg_hi) break;
        if (attempt == 63) {
            // Deterministic fallback: one centered ellipse always lands in range.
            shapes.assign(1, ShapeSpec{});
            ShapeSpec& s = shapes[0];
            s.kind = ShapeSpec::Kind::ellipse;
            s.cx = s.cy = S / 2.0;
            s.rx = s.ry = 0.25 * S;
            detail_synth::hsv_to_rgb(bg_hue + 0.5, 0.7,
                                     bg_val > 0.5 ? bg_val - spec.contrast_hi
                                                  : bg_val + spec.contrast_hi,
                                     s.r, s.g, s.b);
        }
    }

    for (const ShapeSpec& s : shapes) detail_synth::paint_shape(img, s);
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x)
            for (const ShapeSpec& s : shapes)
                if (shape_contains(s, x + 0.5, y + 0.5)) {
                    out.sample.mask.at(y, x) = 1;
                    break;
                }

    // Fine pixel noise on the image only.
    for (float& v : img.v)
        v = std::clamp(v + static_cast<float>(rng.uniform(-0.015, 0.015)), 0.0f, 1.0f);

    out.shapes = std::move(shapes);
    return out;
}

inline std::vector<Sample> generate_dataset(const SynthSpec& spec) {
    spec.validate();
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(spec.count));
    for (int i = 0; i < spec.count; ++i) out.push_back(generate_sample(spec, i).sample);
    return out;
}

inline void write_synth_dataset(const SynthSpec& spec, const std::string& out_dir) {
    namespace fs = std::filesystem;
    spec.validate();
    fs::create_directories(fs::path(out_dir) / "images");
    fs::create_directories(fs::path(out_dir) / "masks");
    char name[32];
    for (int i = 0; i < spec.count; ++i) {
        const Sample s = generate_sample(spec, i).sample;
        std::snprintf(name, sizeof(name), "%04d", i);
        save_image_ppm((fs::path(out_dir) / "images" / (std::string(name) + ".ppm")).string(),
                       s.image);
        save_mask_pgm((fs::path(out_dir) / "masks" / (std::string(name) + ".pgm")).string(),
                      s.mask);
    }
}

}  // namespace gatenet
