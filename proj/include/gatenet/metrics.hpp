#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gatenet/common.hpp"
#include "gatenet/netpbm.hpp"

namespace gatenet {

struct ScoreMap {
    int h = 0, w = 0;
    std::vector<double> v;  // [0,1]

    ScoreMap() = default;
    ScoreMap(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, 0.0) {}

    double& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
    double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
    std::size_t size() const { return v.size(); }

    void validate() const {
        require(static_cast<std::size_t>(h) * w == v.size(), "ScoreMap: bad dimensions");
        for (double x : v)
            require(x >= 0.0 && x <= 1.0, "ScoreMap: value ", x, " outside [0,1]");
    }
};

struct BinaryMask {
    int h = 0, w = 0;
    std::vector<std::uint8_t> v;  // {0,1}

    BinaryMask() = default;
    BinaryMask(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, 0) {}

    std::uint8_t& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
    std::uint8_t at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
    std::size_t size() const { return v.size(); }

    std::size_t foreground_count() const {
        std::size_t n = 0;
        for (std::uint8_t b : v) n += b;
        return n;
    }
};

struct PRPoint {
    int threshold = 0;
    double precision = 0.0;
    double recall = 0.0;
};

struct MetricsReport {
    double f_beta_max = 0.0;
    double f_beta_mean = 0.0;
    double mae = 0.0;
    double s_measure = 0.0;
    std::array<PRPoint, 256> pr{};
};

inline void require_same_dims(const ScoreMap& p, const BinaryMask& g, const char* who) {
    require(p.h == g.h && p.w == g.w, who, ": prediction ", p.h, "x", p.w,
            " does not match ground truth ", g.h, "x", g.w);
}

// ---------------------------------------------------------------------------
// PR curve / F-measure
// ---------------------------------------------------------------------------

// Largest integer threshold t in [0,255] such that p >= t/255. Computed with
// the same comparisons a direct per-threshold scan would use, so histogram
// counts match exhaustive counting exactly.
inline int threshold_level(double p) {
    int t = static_cast<int>(std::floor(p * 255.0));
    t = std::clamp(t, 0, 255);
    while (t < 255 && p >= (t + 1) / 255.0) ++t;
    while (t > 0 && p < t / 255.0) --t;
    return t;
}

inline ScoreMap minmax_normalized(const ScoreMap& m) {
    double lo = 1.0, hi = 0.0;
    for (double x : m.v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    if (hi <= lo) return m;  // constant map: nothing to stretch
    ScoreMap out = m;
    for (double& x : out.v) x = (x - lo) / (hi - lo);
    return out;
}

// Dataset-level counts per binarization threshold. Predictions are min-max
// normalized per image before quantization so thresholds are comparable
// across images.
struct PRAccumulator {
    std::array<std::uint64_t, 256> tp{};
    std::array<std::uint64_t, 256> predicted_pos{};
    std::uint64_t foreground = 0;
    std::uint64_t images = 0;

    void add(const ScoreMap& pred, const BinaryMask& gt) {
        require_same_dims(pred, gt, "pr_curve");
        pred.validate();
        const ScoreMap norm = minmax_normalized(pred);
        std::array<std::uint64_t, 256> hist_all{};
        std::array<std::uint64_t, 256> hist_fg{};
        for (std::size_t i = 0; i < norm.v.size(); ++i) {
            const int lvl = threshold_level(norm.v[i]);
            ++hist_all[static_cast<std::size_t>(lvl)];
            if (gt.v[i]) ++hist_fg[static_cast<std::size_t>(lvl)];
        }
        std::uint64_t run_all = 0, run_fg = 0;
        for (int t = 255; t >= 0; --t) {
            run_all += hist_all[static_cast<std::size_t>(t)];
            run_fg += hist_fg[static_cast<std::size_t>(t)];
            predicted_pos[static_cast<std::size_t>(t)] += run_all;
            tp[static_cast<std::size_t>(t)] += run_fg;
        }
        foreground += gt.foreground_count();
        ++images;
    }

    // Empty-denominator conventions: precision 1 with no predicted positives,
    // recall 1 with no ground-truth foreground.
    std::array<PRPoint, 256> points() const {
        std::array<PRPoint, 256> out{};
        for (int t = 0; t < 256; ++t) {
            const std::uint64_t tpp = tp[static_cast<std::size_t>(t)];
            const std::uint64_t pp = predicted_pos[static_cast<std::size_t>(t)];
            out[static_cast<std::size_t>(t)].threshold = t;
            out[static_cast<std::size_t>(t)].precision =
                pp == 0 ? 1.0 : static_cast<double>(tpp) / static_cast<double>(pp);
            out[static_cast<std::size_t>(t)].recall =
                foreground == 0 ? 1.0 : static_cast<double>(tpp) / static_cast<double>(foreground);
        }
        return out;
    }
};

inline std::array<PRPoint, 256> pr_curve(const std::vector<ScoreMap>& preds,
                                         const std::vector<BinaryMask>& gts) {
    require(preds.size() == gts.size(), "pr_curve: ", preds.size(), " predictions vs ",
            gts.size(), " ground truths");
    require(!preds.empty(), "pr_curve: empty input");
    PRAccumulator acc;
    for (std::size_t i = 0; i < preds.size(); ++i) acc.add(preds[i], gts[i]);
    return acc.points();
}

inline double f_beta(double precision, double recall, double beta2 = 0.3) {
    const double den = beta2 * precision + recall;
    if (den == 0.0) return 0.0;
    return (1.0 + beta2) * precision * recall / den;
}

struct FMeasureSummary {
    double max_f = 0.0;
    double mean_f = 0.0;
    int argmax_threshold = 0;
};

inline FMeasureSummary f_measure_summary(const std::array<PRPoint, 256>& pr,
                                         double beta2 = 0.3) {
    FMeasureSummary s;
    double sum = 0.0;
    for (int t = 0; t < 256; ++t) {
        const double f = f_beta(pr[static_cast<std::size_t>(t)].precision,
                                pr[static_cast<std::size_t>(t)].recall, beta2);
        sum += f;
        if (f > s.max_f) {
            s.max_f = f;
            s.argmax_threshold = t;
        }
    }
    s.mean_f = sum / 256.0;
    return s;
}

inline double f_measure_max(const std::vector<ScoreMap>& preds,
                            const std::vector<BinaryMask>& gts, double beta2 = 0.3) {
    return f_measure_summary(pr_curve(preds, gts), beta2).max_f;
}

// ---------------------------------------------------------------------------
// MAE
// ---------------------------------------------------------------------------

inline double mae(const ScoreMap& pred, const BinaryMask& gt) {
    require_same_dims(pred, gt, "mae");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.v.size(); ++i)
        acc += std::abs(pred.v[i] - static_cast<double>(gt.v[i]));
    return acc / static_cast<double>(pred.v.size());
}

// Dataset MAE is the mean of per-image MAEs.
inline double mae_dataset(const std::vector<ScoreMap>& preds,
                          const std::vector<BinaryMask>& gts) {
    require(preds.size() == gts.size() && !preds.empty(), "mae_dataset: bad input sizes");
    double acc = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) acc += mae(preds[i], gts[i]);
    return acc / static_cast<double>(preds.size());
}

// ---------------------------------------------------------------------------
// S-measure: alpha * object-aware + (1-alpha) * region-aware structural
// similarity, with the standard fallbacks for all-background / all-foreground
// ground truth.
// ---------------------------------------------------------------------------

namespace detail_sm {

constexpr double kEps = 2.2204e-16;

inline double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

// Sample standard deviation (N-1 normalization), 0 for fewer than 2 points.
inline double sample_std(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double s = 0.0;
    for (double x : xs) s += (x - mean) * (x - mean);
    return std::sqrt(s / (static_cast<double>(xs.size()) - 1.0));
}

inline double object_score(const std::vector<double>& region) {
    if (region.empty()) return 0.0;
    const double x = mean_of(region);
    const double sx = sample_std(region, x);
    return 2.0 * x / (x * x + 1.0 + sx + kEps);
}

struct Quadrant {
    int y0, y1, x0, x1;  // half-open
    double weight;
    std::size_t count() const {
        return static_cast<std::size_t>(y1 - y0) * static_cast<std::size_t>(x1 - x0);
    }
};

// Centroid of the foreground, 1-based with round-half-away like the reference
// formulation, then converted to half-open split points.
inline std::array<Quadrant, 4> split_at_centroid(const BinaryMask& gt) {
    const double total = static_cast<double>(gt.foreground_count());
    int split_x, split_y;
    if (total == 0.0) {
        split_x = (gt.w + 1) / 2;
        split_y = (gt.h + 1) / 2;
    } else {
        double sx = 0.0, sy = 0.0;
        for (int y = 0; y < gt.h; ++y)
            for (int x = 0; x < gt.w; ++x)
                if (gt.at(y, x)) {
                    sx += x + 1;
                    sy += y + 1;
                }
        split_x = static_cast<int>(std::llround(sx / total));
        split_y = static_cast<int>(std::llround(sy / total));
        split_x = std::clamp(split_x, 1, gt.w);
        split_y = std::clamp(split_y, 1, gt.h);
    }
    const double area = static_cast<double>(gt.h) * gt.w;
    std::array<Quadrant, 4> q{{
        {0, split_y, 0, split_x, 0.0},
        {0, split_y, split_x, gt.w, 0.0},
        {split_y, gt.h, 0, split_x, 0.0},
        {split_y, gt.h, split_x, gt.w, 0.0},
    }};
    for (auto& r : q) r.weight = static_cast<double>(r.count()) / area;
    return q;
}

// SSIM-style similarity with sample (N-1) normalization.
inline double region_ssim(const ScoreMap& pred, const BinaryMask& gt, const Quadrant& q) {
    const double n = static_cast<double>(q.count());
    if (n == 0.0) return 0.0;
    double mx = 0.0, my = 0.0;
    for (int y = q.y0; y < q.y1; ++y)
        for (int x = q.x0; x < q.x1; ++x) {
            mx += pred.at(y, x);
            my += static_cast<double>(gt.at(y, x));
        }
    mx /= n;
    my /= n;
    double vx = 0.0, vy = 0.0, vxy = 0.0;
    for (int y = q.y0; y < q.y1; ++y)
        for (int x = q.x0; x < q.x1; ++x) {
            const double dx = pred.at(y, x) - mx;
            const double dy = static_cast<double>(gt.at(y, x)) - my;
            vx += dx * dx;
            vy += dy * dy;
            vxy += dx * dy;
        }
    const double den = n - 1.0 + kEps;
    vx /= den;
    vy /= den;
    vxy /= den;
    const double a = 4.0 * mx * my * vxy;
    const double b = (mx * mx + my * my) * (vx + vy);
    if (a != 0.0) return a / (b + kEps);
    return b == 0.0 ? 1.0 : 0.0;
}

}  // namespace detail_sm

inline double s_object(const ScoreMap& pred, const BinaryMask& gt) {
    std::vector<double> fg, bg;
    fg.reserve(pred.size());
    bg.reserve(pred.size());
    for (std::size_t i = 0; i < pred.v.size(); ++i) {
        if (gt.v[i])
            fg.push_back(pred.v[i]);
        else
            bg.push_back(1.0 - pred.v[i]);
    }
    const double mu = static_cast<double>(fg.size()) / static_cast<double>(pred.size());
    return mu * detail_sm::object_score(fg) + (1.0 - mu) * detail_sm::object_score(bg);
}

inline double s_region(const ScoreMap& pred, const BinaryMask& gt) {
    const auto quads = detail_sm::split_at_centroid(gt);
    double q = 0.0;
    for (const auto& quad : quads)
        if (quad.count() > 0) q += quad.weight * detail_sm::region_ssim(pred, gt, quad);
    return q;
}

inline double s_measure(const ScoreMap& pred, const BinaryMask& gt, double alpha = 0.5) {
    require_same_dims(pred, gt, "s_measure");
    pred.validate();
    const double gt_mean =
        static_cast<double>(gt.foreground_count()) / static_cast<double>(gt.size());
    double pred_mean = 0.0;
    for (double x : pred.v) pred_mean += x;
    pred_mean /= static_cast<double>(pred.size());
    if (gt_mean == 0.0) return 1.0 - pred_mean;
    if (gt_mean == 1.0) return pred_mean;
    const double q = alpha * s_object(pred, gt) + (1.0 - alpha) * s_region(pred, gt);
    return std::clamp(q, 0.0, 1.0);
}

inline double s_measure_dataset(const std::vector<ScoreMap>& preds,
                                const std::vector<BinaryMask>& gts) {
    require(preds.size() == gts.size() && !preds.empty(), "s_measure_dataset: bad input");
    double acc = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) acc += s_measure(preds[i], gts[i]);
    return acc / static_cast<double>(preds.size());
}

// ---------------------------------------------------------------------------
// Dataset evaluation
// ---------------------------------------------------------------------------

inline ScoreMap scoremap_from_pgm(const std::string& path) {
    const PnmData d = read_pnm(path, '5');
    ScoreMap m(d.height, d.width);
    for (std::size_t i = 0; i < d.bytes.size(); ++i) m.v[i] = d.bytes[i] / 255.0;
    return m;
}

inline BinaryMask mask_from_pgm(const std::string& path) {
    const PnmData d = read_pnm(path, '5');
    BinaryMask m(d.height, d.width);
    for (std::size_t i = 0; i < d.bytes.size(); ++i) m.v[i] = d.bytes[i] > 127 ? 1 : 0;
    return m;
}

inline void save_scoremap_pgm(const std::string& path, const ScoreMap& m) {
    PnmData d;
    d.width = m.w;
    d.height = m.h;
    d.channels = 1;
    d.bytes.resize(m.size());
    for (std::size_t i = 0; i < m.v.size(); ++i) d.bytes[i] = quantize_unit_byte(m.v[i]);
    write_pnm(path, d);
}

inline MetricsReport compute_metrics(const std::vector<ScoreMap>& preds,
                                     const std::vector<BinaryMask>& gts) {
    MetricsReport r;
    r.pr = pr_curve(preds, gts);
    const FMeasureSummary f = f_measure_summary(r.pr);
    r.f_beta_max = f.max_f;
    r.f_beta_mean = f.mean_f;
    r.mae = mae_dataset(preds, gts);
    r.s_measure = s_measure_dataset(preds, gts);
    return r;
}

// Pairs are matched by file stem: pred_dir/X.pgm <-> gt_dir/X.pgm. Unmatched
// files on either side abort the run, listed by name.
inline MetricsReport evaluate_dataset(const std::string& pred_dir, const std::string& gt_dir) {
    namespace fs = std::filesystem;
    auto list_pgms = [](const std::string& dir) {
        std::map<std::string, fs::path> out;
        require(fs::is_directory(dir), "evaluate_dataset: not a directory: ", dir);
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && e.path().extension() == ".pgm")
                out[e.path().stem().string()] = e.path();
        return out;
    };
    const auto preds = list_pgms(pred_dir);
    const auto gts = list_pgms(gt_dir);
    if (preds.empty()) throw DataError(strcat_all("evaluate_dataset: no .pgm files in ", pred_dir));

    std::string unmatched;
    for (const auto& [stem, path] : preds)
        if (gts.find(stem) == gts.end()) unmatched += strcat_all(" pred:", stem);
    for (const auto& [stem, path] : gts)
        if (preds.find(stem) == preds.end()) unmatched += strcat_all(" gt:", stem);
    if (!unmatched.empty())
        throw DataError(strcat_all("evaluate_dataset: unmatched files:", unmatched));

    std::vector<ScoreMap> pv;
    std::vector<BinaryMask> gv;
    for (const auto& [stem, path] : preds) {
        pv.push_back(scoremap_from_pgm(path.string()));
        gv.push_back(mask_from_pgm(gts.at(stem).string()));
        require_same_dims(pv.back(), gv.back(), "evaluate_dataset");
    }
    return compute_metrics(pv, gv);
}

}  // namespace gatenet
