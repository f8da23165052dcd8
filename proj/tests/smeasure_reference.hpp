#pragma once

// Independent transcription of the structure-measure definition, written as
// one flat function over raw buffers with 1-based splitting, mirroring the
// original formulation directly. Kept separate from the library
// implementation on purpose: the two must agree without sharing code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace smref {

inline constexpr double EPS = 2.2204e-16;

struct Grid {
    int h = 0, w = 0;
    std::vector<double> v;
    double operator()(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

inline double grid_mean(const Grid& g, int y0, int y1, int x0, int x1) {
    double s = 0;
    int n = 0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            s += g(y, x);
            ++n;
        }
    return n == 0 ? 0.0 : s / n;
}

inline double ssim_block(const Grid& sm, const Grid& gt, int y0, int y1, int x0, int x1) {
    const double n = static_cast<double>((y1 - y0) * (x1 - x0));
    const double xm = grid_mean(sm, y0, y1, x0, x1);
    const double ym = grid_mean(gt, y0, y1, x0, x1);
    double sx2 = 0, sy2 = 0, sxy = 0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            sx2 += (sm(y, x) - xm) * (sm(y, x) - xm);
            sy2 += (gt(y, x) - ym) * (gt(y, x) - ym);
            sxy += (sm(y, x) - xm) * (gt(y, x) - ym);
        }
    sx2 /= n - 1.0 + EPS;
    sy2 /= n - 1.0 + EPS;
    sxy /= n - 1.0 + EPS;
    const double alpha = 4.0 * xm * ym * sxy;
    const double beta = (xm * xm + ym * ym) * (sx2 + sy2);
    if (alpha != 0.0) return alpha / (beta + EPS);
    return beta == 0.0 ? 1.0 : 0.0;
}

inline double object_term(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double m = 0;
    for (double v : xs) m += v;
    m /= static_cast<double>(xs.size());
    double sd = 0;
    if (xs.size() > 1) {
        for (double v : xs) sd += (v - m) * (v - m);
        sd = std::sqrt(sd / (static_cast<double>(xs.size()) - 1.0));
    }
    return 2.0 * m / (m * m + 1.0 + sd + EPS);
}

inline double structure_measure(const Grid& sm, const Grid& gt_grid, double alpha = 0.5) {
    const std::size_t n = sm.v.size();
    double gt_mean = 0;
    for (double v : gt_grid.v) gt_mean += v;
    gt_mean /= static_cast<double>(n);
    double sm_mean = 0;
    for (double v : sm.v) sm_mean += v;
    sm_mean /= static_cast<double>(n);

    if (gt_mean == 0.0) return 1.0 - sm_mean;
    if (gt_mean == 1.0) return sm_mean;

    // Object-aware term.
    std::vector<double> fg, bg;
    for (std::size_t i = 0; i < n; ++i) {
        if (gt_grid.v[i] >= 0.5)
            fg.push_back(sm.v[i]);
        else
            bg.push_back(1.0 - sm.v[i]);
    }
    const double mu = static_cast<double>(fg.size()) / static_cast<double>(n);
    const double s_obj = mu * object_term(fg) + (1.0 - mu) * object_term(bg);

    // Region-aware term: split both maps at the foreground centroid
    // (1-based indices, rounded half away from zero).
    double tx = 0, ty = 0, total = 0;
    for (int y = 0; y < gt_grid.h; ++y)
        for (int x = 0; x < gt_grid.w; ++x)
            if (gt_grid(y, x) >= 0.5) {
                tx += x + 1;
                ty += y + 1;
                total += 1;
            }
    int cx = static_cast<int>(std::llround(tx / total));
    int cy = static_cast<int>(std::llround(ty / total));
    cx = std::clamp(cx, 1, gt_grid.w);
    cy = std::clamp(cy, 1, gt_grid.h);

    const double area = static_cast<double>(gt_grid.h) * gt_grid.w;
    double s_reg = 0;
    const int ys[3] = {0, cy, gt_grid.h};
    const int xs2[3] = {0, cx, gt_grid.w};
    for (int qy = 0; qy < 2; ++qy)
        for (int qx = 0; qx < 2; ++qx) {
            const int y0 = ys[qy], y1 = ys[qy + 1];
            const int x0 = xs2[qx], x1 = xs2[qx + 1];
            const double weight = static_cast<double>((y1 - y0) * (x1 - x0)) / area;
            if (weight > 0.0) s_reg += weight * ssim_block(sm, gt_grid, y0, y1, x0, x1);
        }

    const double q = alpha * s_obj + (1.0 - alpha) * s_reg;
    return std::clamp(q, 0.0, 1.0);
}

}  // namespace smref
