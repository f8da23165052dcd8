#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "gatenet/common.hpp"
#include "gatenet/tensor.hpp"

namespace gatenet {

// Dilated cross-correlation descriptor. Kernel geometry lives here so a
// weight tensor can be validated against the layer that owns it.
struct ConvSpec {
    int out_ch = 0;
    int in_ch = 0;
    int kh = 0;
    int kw = 0;
    int stride = 1;
    int padding = 0;
    int dilation = 1;

    ConvSpec() = default;
    ConvSpec(int oc, int ic, int k, int stride_, int padding_, int dilation_ = 1)
        : out_ch(oc), in_ch(ic), kh(k), kw(k), stride(stride_), padding(padding_), dilation(dilation_) {
        validate();
    }

    void validate() const {
        require(out_ch > 0, "ConvSpec: out_ch must be positive, got ", out_ch);
        require(in_ch > 0, "ConvSpec: in_ch must be positive, got ", in_ch);
        require(kh > 0 && kw > 0, "ConvSpec: kernel dims must be positive, got ", kh, "x", kw);
        require(stride > 0, "ConvSpec: stride must be positive, got ", stride);
        require(padding >= 0, "ConvSpec: padding must be non-negative, got ", padding);
        require(dilation > 0, "ConvSpec: dilation must be positive, got ", dilation);
    }

    int out_dim(int in, int k) const {
        int num = in + 2 * padding - dilation * (k - 1) - 1;
        require(num >= 0, "ConvSpec: kernel (k=", k, ", dilation=", dilation,
                ", padding=", padding, ") does not fit input extent ", in);
        return num / stride + 1;
    }

    Shape4 out_shape(const Shape4& x) const {
        return Shape4{x.b, out_ch, out_dim(x.h, kh), out_dim(x.w, kw)};
    }

    Shape4 weight_shape() const { return Shape4{out_ch, in_ch, kh, kw}; }
    Shape4 bias_shape() const { return Shape4{1, out_ch, 1, 1}; }
};

template <typename T>
void check_conv_args(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>& b,
                     const ConvSpec& spec) {
    spec.validate();
    require(w.shape() == spec.weight_shape(), "conv2d: weight shape ", w.shape().str(),
            " does not match spec kernel ", spec.weight_shape().str());
    require(x.channels() == spec.in_ch, "conv2d: input channels (", x.channels(),
            ") do not match weight in_ch (", spec.in_ch, ")");
    require(b.shape() == spec.bias_shape(), "conv2d: bias shape ", b.shape().str(),
            " must be ", spec.bias_shape().str());
}

namespace kernels {

// Valid output range [lo, hi) along one axis for a fixed kernel tap, i.e.
// all o with 0 <= o*stride + k*dilation - padding < in.
inline void tap_range(int in, int out, int stride, int padding, int koff, int& lo, int& hi) {
    lo = std::max(0, ceil_div(padding - koff, stride));
    hi = std::min(out, ceil_div(in + padding - koff, stride));
    if (hi < lo) hi = lo;
}

// Direct convolution. Loops are ordered so that for stride 1 the innermost
// loop is a unit-stride fused multiply-add over the output row, which the
// compiler vectorizes.
template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>& b,
                          const ConvSpec& spec) {
    check_conv_args(x, w, b, spec);
    Tensor4<T> y(spec.out_shape(x.shape()));
    const int B = x.batch(), C = spec.in_ch, H = x.height(), W = x.width();
    const int OC = spec.out_ch, OH = y.height(), OW = y.width();
    const int s = spec.stride, p = spec.padding, d = spec.dilation;

    for (int bi = 0; bi < B; ++bi) {
        for (int oc = 0; oc < OC; ++oc) {
            T* plane = y.plane(bi, oc);
            std::fill(plane, plane + static_cast<std::size_t>(OH) * OW, b.data()[oc]);
        }
        for (int oc = 0; oc < OC; ++oc) {
            for (int ic = 0; ic < C; ++ic) {
                for (int ky = 0; ky < spec.kh; ++ky) {
                    int oh_lo, oh_hi;
                    tap_range(H, OH, s, p, ky * d, oh_lo, oh_hi);
                    for (int kx = 0; kx < spec.kw; ++kx) {
                        const T wv = w.at(oc, ic, ky, kx);
                        if (wv == T(0)) continue;
                        int ow_lo, ow_hi;
                        tap_range(W, OW, s, p, kx * d, ow_lo, ow_hi);
                        const int xoff = kx * d - p;
                        for (int oh = oh_lo; oh < oh_hi; ++oh) {
                            const int iy = oh * s + ky * d - p;
                            const T* xrow = x.row(bi, ic, iy);
                            T* yrow = y.row(bi, oc, oh);
                            if (s == 1) {
                                const T* xs = xrow + xoff;
                                for (int ow = ow_lo; ow < ow_hi; ++ow)
                                    yrow[ow] += wv * xs[ow];
                            } else {
                                for (int ow = ow_lo; ow < ow_hi; ++ow)
                                    yrow[ow] += wv * xrow[ow * s + xoff];
                            }
                        }
                    }
                }
            }
        }
    }
    return y;
}

template <typename T>
void conv2d_backward_input(const Tensor4<T>& gy, const Tensor4<T>& w, const ConvSpec& spec,
                           Tensor4<T>& gx) {
    const int B = gx.batch(), C = spec.in_ch, H = gx.height(), W = gx.width();
    const int OC = spec.out_ch, OH = gy.height(), OW = gy.width();
    const int s = spec.stride, p = spec.padding, d = spec.dilation;

    for (int bi = 0; bi < B; ++bi) {
        for (int oc = 0; oc < OC; ++oc) {
            for (int ic = 0; ic < C; ++ic) {
                for (int ky = 0; ky < spec.kh; ++ky) {
                    int oh_lo, oh_hi;
                    tap_range(H, OH, s, p, ky * d, oh_lo, oh_hi);
                    for (int kx = 0; kx < spec.kw; ++kx) {
                        const T wv = w.at(oc, ic, ky, kx);
                        if (wv == T(0)) continue;
                        int ow_lo, ow_hi;
                        tap_range(W, OW, s, p, kx * d, ow_lo, ow_hi);
                        const int xoff = kx * d - p;
                        for (int oh = oh_lo; oh < oh_hi; ++oh) {
                            const int iy = oh * s + ky * d - p;
                            T* gxrow = gx.row(bi, ic, iy);
                            const T* gyrow = gy.row(bi, oc, oh);
                            if (s == 1) {
                                T* gs = gxrow + xoff;
                                for (int ow = ow_lo; ow < ow_hi; ++ow)
                                    gs[ow] += wv * gyrow[ow];
                            } else {
                                for (int ow = ow_lo; ow < ow_hi; ++ow)
                                    gxrow[ow * s + xoff] += wv * gyrow[ow];
                            }
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void conv2d_backward_weight(const Tensor4<T>& x, const Tensor4<T>& gy, const ConvSpec& spec,
                            Tensor4<T>& gw, Tensor4<T>& gb) {
    const int B = x.batch(), C = spec.in_ch, H = x.height(), W = x.width();
    const int OC = spec.out_ch, OH = gy.height(), OW = gy.width();
    const int s = spec.stride, p = spec.padding, d = spec.dilation;

    for (int bi = 0; bi < B; ++bi) {
        for (int oc = 0; oc < OC; ++oc) {
            T bsum = 0;
            const T* gplane = gy.plane(bi, oc);
            const std::size_t n = static_cast<std::size_t>(OH) * OW;
            for (std::size_t i = 0; i < n; ++i) bsum += gplane[i];
            gb.data()[oc] += bsum;

            for (int ic = 0; ic < C; ++ic) {
                for (int ky = 0; ky < spec.kh; ++ky) {
                    int oh_lo, oh_hi;
                    tap_range(H, OH, s, p, ky * d, oh_lo, oh_hi);
                    for (int kx = 0; kx < spec.kw; ++kx) {
                        int ow_lo, ow_hi;
                        tap_range(W, OW, s, p, kx * d, ow_lo, ow_hi);
                        const int xoff = kx * d - p;
                        T acc = 0;
                        for (int oh = oh_lo; oh < oh_hi; ++oh) {
                            const int iy = oh * s + ky * d - p;
                            const T* xrow = x.row(bi, ic, iy);
                            const T* gyrow = gy.row(bi, oc, oh);
                            if (s == 1) {
                                const T* xs = xrow + xoff;
                                for (int ow = ow_lo; ow < ow_hi; ++ow)
                                    acc += gyrow[ow] * xs[ow];
                            } else {
                                for (int ow = ow_lo; ow < ow_hi; ++ow)
                                    acc += gyrow[ow] * xrow[ow * s + xoff];
                            }
                        }
                        gw.at(oc, ic, ky, kx) += acc;
                    }
                }
            }
        }
    }
}

// 2x2 space-to-depth. Channel block order per input channel is
// (top-left, top-right, bottom-left, bottom-right):
//   out[b, 4c + 2dy + dx, i, j] = in[b, c, 2i + dy, 2j + dx]
template <typename T>
Tensor4<T> fold2x2(const Tensor4<T>& x) {
    require(x.height() % 2 == 0 && x.width() % 2 == 0,
            "fold2x2: spatial dims must be even, got ", x.height(), "x", x.width());
    Tensor4<T> y(x.batch(), 4 * x.channels(), x.height() / 2, x.width() / 2);
    const int OH = y.height(), OW = y.width();
    for (int b = 0; b < x.batch(); ++b)
        for (int c = 0; c < x.channels(); ++c)
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                    for (int i = 0; i < OH; ++i) {
                        const T* src = x.row(b, c, 2 * i + dy) + dx;
                        T* dst = y.row(b, 4 * c + 2 * dy + dx, i);
                        for (int j = 0; j < OW; ++j) dst[j] = src[2 * j];
                    }
                }
    return y;
}

// Exact inverse of fold2x2.
template <typename T>
Tensor4<T> unfold2x2(const Tensor4<T>& x) {
    require(x.channels() % 4 == 0, "unfold2x2: channels must be divisible by 4, got ",
            x.channels());
    Tensor4<T> y(x.batch(), x.channels() / 4, 2 * x.height(), 2 * x.width());
    const int IH = x.height(), IW = x.width();
    for (int b = 0; b < y.batch(); ++b)
        for (int c = 0; c < y.channels(); ++c)
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                    for (int i = 0; i < IH; ++i) {
                        const T* src = x.row(b, 4 * c + 2 * dy + dx, i);
                        T* dst = y.row(b, c, 2 * i + dy) + dx;
                        for (int j = 0; j < IW; ++j) dst[2 * j] = src[j];
                    }
                }
    return y;
}

template <typename T>
Tensor4<T> max_pool2x2(const Tensor4<T>& x) {
    require(x.height() >= 2 && x.width() >= 2, "max_pool2x2: input too small ",
            x.shape().str());
    Tensor4<T> y(x.batch(), x.channels(), x.height() / 2, x.width() / 2);
    for (int b = 0; b < x.batch(); ++b)
        for (int c = 0; c < x.channels(); ++c)
            for (int i = 0; i < y.height(); ++i) {
                const T* r0 = x.row(b, c, 2 * i);
                const T* r1 = x.row(b, c, 2 * i + 1);
                T* dst = y.row(b, c, i);
                for (int j = 0; j < y.width(); ++j) {
                    T m = r0[2 * j];
                    m = std::max(m, r0[2 * j + 1]);
                    m = std::max(m, r1[2 * j]);
                    m = std::max(m, r1[2 * j + 1]);
                    dst[j] = m;
                }
            }
    return y;
}

// Scatter pooled gradient to the first position attaining the max
// (scan order TL, TR, BL, BR), matching the forward reduction.
template <typename T>
void max_pool2x2_backward(const Tensor4<T>& x, const Tensor4<T>& gy, Tensor4<T>& gx) {
    for (int b = 0; b < gy.batch(); ++b)
        for (int c = 0; c < gy.channels(); ++c)
            for (int i = 0; i < gy.height(); ++i)
                for (int j = 0; j < gy.width(); ++j) {
                    int by = 2 * i, bx = 2 * j;
                    T best = x.at(b, c, by, bx);
                    int wy = by, wx = bx;
                    if (x.at(b, c, by, bx + 1) > best) { best = x.at(b, c, by, bx + 1); wy = by; wx = bx + 1; }
                    if (x.at(b, c, by + 1, bx) > best) { best = x.at(b, c, by + 1, bx); wy = by + 1; wx = bx; }
                    if (x.at(b, c, by + 1, bx + 1) > best) { wy = by + 1; wx = bx + 1; }
                    gx.at(b, c, wy, wx) += gy.at(b, c, i, j);
                }
}

// Bilinear resampling with half-pixel centers: a constant map stays exactly
// constant at any scale, and same-size resampling is the identity.
struct BilinearAxis {
    std::vector<int> i0, i1;
    std::vector<double> frac;
};

inline BilinearAxis bilinear_axis(int in, int out) {
    BilinearAxis a;
    a.i0.resize(out);
    a.i1.resize(out);
    a.frac.resize(out);
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        if (src < 0) src = 0;
        if (src > in - 1) src = in - 1;
        int lo = static_cast<int>(std::floor(src));
        if (lo > in - 1) lo = in - 1;
        a.i0[o] = lo;
        a.i1[o] = std::min(lo + 1, in - 1);
        a.frac[o] = src - lo;
    }
    return a;
}

template <typename T>
Tensor4<T> bilinear_upsample(const Tensor4<T>& x, int th, int tw) {
    require(th >= x.height() && tw >= x.width(), "bilinear_upsample: target ", th, "x", tw,
            " smaller than source ", x.height(), "x", x.width());
    Tensor4<T> y(x.batch(), x.channels(), th, tw);
    const BilinearAxis ay = bilinear_axis(x.height(), th);
    const BilinearAxis ax = bilinear_axis(x.width(), tw);
    for (int b = 0; b < x.batch(); ++b)
        for (int c = 0; c < x.channels(); ++c)
            for (int oy = 0; oy < th; ++oy) {
                const T* r0 = x.row(b, c, ay.i0[oy]);
                const T* r1 = x.row(b, c, ay.i1[oy]);
                const T fy = static_cast<T>(ay.frac[oy]);
                T* dst = y.row(b, c, oy);
                for (int ox = 0; ox < tw; ++ox) {
                    const T fx = static_cast<T>(ax.frac[ox]);
                    const T top = r0[ax.i0[ox]] + fx * (r0[ax.i1[ox]] - r0[ax.i0[ox]]);
                    const T bot = r1[ax.i0[ox]] + fx * (r1[ax.i1[ox]] - r1[ax.i0[ox]]);
                    dst[ox] = top + fy * (bot - top);
                }
            }
    return y;
}

template <typename T>
void bilinear_upsample_backward(const Tensor4<T>& gy, int sh, int sw, Tensor4<T>& gx) {
    const BilinearAxis ay = bilinear_axis(sh, gy.height());
    const BilinearAxis ax = bilinear_axis(sw, gy.width());
    for (int b = 0; b < gy.batch(); ++b)
        for (int c = 0; c < gy.channels(); ++c)
            for (int oy = 0; oy < gy.height(); ++oy) {
                const T fy = static_cast<T>(ay.frac[oy]);
                for (int ox = 0; ox < gy.width(); ++ox) {
                    const T fx = static_cast<T>(ax.frac[ox]);
                    const T g = gy.at(b, c, oy, ox);
                    gx.at(b, c, ay.i0[oy], ax.i0[ox]) += (T(1) - fy) * (T(1) - fx) * g;
                    gx.at(b, c, ay.i0[oy], ax.i1[ox]) += (T(1) - fy) * fx * g;
                    gx.at(b, c, ay.i1[oy], ax.i0[ox]) += fy * (T(1) - fx) * g;
                    gx.at(b, c, ay.i1[oy], ax.i1[ox]) += fy * fx * g;
                }
            }
}

}  // namespace kernels
}  // namespace gatenet
