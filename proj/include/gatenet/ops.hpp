#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "gatenet/kernels.hpp"
#include "gatenet/tape.hpp"

namespace gatenet {

namespace detail {

template <typename T>
void accumulate(Tensor4<T>& dst, const Tensor4<T>& src) {
    require_same_shape(dst, src, "accumulate");
    T* d = dst.data();
    const T* s = src.data();
    for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

template <typename T>
Tape<T>& same_tape(Var<T> a, Var<T> b) {
    require(a.tape != nullptr && a.tape == b.tape, "ops: variables from different tapes");
    return *a.tape;
}

}  // namespace detail

template <typename T>
Var<T> constant(Tape<T>& tape, Tensor4<T> value) {
    return tape.leaf(std::move(value), false);
}

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, const ConvSpec& spec) {
    Tape<T>& t = detail::same_tape(x, w);
    detail::same_tape(x, b);
    Tensor4<T> y = kernels::conv2d_forward(x.value(), w.value(), b.value(), spec);
    const int xi = x.id, wi = w.id, bi = b.id;
    return t.push(std::move(y), {xi, wi, bi}, "conv2d",
                  [xi, wi, bi, spec](Tape<T>& tp, int self) {
                      const Tensor4<T>& gy = tp.grad_mut(self);
                      if (tp.needs(xi))
                          kernels::conv2d_backward_input(gy, tp.value_at(wi), spec,
                                                         tp.grad_mut(xi));
                      if (tp.needs(wi) || tp.needs(bi))
                          kernels::conv2d_backward_weight(tp.value_at(xi), gy, spec,
                                                          tp.grad_mut(wi), tp.grad_mut(bi));
                  });
}

template <typename T>
Var<T> fold2x2(Var<T> x) {
    Tape<T>& t = *x.tape;
    const int xi = x.id;
    return t.push(kernels::fold2x2(x.value()), {xi}, "fold2x2",
                  [xi](Tape<T>& tp, int self) {
                      if (!tp.needs(xi)) return;
                      detail::accumulate(tp.grad_mut(xi), kernels::unfold2x2(tp.grad_mut(self)));
                  });
}

template <typename T>
Var<T> unfold2x2(Var<T> x) {
    Tape<T>& t = *x.tape;
    const int xi = x.id;
    return t.push(kernels::unfold2x2(x.value()), {xi}, "unfold2x2",
                  [xi](Tape<T>& tp, int self) {
                      if (!tp.needs(xi)) return;
                      detail::accumulate(tp.grad_mut(xi), kernels::fold2x2(tp.grad_mut(self)));
                  });
}

// fold -> dilated conv -> unfold, padded to preserve the folded spatial size,
// so the overall spatial size is preserved as well. The weight acts in the
// folded domain: (out_ch, 4*in_ch, k, k) with out_ch divisible by 4.
template <typename T>
Var<T> folded_atrous_conv(Var<T> x, Var<T> w, Var<T> b, int dilation) {
    const Shape4& ws = w.value().shape();
    require(ws.h == ws.w, "folded_atrous_conv: kernel must be square, got ", ws.str());
    require(ws.b % 4 == 0, "folded_atrous_conv: out_ch (", ws.b,
            ") must be divisible by 4 for unfold");
    require(dilation * (ws.h - 1) % 2 == 0,
            "folded_atrous_conv: dilation*(k-1) must be even to preserve size");
    ConvSpec spec(ws.b, ws.c, ws.h, 1, dilation * (ws.h - 1) / 2, dilation);
    return unfold2x2(conv2d(fold2x2(x), w, b, spec));
}

template <typename T>
Var<T> relu(Var<T> x) {
    Tape<T>& t = *x.tape;
    const Tensor4<T>& xv = x.value();
    Tensor4<T> y(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) y.data()[i] = std::max(T(0), xv.data()[i]);
    const int xi = x.id;
    return t.push(std::move(y), {xi}, "relu", [xi](Tape<T>& tp, int self) {
        if (!tp.needs(xi)) return;
        const Tensor4<T>& gy = tp.grad_mut(self);
        const Tensor4<T>& xv = tp.value_at(xi);
        Tensor4<T>& gx = tp.grad_mut(xi);
        for (std::size_t i = 0; i < xv.size(); ++i)
            if (xv.data()[i] > T(0)) gx.data()[i] += gy.data()[i];
    });
}

// Sigmoid clamped into the open interval (0,1): saturated values are pulled
// to the nearest representable value strictly inside, so downstream code can
// rely on 0 < y < 1 even for extreme inputs.
template <typename T>
Var<T> sigmoid(Var<T> x) {
    Tape<T>& t = *x.tape;
    const Tensor4<T>& xv = x.value();
    Tensor4<T> y(xv.shape());
    const T lo = std::numeric_limits<T>::min();
    const T hi = T(1) - std::numeric_limits<T>::epsilon() / 2;
    for (std::size_t i = 0; i < xv.size(); ++i) {
        T v = T(1) / (T(1) + std::exp(-xv.data()[i]));
        y.data()[i] = std::min(std::max(v, lo), hi);
    }
    const int xi = x.id;
    return t.push(std::move(y), {xi}, "sigmoid", [xi](Tape<T>& tp, int self) {
        if (!tp.needs(xi)) return;
        const Tensor4<T>& gy = tp.grad_mut(self);
        const Tensor4<T>& yv = tp.value_at(self);
        Tensor4<T>& gx = tp.grad_mut(xi);
        for (std::size_t i = 0; i < yv.size(); ++i) {
            const T s = yv.data()[i];
            gx.data()[i] += gy.data()[i] * s * (T(1) - s);
        }
    });
}

template <typename T>
Var<T> global_avg_pool(Var<T> x) {
    Tape<T>& t = *x.tape;
    const Tensor4<T>& xv = x.value();
    require(xv.height() >= 1 && xv.width() >= 1, "global_avg_pool: empty spatial extent");
    Tensor4<T> y(xv.batch(), xv.channels(), 1, 1);
    const std::size_t n = static_cast<std::size_t>(xv.height()) * xv.width();
    for (int b = 0; b < xv.batch(); ++b)
        for (int c = 0; c < xv.channels(); ++c) {
            const T* p = xv.plane(b, c);
            T acc = 0;
            for (std::size_t i = 0; i < n; ++i) acc += p[i];
            y.at(b, c, 0, 0) = acc / static_cast<T>(n);
        }
    const int xi = x.id;
    return t.push(std::move(y), {xi}, "global_avg_pool", [xi](Tape<T>& tp, int self) {
        if (!tp.needs(xi)) return;
        const Tensor4<T>& gy = tp.grad_mut(self);
        Tensor4<T>& gx = tp.grad_mut(xi);
        const std::size_t n = static_cast<std::size_t>(gx.height()) * gx.width();
        for (int b = 0; b < gx.batch(); ++b)
            for (int c = 0; c < gx.channels(); ++c) {
                const T g = gy.at(b, c, 0, 0) / static_cast<T>(n);
                T* p = gx.plane(b, c);
                for (std::size_t i = 0; i < n; ++i) p[i] += g;
            }
    });
}

template <typename T>
Var<T> max_pool2x2(Var<T> x) {
    Tape<T>& t = *x.tape;
    const int xi = x.id;
    return t.push(kernels::max_pool2x2(x.value()), {xi}, "max_pool2x2",
                  [xi](Tape<T>& tp, int self) {
                      if (!tp.needs(xi)) return;
                      kernels::max_pool2x2_backward(tp.value_at(xi), tp.grad_mut(self),
                                                    tp.grad_mut(xi));
                  });
}

template <typename T>
Var<T> bilinear_upsample(Var<T> x, int th, int tw) {
    Tape<T>& t = *x.tape;
    const int xi = x.id;
    const int sh = x.value().height(), sw = x.value().width();
    return t.push(kernels::bilinear_upsample(x.value(), th, tw), {xi}, "bilinear_upsample",
                  [xi, sh, sw](Tape<T>& tp, int self) {
                      if (!tp.needs(xi)) return;
                      kernels::bilinear_upsample_backward(tp.grad_mut(self), sh, sw,
                                                          tp.grad_mut(xi));
                  });
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
    require(!xs.empty(), "concat_channels: no inputs");
    Tape<T>& t = *xs[0].tape;
    const Tensor4<T>& first = xs[0].value();
    int total_c = 0;
    std::vector<int> ids;
    for (const Var<T>& v : xs) {
        require(v.tape == &t, "concat_channels: variables from different tapes");
        const Tensor4<T>& xv = v.value();
        require(xv.batch() == first.batch() && xv.height() == first.height() &&
                    xv.width() == first.width(),
                "concat_channels: incompatible shape ", xv.shape().str(), " vs ",
                first.shape().str());
        total_c += xv.channels();
        ids.push_back(v.id);
    }
    Tensor4<T> y(first.batch(), total_c, first.height(), first.width());
    const std::size_t plane = static_cast<std::size_t>(first.height()) * first.width();
    for (int b = 0; b < first.batch(); ++b) {
        int co = 0;
        for (const Var<T>& v : xs) {
            const Tensor4<T>& xv = v.value();
            for (int c = 0; c < xv.channels(); ++c, ++co)
                std::copy(xv.plane(b, c), xv.plane(b, c) + plane, y.plane(b, co));
        }
    }
    return t.push(std::move(y), ids, "concat_channels", [ids](Tape<T>& tp, int self) {
        const Tensor4<T>& gy = tp.grad_mut(self);
        const std::size_t plane = static_cast<std::size_t>(gy.height()) * gy.width();
        int co = 0;
        for (int id : ids) {
            const int nc = tp.value_at(id).channels();
            if (tp.needs(id)) {
                Tensor4<T>& gx = tp.grad_mut(id);
                for (int b = 0; b < gy.batch(); ++b)
                    for (int c = 0; c < nc; ++c) {
                        const T* src = gy.plane(b, co + c);
                        T* dst = gx.plane(b, c);
                        for (std::size_t i = 0; i < plane; ++i) dst[i] += src[i];
                    }
            }
            co += nc;
        }
    });
}

template <typename T>
Var<T> slice_channels(Var<T> x, int c0, int count) {
    Tape<T>& t = *x.tape;
    const Tensor4<T>& xv = x.value();
    require(c0 >= 0 && count > 0 && c0 + count <= xv.channels(), "slice_channels: range [",
            c0, ",", c0 + count, ") out of ", xv.channels(), " channels");
    Tensor4<T> y(xv.batch(), count, xv.height(), xv.width());
    const std::size_t plane = static_cast<std::size_t>(xv.height()) * xv.width();
    for (int b = 0; b < xv.batch(); ++b)
        for (int c = 0; c < count; ++c)
            std::copy(xv.plane(b, c0 + c), xv.plane(b, c0 + c) + plane, y.plane(b, c));
    const int xi = x.id;
    return t.push(std::move(y), {xi}, "slice_channels", [xi, c0, count](Tape<T>& tp, int self) {
        if (!tp.needs(xi)) return;
        const Tensor4<T>& gy = tp.grad_mut(self);
        Tensor4<T>& gx = tp.grad_mut(xi);
        const std::size_t plane = static_cast<std::size_t>(gy.height()) * gy.width();
        for (int b = 0; b < gy.batch(); ++b)
            for (int c = 0; c < count; ++c) {
                const T* src = gy.plane(b, c);
                T* dst = gx.plane(b, c0 + c);
                for (std::size_t i = 0; i < plane; ++i) dst[i] += src[i];
            }
    });
}

template <typename T>
Var<T> add(Var<T> x, Var<T> y) {
    Tape<T>& t = detail::same_tape(x, y);
    require_same_shape(x.value(), y.value(), "add");
    Tensor4<T> out(x.value().shape());
    const T* a = x.value().data();
    const T* b = y.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = a[i] + b[i];
    const int xi = x.id, yi = y.id;
    return t.push(std::move(out), {xi, yi}, "add", [xi, yi](Tape<T>& tp, int self) {
        const Tensor4<T>& gy = tp.grad_mut(self);
        if (tp.needs(xi)) detail::accumulate(tp.grad_mut(xi), gy);
        if (tp.needs(yi)) detail::accumulate(tp.grad_mut(yi), gy);
    });
}

template <typename T>
Var<T> hadamard(Var<T> x, Var<T> y) {
    Tape<T>& t = detail::same_tape(x, y);
    require_same_shape(x.value(), y.value(), "hadamard");
    Tensor4<T> out(x.value().shape());
    const T* a = x.value().data();
    const T* b = y.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = a[i] * b[i];
    const int xi = x.id, yi = y.id;
    return t.push(std::move(out), {xi, yi}, "hadamard", [xi, yi](Tape<T>& tp, int self) {
        const Tensor4<T>& gy = tp.grad_mut(self);
        if (tp.needs(xi)) {
            const T* yv = tp.value_at(yi).data();
            T* gx = tp.grad_mut(xi).data();
            for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy.data()[i] * yv[i];
        }
        if (tp.needs(yi)) {
            const T* xv = tp.value_at(xi).data();
            T* gyy = tp.grad_mut(yi).data();
            for (std::size_t i = 0; i < gy.size(); ++i) gyy[i] += gy.data()[i] * xv[i];
        }
    });
}

// Broadcast a per-sample scalar gate (b,1,1,1) over channels and space.
// Differentiable in both the features and the gate.
template <typename T>
Var<T> scale_by_gate(Var<T> x, Var<T> gate) {
    Tape<T>& t = detail::same_tape(x, gate);
    const Tensor4<T>& xv = x.value();
    const Tensor4<T>& gv = gate.value();
    require(gv.shape() == Shape4{xv.batch(), 1, 1, 1}, "scale_by_gate: gate shape ",
            gv.shape().str(), " must be (", xv.batch(), ",1,1,1)");
    Tensor4<T> out(xv.shape());
    const std::size_t per = xv.size() / static_cast<std::size_t>(xv.batch());
    for (int b = 0; b < xv.batch(); ++b) {
        const T g = gv.data()[b];
        const T* src = xv.data() + per * b;
        T* dst = out.data() + per * b;
        for (std::size_t i = 0; i < per; ++i) dst[i] = g * src[i];
    }
    const int xi = x.id, gi = gate.id;
    return t.push(std::move(out), {xi, gi}, "scale_by_gate", [xi, gi](Tape<T>& tp, int self) {
        const Tensor4<T>& gy = tp.grad_mut(self);
        const Tensor4<T>& xv = tp.value_at(xi);
        const Tensor4<T>& gv = tp.value_at(gi);
        const std::size_t per = xv.size() / static_cast<std::size_t>(xv.batch());
        if (tp.needs(xi)) {
            Tensor4<T>& gx = tp.grad_mut(xi);
            for (int b = 0; b < xv.batch(); ++b) {
                const T g = gv.data()[b];
                const T* src = gy.data() + per * b;
                T* dst = gx.data() + per * b;
                for (std::size_t i = 0; i < per; ++i) dst[i] += g * src[i];
            }
        }
        if (tp.needs(gi)) {
            Tensor4<T>& gg = tp.grad_mut(gi);
            for (int b = 0; b < xv.batch(); ++b) {
                const T* gsrc = gy.data() + per * b;
                const T* xsrc = xv.data() + per * b;
                T acc = 0;
                for (std::size_t i = 0; i < per; ++i) acc += gsrc[i] * xsrc[i];
                gg.data()[b] += acc;
            }
        }
    });
}

template <typename T>
Var<T> sum_all(Var<T> x) {
    Tape<T>& t = *x.tape;
    const Tensor4<T>& xv = x.value();
    T acc = 0;
    for (std::size_t i = 0; i < xv.size(); ++i) acc += xv.data()[i];
    const int xi = x.id;
    return t.push(Tensor4<T>::scalar(acc), {xi}, "sum_all", [xi](Tape<T>& tp, int self) {
        if (!tp.needs(xi)) return;
        const T g = tp.grad_mut(self).data()[0];
        Tensor4<T>& gx = tp.grad_mut(xi);
        for (std::size_t i = 0; i < gx.size(); ++i) gx.data()[i] += g;
    });
}

// Mean binary cross-entropy between probabilities and a {0,1} target, with
// probabilities clamped to [1e-7, 1-1e-7] for numerical safety.
template <typename T>
Var<T> bce_mean(Var<T> p, const Tensor4<T>& target) {
    Tape<T>& t = *p.tape;
    const Tensor4<T>& pv = p.value();
    require_same_shape(pv, target, "bce_mean");
    const T lo = T(1e-7), hi = T(1) - T(1e-7);
    T acc = 0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        const T y = target.data()[i];
        require(y == T(0) || y == T(1), "bce_mean: target value ", y,
                " outside {0,1} at element ", i);
        const T pc = std::min(std::max(pv.data()[i], lo), hi);
        acc += y == T(1) ? -std::log(pc) : -std::log(T(1) - pc);
    }
    const T n = static_cast<T>(pv.size());
    const int pi = p.id;
    Tensor4<T> tgt = target;
    return t.push(Tensor4<T>::scalar(acc / n), {pi}, "bce_mean",
                  [pi, tgt = std::move(tgt), lo, hi](Tape<T>& tp, int self) {
                      if (!tp.needs(pi)) return;
                      const T g = tp.grad_mut(self).data()[0];
                      const Tensor4<T>& pv = tp.value_at(pi);
                      Tensor4<T>& gp = tp.grad_mut(pi);
                      const T n = static_cast<T>(pv.size());
                      for (std::size_t i = 0; i < pv.size(); ++i) {
                          const T raw = pv.data()[i];
                          if (raw <= lo || raw >= hi) continue;
                          const T y = tgt.data()[i];
                          gp.data()[i] += g * (y == T(1) ? -T(1) / raw : T(1) / (T(1) - raw)) / n;
                      }
                  });
}

}  // namespace gatenet
