#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gatenet/model.hpp"
#include "gatenet/ops.hpp"
#include "gatenet/rng.hpp"

namespace gatenet {

// Central finite differences in f64 against the tape's analytic gradients.
// An element passes if |fd - analytic| <= abs_floor or the relative error
// against max(|fd|, |analytic|) is within rel_tol.

struct GradCheckTolerance {
    double eps = 1e-5;
    double rel_tol = 1e-4;
    double abs_floor = 1e-6;
};

struct GradCheckOutcome {
    double worst_rel = 0.0;  // among elements not already under the floor
    double worst_abs = 0.0;
    std::size_t elements = 0;
    bool pass = true;

    // Checks one element. If the comparison fails at the nominal step, it is
    // retried at eps/8 and eps/64: a relu/max-pool kink falling inside the
    // central-difference secant produces a spurious mismatch that disappears
    // as the step shrinks, while a genuine gradient error persists at every
    // step size.
    template <typename FdAt>
    void check_element(double analytic, FdAt fd_at, const GradCheckTolerance& tol) {
        ++elements;
        double eps = tol.eps;
        double diff = 0.0, rel = 0.0;
        for (int attempt = 0; attempt < 3; ++attempt, eps /= 8.0) {
            const double fd = fd_at(eps);
            diff = std::abs(analytic - fd);
            if (diff <= tol.abs_floor) {
                worst_abs = std::max(worst_abs, diff);
                return;
            }
            rel = diff / std::max(std::abs(analytic), std::abs(fd));
            if (rel <= tol.rel_tol) {
                worst_abs = std::max(worst_abs, diff);
                worst_rel = std::max(worst_rel, rel);
                return;
            }
        }
        worst_abs = std::max(worst_abs, diff);
        worst_rel = std::max(worst_rel, rel);
        pass = false;
    }

    void merge(const GradCheckOutcome& o) {
        worst_rel = std::max(worst_rel, o.worst_rel);
        worst_abs = std::max(worst_abs, o.worst_abs);
        elements += o.elements;
        pass = pass && o.pass;
    }
};

using GraphBuilder =
    std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

namespace detail_gc {

// Scalar projection <f(x), r> so any-output ops reduce to one number.
inline double projected_value(const GraphBuilder& build,
                              const std::vector<Tensor4<double>>& inputs,
                              const Tensor4<double>& projection) {
    Tape<double> tape;
    std::vector<Var<double>> leaves;
    leaves.reserve(inputs.size());
    for (const auto& t : inputs) leaves.push_back(constant(tape, t));
    Var<double> out = build(tape, leaves);
    const Tensor4<double>& ov = out.value();
    double acc = 0;
    for (std::size_t i = 0; i < ov.size(); ++i) acc += ov.data()[i] * projection.data()[i];
    return acc;
}

}  // namespace detail_gc

// Checks d<f(x),r>/dx for every element of every input, for one graph.
inline GradCheckOutcome check_graph_gradients(const GraphBuilder& build,
                                              std::vector<Tensor4<double>> inputs,
                                              Rng& rng,
                                              const GradCheckTolerance& tol = {}) {
    Tape<double> tape;
    std::vector<Var<double>> leaves;
    for (const auto& t : inputs) leaves.push_back(tape.leaf(t, true));
    Var<double> out = build(tape, leaves);
    Tensor4<double> projection(out.value().shape());
    for (std::size_t i = 0; i < projection.size(); ++i)
        projection.data()[i] = rng.uniform(-1.0, 1.0);
    Var<double> loss = sum_all(hadamard(out, constant(tape, projection)));
    tape.backward(loss);

    GradCheckOutcome outcome;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Tensor4<double> analytic = tape.grad(leaves[i]);
        for (std::size_t k = 0; k < inputs[i].size(); ++k) {
            auto fd_at = [&](double eps) {
                const double saved = inputs[i].data()[k];
                inputs[i].data()[k] = saved + eps;
                const double hi = detail_gc::projected_value(build, inputs, projection);
                inputs[i].data()[k] = saved - eps;
                const double lo = detail_gc::projected_value(build, inputs, projection);
                inputs[i].data()[k] = saved;
                return (hi - lo) / (2 * eps);
            };
            outcome.check_element(analytic.data()[k], fd_at, tol);
        }
    }
    return outcome;
}

struct OpGradReport {
    std::string op;
    int cases = 0;
    GradCheckOutcome outcome;
};

namespace detail_gc {

inline Tensor4<double> random_tensor(Rng& rng, Shape4 s, double lo = -1.0, double hi = 1.0) {
    Tensor4<double> t(s);
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(lo, hi);
    return t;
}

// Values bounded away from zero, for kinked ops like relu.
inline Tensor4<double> random_tensor_off_zero(Rng& rng, Shape4 s) {
    Tensor4<double> t(s);
    for (std::size_t i = 0; i < t.size(); ++i)
        t.data()[i] = rng.uniform_away_from_zero(0.05, 1.0);
    return t;
}

// Pairwise-distinct values with gaps far above the FD step, for max_pool.
inline Tensor4<double> random_tensor_distinct(Rng& rng, Shape4 s) {
    Tensor4<double> t(s);
    std::vector<int> perm(t.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    for (std::size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)))]);
    for (std::size_t i = 0; i < t.size(); ++i)
        t.data()[i] = perm[i] * 0.037 - 0.5 + rng.uniform(0.0, 0.003);
    return t;
}

}  // namespace detail_gc

// The per-operation suite: every differentiable op, randomized instances.
inline std::vector<OpGradReport> run_op_gradient_suite(uint64_t seed, int cases_per_op = 10,
                                                       const GradCheckTolerance& tol = {}) {
    using detail_gc::random_tensor;
    using detail_gc::random_tensor_distinct;
    using detail_gc::random_tensor_off_zero;
    Rng rng(mix_seed(seed, 0x9cULL));
    std::vector<OpGradReport> reports;

    auto run = [&](const std::string& name,
                   const std::function<std::pair<GraphBuilder, std::vector<Tensor4<double>>>(Rng&)>&
                       make_case) {
        OpGradReport rep;
        rep.op = name;
        for (int c = 0; c < cases_per_op; ++c) {
            auto [builder, inputs] = make_case(rng);
            rep.outcome.merge(check_graph_gradients(builder, std::move(inputs), rng, tol));
            ++rep.cases;
        }
        reports.push_back(std::move(rep));
    };

    run("conv2d", [](Rng& r) {
        const int b = 1 + r.uniform_int(2), cin = 1 + r.uniform_int(3);
        const int cout = 1 + r.uniform_int(3);
        const int k = r.bernoulli(0.3) ? 1 : 3;
        const int stride = 1 + r.uniform_int(2), dil = 1 + r.uniform_int(2);
        const int pad = r.uniform_int(3);
        const int extent = dil * (k - 1) + 1 - 2 * pad;
        const int h = std::max(extent, 4 + r.uniform_int(4));
        const int w = std::max(extent, 4 + r.uniform_int(4));
        ConvSpec spec(cout, cin, k, stride, pad, dil);
        GraphBuilder build = [spec](Tape<double>&, const std::vector<Var<double>>& in) {
            return conv2d(in[0], in[1], in[2], spec);
        };
        return std::make_pair(build, std::vector<Tensor4<double>>{
                                         random_tensor(r, {b, cin, h, w}),
                                         random_tensor(r, spec.weight_shape()),
                                         random_tensor(r, spec.bias_shape())});
    });

    run("folded_atrous_conv", [](Rng& r) {
        const int b = 1 + r.uniform_int(2), cin = 1 + r.uniform_int(2);
        const int cout4 = 4 * (1 + r.uniform_int(2));
        const int dil = 1 + r.uniform_int(3);
        const int h = 2 * (2 + r.uniform_int(3)), w = 2 * (2 + r.uniform_int(3));
        GraphBuilder build = [dil](Tape<double>&, const std::vector<Var<double>>& in) {
            return folded_atrous_conv(in[0], in[1], in[2], dil);
        };
        return std::make_pair(build, std::vector<Tensor4<double>>{
                                         random_tensor(r, {b, cin, h, w}),
                                         random_tensor(r, {cout4, 4 * cin, 3, 3}),
                                         random_tensor(r, {1, cout4, 1, 1})});
    });

    run("fold2x2", [](Rng& r) {
        const Shape4 s{1 + r.uniform_int(2), 1 + r.uniform_int(3), 2 * (1 + r.uniform_int(4)),
                       2 * (1 + r.uniform_int(4))};
        GraphBuilder build = [](Tape<double>&, const std::vector<Var<double>>& in) {
            return fold2x2(in[0]);
        };
        return std::make_pair(build, std::vector<Tensor4<double>>{random_tensor(r, s)});
    });

    run("unfold2x2", [](Rng& r) {
        const Shape4 s{1 + r.uniform_int(2), 4 * (1 + r.uniform_int(3)),
                       1 + r.uniform_int(5), 1 + r.uniform_int(5)};
        GraphBuilder build = [](Tape<double>&, const std::vector<Var<double>>& in) {
            return unfold2x2(in[0]);
        };
        return std::make_pair(build, std::vector<Tensor4<double>>{random_tensor(r, s)});
    });

    run("relu", [](Rng& r) {
        const Shape4 s{1 + r.uniform_int(2), 1 + r.uniform_int(4), 2 + r.uniform_int(6),
                       2 + r.uniform_int(6)};
        GraphBuilder build = [](Tape<double>&, const std::vector<Var<double>>& in) {
            return relu(in[0]);
        };
        return std::make_pair(build, std::vector<Tensor4<double>>{random_tensor_off_zero(r, s)});
    });

    run("sigmoid", [](Rng& r) {
        const Shape4 s{1 + r.uniform_int(2), 1 + r.uniform_int(4), 2 + r.uniform_int(6),
                       2 + r.uniform_int(6)};
        GraphBuilder build = [](Tape<double>&, const std::vector<Var<double>>& in) {
            return sigmoid(in[0]);
        };
        return std::make_pair(build,
                              std::vector<Tensor4<double>>{random_tensor(r, s, -3.0, 3.0)});
    });

    run("max_pool2x2", [](Rng& r) {
        const Shape4 s{1 + r.uniform_int(2), 1 + r.uniform_int(3), 2 * (1 + r.uniform_int(4)),
                       2 * (1 + r.uniform_int(4))};
        GraphBuilder build = [](Tape<double>&, const std::vector<Var<double>>& in) {
            return max_pool2x2(in[0]);
        };
        return std::make_pair(build, std::vector<Tensor4<double>>{random_tensor_distinct(r, s)});
    });

    run("global_avg_pool", [](Rng& r) {
        const Shape4 s{1 + r.uniform_int(2), 1 + r.uniform_int(4), 1 + r.uniform_int(7),
                       1 + r.uniform_int(7)};
        GraphBuilder build = [](Tape<double>&, const std::vector<Var<double>>& in) {
            return global_avg_pool(in[0]);
        };
        return std::make_pair(build, std::vector<Tensor4<double>>{random_tensor(r, s)});
    });

    run("bilinear_upsample", [](Rng& r) {
        const int h = 2 + r.uniform_int(5), w = 2 + r.uniform_int(5);
        const int th = h + r.uniform_int(9), tw = w + r.uniform_int(9);
        const Shape4 s{1 + r.uniform_int(2), 1 + r.uniform_int(3), h, w};
        GraphBuilder build = [th, tw](Tape<double>&, const std::vector<Var<double>>& in) {
            return bilinear_upsample(in[0], th, tw);
        };
        return std::make_pair(build, std::vector<Tensor4<double>>{random_tensor(r, s)});
    });

    run("concat_channels", [](Rng& r) {
        const int b = 1 + r.uniform_int(2), h = 2 + r.uniform_int(4), w = 2 + r.uniform_int(4);
        GraphBuilder build = [](Tape<double>&, const std::vector<Var<double>>& in) {
            return concat_channels(in);
        };
        return std::make_pair(build, std::vector<Tensor4<double>>{
                                         random_tensor(r, {b, 1 + r.uniform_int(3), h, w}),
                                         random_tensor(r, {b, 1 + r.uniform_int(3), h, w}),
                                         random_tensor(r, {b, 1 + r.uniform_int(3), h, w})});
    });

    run("slice_channels", [](Rng& r) {
        const int c = 3 + r.uniform_int(4);
        const int c0 = r.uniform_int(c - 1), count = 1 + r.uniform_int(c - c0 - 1);
        const Shape4 s{1 + r.uniform_int(2), c, 2 + r.uniform_int(4), 2 + r.uniform_int(4)};
        GraphBuilder build = [c0, count](Tape<double>&, const std::vector<Var<double>>& in) {
            return slice_channels(in[0], c0, count);
        };
        return std::make_pair(build, std::vector<Tensor4<double>>{random_tensor(r, s)});
    });

    run("add", [](Rng& r) {
        const Shape4 s{1 + r.uniform_int(2), 1 + r.uniform_int(3), 2 + r.uniform_int(4),
                       2 + r.uniform_int(4)};
        GraphBuilder build = [](Tape<double>&, const std::vector<Var<double>>& in) {
            return add(in[0], in[1]);
        };
        return std::make_pair(build, std::vector<Tensor4<double>>{random_tensor(r, s),
                                                                  random_tensor(r, s)});
    });

    run("scale_by_gate", [](Rng& r) {
        const Shape4 s{1 + r.uniform_int(3), 1 + r.uniform_int(3), 2 + r.uniform_int(4),
                       2 + r.uniform_int(4)};
        GraphBuilder build = [](Tape<double>&, const std::vector<Var<double>>& in) {
            return scale_by_gate(in[0], in[1]);
        };
        return std::make_pair(build, std::vector<Tensor4<double>>{
                                         random_tensor(r, s),
                                         random_tensor(r, {s.b, 1, 1, 1}, 0.1, 0.9)});
    });

    run("bce_mean", [](Rng& r) {
        const Shape4 s{1 + r.uniform_int(2), 1, 2 + r.uniform_int(5), 2 + r.uniform_int(5)};
        Tensor4<double> target(s);
        for (std::size_t i = 0; i < target.size(); ++i)
            target.data()[i] = r.bernoulli(0.5) ? 1.0 : 0.0;
        GraphBuilder build = [target](Tape<double>&, const std::vector<Var<double>>& in) {
            return bce_mean(in[0], target);
        };
        return std::make_pair(build, std::vector<Tensor4<double>>{
                                         random_tensor(r, s, 0.05, 0.95)});
    });

    return reports;
}

struct ModelGradReport {
    std::size_t params_checked = 0;
    std::size_t elements_checked = 0;
    GradCheckOutcome outcome;
    std::string worst_param;
    double seconds = 0;
};

// End-to-end loss gradient check of a whole model. elements_per_param == 0
// checks every element of every parameter; otherwise that many randomly
// sampled elements per parameter tensor.
inline ModelGradReport model_gradient_check(const BackboneConfig& cfg,
                                            const ModelVariant& variant, uint64_t seed,
                                            int elements_per_param = 0,
                                            const GradCheckTolerance& tol = {1e-5, 1e-3, 1e-6},
                                            int batch = 1) {
    const auto t0 = std::chrono::steady_clock::now();
    GateNet<double> model(cfg, variant);
    model.init_params(seed, InitMode::random_nonzero);
    Rng rng(mix_seed(seed, 0xF0ULL));

    Tensor4<double> images(batch, 3, cfg.input_size, cfg.input_size);
    for (std::size_t i = 0; i < images.size(); ++i) images.data()[i] = rng.uniform();
    Tensor4<double> target(batch, 1, cfg.input_size, cfg.input_size);
    for (std::size_t i = 0; i < target.size(); ++i)
        target.data()[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;

    auto loss_value = [&]() {
        Tape<double> tape;
        const ForwardResult<double> fwd = model.forward(tape, images);
        return model.loss(tape, fwd, target).total.value().data()[0];
    };

    // Analytic gradients once.
    {
        Tape<double> tape;
        const ForwardResult<double> fwd = model.forward(tape, images);
        const LossParts<double> parts = model.loss(tape, fwd, target);
        tape.backward(parts.total);
        model.collect_grads(tape, fwd);
    }

    ModelGradReport report;
    for (std::size_t pi = 0; pi < model.params().size(); ++pi) {
        ParamEntry<double>& e = model.params()[pi];
        std::vector<std::size_t> elems;
        if (elements_per_param <= 0 ||
            static_cast<std::size_t>(elements_per_param) >= e.value.size()) {
            elems.resize(e.value.size());
            for (std::size_t k = 0; k < elems.size(); ++k) elems[k] = k;
        } else {
            for (int k = 0; k < elements_per_param; ++k)
                elems.push_back(static_cast<std::size_t>(
                    rng.uniform_int(static_cast<int>(e.value.size()))));
        }
        GradCheckOutcome before = report.outcome;
        for (std::size_t k : elems) {
            auto fd_at = [&](double eps) {
                const double saved = e.value.data()[k];
                e.value.data()[k] = saved + eps;
                const double hi = loss_value();
                e.value.data()[k] = saved - eps;
                const double lo = loss_value();
                e.value.data()[k] = saved;
                return (hi - lo) / (2 * eps);
            };
            report.outcome.check_element(e.grad.data()[k], fd_at, tol);
            ++report.elements_checked;
        }
        if (report.outcome.worst_rel > before.worst_rel) report.worst_param = e.name;
        ++report.params_checked;
    }
    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace gatenet
