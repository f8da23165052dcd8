#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gatenet/ops.hpp"
#include "gatenet/rng.hpp"

namespace gatenet {

// Five-level encoder topology with strides [1,2,2,2,2]; the top level sits at
// 1/16 of the input resolution (no pooling after the last block).
struct BackboneConfig {
    std::array<int, 5> block_channels{16, 32, 64, 64, 64};
    int convs_per_block = 2;
    int input_size = 64;
    int transition_channels = 32;

    void validate() const {
        for (int c : block_channels)
            require(c > 0, "BackboneConfig: block channels must be positive");
        require(convs_per_block > 0, "BackboneConfig: convs_per_block must be positive");
        require(transition_channels > 0, "BackboneConfig: transition_channels must be positive");
        require(input_size > 0 && input_size % 16 == 0,
                "BackboneConfig: input_size must be a positive multiple of 16, got ",
                input_size);
    }

    int level_size(int level) const { return input_size >> (level - 1); }
};

enum class AsppMode {
    fold_aspp,      // 1x1 branch + three folded dilated branches + fusion conv
    aspp,           // 1x1 branch + three plain dilated branches + fusion conv
    single_fold,    // one folded dilated conv
    single_atrous,  // one plain dilated conv
    conv1x1,        // plain 1x1 reduction (FPN baseline head)
};

enum class DecoderShape {
    progressive,    // top-down branch only, prediction from its last block
    parallel_only,  // concatenation of all gated levels, single fusion conv
    dual,           // progressive branch plus parallel residual branch
};

inline const char* to_string(AsppMode m) {
    switch (m) {
        case AsppMode::fold_aspp: return "fold_aspp";
        case AsppMode::aspp: return "aspp";
        case AsppMode::single_fold: return "single_fold";
        case AsppMode::single_atrous: return "single_atrous";
        case AsppMode::conv1x1: return "conv1x1";
    }
    return "?";
}

inline const char* to_string(DecoderShape d) {
    switch (d) {
        case DecoderShape::progressive: return "progressive";
        case DecoderShape::parallel_only: return "parallel_only";
        case DecoderShape::dual: return "dual";
    }
    return "?";
}

struct ModelVariant {
    bool gate_units = true;
    double constant_gate = 1.0;  // broadcast value when gate_units is off
    AsppMode aspp = AsppMode::fold_aspp;
    int single_rate = 2;  // dilation for the single_* modes
    std::array<int, 3> aspp_rates{2, 4, 6};
    DecoderShape decoder = DecoderShape::dual;

    static ModelVariant full() { return ModelVariant{}; }

    static ModelVariant baseline_fpn() {
        ModelVariant v;
        v.gate_units = false;
        v.aspp = AsppMode::conv1x1;
        v.decoder = DecoderShape::progressive;
        return v;
    }

    bool uses_fold() const {
        return aspp == AsppMode::fold_aspp || aspp == AsppMode::single_fold;
    }

    bool operator==(const ModelVariant&) const = default;

    void validate(const BackboneConfig& cfg) const {
        require(constant_gate >= 0.0 && constant_gate <= 1.0,
                "ModelVariant: constant_gate must be in [0,1], got ", constant_gate);
        require(single_rate > 0, "ModelVariant: single_rate must be positive");
        if (uses_fold())
            require(cfg.input_size % 32 == 0, "ModelVariant: ", to_string(aspp),
                    " folds the 1/16-resolution level, which requires input_size divisible "
                    "by 32; got ",
                    cfg.input_size, " (use a plain atrous mode or a larger input)");
    }
};

// Ladder of variants mirroring the component ablation: each step adds one
// mechanism and strictly extends the previous parameter table.
inline std::vector<std::pair<std::string, ModelVariant>> ablation_ladder() {
    std::vector<std::pair<std::string, ModelVariant>> out;
    ModelVariant v = ModelVariant::baseline_fpn();
    out.emplace_back("fpn_baseline", v);
    v.gate_units = true;
    out.emplace_back("+gate_units", v);
    v.aspp = AsppMode::fold_aspp;
    out.emplace_back("+fold_aspp", v);
    v.decoder = DecoderShape::dual;
    out.emplace_back("+parallel_branch", v);
    return out;
}

template <typename T>
struct ParamEntry {
    std::string name;
    Tensor4<T> value;
    Tensor4<T> grad;
    Tensor4<T> velocity;
    bool is_bias = false;
};

template <typename T>
class ParamTable {
public:
    int add(std::string name, Shape4 shape, bool is_bias) {
        require(by_name_.find(name) == by_name_.end(), "ParamTable: duplicate name ", name);
        ParamEntry<T> e;
        e.name = std::move(name);
        e.value = Tensor4<T>(shape);
        e.grad = Tensor4<T>(shape);
        e.velocity = Tensor4<T>(shape);
        e.is_bias = is_bias;
        entries_.push_back(std::move(e));
        const int id = static_cast<int>(entries_.size()) - 1;
        by_name_[entries_.back().name] = id;
        return id;
    }

    int find(const std::string& name) const {
        auto it = by_name_.find(name);
        return it == by_name_.end() ? -1 : it->second;
    }

    std::size_t size() const { return entries_.size(); }
    ParamEntry<T>& operator[](std::size_t i) { return entries_[i]; }
    const ParamEntry<T>& operator[](std::size_t i) const { return entries_[i]; }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto& e : entries_) out.push_back(e.name);
        return out;
    }

    std::size_t element_count() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.value.size();
        return n;
    }

private:
    std::vector<ParamEntry<T>> entries_;
    std::unordered_map<std::string, int> by_name_;
};

enum class InitMode {
    training,        // fan-in uniform weights, zero biases, zero gate convs
    random_nonzero,  // everything random; used by gradient checks
};

template <typename T>
struct ForwardResult {
    Var<T> d1_logits{};   // invalid for parallel_only decoders
    Var<T> final_map{};   // probabilities in (0,1)
    std::array<std::pair<Var<T>, Var<T>>, 5> gates{};  // (g1, g2) per level, (b,1,1,1)
    std::vector<Var<T>> param_vars;                    // aligned with the parameter table
    std::map<std::string, Var<T>> inter;               // named intermediates, on request
};

template <typename T>
struct LossParts {
    Var<T> total{};
    Var<T> fpn{};    // supervision on the progressive-branch prediction
    Var<T> fused{};  // supervision on the final map
};

template <typename T>
class GateNet {
public:
    GateNet(BackboneConfig cfg, ModelVariant variant)
        : cfg_(std::move(cfg)), variant_(variant) {
        cfg_.validate();
        variant_.validate(cfg_);
        register_params();
    }

    const BackboneConfig& config() const { return cfg_; }
    const ModelVariant& variant() const { return variant_; }
    ParamTable<T>& params() { return params_; }
    const ParamTable<T>& params() const { return params_; }

    void init_params(uint64_t seed, InitMode mode = InitMode::training) {
        Rng rng(mix_seed(seed, 0x1217));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            ParamEntry<T>& e = params_[i];
            const bool gate_param = e.name.rfind("gate", 0) == 0;
            if (e.is_bias) {
                if (mode == InitMode::random_nonzero)
                    for (std::size_t k = 0; k < e.value.size(); ++k)
                        e.value.data()[k] = static_cast<T>(rng.uniform(-0.1, 0.1));
                else
                    e.value.zero();
            } else if (gate_param && mode == InitMode::training) {
                // Zero gate convs start every gate at sigmoid(0) = 0.5.
                e.value.zero();
            } else {
                const Shape4& s = e.value.shape();
                const double fan_in = static_cast<double>(s.c) * s.h * s.w;
                const double bound = std::sqrt(1.0 / fan_in);
                for (std::size_t k = 0; k < e.value.size(); ++k)
                    e.value.data()[k] = static_cast<T>(rng.uniform(-bound, bound));
            }
            e.grad.zero();
            e.velocity.zero();
        }
    }

    ForwardResult<T> forward(Tape<T>& tape, const Tensor4<T>& images,
                             bool keep_intermediates = false) const {
        const int S = cfg_.input_size;
        require(images.channels() == 3, "forward: expected 3-channel input, got ",
                images.channels());
        require(images.height() == S && images.width() == S,
                "forward: input spatial size ", images.height(), "x", images.width(),
                " does not match configured input_size ", S);
        require(images.batch() >= 1, "forward: empty batch");

        ForwardResult<T> r;
        r.param_vars.reserve(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i)
            r.param_vars.push_back(tape.leaf(params_[i].value, true));

        auto p = [&](const std::string& name) -> Var<T> {
            const int id = params_.find(name);
            require(id >= 0, "forward: unknown parameter ", name);
            return r.param_vars[static_cast<std::size_t>(id)];
        };

        Var<T> x = constant(tape, images);
        const int batch = images.batch();
        const int tc = cfg_.transition_channels;

        // Encoder: conv3x3+relu blocks with a 2x2 max-pool between levels.
        std::array<Var<T>, 5> enc;
        for (int level = 1; level <= 5; ++level) {
            if (level > 1) x = max_pool2x2(x);
            for (int j = 1; j <= cfg_.convs_per_block; ++j) {
                const std::string base = strcat_all("enc", level, ".conv", j);
                const int in_ch = x.value().channels();
                ConvSpec spec(cfg_.block_channels[level - 1], in_ch, 3, 1, 1);
                x = relu(conv2d(x, p(base + ".w"), p(base + ".b"), spec));
            }
            enc[level - 1] = x;
        }

        // Transition layers reduce each level to a common channel width.
        std::array<Var<T>, 5> trans;
        for (int level = 1; level <= 4; ++level) {
            ConvSpec spec(tc, cfg_.block_channels[level - 1], 3, 1, 1);
            const std::string base = strcat_all("trans", level);
            trans[level - 1] = relu(conv2d(enc[level - 1], p(base + ".w"), p(base + ".b"), spec));
        }
        trans[4] = top_head(tape, enc[4], p);

        auto gate_at = [&](int level, Var<T> context) -> std::pair<Var<T>, Var<T>> {
            if (!variant_.gate_units) {
                Tensor4<T> g = Tensor4<T>::full(Shape4{batch, 1, 1, 1},
                                                static_cast<T>(variant_.constant_gate));
                Var<T> gv = constant(tape, g);
                return {gv, gv};
            }
            Var<T> cat = concat_channels<T>({enc[level - 1], context});
            const std::string base = strcat_all("gate", level);
            ConvSpec spec(2, cat.value().channels(), 3, 1, 1);
            Var<T> pooled = global_avg_pool(sigmoid(conv2d(cat, p(base + ".w"), p(base + ".b"), spec)));
            return {slice_channels(pooled, 0, 1), slice_channels(pooled, 1, 1)};
        };

        auto dec_block = [&](int level, Var<T> input) -> Var<T> {
            const std::string base = strcat_all("dec", level);
            ConvSpec s1(tc, input.value().channels(), 3, 1, 1);
            Var<T> h = relu(conv2d(input, p(base + ".conv1.w"), p(base + ".conv1.b"), s1));
            if (level == 1) {
                ConvSpec s2(1, tc, 3, 1, 1);
                return conv2d(h, p(base + ".out.w"), p(base + ".out.b"), s2);  // logits
            }
            ConvSpec s2(tc, tc, 3, 1, 1);
            return relu(conv2d(h, p(base + ".conv2.w"), p(base + ".conv2.b"), s2));
        };

        auto up_to = [&](Var<T> v, int th, int tw) -> Var<T> {
            if (v.value().height() == th && v.value().width() == tw) return v;
            return bilinear_upsample(v, th, tw);
        };

        if (variant_.decoder == DecoderShape::parallel_only) {
            std::vector<Var<T>> cat;
            for (int level = 1; level <= 5; ++level) {
                auto g = gate_at(level, trans[level - 1]);
                r.gates[level - 1] = g;
                cat.push_back(up_to(scale_by_gate(trans[level - 1], g.second), S, S));
            }
            Var<T> fc = concat_channels(cat);
            ConvSpec fs(1, fc.value().channels(), 3, 1, 1);
            r.final_map = sigmoid(conv2d(fc, p("fuse.w"), p("fuse.b"), fs));
            if (keep_intermediates) stash(r, enc, trans, {}, fc);
            return r;
        }

        // Progressive decoding, top-down, with gates interleaved: the gate at
        // level i consumes the upsampled decoding of level i+1.
        std::array<Var<T>, 5> dec;
        {
            auto g5 = gate_at(5, trans[4]);
            r.gates[4] = g5;
            dec[4] = dec_block(5, scale_by_gate(trans[4], g5.first));
        }
        for (int level = 4; level >= 1; --level) {
            const int sz = cfg_.level_size(level);
            Var<T> up = up_to(dec[level], sz, sz);
            auto g = gate_at(level, up);
            r.gates[level - 1] = g;
            dec[level - 1] = dec_block(level, add(scale_by_gate(trans[level - 1], g.first), up));
        }
        r.d1_logits = dec[0];

        if (variant_.decoder == DecoderShape::progressive) {
            r.final_map = sigmoid(r.d1_logits);
            if (keep_intermediates) stash(r, enc, trans, dec, Var<T>{});
            return r;
        }

        // Parallel residual branch: prediction logits concatenated with every
        // gated transition level at full resolution, fused and added back.
        std::vector<Var<T>> cat;
        cat.push_back(r.d1_logits);
        for (int level = 1; level <= 5; ++level)
            cat.push_back(up_to(scale_by_gate(trans[level - 1], r.gates[level - 1].second), S, S));
        Var<T> fc = concat_channels(cat);
        ConvSpec fs(1, fc.value().channels(), 3, 1, 1);
        r.final_map = sigmoid(add(conv2d(fc, p("fuse.w"), p("fuse.b"), fs), r.d1_logits));
        if (keep_intermediates) stash(r, enc, trans, dec, fc);
        return r;
    }

    // Twin supervision: cross-entropy on the progressive-branch prediction and
    // on the final map. Variants with a single prediction get a single term.
    LossParts<T> loss(Tape<T>& tape, const ForwardResult<T>& fwd,
                      const Tensor4<T>& target) const {
        LossParts<T> parts;
        if (variant_.decoder == DecoderShape::dual) {
            parts.fpn = bce_mean(sigmoid(fwd.d1_logits), target);
            parts.fused = bce_mean(fwd.final_map, target);
            parts.total = add(parts.fpn, parts.fused);
        } else if (variant_.decoder == DecoderShape::progressive) {
            parts.fpn = bce_mean(fwd.final_map, target);
            parts.total = parts.fpn;
        } else {
            parts.fused = bce_mean(fwd.final_map, target);
            parts.total = parts.fused;
        }
        (void)tape;
        return parts;
    }

    // Copies gradients accumulated on the tape back into the table.
    void collect_grads(Tape<T>& tape, const ForwardResult<T>& fwd) {
        require(fwd.param_vars.size() == params_.size(),
                "collect_grads: forward result does not match this model");
        for (std::size_t i = 0; i < params_.size(); ++i)
            params_[i].grad = tape.grad(fwd.param_vars[i]);
    }

private:
    template <typename P>
    Var<T> top_head(Tape<T>& tape, Var<T> e5, P& p) const {
        (void)tape;
        const int tc = cfg_.transition_channels;
        const int c5 = cfg_.block_channels[4];
        switch (variant_.aspp) {
            case AsppMode::conv1x1: {
                ConvSpec spec(tc, c5, 1, 1, 0);
                return relu(conv2d(e5, p("t5.conv1x1.w"), p("t5.conv1x1.b"), spec));
            }
            case AsppMode::single_atrous: {
                const int d = variant_.single_rate;
                ConvSpec spec(tc, c5, 3, 1, d, d);
                return relu(conv2d(e5, p("t5.single.w"), p("t5.single.b"), spec));
            }
            case AsppMode::single_fold:
                return relu(folded_atrous_conv(e5, p("t5.single.w"), p("t5.single.b"),
                                               variant_.single_rate));
            case AsppMode::aspp:
            case AsppMode::fold_aspp: {
                ConvSpec c1(tc, c5, 1, 1, 0);
                std::vector<Var<T>> branches;
                branches.push_back(conv2d(e5, p("t5.conv1x1.w"), p("t5.conv1x1.b"), c1));
                for (int d : variant_.aspp_rates) {
                    const std::string base = strcat_all(
                        "t5.", variant_.aspp == AsppMode::fold_aspp ? "fold" : "atrous", d);
                    if (variant_.aspp == AsppMode::fold_aspp) {
                        branches.push_back(
                            folded_atrous_conv(e5, p(base + ".w"), p(base + ".b"), d));
                    } else {
                        ConvSpec spec(tc, c5, 3, 1, d, d);
                        branches.push_back(conv2d(e5, p(base + ".w"), p(base + ".b"), spec));
                    }
                }
                Var<T> cat = concat_channels(branches);
                ConvSpec fuse(tc, cat.value().channels(), 3, 1, 1);
                return relu(conv2d(cat, p("t5.fuse.w"), p("t5.fuse.b"), fuse));
            }
        }
        fail("top_head: unhandled mode");
    }

    void register_conv(const std::string& base, int out_ch, int in_ch, int k) {
        params_.add(base + ".w", Shape4{out_ch, in_ch, k, k}, false);
        params_.add(base + ".b", Shape4{1, out_ch, 1, 1}, true);
    }

    void register_params() {
        const int tc = cfg_.transition_channels;
        int in_ch = 3;
        for (int level = 1; level <= 5; ++level) {
            for (int j = 1; j <= cfg_.convs_per_block; ++j) {
                register_conv(strcat_all("enc", level, ".conv", j),
                              cfg_.block_channels[level - 1], in_ch, 3);
                in_ch = cfg_.block_channels[level - 1];
            }
        }
        for (int level = 1; level <= 4; ++level)
            register_conv(strcat_all("trans", level), tc, cfg_.block_channels[level - 1], 3);

        const int c5 = cfg_.block_channels[4];
        switch (variant_.aspp) {
            case AsppMode::conv1x1:
                register_conv("t5.conv1x1", tc, c5, 1);
                break;
            case AsppMode::single_atrous:
                register_conv("t5.single", tc, c5, 3);
                break;
            case AsppMode::single_fold:
                register_conv("t5.single", 4 * tc, 4 * c5, 3);
                break;
            case AsppMode::aspp:
            case AsppMode::fold_aspp:
                register_conv("t5.conv1x1", tc, c5, 1);
                for (int d : variant_.aspp_rates) {
                    if (variant_.aspp == AsppMode::fold_aspp)
                        register_conv(strcat_all("t5.fold", d), 4 * tc, 4 * c5, 3);
                    else
                        register_conv(strcat_all("t5.atrous", d), tc, c5, 3);
                }
                register_conv("t5.fuse", tc, 4 * tc, 3);
                break;
        }

        if (variant_.gate_units)
            for (int level = 1; level <= 5; ++level)
                register_conv(strcat_all("gate", level), 2,
                              cfg_.block_channels[level - 1] + tc, 3);

        if (variant_.decoder != DecoderShape::parallel_only) {
            for (int level = 5; level >= 2; --level) {
                register_conv(strcat_all("dec", level, ".conv1"), tc, tc, 3);
                register_conv(strcat_all("dec", level, ".conv2"), tc, tc, 3);
            }
            register_conv("dec1.conv1", tc, tc, 3);
            register_conv("dec1.out", 1, tc, 3);
        }

        if (variant_.decoder == DecoderShape::dual)
            register_conv("fuse", 1, 1 + 5 * tc, 3);
        else if (variant_.decoder == DecoderShape::parallel_only)
            register_conv("fuse", 1, 5 * tc, 3);
    }

    void stash(ForwardResult<T>& r, const std::array<Var<T>, 5>& enc,
               const std::array<Var<T>, 5>& trans, const std::array<Var<T>, 5>& dec,
               Var<T> fcat) const {
        for (int i = 0; i < 5; ++i) {
            r.inter[strcat_all("enc", i + 1)] = enc[i];
            r.inter[strcat_all("trans", i + 1)] = trans[i];
            if (dec[i].valid()) r.inter[strcat_all("dec", i + 1)] = dec[i];
        }
        if (fcat.valid()) r.inter["fcat"] = fcat;
    }

    BackboneConfig cfg_;
    ModelVariant variant_;
    ParamTable<T> params_;
};

}  // namespace gatenet
