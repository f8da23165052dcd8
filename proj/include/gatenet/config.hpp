#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gatenet/data.hpp"
#include "gatenet/model.hpp"

namespace gatenet {

// Shortest round-trip decimal representation (locale-independent).
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct TrainConfig {
    BackboneConfig model;
    ModelVariant variant;
    double base_lr = 0.001;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    double poly_power = 0.9;
    int batch = 4;
    int epochs = 10;
    std::uint64_t seed = 1;
    std::string precision = "f32";  // f32 | f64
    int checkpoint_every = 0;       // iterations between checkpoints; 0 = per epoch
    bool augment = true;

    void validate() const {
        model.validate();
        variant.validate(model);
        require(base_lr >= 0 && momentum >= 0 && weight_decay >= 0 && poly_power > 0,
                "TrainConfig: rates must be non-negative");
        require(batch >= 1 && epochs >= 1, "TrainConfig: batch and epochs must be >= 1");
        require(precision == "f32" || precision == "f64",
                "TrainConfig: precision must be f32 or f64, got ", precision);
        require(checkpoint_every >= 0, "TrainConfig: checkpoint_every must be >= 0");
    }
};

namespace detail_cfg {

inline std::string trim(const std::string& s) {
    const std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
    double out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    require(res.ec == std::errc() && res.ptr == v.data() + v.size(),
            "config: bad number for ", key, ": '", v, "'");
    return out;
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
    std::int64_t out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    require(res.ec == std::errc() && res.ptr == v.data() + v.size(),
            "config: bad integer for ", key, ": '", v, "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail("config: bad boolean for ", key, ": '", v, "'");
}

inline AsppMode parse_aspp(const std::string& v) {
    if (v == "fold_aspp") return AsppMode::fold_aspp;
    if (v == "aspp") return AsppMode::aspp;
    if (v == "single_fold") return AsppMode::single_fold;
    if (v == "single_atrous") return AsppMode::single_atrous;
    if (v == "conv1x1") return AsppMode::conv1x1;
    fail("config: unknown aspp mode '", v,
         "' (expected fold_aspp|aspp|single_fold|single_atrous|conv1x1)");
}

inline DecoderShape parse_decoder(const std::string& v) {
    if (v == "dual") return DecoderShape::dual;
    if (v == "progressive") return DecoderShape::progressive;
    if (v == "parallel_only") return DecoderShape::parallel_only;
    fail("config: unknown decoder shape '", v, "' (expected dual|progressive|parallel_only)");
}

}  // namespace detail_cfg

// Applies one `key = value` assignment. Unknown keys are rejected.
inline void apply_config_key(TrainConfig& cfg, const std::string& key, const std::string& value) {
    using namespace detail_cfg;
    if (key == "model.input_size") {
        cfg.model.input_size = static_cast<int>(parse_int(key, value));
    } else if (key == "model.block_channels") {
        std::array<int, 5> ch{};
        std::size_t pos = 0;
        for (int i = 0; i < 5; ++i) {
            const std::size_t comma = value.find(',', pos);
            const std::string part =
                trim(comma == std::string::npos ? value.substr(pos) : value.substr(pos, comma - pos));
            ch[static_cast<std::size_t>(i)] = static_cast<int>(parse_int(key, part));
            require(i == 4 || comma != std::string::npos,
                    "config: model.block_channels needs 5 comma-separated values");
            pos = comma + 1;
        }
        cfg.model.block_channels = ch;
    } else if (key == "model.convs_per_block") {
        cfg.model.convs_per_block = static_cast<int>(parse_int(key, value));
    } else if (key == "model.transition_channels") {
        cfg.model.transition_channels = static_cast<int>(parse_int(key, value));
    } else if (key == "variant.gate_units") {
        cfg.variant.gate_units = parse_bool(key, value);
    } else if (key == "variant.constant_gate") {
        cfg.variant.constant_gate = parse_double(key, value);
    } else if (key == "variant.aspp") {
        cfg.variant.aspp = parse_aspp(value);
    } else if (key == "variant.single_rate") {
        cfg.variant.single_rate = static_cast<int>(parse_int(key, value));
    } else if (key == "variant.decoder") {
        cfg.variant.decoder = parse_decoder(value);
    } else if (key == "train.base_lr") {
        cfg.base_lr = parse_double(key, value);
    } else if (key == "train.momentum") {
        cfg.momentum = parse_double(key, value);
    } else if (key == "train.weight_decay") {
        cfg.weight_decay = parse_double(key, value);
    } else if (key == "train.poly_power") {
        cfg.poly_power = parse_double(key, value);
    } else if (key == "train.batch") {
        cfg.batch = static_cast<int>(parse_int(key, value));
    } else if (key == "train.epochs") {
        cfg.epochs = static_cast<int>(parse_int(key, value));
    } else if (key == "train.seed") {
        cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else if (key == "train.precision") {
        cfg.precision = value;
    } else if (key == "train.checkpoint_every") {
        cfg.checkpoint_every = static_cast<int>(parse_int(key, value));
    } else if (key == "train.augment") {
        cfg.augment = parse_bool(key, value);
    } else {
        fail("config: unknown key '", key, "'");
    }
}

// Parses `key = value` lines; '#' starts a comment, blank lines are skipped.
inline void apply_config_text(TrainConfig& cfg, const std::string& text,
                              const std::string& origin = "<config>") {
    std::size_t line_start = 0;
    int line_no = 0;
    while (line_start <= text.size()) {
        const std::size_t nl = text.find('\n', line_start);
        std::string line = text.substr(
            line_start, nl == std::string::npos ? std::string::npos : nl - line_start);
        ++line_no;
        line_start = nl == std::string::npos ? text.size() + 1 : nl + 1;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail_cfg::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        require(eq != std::string::npos, origin, ":", line_no, ": expected 'key = value'");
        apply_config_key(cfg, detail_cfg::trim(line.substr(0, eq)),
                         detail_cfg::trim(line.substr(eq + 1)));
    }
}

// Canonical serialization: fixed key order, shortest numeric spelling.
// Used both for config files and for the checkpoint compatibility snapshot.
inline std::string config_to_text(const TrainConfig& cfg) {
    std::string out;
    auto kv = [&out](const std::string& k, const std::string& v) {
        out += k;
        out += " = ";
        out += v;
        out += "\n";
    };
    kv("model.input_size", std::to_string(cfg.model.input_size));
    kv("model.block_channels", strcat_all(cfg.model.block_channels[0], ",",
                                          cfg.model.block_channels[1], ",",
                                          cfg.model.block_channels[2], ",",
                                          cfg.model.block_channels[3], ",",
                                          cfg.model.block_channels[4]));
    kv("model.convs_per_block", std::to_string(cfg.model.convs_per_block));
    kv("model.transition_channels", std::to_string(cfg.model.transition_channels));
    kv("variant.gate_units", cfg.variant.gate_units ? "true" : "false");
    kv("variant.constant_gate", format_double(cfg.variant.constant_gate));
    kv("variant.aspp", to_string(cfg.variant.aspp));
    kv("variant.single_rate", std::to_string(cfg.variant.single_rate));
    kv("variant.decoder", to_string(cfg.variant.decoder));
    kv("train.base_lr", format_double(cfg.base_lr));
    kv("train.momentum", format_double(cfg.momentum));
    kv("train.weight_decay", format_double(cfg.weight_decay));
    kv("train.poly_power", format_double(cfg.poly_power));
    kv("train.batch", std::to_string(cfg.batch));
    kv("train.epochs", std::to_string(cfg.epochs));
    kv("train.seed", std::to_string(cfg.seed));
    kv("train.precision", cfg.precision);
    kv("train.checkpoint_every", std::to_string(cfg.checkpoint_every));
    kv("train.augment", cfg.augment ? "true" : "false");
    return out;
}

inline TrainConfig config_from_text(const std::string& text,
                                    const std::string& origin = "<config>") {
    TrainConfig cfg;
    apply_config_text(cfg, text, origin);
    return cfg;
}

// Named presets: `toy` trains in minutes on a CPU; `tiny` is for fast tests
// and verification; `vgg16` mirrors the full-scale recipe (VGG-16-width
// encoder, 384x384, 40 epochs) and is not meant for CPU runs.
inline TrainConfig preset_config(const std::string& name) {
    TrainConfig cfg;
    if (name == "toy") return cfg;
    if (name == "tiny") {
        cfg.model.block_channels = {2, 2, 2, 2, 2};
        cfg.model.transition_channels = 8;
        cfg.model.convs_per_block = 1;
        cfg.model.input_size = 32;
        cfg.batch = 2;
        cfg.epochs = 2;
        return cfg;
    }
    if (name == "vgg16") {
        cfg.model.block_channels = {64, 128, 256, 512, 512};
        cfg.model.input_size = 384;
        cfg.epochs = 40;
        return cfg;
    }
    fail("unknown preset '", name, "' (expected toy|tiny|vgg16)");
}

}  // namespace gatenet
