#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gatenet/common.hpp"
#include "gatenet/model.hpp"

namespace gatenet {

// Checkpoint layout (all integers little-endian):
//   "GNET" | u32 version | u8 dtype (4|8) | u64 iteration
//   | u32 config_len | config text
//   | u32 n_params   | n x { u32 name_len, name, 4 x u32 shape, payload }
//   | u32 n_velocity | same encoding
//   | u32 crc32 of everything above
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::uint32_t crc32(const std::uint8_t* data, std::size_t n) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < n; ++i) c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

namespace detail_ckpt {

struct Writer {
    std::vector<std::uint8_t> buf;

    void u8(std::uint8_t v) { buf.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf.insert(buf.end(), b, b + n);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    template <typename T>
    void scalar(T v) {
        if constexpr (sizeof(T) == 4)
            u32(std::bit_cast<std::uint32_t>(v));
        else
            u64(std::bit_cast<std::uint64_t>(v));
    }
};

struct Reader {
    const std::vector<std::uint8_t>& buf;
    std::size_t pos = 0;
    std::string path;

    [[noreturn]] void error(const std::string& msg) const {
        throw DataError(strcat_all(path, ": ", msg, " (byte offset ", pos, ")"));
    }
    void need(std::size_t n) const {
        if (buf.size() - pos < n) error("checkpoint truncated");
    }
    std::uint8_t u8() {
        need(1);
        return buf[pos++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos++]) << (8 * i);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
        pos += n;
        return s;
    }
};

}  // namespace detail_ckpt

struct RawTensor {
    std::string name;
    Shape4 shape;
    std::vector<std::uint8_t> payload;
};

struct RawCheckpoint {
    std::uint8_t dtype = 4;  // element size in bytes
    std::uint64_t iteration = 0;
    std::string config_text;
    std::vector<RawTensor> params;
    std::vector<RawTensor> velocity;
};

template <typename T>
std::vector<std::uint8_t> encode_tensor_payload(const Tensor4<T>& t) {
    detail_ckpt::Writer w;
    w.buf.reserve(t.size() * sizeof(T));
    for (std::size_t i = 0; i < t.size(); ++i) w.scalar(t.data()[i]);
    return std::move(w.buf);
}

template <typename T>
void decode_tensor_payload(const RawTensor& raw, Tensor4<T>& out) {
    require(raw.shape == out.shape(), "checkpoint: tensor '", raw.name, "' shape ",
            raw.shape.str(), " does not match expected ", out.shape().str());
    require(raw.payload.size() == out.size() * sizeof(T), "checkpoint: tensor '", raw.name,
            "' payload size mismatch");
    for (std::size_t i = 0; i < out.size(); ++i) {
        if constexpr (sizeof(T) == 4) {
            std::uint32_t v = 0;
            for (int k = 0; k < 4; ++k)
                v |= static_cast<std::uint32_t>(raw.payload[i * 4 + static_cast<std::size_t>(k)])
                     << (8 * k);
            out.data()[i] = std::bit_cast<T>(v);
        } else {
            std::uint64_t v = 0;
            for (int k = 0; k < 8; ++k)
                v |= static_cast<std::uint64_t>(raw.payload[i * 8 + static_cast<std::size_t>(k)])
                     << (8 * k);
            out.data()[i] = std::bit_cast<T>(v);
        }
    }
}

template <typename T>
void save_checkpoint(const std::string& path, const GateNet<T>& model,
                     std::uint64_t iteration, const std::string& config_text) {
    static_assert(sizeof(T) == 4 || sizeof(T) == 8);
    detail_ckpt::Writer w;
    w.bytes("GNET", 4);
    w.u32(kCheckpointVersion);
    w.u8(static_cast<std::uint8_t>(sizeof(T)));
    w.u64(iteration);
    w.str(config_text);

    const ParamTable<T>& params = model.params();
    auto write_table = [&](bool velocity) {
        w.u32(static_cast<std::uint32_t>(params.size()));
        for (std::size_t i = 0; i < params.size(); ++i) {
            const ParamEntry<T>& e = params[i];
            const Tensor4<T>& t = velocity ? e.velocity : e.value;
            w.str(e.name);
            w.u32(static_cast<std::uint32_t>(t.shape().b));
            w.u32(static_cast<std::uint32_t>(t.shape().c));
            w.u32(static_cast<std::uint32_t>(t.shape().h));
            w.u32(static_cast<std::uint32_t>(t.shape().w));
            for (std::size_t k = 0; k < t.size(); ++k) w.scalar(t.data()[k]);
        }
    };
    write_table(false);
    write_table(true);
    w.u32(crc32(w.buf.data(), w.buf.size()));

    // Write to a temp file and rename, so an interrupted save never clobbers
    // the previous good checkpoint.
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError(strcat_all(path, ": cannot open for writing"));
        out.write(reinterpret_cast<const char*>(w.buf.data()),
                  static_cast<std::streamsize>(w.buf.size()));
        if (!out) throw DataError(strcat_all(path, ": write failed"));
    }
    std::filesystem::rename(tmp, path);
}

inline RawCheckpoint load_checkpoint_raw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(strcat_all(path, ": cannot open checkpoint"));
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
    if (buf.size() < 4 + 4 + 1 + 8 + 4)
        throw DataError(strcat_all(path, ": checkpoint too small (", buf.size(), " bytes)"));

    const std::uint32_t stored_crc = static_cast<std::uint32_t>(buf[buf.size() - 4]) |
                                     static_cast<std::uint32_t>(buf[buf.size() - 3]) << 8 |
                                     static_cast<std::uint32_t>(buf[buf.size() - 2]) << 16 |
                                     static_cast<std::uint32_t>(buf[buf.size() - 1]) << 24;
    const std::uint32_t actual = crc32(buf.data(), buf.size() - 4);
    if (stored_crc != actual)
        throw DataError(strcat_all(path, ": checksum mismatch (stored ", stored_crc,
                                   ", computed ", actual, ")"));

    detail_ckpt::Reader r{buf, 0, path};
    char magic[4];
    r.need(4);
    std::memcpy(magic, buf.data(), 4);
    r.pos = 4;
    if (std::memcmp(magic, "GNET", 4) != 0)
        throw DataError(strcat_all(path, ": bad magic, not a checkpoint file"));
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw DataError(strcat_all(path, ": unsupported checkpoint version ", version));

    RawCheckpoint out;
    out.dtype = r.u8();
    if (out.dtype != 4 && out.dtype != 8)
        throw DataError(strcat_all(path, ": bad dtype code ", int(out.dtype)));
    out.iteration = r.u64();
    out.config_text = r.str();

    auto read_table = [&](std::vector<RawTensor>& table) {
        const std::uint32_t n = r.u32();
        table.reserve(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            RawTensor t;
            t.name = r.str();
            t.shape.b = static_cast<int>(r.u32());
            t.shape.c = static_cast<int>(r.u32());
            t.shape.h = static_cast<int>(r.u32());
            t.shape.w = static_cast<int>(r.u32());
            const std::size_t bytes = t.shape.count() * out.dtype;
            r.need(bytes);
            t.payload.assign(buf.begin() + static_cast<std::ptrdiff_t>(r.pos),
                             buf.begin() + static_cast<std::ptrdiff_t>(r.pos + bytes));
            r.pos += bytes;
            table.push_back(std::move(t));
        }
    };
    read_table(out.params);
    read_table(out.velocity);
    require(buf.size() - r.pos == 4, path, ": trailing data after checkpoint body");
    return out;
}

// Loads parameter values and momentum buffers into a model whose parameter
// table must match the checkpoint exactly (names, order, shapes, dtype).
template <typename T>
std::uint64_t apply_checkpoint(const RawCheckpoint& raw, GateNet<T>& model) {
    static_assert(sizeof(T) == 4 || sizeof(T) == 8);
    require(raw.dtype == sizeof(T), "checkpoint: dtype is ",
            raw.dtype == 4 ? "f32" : "f64", " but the model runs ",
            sizeof(T) == 4 ? "f32" : "f64");
    ParamTable<T>& params = model.params();
    require(raw.params.size() == params.size() && raw.velocity.size() == params.size(),
            "checkpoint: parameter count ", raw.params.size(), " does not match model (",
            params.size(), ")");
    for (std::size_t i = 0; i < params.size(); ++i) {
        require(raw.params[i].name == params[i].name, "checkpoint: parameter '",
                raw.params[i].name, "' where model expects '", params[i].name, "'");
        decode_tensor_payload(raw.params[i], params[i].value);
        decode_tensor_payload(raw.velocity[i], params[i].velocity);
        params[i].grad.zero();
    }
    return raw.iteration;
}

}  // namespace gatenet
