#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "gatenet/common.hpp"

namespace gatenet {

// Binary netpbm (P5 grayscale / P6 RGB), maxval 255 only. Header comments
// (#...) are accepted anywhere whitespace is. Parse errors report the byte
// offset where the problem was detected.
struct PnmData {
    int width = 0;
    int height = 0;
    int channels = 1;  // 1 for P5, 3 for P6
    std::vector<std::uint8_t> bytes;  // row-major, interleaved for P6
};

namespace detail {

class PnmParser {
public:
    PnmParser(std::string path, std::vector<std::uint8_t> buf)
        : path_(std::move(path)), buf_(std::move(buf)) {}

    PnmData parse(char expected_type) {
        if (remaining() < 2) error("missing magic number");
        const char m0 = static_cast<char>(buf_[pos_]);
        const char m1 = static_cast<char>(buf_[pos_ + 1]);
        if (m0 != 'P' || (m1 != '5' && m1 != '6'))
            error(strcat_all("bad magic '", m0, m1, "', expected P5 or P6"));
        if (m1 != expected_type)
            error(strcat_all("magic P", m1, " where P", expected_type, " is required"));
        pos_ += 2;

        PnmData out;
        out.channels = expected_type == '6' ? 3 : 1;
        out.width = parse_int("width");
        out.height = parse_int("height");
        const int maxval = parse_int("maxval");
        if (out.width <= 0 || out.height <= 0)
            error(strcat_all("non-positive dimensions ", out.width, "x", out.height));
        if (maxval != 255) error(strcat_all("maxval must be 255, got ", maxval));
        if (remaining() < 1 || !is_space(buf_[pos_]))
            error("expected single whitespace byte before payload");
        ++pos_;

        const std::size_t need = static_cast<std::size_t>(out.width) * out.height * out.channels;
        if (remaining() < need)
            error(strcat_all("truncated payload: need ", need, " bytes, have ", remaining()));
        if (remaining() > need)
            error(strcat_all("trailing data: payload is ", need, " bytes but ", remaining(),
                             " remain"));
        out.bytes.assign(buf_.begin() + static_cast<std::ptrdiff_t>(pos_), buf_.end());
        return out;
    }

private:
    static bool is_space(std::uint8_t c) {
        return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
    }

    std::size_t remaining() const { return buf_.size() - pos_; }

    [[noreturn]] void error(const std::string& msg) const {
        throw DataError(strcat_all(path_, ": ", msg, " (byte offset ", pos_, ")"));
    }

    void skip_separators() {
        while (remaining() > 0) {
            if (is_space(buf_[pos_])) {
                ++pos_;
            } else if (buf_[pos_] == '#') {
                while (remaining() > 0 && buf_[pos_] != '\n') ++pos_;
            } else {
                return;
            }
        }
    }

    int parse_int(const char* what) {
        skip_separators();
        if (remaining() == 0) error(strcat_all("unexpected end of file reading ", what));
        if (buf_[pos_] < '0' || buf_[pos_] > '9')
            error(strcat_all("expected digit for ", what, ", got byte ",
                             static_cast<int>(buf_[pos_])));
        long v = 0;
        while (remaining() > 0 && buf_[pos_] >= '0' && buf_[pos_] <= '9') {
            v = v * 10 + (buf_[pos_] - '0');
            if (v > 1 << 24) error(strcat_all(what, " out of range"));
            ++pos_;
        }
        return static_cast<int>(v);
    }

    std::string path_;
    std::vector<std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline PnmData read_pnm(const std::string& path, char expected_type) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(strcat_all(path, ": cannot open for reading"));
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
    return detail::PnmParser(path, std::move(buf)).parse(expected_type);
}

inline void write_pnm(const std::string& path, const PnmData& data) {
    require(data.channels == 1 || data.channels == 3, "write_pnm: channels must be 1 or 3");
    require(data.bytes.size() ==
                static_cast<std::size_t>(data.width) * data.height * data.channels,
            "write_pnm: payload size does not match dimensions");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(strcat_all(path, ": cannot open for writing"));
    out << (data.channels == 3 ? "P6" : "P5") << "\n"
        << data.width << " " << data.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(data.bytes.data()),
              static_cast<std::streamsize>(data.bytes.size()));
    if (!out) throw DataError(strcat_all(path, ": write failed"));
}

inline std::uint8_t quantize_unit_byte(double v) {
    if (v <= 0.0) return 0;
    if (v >= 1.0) return 255;
    return static_cast<std::uint8_t>(v * 255.0 + 0.5);
}

}  // namespace gatenet
