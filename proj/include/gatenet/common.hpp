#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace gatenet {

// Thrown for malformed external inputs (files, directories, CLI data).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a computation produces non-finite values or a numeric
// verification fails (e.g. NaN gradients, checksum mismatch aside).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

inline void format_into(std::ostringstream&) {}

template <typename A, typename... Rest>
void format_into(std::ostringstream& os, const A& a, const Rest&... rest) {
    os << a;
    format_into(os, rest...);
}

}  // namespace detail

template <typename... Args>
std::string strcat_all(const Args&... args) {
    std::ostringstream os;
    detail::format_into(os, args...);
    return os.str();
}

template <typename... Args>
[[noreturn]] void fail(const Args&... args) {
    throw std::invalid_argument(strcat_all(args...));
}

template <typename... Args>
void require(bool cond, const Args&... args) {
    if (!cond) fail(args...);
}

// Integer floor/ceil division with positive divisor, correct for negative a.
inline int floor_div(int a, int b) {
    int q = a / b;
    return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

inline int ceil_div(int a, int b) {
    return -floor_div(-a, b);
}

}  // namespace gatenet
