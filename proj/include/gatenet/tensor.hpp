#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "gatenet/common.hpp"

namespace gatenet {

struct Shape4 {
    int b = 0, c = 0, h = 0, w = 0;

    bool operator==(const Shape4&) const = default;

    std::size_t count() const {
        return static_cast<std::size_t>(b) * c * h * w;
    }

    std::string str() const {
        return strcat_all("(", b, ",", c, ",", h, ",", w, ")");
    }
};

// Rank-4 array in (batch, channel, height, width) order, row-major with w
// fastest. The single value type everything else is built on; float for
// training, double for verification.
template <typename T>
class Tensor4 {
public:
    Tensor4() = default;

    Tensor4(int b, int c, int h, int w) : shape_{b, c, h, w} {
        require(b >= 0 && c >= 0 && h >= 0 && w >= 0,
                "Tensor4: negative dimension in ", shape_.str());
        data_.assign(shape_.count(), T(0));
    }

    explicit Tensor4(Shape4 s) : Tensor4(s.b, s.c, s.h, s.w) {}

    static Tensor4 scalar(T v) {
        Tensor4 t(1, 1, 1, 1);
        t.data_[0] = v;
        return t;
    }

    static Tensor4 full(Shape4 s, T v) {
        Tensor4 t(s);
        t.fill(v);
        return t;
    }

    const Shape4& shape() const { return shape_; }
    int batch() const { return shape_.b; }
    int channels() const { return shape_.c; }
    int height() const { return shape_.h; }
    int width() const { return shape_.w; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    std::size_t index(int b, int c, int y, int x) const {
        return ((static_cast<std::size_t>(b) * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }

    T& at(int b, int c, int y, int x) { return data_[index(b, c, y, x)]; }
    const T& at(int b, int c, int y, int x) const { return data_[index(b, c, y, x)]; }

    T* plane(int b, int c) { return data_.data() + index(b, c, 0, 0); }
    const T* plane(int b, int c) const { return data_.data() + index(b, c, 0, 0); }

    T* row(int b, int c, int y) { return data_.data() + index(b, c, y, 0); }
    const T* row(int b, int c, int y) const { return data_.data() + index(b, c, y, 0); }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(T(0)); }

    bool all_finite() const {
        for (const T& v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    template <typename U>
    Tensor4<U> cast() const {
        Tensor4<U> out(shape_.b, shape_.c, shape_.h, shape_.w);
        for (std::size_t i = 0; i < data_.size(); ++i)
            out.data()[i] = static_cast<U>(data_[i]);
        return out;
    }

    bool operator==(const Tensor4& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    Shape4 shape_{};
    std::vector<T> data_;
};

template <typename T>
void require_same_shape(const Tensor4<T>& a, const Tensor4<T>& b, const char* who) {
    require(a.shape() == b.shape(), who, ": shape mismatch ", a.shape().str(),
            " vs ", b.shape().str());
}

}  // namespace gatenet
