#pragma once

#include <jasr/core/error.hpp>

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace jasr {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << ']';
    return os.str();
}

/// Dense row-major tensor. Images and feature maps use (channels, height, width);
/// convolution kernels use (out, in, kh, kw).
template <class T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T{}) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
    Tensor(std::initializer_list<std::size_t> shape, T fill = T{}) : Tensor(Shape(shape), fill) {}
    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != shape_size(shape_))
            throw ShapeError("tensor data size " + std::to_string(data_.size()) + " does not match shape " +
                             shape_str(shape_));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    // (c, h, w) accessors for rank-3 maps
    std::size_t channels() const { return shape_.at(0); }
    std::size_t height() const { return shape_.at(1); }
    std::size_t width() const { return shape_.at(2); }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::span<T> span() noexcept { return data_; }
    std::span<const T> span() const noexcept { return data_; }
    std::vector<T>& vec() noexcept { return data_; }
    const std::vector<T>& vec() const noexcept { return data_; }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    T& at(std::size_t c, std::size_t y, std::size_t x) noexcept { return data_[(c * shape_[1] + y) * shape_[2] + x]; }
    const T& at(std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }

    /// Pointer to the start of channel c of a rank-3 map.
    T* plane(std::size_t c) noexcept { return data_.data() + c * shape_[1] * shape_[2]; }
    const T* plane(std::size_t c) const noexcept { return data_.data() + c * shape_[1] * shape_[2]; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor& operator+=(const Tensor& o) {
        check_same_shape(o, "+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

    void check_same_shape(const Tensor& o, const char* op) const {
        if (shape_ != o.shape_)
            throw ShapeError(std::string("shape mismatch in ") + op + ": " + shape_str(shape_) + " vs " +
                             shape_str(o.shape_));
    }

    friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

private:
    Shape shape_;
    std::vector<T> data_;
};

template <class T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    a.check_same_shape(b, "max_abs_diff");
    T m{};
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, static_cast<T>(a[i] > b[i] ? a[i] - b[i] : b[i] - a[i]));
    return m;
}

}  // namespace jasr
