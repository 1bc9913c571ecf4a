#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cocoanet {

// Dense row-major n-dimensional array. The whole toolkit runs on
// Tensor<float>; gradient checking instantiates the same code on double.
// Rank-0 is not a thing here: a scalar is shape {1}.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(checked_volume(shape_), T{}) {}

    Tensor(std::vector<std::size_t> shape, std::vector<T> values)
        : shape_(std::move(shape)), data_(std::move(values)) {
        if (checked_volume(shape_) != data_.size()) {
            throw std::invalid_argument("tensor: " + std::to_string(data_.size()) +
                                        " values do not fill shape " + shape_string(shape_));
        }
    }

    static Tensor full(std::vector<std::size_t> shape, T value) {
        Tensor t(std::move(shape));
        t.fill(value);
        return t;
    }

    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    std::size_t rank() const { return shape_.size(); }
    const std::vector<std::size_t>& shape() const { return shape_; }

    std::size_t dim(std::size_t axis) const {
        assert(axis < shape_.size());
        return shape_[axis];
    }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t flat) {
        assert(flat < data_.size());
        return data_[flat];
    }
    const T& operator[](std::size_t flat) const {
        assert(flat < data_.size());
        return data_[flat];
    }

    // Multi-index access, row-major. Handy in tests and cold paths; hot
    // loops index raw pointers.
    template <typename... Ix>
    T& at(Ix... ix) { return data_[offset_of(ix...)]; }
    template <typename... Ix>
    const T& at(Ix... ix) const { return data_[offset_of(ix...)]; }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }
    void zero() { fill(T{}); }

    // Reinterprets the same buffer under a new shape; element count must match.
    void reshape(std::vector<std::size_t> shape) {
        if (checked_volume(shape) != data_.size()) {
            throw std::invalid_argument("tensor: cannot reshape " + shape_string(shape_) +
                                        " (" + std::to_string(data_.size()) + " values) to " +
                                        shape_string(shape));
        }
        shape_ = std::move(shape);
    }

    Tensor reshaped(std::vector<std::size_t> shape) const {
        Tensor t = *this;
        t.reshape(std::move(shape));
        return t;
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (const T& v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_str() const { return shape_string(shape_); }

    static std::string shape_string(const std::vector<std::size_t>& shape) {
        if (shape.empty()) return "[]";
        std::ostringstream os;
        os << '[';
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) os << 'x';
            os << shape[i];
        }
        os << ']';
        return os.str();
    }

    // Releases the buffer; used by layers to drop cached activations the
    // moment backward has consumed them.
    void release() {
        shape_.clear();
        data_.clear();
        data_.shrink_to_fit();
        shape_.shrink_to_fit();
    }

private:
    static std::size_t checked_volume(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) {
            if (d == 0) throw std::invalid_argument("tensor: zero-sized axis in " + shape_string(shape));
            n *= d;
        }
        return shape.empty() ? 0 : n;
    }

    template <typename... Ix>
    std::size_t offset_of(Ix... ix) const {
        static_assert(sizeof...(Ix) > 0);
        assert(sizeof...(Ix) == shape_.size());
        const std::size_t idx[] = {static_cast<std::size_t>(ix)...};
        std::size_t flat = 0;
        for (std::size_t a = 0; a < sizeof...(Ix); ++a) {
            assert(idx[a] < shape_[a]);
            flat = flat * shape_[a] + idx[a];
        }
        return flat;
    }

    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

} // namespace cocoanet
