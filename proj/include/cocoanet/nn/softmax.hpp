#pragma once

#include <cmath>
#include <string>

#include "layer.hpp"

namespace cocoanet {

namespace detail {

// In-place row softmax with max subtraction. Shared by the layer and the
// attention kernel.
template <typename T>
void softmax_rows(T* data, std::size_t rows, std::size_t width) {
    for (std::size_t r = 0; r < rows; ++r) {
        T* row = data + r * width;
        T m = row[0];
        for (std::size_t j = 1; j < width; ++j)
            if (row[j] > m) m = row[j];
        double sum = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
            const double e = std::exp(static_cast<double>(row[j] - m));
            row[j] = static_cast<T>(e);
            sum += e;
        }
        const T inv = static_cast<T>(1.0 / sum);
        for (std::size_t j = 0; j < width; ++j) row[j] *= inv;
    }
}

// dx = y * (gy - sum(gy * y)) per row, given the forward output y.
template <typename T>
void softmax_backward_rows(const T* y, const T* gy, T* gx, std::size_t rows, std::size_t width) {
    for (std::size_t r = 0; r < rows; ++r) {
        const T* yr = y + r * width;
        const T* gr = gy + r * width;
        T* xr = gx + r * width;
        double dot = 0.0;
        for (std::size_t j = 0; j < width; ++j) dot += static_cast<double>(gr[j]) * yr[j];
        const T d = static_cast<T>(dot);
        for (std::size_t j = 0; j < width; ++j) xr[j] = yr[j] * (gr[j] - d);
    }
}

} // namespace detail

// Softmax over the trailing axis; rows sum to 1 and order is preserved.
template <typename T>
class Softmax final : public Layer<T> {
public:
    explicit Softmax(std::string name) : Layer<T>(std::move(name)) {}

    Tensor<T> forward(const Tensor<T>& x, const RunContext&) override {
        if (x.rank() < 2)
            throw std::invalid_argument(this->name() + ": input must have rank >= 2, got " +
                                        x.shape_str());
        const std::size_t width = x.dim(x.rank() - 1);
        output_ = x;
        detail::softmax_rows(output_.data(), output_.size() / width, width);
        return output_;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        if (output_.empty()) this->missing_forward();
        if (!grad_out.same_shape(output_))
            throw std::invalid_argument(this->name() + ": gradient shape " +
                                        grad_out.shape_str() + " does not match forward output");
        const std::size_t width = output_.dim(output_.rank() - 1);
        Tensor<T> grad_in(output_.shape());
        detail::softmax_backward_rows(output_.data(), grad_out.data(), grad_in.data(),
                                      output_.size() / width, width);
        output_.release();
        return grad_in;
    }

private:
    Tensor<T> output_;
};

} // namespace cocoanet
