#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vidkd/error.hpp"

namespace vidkd {

using Shape = std::vector<std::size_t>;
using RowMatrixXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrixXf>;
using ConstMatrixMap = Eigen::Map<const RowMatrixXf>;

inline std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        out << (i ? "x" : "") << shape[i];
    }
    out << ']';
    return out.str();
}

/// Dense row-major float32 array with a dynamic shape.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, float fill = 0.0f)
        : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

    Tensor(Shape shape, std::vector<float> values) : shape_(std::move(shape)), data_(std::move(values)) {
        if (data_.size() != element_count(shape_)) {
            throw ShapeError("tensor data size " + std::to_string(data_.size()) + " does not match shape " +
                             to_string(shape_));
        }
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    float* data() noexcept { return data_.data(); }
    const float* data() const noexcept { return data_.data(); }
    std::span<float> values() noexcept { return data_; }
    std::span<const float> values() const noexcept { return data_; }
    std::vector<float>& storage() noexcept { return data_; }
    const std::vector<float>& storage() const noexcept { return data_; }

    float& operator[](std::size_t i) noexcept { return data_[i]; }
    float operator[](std::size_t i) const noexcept { return data_[i]; }

    float& at(std::size_t row, std::size_t col) { return data_[row * shape_[1] + col]; }
    float at(std::size_t row, std::size_t col) const { return data_[row * shape_[1] + col]; }

    void fill(float value) { std::fill(data_.begin(), data_.end(), value); }

    void reshape(Shape shape) {
        if (element_count(shape) != data_.size()) {
            throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
        }
        shape_ = std::move(shape);
    }

    /// Row-major matrix view; the leading axis becomes rows, the rest are flattened into columns.
    MatrixMap matrix() {
        const auto [rows, cols] = matrix_dims();
        return MatrixMap(data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    }
    ConstMatrixMap matrix() const {
        const auto [rows, cols] = matrix_dims();
        return ConstMatrixMap(data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    }

    bool operator==(const Tensor& other) const = default;

private:
    std::pair<std::size_t, std::size_t> matrix_dims() const {
        if (shape_.empty()) {
            return {1, data_.size()};
        }
        return {shape_[0], shape_[0] == 0 ? 0 : data_.size() / shape_[0]};
    }

    Shape shape_;
    std::vector<float> data_;
};

inline Tensor from_matrix(const RowMatrixXf& m) {
    Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
    t.matrix() = m;
    return t;
}

inline RowMatrixXd to_double(const Tensor& t) { return t.matrix().cast<double>(); }

inline Tensor from_double(const RowMatrixXd& m) { return from_matrix(m.cast<float>()); }

}  // namespace vidkd
