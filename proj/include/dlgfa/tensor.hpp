#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "dlgfa/error.hpp"

namespace dlgfa {

// Dense row-major double tensor. The training graph only ever needs rank 0..2;
// rank-3 (T x B x d) tensors appear as batch containers on the data side.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor scalar(double v);
    static Tensor vec(std::vector<double> v);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    const std::vector<std::size_t>& shape() const { return shape_; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }
    std::size_t size() const { return data_.size(); }

    // Matrix view: rank-1 tensors are 1 x n rows, rank-2 as stored.
    std::size_t rows() const;
    std::size_t cols() const;

    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    std::string shape_str() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

}  // namespace dlgfa
