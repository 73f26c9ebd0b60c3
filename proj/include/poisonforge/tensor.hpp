#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace poisonforge {

// Dense row-major tensor of rank <= 4. Deliberately minimal: contiguous
// storage, shape bookkeeping, and indexed access; all math lives in kernels.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(numel_of(shape_), T(0));
    }

    Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const std::vector<int>& shape() const { return shape_; }
    int dim(std::size_t i) const { return shape_.at(i); }
    int rank() const { return static_cast<int>(shape_.size()); }

    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    // NCHW accessors
    T& at(int n, int c, int h, int w) { return data_[offset4(n, c, h, w)]; }
    const T& at(int n, int c, int h, int w) const { return data_[offset4(n, c, h, w)]; }

    T& at(int i, int j) { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
    const T& at(int i, int j) const {
        return data_[static_cast<std::size_t>(i) * shape_[1] + j];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

    std::string shape_str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + ")";
    }

    static std::size_t numel_of(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (int d : shape) {
            if (d < 0) throw std::invalid_argument("negative tensor dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

private:
    std::size_t offset4(int n, int c, int h, int w) const {
        return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
    }

    std::vector<int> shape_;
    std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

} // namespace poisonforge
