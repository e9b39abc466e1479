#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace routecast::nn {

using Shape = std::vector<int>;

inline size_t shape_size(const Shape &s)
{
    return std::accumulate(s.begin(), s.end(), size_t{1}, [](size_t a, int b) { return a * static_cast<size_t>(b); });
}

std::string shape_str(const Shape &s);

// Dense row-major tensor. Image tensors are NCHW.
template <typename T>
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data))
    {
        if (data_.size() != shape_size(shape_))
            throw std::invalid_argument("tensor data does not match shape " + shape_str(shape_));
    }

    const Shape &shape() const { return shape_; }
    int dim(size_t i) const { return shape_.at(i); }
    size_t rank() const { return shape_.size(); }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T *data() { return data_.data(); }
    const T *data() const { return data_.data(); }
    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }
    std::vector<T> &vec() { return data_; }
    const std::vector<T> &vec() const { return data_; }

    T &operator[](size_t i) { return data_[i]; }
    const T &operator[](size_t i) const { return data_[i]; }

    // NCHW element access.
    T &at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
    const T &at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
    bool operator==(const Tensor &) const = default;

  private:
    size_t index(int n, int c, int h, int w) const
    {
        return ((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
    }

    Shape shape_;
    std::vector<T> data_;
};

inline std::string shape_str(const Shape &s)
{
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i)
        out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

} // namespace routecast::nn
