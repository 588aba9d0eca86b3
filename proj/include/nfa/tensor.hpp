#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace nfa {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_size(const Shape& s);

// Dense row-major tensor of 32-bit reals. Reductions over elements are
// accumulated in 64-bit; storage stays 32-bit.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(Shape shape);  // zero-filled
    Tensor(Shape shape, std::vector<float> values);

    static Tensor scalar(float v);
    static Tensor full(Shape shape, float v);
    static Tensor row(std::initializer_list<float> values);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }

    // Rank-2 helpers.
    std::size_t rows() const;
    std::size_t cols() const;

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    float& at(std::size_t i) { return data_[i]; }
    float at(std::size_t i) const { return data_[i]; }

    bool finite() const;
    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    // Row view helpers for (n, d) tensors.
    float* row_ptr(std::size_t r) { return data_.data() + r * cols(); }
    const float* row_ptr(std::size_t r) const { return data_.data() + r * cols(); }
    Tensor row_copy(std::size_t r) const;

  private:
    Shape shape_;
    std::vector<float> data_;
};

// Pure tensor kernels (no tape). These back both the recorded ops and the
// query-only attack paths.
namespace ops {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);       // broadcast, numpy-style
Tensor mul(const Tensor& a, const Tensor& b);       // broadcast, elementwise
Tensor tanh(const Tensor& a);
Tensor atan(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor leaky_relu(const Tensor& a, float slope);
Tensor pow(const Tensor& a, float exponent);
double sum(const Tensor& a);
double mean(const Tensor& a);
Tensor gaussian_log_density(const Tensor& x, double mean, double stddev);
Tensor softmax_rows(const Tensor& logits);
double softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op_name);

}  // namespace ops

}  // namespace nfa
