#include "nfa/tensor.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "nfa/errors.hpp"

namespace nfa {

std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    out += ")";
    return out;
}

std::size_t shape_size(const Shape& s) {
    std::size_t n = 1;
    for (auto e : s) n *= e;
    return n;
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0f) {}

Tensor::Tensor(Shape shape, std::vector<float> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != shape_size(shape_))
        throw std::invalid_argument("tensor: data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_str(shape_));
}

Tensor Tensor::scalar(float v) { return Tensor({1}, {v}); }

Tensor Tensor::full(Shape shape, float v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
}

Tensor Tensor::row(std::initializer_list<float> values) {
    return Tensor({values.size()}, std::vector<float>(values));
}

std::size_t Tensor::rows() const {
    if (shape_.size() != 2) throw std::invalid_argument("rows(): tensor is not rank-2, shape " + shape_str(shape_));
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (shape_.size() == 1) return shape_[0];
    if (shape_.size() == 2) return shape_[1];
    throw std::invalid_argument("cols(): tensor rank > 2, shape " + shape_str(shape_));
}

bool Tensor::finite() const {
    for (float v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor Tensor::row_copy(std::size_t r) const {
    std::size_t d = cols();
    Tensor out({d});
    std::memcpy(out.data(), row_ptr(r), d * sizeof(float));
    return out;
}

namespace ops {

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op_name) {
    std::size_t ra = a.size(), rb = b.size();
    std::size_t r = std::max(ra, rb);
    Shape out(r);
    for (std::size_t i = 0; i < r; ++i) {
        std::size_t da = i < r - ra ? 1 : a[i - (r - ra)];
        std::size_t db = i < r - rb ? 1 : b[i - (r - rb)];
        if (da != db && da != 1 && db != 1)
            throw std::invalid_argument(std::string(op_name) + ": shapes " + shape_str(a) + " and " +
                                        shape_str(b) + " are not broadcastable");
        out[i] = std::max(da, db);
    }
    return out;
}

namespace {

// Row-major strides padded to `rank`, with zero stride on broadcast axes.
std::vector<std::size_t> broadcast_strides(const Shape& s, std::size_t rank, const Shape& out) {
    std::vector<std::size_t> st(rank, 0);
    std::size_t stride = 1;
    std::size_t off = rank - s.size();
    for (std::size_t i = s.size(); i-- > 0;) {
        st[off + i] = (s[i] == 1 && out[off + i] != 1) ? 0 : stride;
        stride *= s[i];
    }
    return st;
}

template <typename F>
Tensor broadcast_binary(const Tensor& a, const Tensor& b, const char* name, F f) {
    Shape out_shape = broadcast_shape(a.shape(), b.shape(), name);
    Tensor out(out_shape);
    std::size_t rank = out_shape.size();
    auto sa = broadcast_strides(a.shape(), rank, out_shape);
    auto sb = broadcast_strides(b.shape(), rank, out_shape);
    std::vector<std::size_t> idx(rank, 0);
    const float* pa = a.data();
    const float* pb = b.data();
    float* po = out.data();
    std::size_t n = out.size();
    std::size_t ia = 0, ib = 0;
    for (std::size_t k = 0; k < n; ++k) {
        po[k] = f(pa[ia], pb[ib]);
        for (std::size_t d = rank; d-- > 0;) {
            ++idx[d];
            ia += sa[d];
            ib += sb[d];
            if (idx[d] < out_shape[d]) break;
            ia -= sa[d] * out_shape[d];
            ib -= sb[d] * out_shape[d];
            idx[d] = 0;
        }
    }
    return out;
}

template <typename F>
Tensor map(const Tensor& a, F f) {
    Tensor out(a.shape());
    const float* pa = a.data();
    float* po = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) po[i] = f(pa[i]);
    return out;
}

void check_finite(const Tensor& t, const char* op_name) {
    if (!t.finite()) throw NumericError(std::string(op_name) + ": non-finite output");
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0])
        throw std::invalid_argument("matmul: shapes " + shape_str(a.shape()) + " and " +
                                    shape_str(b.shape()) + " do not conform");
    std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Tensor out({m, n});
    std::vector<double> acc(n);
    for (std::size_t i = 0; i < m; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const float* ai = a.data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            double av = ai[p];
            const float* bp = b.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) acc[j] += av * bp[j];
        }
        float* oi = out.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) oi[j] = static_cast<float>(acc[j]);
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    return broadcast_binary(a, b, "add", [](float x, float y) { return x + y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return broadcast_binary(a, b, "mul", [](float x, float y) { return x * y; });
}

Tensor tanh(const Tensor& a) {
    return map(a, [](float x) { return std::tanh(x); });
}

Tensor atan(const Tensor& a) {
    return map(a, [](float x) { return std::atan(x); });
}

Tensor exp(const Tensor& a) {
    Tensor t = map(a, [](float x) { return std::exp(x); });
    check_finite(t, "exp");
    return t;
}

Tensor log(const Tensor& a) {
    Tensor t = map(a, [](float x) { return std::log(x); });
    check_finite(t, "log");
    return t;
}

Tensor leaky_relu(const Tensor& a, float slope) {
    return map(a, [slope](float x) { return x > 0.0f ? x : slope * x; });
}

Tensor pow(const Tensor& a, float exponent) {
    Tensor t = map(a, [exponent](float x) { return std::pow(x, exponent); });
    check_finite(t, "pow");
    return t;
}

double sum(const Tensor& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.at(i);
    return acc;
}

double mean(const Tensor& a) {
    if (a.size() == 0) throw std::invalid_argument("mean: empty tensor");
    return sum(a) / static_cast<double>(a.size());
}

Tensor gaussian_log_density(const Tensor& x, double mean_v, double stddev) {
    if (!(stddev > 0.0)) throw std::invalid_argument("gaussian_log_density: stddev must be positive");
    const double half_log_2pi = 0.91893853320467274178;  // 0.5*ln(2*pi)
    const double log_std = std::log(stddev);
    const double inv_2var = 0.5 / (stddev * stddev);
    return map(x, [&](float v) {
        double d = static_cast<double>(v) - mean_v;
        return static_cast<float>(-half_log_2pi - log_std - d * d * inv_2var);
    });
}

Tensor softmax_rows(const Tensor& logits) {
    std::size_t b = logits.rank() == 1 ? 1 : logits.rows();
    std::size_t k = logits.rank() == 1 ? logits.shape()[0] : logits.shape()[1];
    Tensor out(logits.shape());
    for (std::size_t i = 0; i < b; ++i) {
        const float* in = logits.data() + i * k;
        float* o = out.data() + i * k;
        double m = in[0];
        for (std::size_t j = 1; j < k; ++j) m = std::max(m, static_cast<double>(in[j]));
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(static_cast<double>(in[j]) - m);
        for (std::size_t j = 0; j < k; ++j)
            o[j] = static_cast<float>(std::exp(static_cast<double>(in[j]) - m) / z);
    }
    return out;
}

double softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    std::size_t b = logits.rank() == 1 ? 1 : logits.rows();
    std::size_t k = logits.rank() == 1 ? logits.shape()[0] : logits.shape()[1];
    if (labels.size() != b)
        throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) +
                                    " labels for logits " + shape_str(logits.shape()));
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= k)
            throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(y) +
                                        " out of range for " + std::to_string(k) + " classes");
        const float* in = logits.data() + i * k;
        double m = in[0];
        for (std::size_t j = 1; j < k; ++j) m = std::max(m, static_cast<double>(in[j]));
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(static_cast<double>(in[j]) - m);
        total += (m + std::log(z)) - static_cast<double>(in[y]);
    }
    return total / static_cast<double>(b);
}

}  // namespace ops

}  // namespace nfa
