#include "dwrpm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "dwrpm/errors.hpp"
#include "dwrpm/kernels.hpp"

namespace dwrpm {
namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one extent");
  for (auto extent : shape)
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

template <typename Op>
Tensor zip(const Tensor& a, const Tensor& b, const char* name, Op op) {
  require_same_shape(a, b, name);
  Tensor out(a.shape());
  std::transform(a.data().begin(), a.data().end(), b.data().begin(), out.data().begin(), op);
  return out;
}

void require_matrix(const Tensor& a, const char* op) {
  if (a.rank() != 2)
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
  check_shape(shape);
  if (shape_size(shape) != data.size())
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_string(shape));
  for (double v : data)
    if (!std::isfinite(v)) throw NumericError("tensor input contains a non-finite value");
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t cols = rows.size() ? rows.begin()->size() : 0;
  std::vector<double> data;
  for (const auto& row : rows) {
    if (row.size() != cols) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return from_data({rows.size(), cols}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return from_data({values.size()}, std::vector<double>(values));
}

Tensor Tensor::reshaped(Shape shape) const {
  check_shape(shape);
  if (shape_size(shape) != size())
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor add(const Tensor& a, const Tensor& b) { return zip(a, b, "add", std::plus<>()); }
Tensor sub(const Tensor& a, const Tensor& b) { return zip(a, b, "sub", std::minus<>()); }
Tensor hadamard(const Tensor& a, const Tensor& b) {
  return zip(a, b, "hadamard", std::multiplies<>());
}

Tensor scale(const Tensor& a, double factor) {
  Tensor out = a;
  for (double& v : out.data()) v *= factor;
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.dim(1) != b.dim(0))
    throw DimensionError("matmul: inner extents differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  kernels::gemm(a.raw(), k, b.raw(), n, out.raw(), n, m, k, n, false);
  return out;
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  Tensor out({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor add_row_bias(const Tensor& a, const Tensor& bias) {
  require_matrix(a, "add_row_bias");
  if (bias.rank() != 1 || bias.dim(0) != a.dim(1))
    throw DimensionError("add_row_bias: bias " + shape_string(bias.shape()) +
                         " does not match rows of " + shape_string(a.shape()));
  Tensor out = a;
  const std::size_t n = a.dim(1);
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bias[j];
  return out;
}

Tensor reduce_mean(const Tensor& a, std::size_t axis) {
  if (axis >= a.rank())
    throw ArgumentError("reduce_mean: axis " + std::to_string(axis) + " out of range for " +
                        shape_string(a.shape()));
  const Shape& s = a.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t extent = s[axis];

  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) out_shape.push_back(s[i]);
  if (out_shape.empty()) out_shape.push_back(1);

  Tensor out(out_shape);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t e = 0; e < extent; ++e)
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += a[(o * extent + e) * inner + i];
  const double inv = 1.0 / static_cast<double>(extent);
  for (double& v : out.data()) v *= inv;
  return out;
}

Tensor concat_columns(std::span<const Tensor* const> parts) {
  if (parts.empty()) throw ArgumentError("concat_columns: nothing to concatenate");
  const std::size_t rows = parts.front()->dim(0);
  std::size_t cols = 0;
  for (const Tensor* p : parts) {
    require_matrix(*p, "concat_columns");
    if (p->dim(0) != rows)
      throw DimensionError("concat_columns: row counts differ, " + shape_string(p->shape()));
    cols += p->dim(1);
  }
  Tensor out({rows, cols});
  std::size_t offset = 0;
  for (const Tensor* p : parts) {
    const std::size_t w = p->dim(1);
    for (std::size_t i = 0; i < rows; ++i)
      std::copy_n(p->raw() + i * w, w, out.raw() + i * cols + offset);
    offset += w;
  }
  return out;
}

Tensor he_init(std::size_t fan_in, const Shape& shape, Rng& rng) {
  if (fan_in == 0) throw ArgumentError("he_init: fan_in must be at least 1");
  Tensor out(shape);
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (double& v : out.data()) v = rng.normal(0.0, stddev);
  return out;
}

}  // namespace dwrpm
