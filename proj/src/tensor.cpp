#include "volt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "volt/error.hpp"
#include "volt/simd/kernels.hpp"

namespace volt {
namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape " + a.shape_string() + " vs " + b.shape_string());
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(element_count(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != element_count(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string());
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::filled(std::vector<std::size_t> shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

void Tensor::bad_rank(const char* what) const {
  throw ShapeError(std::string(what) + "() on rank-" + std::to_string(shape_.size()) + " tensor");
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
  os << ']';
  return os.str();
}

void require_rank2(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(what) + ": expected rank 2, got " + t.shape_string());
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tensor c({a.rows(), b.cols()});
  matmul_acc(a, b, c);
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  Tensor c({a.rows(), b.rows()});
  matmul_nt_acc(a, b, c);
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  Tensor c({a.cols(), b.cols()});
  matmul_tn_acc(a, b, c);
  return c;
}

Tensor transpose(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  Tensor t({c, r});
  const double* src = a.data().data();
  double* dst = t.data().data();
  constexpr std::size_t kBlock = 32;
  for (std::size_t i0 = 0; i0 < r; i0 += kBlock)
    for (std::size_t j0 = 0; j0 < c; j0 += kBlock) {
      const std::size_t i1 = std::min(r, i0 + kBlock), j1 = std::min(c, j0 + kBlock);
      for (std::size_t i = i0; i < i1; ++i)
        for (std::size_t j = j0; j < j1; ++j) dst[j * r + i] = src[i * c + j];
    }
  return t;
}

void matmul_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  if (a.cols() != b.rows() || c.rows() != a.rows() || c.cols() != b.cols()) {
    throw ShapeError("matmul: " + a.shape_string() + " * " + b.shape_string() + " -> " +
                     c.shape_string());
  }
  simd::active().gemm(a.rows(), b.cols(), a.cols(), a.data().data(), b.data().data(),
                      c.data().data(), true);
}

void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  if (a.cols() != b.cols() || c.rows() != a.rows() || c.cols() != b.rows()) {
    throw ShapeError("matmul_nt: " + a.shape_string() + " * " + b.shape_string() + "^T -> " +
                     c.shape_string());
  }
  const Tensor bt = transpose(b);
  simd::active().gemm(a.rows(), bt.cols(), a.cols(), a.data().data(), bt.data().data(),
                      c.data().data(), true);
}

void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  if (a.rows() != b.rows() || c.rows() != a.cols() || c.cols() != b.cols()) {
    throw ShapeError("matmul_tn: " + a.shape_string() + "^T * " + b.shape_string() + " -> " +
                     c.shape_string());
  }
  const Tensor at = transpose(a);
  simd::active().gemm(at.rows(), b.cols(), at.cols(), at.data().data(), b.data().data(),
                      c.data().data(), true);
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols: row counts differ " + a.shape_string() + " vs " +
                     b.shape_string());
  }
  const std::size_t r = a.rows(), ca = a.cols(), cb = b.cols();
  Tensor out({r, ca + cb});
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(a.row(i).begin(), ca, out.row(i).begin());
    std::copy_n(b.row(i).begin(), cb, out.row(i).begin() + static_cast<std::ptrdiff_t>(ca));
  }
  return out;
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.cols()) throw ShapeError("slice_cols: range out of bounds");
  Tensor out({a.rows(), end - begin});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::copy(a.row(i).begin() + static_cast<std::ptrdiff_t>(begin),
              a.row(i).begin() + static_cast<std::ptrdiff_t>(end), out.row(i).begin());
  }
  return out;
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.rows()) throw ShapeError("slice_rows: range out of bounds");
  Tensor out({end - begin, a.cols()});
  for (std::size_t i = begin; i < end; ++i) {
    std::copy(a.row(i).begin(), a.row(i).end(), out.row(i - begin).begin());
  }
  return out;
}

Tensor permute_rows(const Tensor& a, std::span<const std::size_t> order) {
  if (order.size() != a.rows()) throw ShapeError("permute_rows: order length mismatch");
  Tensor out({a.rows(), a.cols()});
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] >= a.rows()) throw ShapeError("permute_rows: index out of range");
    std::copy(a.row(order[i]).begin(), a.row(order[i]).end(), out.row(i).begin());
  }
  return out;
}

void add_inplace(Tensor& y, const Tensor& x) {
  require_same_shape(y, x, "add");
  simd::active().axpy(1.0, x.data().data(), y.data().data(), y.size());
}

void axpy_inplace(double alpha, const Tensor& x, Tensor& y) {
  require_same_shape(y, x, "axpy");
  simd::active().axpy(alpha, x.data().data(), y.data().data(), y.size());
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace volt
