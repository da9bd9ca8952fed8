#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace volt {

// Dense row-major double tensor. The model only needs rank 1 and rank 2, but
// shape is kept general so checkpoints can describe anything.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }
  static Tensor vector(std::vector<double> values);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor filled(std::vector<std::size_t> shape, double value);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Rank-2 accessors. A rank-1 tensor behaves as a single row.
  std::size_t rows() const {
    if (shape_.size() == 2) return shape_[0];
    if (shape_.size() == 1) return 1;
    bad_rank("rows");
  }
  std::size_t cols() const {
    if (shape_.size() == 2) return shape_[1];
    if (shape_.size() == 1) return shape_[0];
    bad_rank("cols");
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  [[noreturn]] void bad_rank(const char* what) const;

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

void require_rank2(const Tensor& t, const char* what);

// c = a * b, c = a * b^T, c = a^T * b. Dispatched through simd::active().
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor matmul_tn(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Accumulating forms used by backward passes: c += ...
void matmul_acc(const Tensor& a, const Tensor& b, Tensor& c);
void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& c);
void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& c);

Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor permute_rows(const Tensor& a, std::span<const std::size_t> order);

void add_inplace(Tensor& y, const Tensor& x);
void axpy_inplace(double alpha, const Tensor& x, Tensor& y);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace volt
