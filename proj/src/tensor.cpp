#include "gwn/tensor.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gwn {

namespace {

std::size_t checked_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimension must be positive, got " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  std::size_t n = checked_numel(shape);
  t.shape_ = std::move(shape);
  t.data_.assign(n, 0.0);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t = zeros(std::move(shape));
  t.fill(value);
  return t;
}

Tensor Tensor::of(std::vector<int> shape, std::vector<double> data) {
  std::size_t n = checked_numel(shape);
  if (n != data.size())
    throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

Tensor Tensor::vec(std::vector<double> data) {
  const int n = static_cast<int>(data.size());
  return of({n}, std::move(data));
}

Tensor Tensor::row(std::vector<double> data) {
  const int n = static_cast<int>(data.size());
  return of({1, n}, std::move(data));
}

Tensor Tensor::matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("matrix needs at least one row");
  int m = static_cast<int>(rows.size());
  int n = static_cast<int>(rows[0].size());
  Tensor t = zeros({m, n});
  for (int i = 0; i < m; ++i) {
    if (static_cast<int>(rows[i].size()) != n)
      throw std::invalid_argument("ragged matrix rows");
    for (int j = 0; j < n; ++j) t.at(i, j) = rows[i][j];
  }
  return t;
}

Tensor Tensor::identity(int n) {
  Tensor t = zeros({n, n});
  for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

int Tensor::rows() const {
  if (rank() != 2) throw std::invalid_argument("rows(): tensor is not rank-2, shape " + shape_str(*this));
  return shape_[0];
}

int Tensor::cols() const {
  if (rank() != 2) throw std::invalid_argument("cols(): tensor is not rank-2, shape " + shape_str(*this));
  return shape_[1];
}

double& Tensor::at(int r, int c) {
  return data_[static_cast<std::size_t>(r) * cols() + c];
}

double Tensor::at(int r, int c) const {
  return data_[static_cast<std::size_t>(r) * cols() + c];
}

void Tensor::fill(double v) {
  for (double& x : data_) x = v;
}

bool Tensor::all_finite() const {
  for (double x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
  if (checked_numel(shape) != numel())
    throw std::invalid_argument("reshape from " + shape_str(*this) + " to " + shape_str(shape) +
                                " changes element count");
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = data_;
  return t;
}

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::string shape_str(const Tensor& t) { return shape_str(t.shape()); }

namespace {

void check_rank2(const Tensor& t, const char* who) {
  if (t.rank() != 2) throw std::invalid_argument(std::string(who) + ": operand is not rank-2, shape " + shape_str(t));
}

}  // namespace

void matmul_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  check_rank2(a, "matmul");
  check_rank2(b, "matmul");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k)
    throw std::invalid_argument("matmul: inner dimensions disagree, " + shape_str(a) + " x " + shape_str(b));
  if (out.rows() != m || out.cols() != n)
    throw std::invalid_argument("matmul: output shape " + shape_str(out) + " does not match " +
                                std::to_string(m) + "x" + std::to_string(n));
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int i = 0; i < m; ++i) {
    const double* ai = pa + static_cast<std::size_t>(i) * k;
    double* oi = po + static_cast<std::size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double aik = ai[kk];
      if (aik == 0.0) continue;
      const double* bk = pb + static_cast<std::size_t>(kk) * n;
      for (int j = 0; j < n; ++j) oi[j] += aik * bk[j];
    }
  }
}

void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  check_rank2(a, "matmul_nt");
  check_rank2(b, "matmul_nt");
  const int m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k)
    throw std::invalid_argument("matmul_nt: inner dimensions disagree, " + shape_str(a) + " x " + shape_str(b) + "^T");
  const double* pa = a.data();
  const double* pb = b.data();
  for (int i = 0; i < m; ++i) {
    const double* ai = pa + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const double* bj = pb + static_cast<std::size_t>(j) * k;
      double acc = 0.0;
      for (int kk = 0; kk < k; ++kk) acc += ai[kk] * bj[kk];
      out.at(i, j) += acc;
    }
  }
}

void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  check_rank2(a, "matmul_tn");
  check_rank2(b, "matmul_tn");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != m)
    throw std::invalid_argument("matmul_tn: inner dimensions disagree, " + shape_str(a) + "^T x " + shape_str(b));
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int i = 0; i < m; ++i) {
    const double* ai = pa + static_cast<std::size_t>(i) * k;
    const double* bi = pb + static_cast<std::size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double aik = ai[kk];
      if (aik == 0.0) continue;
      double* ok = po + static_cast<std::size_t>(kk) * n;
      for (int j = 0; j < n; ++j) ok[j] += aik * bi[j];
    }
  }
}

}  // namespace gwn
