#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace gwn {

/// Dense row-major tensor of 64-bit floats. A plain value type: copies are
/// deep, moves are cheap. Rank-1 tensors act as vectors, rank-2 as matrices.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor of(std::vector<int> shape, std::vector<double> data);
  static Tensor vec(std::vector<double> data);                  // shape {n}
  static Tensor row(std::vector<double> data);                  // shape {1, n}
  static Tensor matrix(const std::vector<std::vector<double>>& rows);
  static Tensor identity(int n);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty() && shape_.empty(); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // rank-2 accessors
  int rows() const;
  int cols() const;
  double& at(int r, int c);
  double at(int r, int c) const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  void fill(double v);
  bool all_finite() const;
  Tensor reshaped(std::vector<int> shape) const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

std::string shape_str(const std::vector<int>& shape);
std::string shape_str(const Tensor& t);

// Accumulating matrix kernels; out must be preshaped. Shapes are checked.
void matmul_acc(const Tensor& a, const Tensor& b, Tensor& out);     // out += a b
void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& out);  // out += a b^T
void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& out);  // out += a^T b

}  // namespace gwn
