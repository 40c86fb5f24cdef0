#include <doctest.h>

#include <limits>
#include <stdexcept>

#include "gwn/tensor.hpp"

using namespace gwn;

TEST_SUITE("tensor") {

TEST_CASE("shape and element accounting") {
  Tensor t = Tensor::zeros({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  t.at(1, 2) = 5.0;
  CHECK(t.at(1, 2) == 5.0);
  CHECK(t.data()[5] == 5.0);  // row-major

  CHECK_THROWS_AS(Tensor::zeros({2, 0}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor::of({2, 2}, {1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("constructors") {
  CHECK(Tensor::vec({1, 2, 3}).shape() == std::vector<int>{3});
  CHECK(Tensor::row({1, 2, 3}).shape() == std::vector<int>{1, 3});
  Tensor id = Tensor::identity(3);
  CHECK(id.at(1, 1) == 1.0);
  CHECK(id.at(0, 1) == 0.0);
  CHECK_THROWS_AS(Tensor::matrix({{1, 2}, {3}}), std::invalid_argument);
}

TEST_CASE("reshape preserves data") {
  Tensor t = Tensor::of({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor r = t.reshaped({3, 2});
  CHECK(r.at(2, 1) == 6.0);
  CHECK_THROWS_AS(t.reshaped({4, 2}), std::invalid_argument);
}

TEST_CASE("matmul kernels") {
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor b = Tensor::matrix({{5, 6}, {7, 8}});
  Tensor out = Tensor::zeros({2, 2});
  matmul_acc(a, b, out);
  CHECK(out.at(0, 0) == 19.0);
  CHECK(out.at(1, 1) == 50.0);

  // out += a b^T
  Tensor nt = Tensor::zeros({2, 2});
  matmul_nt_acc(a, b, nt);
  CHECK(nt.at(0, 0) == 1 * 5 + 2 * 6);
  CHECK(nt.at(1, 0) == 3 * 5 + 4 * 6);

  // out += a^T b
  Tensor tn = Tensor::zeros({2, 2});
  matmul_tn_acc(a, b, tn);
  CHECK(tn.at(0, 0) == 1 * 5 + 3 * 7);

  Tensor bad = Tensor::zeros({3, 2});
  CHECK_THROWS_WITH_AS(matmul_acc(a, bad, out), doctest::Contains("[2x2]"), std::invalid_argument);
}

TEST_CASE("finiteness scan") {
  Tensor t = Tensor::of({2}, {1.0, 2.0});
  CHECK(t.all_finite());
  t.data()[1] = std::numeric_limits<double>::infinity();
  CHECK_FALSE(t.all_finite());
}

}  // TEST_SUITE
