#include <doctest.h>

#include <cstring>
#include <thread>
#include <vector>

#include "helpers.hpp"
#include "fwl/linalg.hpp"

using namespace fwl;
using testing::max_abs_diff;
using testing::random_matrix;

TEST_CASE("cholesky_solve: identity system returns the right-hand side") {
  const Matrix b = random_matrix(3, 2, 11);
  const Matrix x = cholesky_solve(Matrix::Identity(3, 3), b);
  CHECK(max_abs_diff(x, b) == 0.0);
}

TEST_CASE("cholesky_solve: small SPD system, checked by multiplying back") {
  Matrix a(2, 2);
  a << 4, 2, 2, 3;
  Matrix b(2, 1);
  b << 2, 1;
  const Matrix x = cholesky_solve(a, b);
  CHECK(x(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(std::abs(x(1, 0)) <= 1e-14);
  CHECK(max_abs_diff(a * x, b) <= 1e-14);
}

TEST_CASE("cholesky_solve: exactly singular matrix is rejected") {
  Matrix a(2, 2);
  a << 1, 2, 2, 4;
  CHECK_THROWS_AS(cholesky_solve(a, Matrix::Identity(2, 2)), NotPositiveDefinite);
}

TEST_CASE("cholesky_solve: shape errors") {
  CHECK_THROWS_AS(cholesky_solve(Matrix::Zero(3, 2), Matrix::Zero(3, 1)),
                  DimensionMismatch);
  CHECK_THROWS_AS(cholesky_solve(Matrix::Identity(3, 3), Matrix::Zero(2, 1)),
                  DimensionMismatch);
  CHECK_THROWS_AS(cholesky_solve(Matrix(), Matrix()), DimensionMismatch);
}

TEST_CASE("cholesky_solve: inverse of a symmetric matrix is symmetric") {
  const Matrix m = random_matrix(6, 6, 21);
  const Matrix a = m.transpose() * m + Matrix::Identity(6, 6);
  const Matrix inv = cholesky_solve(a, Matrix::Identity(6, 6));
  CHECK(max_abs_diff(inv, inv.transpose()) <= 1e-10);
}

TEST_CASE("cholesky_solve: identical inputs give bit-identical outputs") {
  const Matrix m = random_matrix(5, 5, 31);
  const Matrix a = m.transpose() * m + Matrix::Identity(5, 5);
  const Matrix b = random_matrix(5, 3, 32);
  const Matrix x1 = cholesky_solve(a, b);
  const Matrix x2 = cholesky_solve(a, b);
  CHECK(std::memcmp(x1.data(), x2.data(),
                    sizeof(double) * static_cast<std::size_t>(x1.size())) == 0);
}

TEST_CASE("cholesky_solve: concurrent calls agree with the serial result") {
  const Matrix m = random_matrix(8, 8, 41);
  const Matrix a = m.transpose() * m + Matrix::Identity(8, 8);
  const Matrix b = random_matrix(8, 2, 42);
  const Matrix expected = cholesky_solve(a, b);

  std::vector<Matrix> results(4);
  std::vector<std::thread> workers;
  for (int t = 0; t < 4; ++t) {
    workers.emplace_back([&, t] { results[static_cast<std::size_t>(t)] = cholesky_solve(a, b); });
  }
  for (auto& w : workers) w.join();
  for (const auto& r : results) {
    CHECK(max_abs_diff(r, expected) == 0.0);
  }
}

TEST_CASE("partitioned_gram_inverse: orthogonal blocks have no cross term") {
  Matrix w2 = Matrix::Ones(6, 1);
  Matrix w1(6, 1);
  w1 << 1, -1, 1, -1, 1, -1;
  const GramInverseBlocks blocks = partitioned_gram_inverse(w2, w1);
  CHECK(blocks.w12.cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(blocks.w11(0, 0) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(blocks.w22(0, 0) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
}

TEST_CASE("partitioned_gram_inverse: intercept plus trend against the 2x2 adjugate") {
  const Index n = 6;
  Matrix w2 = Matrix::Ones(n, 1);
  Matrix w1 = Vector::LinSpaced(n, 1, 6);

  // Direct inverse of the 2x2 Gram matrix by determinant and adjugate.
  const double s00 = 6.0, s01 = 21.0, s11 = 91.0;
  const double det = s00 * s11 - s01 * s01;
  const double inv00 = s11 / det, inv01 = -s01 / det, inv11 = s00 / det;

  const GramInverseBlocks blocks = partitioned_gram_inverse(w2, w1);
  CHECK(blocks.w11(0, 0) == doctest::Approx(inv00).epsilon(1e-12));
  CHECK(blocks.w12(0, 0) == doctest::Approx(inv01).epsilon(1e-12));
  CHECK(blocks.w22(0, 0) == doctest::Approx(inv11).epsilon(1e-12));
}

TEST_CASE("partitioned_gram_inverse: assembled blocks multiply back to identity") {
  const Matrix w2 = random_matrix(20, 3, 51);
  const Matrix w1 = random_matrix(20, 2, 52);
  const GramInverseBlocks blocks = partitioned_gram_inverse(w2, w1);

  Matrix w(20, 5);
  w << w2, w1;
  const Matrix gram = w.transpose() * w;
  const Matrix product = blocks.assembled() * gram;
  const double err = max_abs_diff(product, Matrix::Identity(5, 5));
  CHECK(err <= 1e-10);
  CHECK(err <= 1e-9 * gram.cwiseAbs().maxCoeff());

  CHECK(max_abs_diff(blocks.w11, blocks.w11.transpose()) <= 1e-12);
  CHECK(max_abs_diff(blocks.w22, blocks.w22.transpose()) <= 1e-12);
}

TEST_CASE("partitioned_gram_inverse: rank deficiency surfaces from the block solves") {
  const Matrix w2 = random_matrix(10, 2, 61);
  Matrix w1(10, 2);
  w1.col(0) = w2.col(1);  // duplicated regressor across the blocks
  w1.col(1) = random_matrix(10, 1, 62);
  CHECK_THROWS_AS(partitioned_gram_inverse(w2, w1), NotPositiveDefinite);
}

TEST_CASE("gram_condition_estimate: identity factor is perfectly conditioned") {
  CHECK(gram_condition_estimate(Matrix::Identity(4, 4)) == doctest::Approx(1.0));
}
