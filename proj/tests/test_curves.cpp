#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "affr/curves.hpp"
#include "affr/errors.hpp"

using namespace affr;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = nd(rng);
  return m;
}

}  // namespace

TEST_CASE("make_grid endpoints and trapezoid weights") {
  const Grid g2 = make_grid(2);
  CHECK(g2.points(0) == 0.0);
  CHECK(g2.points(1) == 1.0);
  CHECK(g2.weights(0) == 0.5);
  CHECK(g2.weights(1) == 0.5);

  const Grid g3 = make_grid(3);
  CHECK(g3.points(1) == 0.5);
  CHECK(g3.weights(0) == 0.25);
  CHECK(g3.weights(1) == 0.5);
  CHECK(g3.weights(2) == 0.25);

  const Grid g50 = make_grid(50);
  CHECK(g50.size() == 50);
  CHECK(g50.weights.sum() == doctest::Approx(1.0).epsilon(1e-15));
  for (Eigen::Index k = 1; k < 50; ++k) CHECK(g50.points(k) > g50.points(k - 1));
}

TEST_CASE("make_grid rejects fewer than two points") {
  CHECK_THROWS_AS(make_grid(1), InvalidArgument);
  CHECK_THROWS_AS(make_grid(0), InvalidArgument);
  Vector pts(3);
  pts << 0.0, 0.5, 0.5;
  CHECK_THROWS_AS(make_grid(pts), InvalidArgument);
}

TEST_CASE("irregular grid weights integrate linear functions exactly") {
  Vector pts(4);
  pts << 0.0, 0.1, 0.6, 1.0;
  const Grid g = make_grid(pts);
  CHECK(g.weights.sum() == doctest::Approx(1.0));
  CHECK(inner_product(g, pts, Vector::Ones(4)) == doctest::Approx(0.5));
}

TEST_CASE("inner_product quadrature") {
  for (Eigen::Index m : {2, 7, 101}) {
    const Grid g = make_grid(m);
    CHECK(inner_product(g, Vector::Ones(m), Vector::Ones(m)) == doctest::Approx(1.0).epsilon(1e-14));
  }
  const Grid g = make_grid(101);
  const Vector t = g.points;
  CHECK(inner_product(g, t, Vector::Ones(101)) == doctest::Approx(0.5).epsilon(1e-14));
  const Vector t2 = t.array().square();
  CHECK(std::abs(inner_product(g, t2, Vector::Ones(101)) - 1.0 / 3.0) < 1e-4);
  CHECK_THROWS_AS(inner_product(g, Vector::Ones(5), Vector::Ones(101)), InvalidArgument);
}

TEST_CASE("center") {
  const Grid g = make_grid(5);
  Matrix v(2, 5);
  v.row(0).setConstant(1.0);
  v.row(1).setConstant(-1.0);
  auto c = center(FunctionalSample(g, v));
  CHECK(c.mean.cwiseAbs().maxCoeff() == 0.0);
  CHECK(c.sample.values == v);

  v.row(0).setConstant(2.0);
  v.row(1).setConstant(4.0);
  c = center(FunctionalSample(g, v));
  CHECK((c.mean.array() == 3.0).all());
  CHECK((c.sample.values.row(0).array() == -1.0).all());
  CHECK((c.sample.values.row(1).array() == 1.0).all());

  Matrix one = g.points.transpose();
  c = center(FunctionalSample(g, one));
  CHECK(c.sample.values.cwiseAbs().maxCoeff() == 0.0);
  CHECK(c.mean == g.points);
}

TEST_CASE("FunctionalSample validates shape and finiteness") {
  const Grid g = make_grid(4);
  CHECK_THROWS_AS(FunctionalSample(g, Matrix::Zero(2, 3)), InvalidArgument);
  Matrix v = Matrix::Zero(2, 4);
  v(1, 2) = std::nan("");
  CHECK_THROWS_AS(FunctionalSample(g, v), InvalidArgument);
}

TEST_CASE("fpca of two constant curves") {
  const Grid g = make_grid(11);
  Matrix v(2, 11);
  v.row(0).setConstant(1.0);
  v.row(1).setConstant(-1.0);
  const FpcaBasis b = fpca(FunctionalSample(g, v), TruncationRule::fixed(1));
  CHECK(b.eigenvalues(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(b.eigenvalues.tail(10).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(b.rank == 1);
  CHECK(b.components() == 1);
  for (Eigen::Index k = 0; k < 11; ++k) CHECK(std::abs(b.eigenfunctions(0, k)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(b.pev(0) == doctest::Approx(1.0));
}

TEST_CASE("fpca of identical curves has zero spectrum") {
  const Grid g = make_grid(9);
  Matrix v = g.points.transpose().replicate(5, 1);
  const FpcaBasis b = fpca(FunctionalSample(g, v), TruncationRule::fixed(2));
  CHECK(b.eigenvalues.cwiseAbs().maxCoeff() < 1e-14);
  CHECK(b.rank == 0);
  CHECK(b.components() == 0);
  CHECK(b.rank_deficient);
}

TEST_CASE("fpca solves the weighted covariance eigenproblem") {
  const Grid g = make_grid(15);
  const FunctionalSample s(g, random_matrix(20, 15, 3));
  const FpcaBasis b = fpca(s, TruncationRule::fixed(5));
  // Oracle: the covariance operator applied by quadrature, (C v)(t) = int c(t,u) v(u) du.
  const auto c = center(s);
  const Matrix cov = c.sample.values.transpose() * c.sample.values / 20.0;
  for (Eigen::Index j = 0; j < 5; ++j) {
    const Vector v = b.eigenfunctions.row(j).transpose();
    const Vector cv = cov * g.weights.asDiagonal() * v;
    CHECK((cv - b.eigenvalues(j) * v).cwiseAbs().maxCoeff() < 1e-10);
  }
  const Matrix gram = b.eigenfunctions * g.weights.asDiagonal() * b.eigenfunctions.transpose();
  CHECK((gram - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-8);
  for (Eigen::Index j = 1; j < b.eigenvalues.size(); ++j) CHECK(b.eigenvalues(j) <= b.eigenvalues(j - 1));
  // Total variance equals the mean squared L2 norm of the centered curves.
  double total = 0;
  for (Eigen::Index i = 0; i < 20; ++i) total += inner_product(g, c.sample.values.row(i), c.sample.values.row(i));
  CHECK(b.eigenvalues.sum() == doctest::Approx(total / 20.0).epsilon(1e-10));
}

TEST_CASE("fpca PEV rule keeps the smallest J reaching the cutoff") {
  const Grid g = make_grid(12);
  const FunctionalSample s(g, random_matrix(30, 12, 5));
  const FpcaBasis b = fpca(s, TruncationRule::pev(0.8));
  const Eigen::Index j = b.components();
  REQUIRE(j >= 1);
  CHECK(b.pev(j - 1) >= 0.8);
  if (j >= 2) CHECK(b.pev(j - 2) < 0.8);
  CHECK_THROWS_AS(fpca(s, TruncationRule::pev(1.5)), InvalidArgument);
  CHECK_THROWS_AS(fpca(s, TruncationRule::fixed(13)), InvalidArgument);
}

TEST_CASE("fixed J above the rank is capped and flagged") {
  const Grid g = make_grid(10);
  const FunctionalSample s(g, random_matrix(3, 10, 8));
  const FpcaBasis b = fpca(s, TruncationRule::fixed(3));
  CHECK(b.rank == 2);
  CHECK(b.components() == 2);
  CHECK(b.rank_deficient);
}

TEST_CASE("project_scores") {
  const Grid g = make_grid(21);
  const FunctionalSample s(g, random_matrix(25, 21, 11));
  const FpcaBasis b = fpca(s, TruncationRule::fixed(4));

  Matrix probe(1, 21);
  probe.row(0) = b.eigenfunctions.row(0) + b.mean_curve.transpose();
  const Matrix sc = project_scores(FunctionalSample(g, probe), b, 4);
  CHECK(sc(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(sc.rightCols(3).cwiseAbs().maxCoeff() < 1e-10);

  probe.row(0) = b.mean_curve.transpose();
  CHECK(project_scores(FunctionalSample(g, probe), b, 4).cwiseAbs().maxCoeff() == 0.0);

  const Matrix other = random_matrix(10, 21, 99);
  const Matrix scores = project_scores(FunctionalSample(g, other), b, 4);
  for (Eigen::Index i = 0; i < 10; ++i) {
    const Vector centered = other.row(i).transpose() - b.mean_curve;
    CHECK(scores.row(i).squaredNorm() <= inner_product(g, centered, centered) + 1e-8);
  }
  CHECK_THROWS_AS(project_scores(s, b, 5), InvalidArgument);
  CHECK_THROWS_AS(project_scores(FunctionalSample(make_grid(20), random_matrix(1, 20, 1)), b, 1), InvalidArgument);
}

TEST_CASE("templated on the scalar type") {
  const GridT<float> g = make_grid<float>(5);
  CHECK(g.weights.sum() == doctest::Approx(1.0f));
  MatrixT<float> v(2, 5);
  v.row(0).setConstant(1.0f);
  v.row(1).setConstant(-1.0f);
  const auto b = fpca(FunctionalSampleT<float>(g, v), TruncationRule::fixed(1));
  CHECK(b.eigenvalues(0) == doctest::Approx(1.0f).epsilon(1e-5));
}
