#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "affr/baselines.hpp"
#include "affr/errors.hpp"

using namespace affr;

namespace {

FunctionalSample random_sample(Eigen::Index n, Eigen::Index m, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  Matrix v(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < m; ++k) v(i, k) = nd(rng);
  return {make_grid(m), v};
}

}  // namespace

TEST_CASE("constant responses give zero coefficients") {
  const auto x = random_sample(20, 12, 1);
  const FunctionalSample y(x.grid, Vector::LinSpaced(12, -1, 1).transpose().replicate(20, 1));
  const auto xn = random_sample(5, 12, 2);
  const LinearFofModel lmr = fit_lmr(x, y, 3, 3);
  CHECK(lmr.coefficients.size() == 0);
  const LinearFofModel lmf = fit_lmf(x, y, 3);
  CHECK(lmf.coefficients.cwiseAbs().maxCoeff() < 1e-14);
  for (const auto& m : {lmr, lmf}) {
    const auto pred = predict_linear(m, xn);
    for (Eigen::Index i = 0; i < 5; ++i) CHECK((pred.values.row(i) - y.values.row(0)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("identical score spaces give the identity map") {
  const auto x = random_sample(25, 15, 3);
  const LinearFofModel m = fit_lmr(x, x, 4, 4);
  CHECK((m.coefficients - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(!m.singular_design);
}

TEST_CASE("noise-free linear data is fitted exactly") {
  const auto x = random_sample(30, 20, 4);
  const FpcaBasis bx = fpca(x, TruncationRule::fixed(3));
  const Matrix xi = project_scores(x, bx, 3);
  Matrix yv(30, 20);
  for (Eigen::Index i = 0; i < 30; ++i) yv.row(i) = xi(i, 0) * x.grid.points.transpose();
  const FunctionalSample y(x.grid, yv);
  for (const auto& m : {fit_lmf(x, y, 3), fit_lmr(x, y, 3, 2)}) {
    const auto pred = predict_linear(m, x);
    CHECK((pred.values - yv).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("LMF agrees with the normal equations") {
  const auto x = random_sample(40, 10, 5);
  const auto y = random_sample(40, 10, 6);
  const LinearFofModel m = fit_lmf(x, y, 4);
  const FpcaBasis bx = fpca(x, TruncationRule::fixed(4));
  const Matrix s = project_scores(x, bx, 4);
  const Matrix yc = y.values.rowwise() - y.values.colwise().mean();
  const Matrix beta = (s.transpose() * s).ldlt().solve(s.transpose() * yc);
  CHECK((m.coefficients.transpose() - beta).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("predict_linear") {
  const auto x = random_sample(30, 12, 7);
  const auto y = random_sample(30, 12, 8);
  for (const auto& m : {fit_lmr(x, y, 3, 3), fit_lmf(x, y, 3)}) {
    const Matrix mean = x.values.colwise().mean();
    const auto at_mean = predict_linear(m, FunctionalSample(x.grid, mean));
    CHECK((at_mean.values.row(0).transpose() - m.y_mean).cwiseAbs().maxCoeff() < 1e-12);

    const auto x1 = random_sample(1, 12, 9), x2 = random_sample(1, 12, 10);
    const double a = 0.3;
    const FunctionalSample mix(x.grid, a * x1.values + (1 - a) * x2.values);
    const Matrix lhs = predict_linear(m, mix).values.rowwise() - m.y_mean.transpose();
    const Matrix rhs = a * (predict_linear(m, x1).values.rowwise() - m.y_mean.transpose()) +
                       (1 - a) * (predict_linear(m, x2).values.rowwise() - m.y_mean.transpose());
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("LMR with a complete response basis equals LMF") {
  const auto x = random_sample(30, 10, 11);
  const auto y = random_sample(30, 10, 12);
  const auto xn = random_sample(6, 10, 13);
  const auto a = predict_linear(fit_lmr(x, y, 4, 10), xn);
  const auto b = predict_linear(fit_lmf(x, y, 4), xn);
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("singular designs and invalid inputs") {
  const auto x = random_sample(3, 10, 14);
  CHECK_THROWS_AS(fit_lmf(x, random_sample(3, 10, 15), 3), InvalidArgument);
  CHECK_THROWS_AS(fit_lmf(x, random_sample(4, 10, 15), 2), InvalidArgument);
  CHECK_THROWS_AS(fit_lmr(x, random_sample(3, 9, 15), 2, 2), InvalidArgument);
}
