#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "affr/errors.hpp"
#include "affr/selection.hpp"

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

FunctionalSample responses(const FunctionalSample& x, std::uint64_t seed) {
  const auto noise = random_sample(x.n(), x.m(), seed, 0.2);
  Matrix v(x.n(), x.m());
  for (Eigen::Index i = 0; i < x.n(); ++i)
    for (Eigen::Index t = 0; t < x.m(); ++t) {
      double acc = 0;
      for (Eigen::Index s = 0; s < x.m(); ++s)
        acc += x.grid.weights(s) * (x.grid.points(t) * x.grid.points(s) + x.values(i, s) * x.values(i, s));
      v(i, t) = acc + noise.values(i, t);
    }
  return {x.grid, v};
}

// Held-out mean ISE computed by refitting each fold from scratch.
double cv_oracle(const AffrProblem& p, double lambda, const std::vector<std::vector<Eigen::Index>>& folds) {
  double total = 0;
  for (const auto& held : folds) {
    std::vector<Eigen::Index> train;
    for (Eigen::Index i = 0; i < p.n(); ++i)
      if (std::find(held.begin(), held.end(), i) == held.end()) train.push_back(i);
    AffrModel m;
    m.x_train = FunctionalSample(p.x.grid, p.x.values(train, Eigen::all));
    m.basis = p.basis;
    m.kernel = p.kernel;
    m.lambda = lambda;
    m.y_mean = p.y_mean;
    const FunctionalSample y_train(p.y.grid, p.y.values(train, Eigen::all).rowwise() - p.y_mean.transpose());
    const ATensor a = build_a_bruteforce(m.x_train, p.basis, p.j(), p.kernel);
    m.alpha = unflatten(solve(a, y_coeffs(y_train, p.basis, p.j()), lambda), static_cast<Eigen::Index>(train.size()), p.j());
    const FunctionalSample x_held(p.x.grid, p.x.values(held, Eigen::all));
    const Matrix resid = p.y.values(held, Eigen::all) - predict_curves(m, x_held).values;
    total += (resid.array().square().matrix() * p.y.grid.weights).sum();
  }
  return total / static_cast<double>(p.n());
}

}  // namespace

TEST_CASE("lambda grids") {
  const auto g = LambdaGrid::log_spaced(1e-6, 1e2, 9);
  REQUIRE(g.values.size() == 9);
  CHECK(g.values.front() == doctest::Approx(1e-6));
  CHECK(g.values[6] == doctest::Approx(1.0));
  CHECK(g.values.back() == doctest::Approx(1e2));
  CHECK(g.resolve(5.0) == g.values);

  const auto s = LambdaGrid::standard();
  CHECK(s.relative);
  CHECK(s.values.size() == 25);
  CHECK(s.resolve(2.0).front() == doctest::Approx(2e-8));
  CHECK(s.resolve(2.0).back() == doctest::Approx(200.0));

  CHECK_THROWS_AS(LambdaGrid::from_values({}), InvalidArgument);
  CHECK_THROWS_AS(LambdaGrid::from_values({1.0, 0.5}), InvalidArgument);
  CHECK_THROWS_AS(LambdaGrid::from_values({0.0}), InvalidArgument);
  CHECK_THROWS_AS(LambdaGrid::log_spaced(0.0, 1.0, 3), InvalidArgument);
}

TEST_CASE("argmin ties go to the larger lambda") {
  CHECK(argmin_prefer_larger({3.0, 1.0, 2.0}) == 1);
  CHECK(argmin_prefer_larger({1.0, 1.0, 1.0}) == 2);
  CHECK(argmin_prefer_larger({2.0, 1.0, 1.0 + 1e-14, 5.0}) == 2);
  CHECK(argmin_prefer_larger({2.0, 1.0, 1.0 + 1e-9}) == 1);
}

TEST_CASE("kfold cv matches a refit-per-fold oracle") {
  const auto x = random_sample(12, 10, 1);
  const auto y = responses(x, 2);
  for (auto mask : {DomainMask::none(), DomainMask::historical()}) {
    const AffrProblem p = prepare_problem(x, y, KernelSpec(KernelFamily::gaussian, 1.0, mask), TruncationRule::fixed(3));
    const auto grid = LambdaGrid::from_values({1e-3, 1e-1, 10.0});
    const auto r = kfold_cv(p, grid, 4);
    const auto folds = fold_split(12, 4);
    REQUIRE(r.scores.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) CHECK(r.scores[k] == doctest::Approx(cv_oracle(p, r.lambdas[k], folds)).epsilon(1e-9));
    CHECK(r.lambda == r.lambdas[argmin_prefer_larger(r.scores)]);

    const auto shuffled = kfold_cv(p, grid, 3, FoldMode::shuffled, 77);
    const auto sfolds = fold_split(12, 3, FoldMode::shuffled, 77);
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(shuffled.scores[k] == doctest::Approx(cv_oracle(p, shuffled.lambdas[k], sfolds)).epsilon(1e-9));
  }
}

TEST_CASE("kfold cv edge cases") {
  const auto x = random_sample(10, 8, 3);
  const auto y = responses(x, 4);
  const AffrProblem p = prepare_problem(x, y, KernelSpec(), TruncationRule::fixed(2));
  CHECK(kfold_cv(p, LambdaGrid::from_values({0.37}), 5).lambda == 0.37);

  const auto dup = kfold_cv(p, LambdaGrid::from_values({0.01, 0.5, 0.5}), 5);
  CHECK(dup.scores[1] == dup.scores[2]);
  if (dup.scores[1] <= dup.scores[0]) CHECK(dup.lambda == 0.5);

  CHECK_THROWS_AS(kfold_cv(p, LambdaGrid::from_values({1.0}), 6), InvalidArgument);
  CHECK_THROWS_AS(kfold_cv(p, LambdaGrid::from_values({1.0}), 11), InvalidArgument);

  const auto rel = kfold_cv(p, LambdaGrid::from_values({1.0}, true), 5);
  CHECK(rel.lambda == doctest::Approx(p.a.mean_diagonal()));
}

TEST_CASE("gcv hand computations") {
  ATensor one;
  one.n = 1;
  one.j = 1;
  one.matrix = Matrix::Ones(1, 1);
  Vector y(1);
  y << 2.0;
  CHECK(gcv(one, y, 1.0) == doctest::Approx(4.0).epsilon(1e-14));

  ATensor eye;
  eye.n = 4;
  eye.j = 1;
  eye.matrix = Matrix::Identity(4, 4);
  Vector y4(4);
  y4 << 1.0, -2.0, 3.0, 0.5;
  for (double lambda : {1e-3, 0.5, 1.0, 100.0})
    CHECK(gcv(eye, y4, lambda) == doctest::Approx(y4.squaredNorm() / 4).epsilon(1e-12));

  ATensor psd;
  psd.n = 3;
  psd.j = 1;
  const Matrix f = random_sample(3, 3, 9).values;
  psd.matrix = f * f.transpose();
  CHECK(gcv(psd, y4.head(3), 1e10) == doctest::Approx(y4.head(3).squaredNorm() / 3).epsilon(1e-6));
  // Direct formula as the oracle.
  const double lambda = 0.3;
  const Matrix s = psd.matrix * (psd.matrix + lambda * Matrix::Identity(3, 3)).inverse();
  const Vector r = y4.head(3) - s * y4.head(3);
  const double direct = (r.squaredNorm() / 3) / std::pow(1 - s.trace() / 3, 2);
  CHECK(gcv(psd, y4.head(3), lambda) == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("select_gcv") {
  const auto x = random_sample(10, 8, 5);
  const auto y = responses(x, 6);
  const AffrProblem p = prepare_problem(x, y, KernelSpec(KernelFamily::exponential, 1.0), TruncationRule::fixed(2));
  CHECK(select_gcv(p, LambdaGrid::from_values({0.2})).lambda == 0.2);
  const auto r = select_gcv(p, LambdaGrid::log_spaced(1e-4, 1e2, 7));
  const SpectralRidge ridge(p.a);
  for (std::size_t k = 0; k < r.lambdas.size(); ++k) CHECK(r.scores[k] == doctest::Approx(gcv(ridge, p.y_v, r.lambdas[k])));
  CHECK(r.lambda == r.lambdas[argmin_prefer_larger(r.scores)]);
}
