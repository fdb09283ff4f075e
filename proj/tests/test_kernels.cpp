#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "affr/errors.hpp"
#include "affr/kernels.hpp"

using namespace affr;

TEST_CASE("kernel_eval closed forms") {
  const KPoint p{0.3, 0.2, -1.4};
  for (auto f : {KernelFamily::gaussian, KernelFamily::exponential})
    for (double d : {0.1, 1.0, 7.0}) CHECK(kernel_eval(KernelSpec(f, d), p, p) == 1.0);

  CHECK(kernel_eval(KernelSpec(KernelFamily::gaussian, 1.0), KPoint{0, 0, 0}, KPoint{1, 0, 0}) ==
        doctest::Approx(0.36787944117144233).epsilon(1e-15));
  // exp(-2 (0.5 + 0.25 + 1)) for the exponential family.
  CHECK(kernel_eval(KernelSpec(KernelFamily::exponential, 2.0), KPoint{0.5, 0.25, 1}, KPoint{0, 0.5, 0}) ==
        doctest::Approx(std::exp(-3.5)).epsilon(1e-15));
  // exp(-0.5 (0.25 + 0.0625 + 4)).
  CHECK(kernel_eval(KernelSpec(KernelFamily::gaussian, 0.5), KPoint{0.5, 0.25, 1}, KPoint{0, 0.5, -1}) ==
        doctest::Approx(std::exp(-0.5 * 4.3125)).epsilon(1e-15));
}

TEST_CASE("historical mask zeroes points with s > t") {
  const KernelSpec spec(KernelFamily::gaussian, 1.0, DomainMask::historical());
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int r = 0; r < 20; ++r) {
    const KPoint q{u(rng), u(rng), u(rng)};
    CHECK(kernel_eval(spec, KPoint{0.5, 0.8, 0.0}, q) == 0.0);
    CHECK(kernel_eval(spec, q.s > q.t ? q : KPoint{0.1, 0.9, q.x}, KPoint{0.5, 0.5, 0}) == 0.0);
  }
  CHECK(kernel_eval(spec, KPoint{0.5, 0.5, 0}, KPoint{0.5, 0.5, 0}) == 1.0);
  CHECK(spec.mask.contains(0.5, 0.5));
  CHECK(!spec.mask.contains(0.5, 0.50001));
}

TEST_CASE("mask node ranges") {
  const Grid g = make_grid(5);
  const auto none = DomainMask::none().node_ranges(g);
  for (const auto& r : none) CHECK(r == std::pair<Eigen::Index, Eigen::Index>{0, 5});
  const auto hist = DomainMask::historical().node_ranges(g);
  for (Eigen::Index k = 0; k < 5; ++k) CHECK(hist[k] == std::pair<Eigen::Index, Eigen::Index>{0, k + 1});
  const auto lag = DomainMask::interval([](double t) { return std::pair{t - 0.3, t}; }).node_ranges(g);
  CHECK(lag[0] == std::pair<Eigen::Index, Eigen::Index>{0, 1});
  CHECK(lag[4] == std::pair<Eigen::Index, Eigen::Index>{3, 5});
}

TEST_CASE("mask and family names round-trip") {
  CHECK(to_string(parse_mask("historical")) == "historical");
  CHECK(to_string(parse_mask("none")) == "none");
  CHECK(parse_kernel_family(to_string(KernelFamily::exponential)) == KernelFamily::exponential);
  CHECK_THROWS_AS(parse_mask("future"), InvalidArgument);
  CHECK_THROWS_AS(parse_kernel_family("laplace"), InvalidArgument);
  CHECK_THROWS_AS(KernelSpec(KernelFamily::gaussian, 0.0), InvalidArgument);
  CHECK_THROWS_AS(KernelSpec(KernelFamily::gaussian, -1.0), InvalidArgument);
}

TEST_CASE("factorization reproduces the full kernel") {
  const KernelSpec g1(KernelFamily::gaussian, 1.0);
  const auto f = factorize(g1);
  CHECK(f.time(0, 1) * f.cross(0, 0, 0, 0) == kernel_eval(g1, KPoint{0, 0, 0}, KPoint{1, 0, 0}));

  const auto e2 = factorize(KernelSpec(KernelFamily::exponential, 2.0));
  for (double t : {0.0, 0.3, 1.0}) CHECK(e2.time(t, t) == 1.0);

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> nd;
  for (auto fam : {KernelFamily::gaussian, KernelFamily::exponential}) {
    const KernelSpec spec(fam, 0.7);
    const auto fac = factorize(spec);
    double worst = 0;
    for (int r = 0; r < 100; ++r) {
      const KPoint p{u(rng), u(rng), nd(rng)}, q{u(rng), u(rng), nd(rng)};
      worst = std::max(worst, std::abs(fac.time(p.t, q.t) * fac.cross(p.s, q.s, p.x, q.x) - kernel_eval(spec, p, q)));
    }
    CHECK(worst < 1e-14);
  }
}

TEST_CASE("gram matrices") {
  const KernelSpec spec(KernelFamily::gaussian, 0.5);
  CHECK(gram(spec, {KPoint{0.1, 0.2, 0.3}}) == Matrix::Ones(1, 1));

  const KPoint p{0.4, 0.1, -0.2};
  const Matrix dup = gram(spec, {p, p, p});
  CHECK(dup == Matrix::Ones(3, 3));

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> nd;
  std::vector<KPoint> pts;
  for (int k = 0; k < 50; ++k) pts.push_back({u(rng), u(rng), nd(rng)});
  for (auto fam : {KernelFamily::gaussian, KernelFamily::exponential})
    for (auto mask : {DomainMask::none(), DomainMask::historical()}) {
      const Matrix g = gram(KernelSpec(fam, 0.5, mask), pts);
      CHECK((g - g.transpose()).cwiseAbs().maxCoeff() == 0.0);
      CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(g).eigenvalues().minCoeff() >= -1e-8);
    }
}

TEST_CASE("median bandwidth heuristic") {
  // Constant curves on M=2: squared distances are dt^2 + ds^2 in {0, 1, 2}
  // with probabilities 1/4, 1/2, 1/4, so the median is 1 and delta = 1/2.
  const Grid g2 = make_grid(2);
  const FunctionalSample flat(g2, Matrix::Constant(3, 2, 0.7));
  const auto est = median_bandwidth(flat, 2001, 5);
  CHECK(!est.fallback);
  CHECK(est.median_sq_distance == 1.0);
  CHECK(est.delta == 0.5);

  // Curves 0 and 1 compared across curves: every dx^2 = 1.
  Matrix two(2, 6);
  two.row(0).setZero();
  two.row(1).setOnes();
  const FunctionalSample across(make_grid(6), two);
  const auto e2 = median_bandwidth(across, 500, 9, true);
  CHECK(e2.median_sq_distance >= 1.0);
  CHECK(e2.delta <= 0.5);

  const auto again = median_bandwidth(across, 500, 9, true);
  CHECK(again.delta == e2.delta);

  // One curve, one node pair forced to coincide: all distances zero.
  const FunctionalSample single(g2, Matrix::Zero(1, 2));
  CHECK_THROWS_AS(median_bandwidth(single, 10, 1, true), InvalidArgument);
  CHECK_THROWS_AS(median_bandwidth(single, 1, 1), InvalidArgument);
}
