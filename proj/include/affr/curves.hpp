#pragma once

// Functional-data primitives on a shared evaluation grid: trapezoid
// quadrature, L2 inner products, centering and empirical FPCA.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "affr/errors.hpp"

namespace affr {

template <class Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixT<double>;
using Vector = VectorT<double>;

/// Evaluation points on [0,1] with quadrature weights.
template <class Scalar>
struct GridT {
  VectorT<Scalar> points;
  VectorT<Scalar> weights;

  Eigen::Index size() const { return points.size(); }
  Scalar spacing() const { return points(1) - points(0); }

  bool operator==(const GridT& other) const {
    return points.size() == other.points.size() && points == other.points &&
           weights == other.weights;
  }
};

using Grid = GridT<double>;

/// M equispaced points 0, 1/(M-1), ..., 1 with composite trapezoid weights.
template <class Scalar = double>
GridT<Scalar> make_grid(Eigen::Index m) {
  if (m < 2) throw InvalidArgument("make_grid: need at least 2 points, got " + std::to_string(m));
  GridT<Scalar> grid;
  grid.points.resize(m);
  grid.weights.resize(m);
  const Scalar step = Scalar(1) / Scalar(m - 1);
  for (Eigen::Index k = 0; k < m; ++k) {
    grid.points(k) = k == m - 1 ? Scalar(1) : Scalar(k) * step;
    grid.weights(k) = step;
  }
  grid.weights(0) = step / 2;
  grid.weights(m - 1) = step / 2;
  return grid;
}

/// Trapezoid weights for an arbitrary strictly increasing set of nodes.
template <class Scalar>
GridT<Scalar> make_grid(const VectorT<Scalar>& points) {
  const Eigen::Index m = points.size();
  if (m < 2) throw InvalidArgument("make_grid: need at least 2 points");
  GridT<Scalar> grid;
  grid.points = points;
  grid.weights = VectorT<Scalar>::Zero(m);
  for (Eigen::Index k = 0; k + 1 < m; ++k) {
    const Scalar h = points(k + 1) - points(k);
    if (!(h > 0)) throw InvalidArgument("make_grid: points must be strictly increasing");
    grid.weights(k) += h / 2;
    grid.weights(k + 1) += h / 2;
  }
  return grid;
}

/// n curves sampled on a common grid; row i is curve i.
template <class Scalar>
struct FunctionalSampleT {
  GridT<Scalar> grid;
  MatrixT<Scalar> values;

  FunctionalSampleT() = default;
  FunctionalSampleT(GridT<Scalar> g, MatrixT<Scalar> v) : grid(std::move(g)), values(std::move(v)) {
    if (values.cols() != grid.size())
      throw InvalidArgument("FunctionalSample: " + std::to_string(values.cols()) +
                            " columns for a grid of " + std::to_string(grid.size()));
    if (!values.allFinite()) throw InvalidArgument("FunctionalSample: non-finite entry");
  }

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index m() const { return values.cols(); }
};

using FunctionalSample = FunctionalSampleT<double>;

template <class Scalar>
void require_same_grid(const GridT<Scalar>& a, const GridT<Scalar>& b, const char* where) {
  if (!(a == b)) throw InvalidArgument(std::string(where) + ": grid mismatch");
}

/// L2 inner product by quadrature: sum_m w_m f_m g_m.
template <class Scalar, class DerivedF, class DerivedG>
Scalar inner_product(const GridT<Scalar>& grid, const Eigen::MatrixBase<DerivedF>& f,
                     const Eigen::MatrixBase<DerivedG>& g) {
  if (f.size() != grid.size() || g.size() != grid.size())
    throw InvalidArgument("inner_product: curve length does not match grid");
  Scalar acc = 0;
  for (Eigen::Index k = 0; k < grid.size(); ++k) acc += grid.weights(k) * f(k) * g(k);
  return acc;
}

template <class Scalar>
struct CenteredSample {
  FunctionalSampleT<Scalar> sample;
  VectorT<Scalar> mean;
};

/// Subtract the pointwise mean curve.
template <class Scalar>
CenteredSample<Scalar> center(const FunctionalSampleT<Scalar>& sample) {
  if (sample.n() < 1) throw InvalidArgument("center: empty sample");
  CenteredSample<Scalar> out;
  out.mean = sample.values.colwise().mean().transpose();
  out.sample.grid = sample.grid;
  out.sample.values = sample.values.rowwise() - out.mean.transpose();
  return out;
}

/// How many principal components to keep.
struct TruncationRule {
  enum class Kind { fixed, pev };
  Kind kind = Kind::pev;
  Eigen::Index components = 0;
  double cutoff = 0.85;

  static TruncationRule fixed(Eigen::Index j) { return {Kind::fixed, j, 0.0}; }
  static TruncationRule pev(double p) { return {Kind::pev, 0, p}; }
};

/// Empirical eigenfunctions of a curve sample.
///
/// `eigenfunctions` holds the retained components (rows, L2-orthonormal on the
/// grid). `eigenvalues` and `pev` cover the full spectrum so the explained
/// variance of any truncation can be read off.
template <class Scalar>
struct FpcaBasisT {
  GridT<Scalar> grid;
  MatrixT<Scalar> eigenfunctions;
  VectorT<Scalar> eigenvalues;
  VectorT<Scalar> mean_curve;
  VectorT<Scalar> pev;
  Eigen::Index rank = 0;
  bool rank_deficient = false;

  Eigen::Index components() const { return eigenfunctions.rows(); }

  FpcaBasisT truncated(Eigen::Index j) const {
    if (j > components()) throw InvalidArgument("FpcaBasis::truncated: not enough components");
    FpcaBasisT out = *this;
    out.eigenfunctions = eigenfunctions.topRows(j);
    return out;
  }
};

using FpcaBasis = FpcaBasisT<double>;

/// FPCA of a sample via the symmetric matrix W^{1/2} K W^{1/2}, where K is the
/// covariance of the centered curves with divisor n. Eigenvectors are rescaled
/// by W^{-1/2} so they are orthonormal under inner_product. Each eigenfunction's
/// largest-magnitude entry is made positive.
template <class Scalar>
FpcaBasisT<Scalar> fpca(const FunctionalSampleT<Scalar>& sample, const TruncationRule& rule) {
  const Eigen::Index n = sample.n();
  const Eigen::Index m = sample.m();
  if (rule.kind == TruncationRule::Kind::pev) {
    if (n < 2) throw InvalidArgument("fpca: PEV rule needs at least 2 curves");
    if (!(rule.cutoff > 0 && rule.cutoff <= 1)) throw InvalidArgument("fpca: PEV cutoff must lie in (0,1]");
  } else {
    if (rule.components < 0 || rule.components > std::min(n, m))
      throw InvalidArgument("fpca: fixed J must satisfy 0 <= J <= min(n, M)");
  }

  const auto centered = center(sample);
  const VectorT<Scalar> sqrt_w = sample.grid.weights.array().sqrt();
  const MatrixT<Scalar> scaled = centered.sample.values * sqrt_w.asDiagonal();
  const MatrixT<Scalar> op = (scaled.transpose() * scaled) / Scalar(n);

  Eigen::SelfAdjointEigenSolver<MatrixT<Scalar>> es(op);
  if (es.info() != Eigen::Success) throw NumericError("fpca: eigendecomposition failed");

  FpcaBasisT<Scalar> basis;
  basis.grid = sample.grid;
  basis.mean_curve = centered.mean;
  basis.eigenvalues = es.eigenvalues().reverse().cwiseMax(Scalar(0));

  const Scalar top = basis.eigenvalues.size() > 0 ? basis.eigenvalues(0) : Scalar(0);
  // Relative to the spectrum, and to the raw signal scale so that centering
  // round-off of identical curves counts as zero variance.
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar raw_scale = sample.values.squaredNorm() / Scalar(std::max<Eigen::Index>(n * m, 1));
  const Scalar tol = std::max(top * Scalar(m) * eps * 16, raw_scale * eps * 16);
  basis.rank = (basis.eigenvalues.array() > tol).count();

  const Scalar total = basis.eigenvalues.sum();
  basis.pev.resize(m);
  Scalar running = 0;
  for (Eigen::Index k = 0; k < m; ++k) {
    running += basis.eigenvalues(k);
    basis.pev(k) = total > 0 ? running / total : Scalar(1);
  }
  if (total > 0) basis.pev(m - 1) = 1;

  Eigen::Index keep = 0;
  if (rule.kind == TruncationRule::Kind::fixed) {
    keep = std::min(rule.components, basis.rank);
    basis.rank_deficient = rule.components > basis.rank;
  } else {
    while (keep < basis.rank && basis.pev(keep) < Scalar(rule.cutoff)) ++keep;
    keep = std::min(keep + 1, basis.rank);
  }

  basis.eigenfunctions.resize(keep, m);
  const Eigen::Index cols = es.eigenvectors().cols();
  for (Eigen::Index j = 0; j < keep; ++j) {
    VectorT<Scalar> v = es.eigenvectors().col(cols - 1 - j).cwiseQuotient(sqrt_w);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    basis.eigenfunctions.row(j) = v.transpose();
  }
  return basis;
}

/// Scores <Y_i - mean, v_j> for the first J eigenfunctions (n x J).
template <class Scalar>
MatrixT<Scalar> project_scores(const FunctionalSampleT<Scalar>& sample, const FpcaBasisT<Scalar>& basis,
                               Eigen::Index j) {
  require_same_grid(sample.grid, basis.grid, "project_scores");
  if (j < 0 || j > basis.components()) throw InvalidArgument("project_scores: J exceeds available components");
  const MatrixT<Scalar> centered = sample.values.rowwise() - basis.mean_curve.transpose();
  return centered * sample.grid.weights.asDiagonal() * basis.eigenfunctions.topRows(j).transpose();
}

}  // namespace affr
