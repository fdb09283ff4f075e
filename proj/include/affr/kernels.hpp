#pragma once

// Trivariate kernels k((t,s,x),(t',s',x')) on [0,1]^2 x R, their separable
// factors, domain masks and the median bandwidth heuristic.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "affr/curves.hpp"
#include "affr/errors.hpp"

namespace affr {

enum class KernelFamily { gaussian, exponential };

inline std::string to_string(KernelFamily f) { return f == KernelFamily::gaussian ? "gaussian" : "exponential"; }

inline KernelFamily parse_kernel_family(const std::string& name) {
  if (name == "gaussian") return KernelFamily::gaussian;
  if (name == "exponential") return KernelFamily::exponential;
  throw InvalidArgument("unknown kernel family '" + name + "'");
}

/// Family {A_t} of s-domains, one closed interval [lo(t), hi(t)] per t.
/// `none` is A_t = [0,1]; `historical` is A_t = [0,t].
struct DomainMask {
  enum class Kind { none, historical, interval };
  Kind kind = Kind::none;
  std::function<std::pair<double, double>(double)> bounds;

  static DomainMask none() { return {}; }
  static DomainMask historical() { return {Kind::historical, {}}; }
  static DomainMask interval(std::function<std::pair<double, double>(double)> f) {
    return {Kind::interval, std::move(f)};
  }

  bool active() const { return kind != Kind::none; }

  std::pair<double, double> domain(double t) const {
    switch (kind) {
      case Kind::none: return {0.0, 1.0};
      case Kind::historical: return {0.0, t};
      case Kind::interval: return bounds(t);
    }
    return {0.0, 1.0};
  }

  bool contains(double t, double s) const {
    if (kind == Kind::none) return true;
    const auto [lo, hi] = domain(t);
    return lo <= s && s <= hi;
  }

  /// For each t-node, the half-open index range [first, last) of s-nodes in A_t.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> node_ranges(const Grid& grid) const {
    const Eigen::Index m = grid.size();
    std::vector<std::pair<Eigen::Index, Eigen::Index>> out(static_cast<size_t>(m));
    const double* begin = grid.points.data();
    const double* end = begin + m;
    for (Eigen::Index k = 0; k < m; ++k) {
      if (kind == Kind::none) {
        out[k] = {0, m};
        continue;
      }
      const auto [lo, hi] = domain(grid.points(k));
      const auto first = std::lower_bound(begin, end, lo) - begin;
      const auto last = std::upper_bound(begin, end, hi) - begin;
      out[k] = {first, std::max(first, last)};
    }
    return out;
  }
};

inline std::string to_string(const DomainMask& mask) {
  switch (mask.kind) {
    case DomainMask::Kind::none: return "none";
    case DomainMask::Kind::historical: return "historical";
    case DomainMask::Kind::interval: return "interval";
  }
  return "none";
}

inline DomainMask parse_mask(const std::string& name) {
  if (name == "none") return DomainMask::none();
  if (name == "historical") return DomainMask::historical();
  throw InvalidArgument("unknown mask '" + name + "' (expected none or historical)");
}

struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  double delta = 1.0;
  DomainMask mask;

  KernelSpec() = default;
  KernelSpec(KernelFamily f, double d, DomainMask m = DomainMask::none()) : family(f), delta(d), mask(std::move(m)) {
    if (!(delta > 0) || !std::isfinite(delta)) throw InvalidArgument("KernelSpec: delta must be positive");
  }
};

template <class Scalar>
struct KPointT {
  Scalar t;
  Scalar s;
  Scalar x;
};

using KPoint = KPointT<double>;

/// One-dimensional factor exp(-delta * d(a,b)), d squared or absolute difference.
template <class Scalar>
inline Scalar kernel_factor(KernelFamily family, Scalar delta, Scalar a, Scalar b) {
  const Scalar d = a - b;
  return family == KernelFamily::gaussian ? std::exp(-delta * d * d) : std::exp(-delta * std::abs(d));
}

template <class Scalar>
Scalar kernel_eval(const KernelSpec& spec, const KPointT<Scalar>& p, const KPointT<Scalar>& q) {
  if (spec.mask.active() && (!spec.mask.contains(p.t, p.s) || !spec.mask.contains(q.t, q.s))) return Scalar(0);
  const Scalar dt = p.t - q.t, ds = p.s - q.s, dx = p.x - q.x;
  const Scalar delta = Scalar(spec.delta);
  if (spec.family == KernelFamily::gaussian) return std::exp(-delta * (dt * dt + ds * ds + dx * dx));
  return std::exp(-delta * (std::abs(dt) + std::abs(ds) + std::abs(dx)));
}

/// k = K_T(t,t') * H(s,s',x,x') for both families (unmasked).
struct KernelFactors {
  KernelFamily family;
  double delta;

  double time(double t, double tp) const { return kernel_factor(family, delta, t, tp); }
  double cross(double s, double sp, double x, double xp) const {
    return kernel_factor(family, delta, s, sp) * kernel_factor(family, delta, x, xp);
  }
};

inline KernelFactors factorize(const KernelSpec& spec) { return {spec.family, spec.delta}; }

/// Matrix of a one-dimensional factor over all pairs of grid nodes.
inline Matrix factor_matrix(KernelFamily family, double delta, const Vector& a, const Vector& b) {
  Matrix out(a.size(), b.size());
  for (Eigen::Index j = 0; j < b.size(); ++j)
    for (Eigen::Index i = 0; i < a.size(); ++i) out(i, j) = kernel_factor(family, delta, a(i), b(j));
  return out;
}

/// Gram matrix G[a][b] = k(points[a], points[b]).
inline Matrix gram(const KernelSpec& spec, const std::vector<KPoint>& points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  Matrix g(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    g(a, a) = kernel_eval(spec, points[a], points[a]);
    for (Eigen::Index b = a + 1; b < n; ++b) g(a, b) = g(b, a) = kernel_eval(spec, points[a], points[b]);
  }
  return g;
}

struct BandwidthEstimate {
  double delta = 1.0;
  double median_sq_distance = 0.0;
  bool fallback = false;
};

/// delta = 1 / (2 * median squared distance) over `pairs` random pairs of graph
/// triples (t, s, X_i(s)); t and s are grid nodes drawn independently. With
/// `distinct_curves` the two triples of a pair always come from different curves.
inline BandwidthEstimate median_bandwidth(const FunctionalSample& curves, Eigen::Index pairs, std::uint64_t seed,
                                          bool distinct_curves = false) {
  if (pairs < 2) throw InvalidArgument("median_bandwidth: need at least 2 pairs");
  if (curves.n() < 1) throw InvalidArgument("median_bandwidth: empty sample");
  if (distinct_curves && curves.n() < 2) throw InvalidArgument("median_bandwidth: distinct curves need n >= 2");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick_curve(0, curves.n() - 1);
  std::uniform_int_distribution<Eigen::Index> pick_node(0, curves.m() - 1);
  const auto& pts = curves.grid.points;

  std::vector<double> sq(static_cast<size_t>(pairs));
  for (auto& d : sq) {
    const Eigen::Index i = pick_curve(rng);
    Eigen::Index ip = pick_curve(rng);
    while (distinct_curves && ip == i) ip = pick_curve(rng);
    const Eigen::Index t = pick_node(rng), s = pick_node(rng);
    const Eigen::Index tp = pick_node(rng), sp = pick_node(rng);
    const double dt = pts(t) - pts(tp), ds = pts(s) - pts(sp), dx = curves.values(i, s) - curves.values(ip, sp);
    d = dt * dt + ds * ds + dx * dx;
  }
  const auto mid = sq.begin() + static_cast<long>(sq.size() / 2);
  std::nth_element(sq.begin(), mid, sq.end());
  double median = *mid;
  if (sq.size() % 2 == 0) median = 0.5 * (median + *std::max_element(sq.begin(), mid));

  BandwidthEstimate est;
  est.median_sq_distance = median;
  if (!(median > 0) || !std::isfinite(median)) {
    est.fallback = true;
    est.delta = 1.0;
  } else {
    est.delta = 1.0 / (2.0 * median);
  }
  return est;
}

}  // namespace affr
