#include "affr/estimator.hpp"

#include <cmath>
#include <string>

#include "affr/errors.hpp"

namespace affr {

namespace {

using Array = Eigen::ArrayXXd;

// w_s * w_s' * H_s(s,s'), the s-part of the cross factor with both weights.
Array weighted_s_factor(const Grid& grid, const KernelSpec& spec) {
  const Matrix hs = factor_matrix(spec.family, spec.delta, grid.points, grid.points);
  return (grid.weights.asDiagonal() * hs * grid.weights.asDiagonal()).array();
}

// out(s,s') = H_x(a(s), b(s')).
void x_factor(const KernelSpec& spec, const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
              Array& out) {
  const Eigen::Index m = a.size();
  out = a.replicate(1, m).array() - b.transpose().replicate(m, 1).array();
  if (spec.family == KernelFamily::gaussian)
    out = (-spec.delta * out.square()).exp();
  else
    out = (-spec.delta * out.abs()).exp();
}

// W_(a,b) = sum_{s,s'} w_s w_s' H_s(s,s') H_x(xa_a(s), xb_b(s')).
Matrix cross_curve_matrix(const Matrix& xa, const Matrix& xb, const Array& ws, bool symmetric,
                          const KernelSpec& spec) {
  const Eigen::Index na = xa.rows(), nb = xb.rows();
  Matrix out(na, nb);
#pragma omp parallel
  {
    Array hx;
#pragma omp for schedule(dynamic)
    for (Eigen::Index a = 0; a < na; ++a) {
      const Vector row_a = xa.row(a).transpose();
      for (Eigen::Index b = symmetric ? a : 0; b < nb; ++b) {
        x_factor(spec, row_a, xb.row(b).transpose(), hx);
        out(a, b) = (hx * ws).sum();
      }
    }
  }
  if (symmetric)
    for (Eigen::Index a = 0; a < na; ++a)
      for (Eigen::Index b = 0; b < a; ++b) out(a, b) = out(b, a);
  return out;
}

// Rows w_t * v_j(t), J x M.
Matrix weighted_eigenfunctions(const FpcaBasis& basis, Eigen::Index j) {
  return basis.eigenfunctions.topRows(j) * basis.grid.weights.asDiagonal();
}

void check_inputs(const FunctionalSample& x, const FpcaBasis& basis, Eigen::Index j, const char* where) {
  require_same_grid(x.grid, basis.grid, where);
  if (j < 0 || j > basis.components())
    throw InvalidArgument(std::string(where) + ": J exceeds available components");
}

// 2-D inclusive prefix sums, (M+1) x (M+1) with a zero first row and column.
void prefix_sums(const Array& values, Array& out) {
  const Eigen::Index m = values.rows();
  out.setZero(m + 1, m + 1);
  for (Eigen::Index b = 0; b < m; ++b)
    for (Eigen::Index a = 0; a < m; ++a) out(a + 1, b + 1) = values(a, b) + out(a, b + 1) + out(a + 1, b) - out(a, b);
}

}  // namespace

ATensor build_a_bruteforce(const FunctionalSample& x, const FpcaBasis& basis, Eigen::Index j,
                           const KernelSpec& spec) {
  check_inputs(x, basis, j, "build_a_bruteforce");
  const Eigen::Index n = x.n(), m = x.m();
  if (n * m > 500)
    throw SizeLimitError("build_a_bruteforce: n*M = " + std::to_string(n * m) + " exceeds the oracle limit of 500");
  const auto& pts = x.grid.points;
  const auto& w = x.grid.weights;
  const Matrix& v = basis.eigenfunctions;

  ATensor out;
  out.n = n;
  out.j = j;
  out.matrix.setZero(n * j, n * j);

  // k4[t + M*(s + M*(tp + M*sp))] for one (i, i') pair, weights folded in.
  std::vector<double> k4(static_cast<size_t>(m * m * m * m));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index ip = 0; ip < n; ++ip) {
      for (Eigen::Index sp = 0; sp < m; ++sp)
        for (Eigen::Index tp = 0; tp < m; ++tp)
          for (Eigen::Index s = 0; s < m; ++s)
            for (Eigen::Index t = 0; t < m; ++t) {
              const KPoint p{pts(t), pts(s), x.values(ip, s)};
              const KPoint q{pts(tp), pts(sp), x.values(i, sp)};
              k4[static_cast<size_t>(t + m * (s + m * (tp + m * sp)))] =
                  w(t) * w(s) * w(tp) * w(sp) * kernel_eval(spec, p, q);
            }
      for (Eigen::Index jj = 0; jj < j; ++jj)
        for (Eigen::Index jp = 0; jp < j; ++jp) {
          double acc = 0;
          for (Eigen::Index sp = 0; sp < m; ++sp)
            for (Eigen::Index tp = 0; tp < m; ++tp)
              for (Eigen::Index s = 0; s < m; ++s)
                for (Eigen::Index t = 0; t < m; ++t)
                  acc += k4[static_cast<size_t>(t + m * (s + m * (tp + m * sp)))] * v(jp, t) * v(jj, tp);
          out.matrix(i * j + jj, ip * j + jp) = acc;
        }
    }
  }
  return out;
}

CrossDesign CrossDesign::build(const FunctionalSample& x_new, const FunctionalSample& x_train,
                               const FpcaBasis& basis, Eigen::Index j, const KernelSpec& spec) {
  check_inputs(x_train, basis, j, "CrossDesign");
  require_same_grid(x_new.grid, x_train.grid, "CrossDesign");
  const Grid& grid = x_train.grid;
  const Eigen::Index m = grid.size();

  CrossDesign d;
  d.n_new_ = x_new.n();
  d.n_train_ = x_train.n();
  d.m_ = m;
  d.j_ = j;
  d.separable_ = !spec.mask.active();

  const Matrix kt = factor_matrix(spec.family, spec.delta, grid.points, grid.points);
  const Matrix vw_t = weighted_eigenfunctions(basis, j).transpose();  // M x J
  const Array ws = weighted_s_factor(grid, spec);

  if (d.separable_) {
    d.curve_factor_ = cross_curve_matrix(x_new.values, x_train.values, ws, &x_new == &x_train, spec);
    d.time_factor_ = kt * vw_t;
    return d;
  }

  const auto ranges = spec.mask.node_ranges(grid);
  d.dense_.setZero(d.n_new_ * m, d.n_train_ * j);
#pragma omp parallel
  {
    Array hx, prefix, p(m, m);
#pragma omp for schedule(dynamic)
    for (Eigen::Index k = 0; k < d.n_new_; ++k) {
      const Vector row_k = x_new.values.row(k).transpose();
      for (Eigen::Index i = 0; i < d.n_train_; ++i) {
        x_factor(spec, row_k, x_train.values.row(i).transpose(), hx);
        prefix_sums(hx * ws, prefix);
        for (Eigen::Index tp = 0; tp < m; ++tp) {
          const auto [f2, l2] = ranges[tp];
          for (Eigen::Index t = 0; t < m; ++t) {
            const auto [f1, l1] = ranges[t];
            p(t, tp) = prefix(l1, l2) - prefix(f1, l2) - prefix(l1, f2) + prefix(f1, f2);
          }
        }
        d.dense_.block(k * m, i * j, m, j).noalias() = (kt.array() * p).matrix() * vw_t;
      }
    }
  }
  return d;
}

Matrix CrossDesign::apply(const Matrix& alpha) const {
  if (alpha.rows() != n_train_ || alpha.cols() != j_) throw InvalidArgument("CrossDesign::apply: alpha shape");
  if (separable_) return curve_factor_ * alpha * time_factor_.transpose();
  const Vector flat = dense_ * flatten(alpha);
  Matrix out(n_new_, m_);
  for (Eigen::Index k = 0; k < n_new_; ++k) out.row(k) = flat.segment(k * m_, m_).transpose();
  return out;
}

CrossDesign CrossDesign::subset(const std::vector<Eigen::Index>& new_rows,
                                const std::vector<Eigen::Index>& train_cols) const {
  CrossDesign d;
  d.separable_ = separable_;
  d.n_new_ = static_cast<Eigen::Index>(new_rows.size());
  d.n_train_ = static_cast<Eigen::Index>(train_cols.size());
  d.m_ = m_;
  d.j_ = j_;
  if (separable_) {
    d.curve_factor_ = curve_factor_(new_rows, train_cols);
    d.time_factor_ = time_factor_;
    return d;
  }
  d.dense_.resize(d.n_new_ * m_, d.n_train_ * j_);
  for (Eigen::Index a = 0; a < d.n_new_; ++a)
    for (Eigen::Index b = 0; b < d.n_train_; ++b)
      d.dense_.block(a * m_, b * j_, m_, j_) = dense_.block(new_rows[a] * m_, train_cols[b] * j_, m_, j_);
  return d;
}

ATensor CrossDesign::to_a_tensor(const FpcaBasis& basis) const {
  if (n_new_ != n_train_) throw InvalidArgument("CrossDesign::to_a_tensor: design is not square in curves");
  const Matrix vw = weighted_eigenfunctions(basis, j_);  // J x M
  ATensor a;
  a.n = n_train_;
  a.j = j_;
  a.matrix.resize(n_train_ * j_, n_train_ * j_);
  if (separable_) {
    KroneckerFactors f;
    f.curves = curve_factor_;
    f.components = vw * time_factor_;
    f.components = 0.5 * (f.components + f.components.transpose()).eval();
    for (Eigen::Index i = 0; i < a.n; ++i)
      for (Eigen::Index ip = 0; ip < a.n; ++ip) a.matrix.block(i * j_, ip * j_, j_, j_) = f.curves(i, ip) * f.components;
    a.kron = std::move(f);
    return a;
  }
  for (Eigen::Index i = 0; i < a.n; ++i)
    for (Eigen::Index ip = 0; ip < a.n; ++ip)
      a.matrix.block(i * j_, ip * j_, j_, j_).noalias() = vw * dense_.block(i * m_, ip * j_, m_, j_);
  a.matrix = 0.5 * (a.matrix + a.matrix.transpose()).eval();
  return a;
}

ATensor build_a_fast(const FunctionalSample& x, const FpcaBasis& basis, Eigen::Index j, const KernelSpec& spec) {
  return CrossDesign::build(x, x, basis, j, spec).to_a_tensor(basis);
}

Vector flatten(const Matrix& alpha) {
  Vector out(alpha.size());
  for (Eigen::Index i = 0; i < alpha.rows(); ++i) out.segment(i * alpha.cols(), alpha.cols()) = alpha.row(i).transpose();
  return out;
}

Matrix unflatten(const Vector& alpha_v, Eigen::Index n, Eigen::Index j) {
  if (alpha_v.size() != n * j) throw InvalidArgument("unflatten: length is not n*J");
  Matrix out(n, j);
  for (Eigen::Index i = 0; i < n; ++i) out.row(i) = alpha_v.segment(i * j, j).transpose();
  return out;
}

Vector y_coeffs(const FunctionalSample& y_centered, const FpcaBasis& basis, Eigen::Index j) {
  require_same_grid(y_centered.grid, basis.grid, "y_coeffs");
  if (j < 0 || j > basis.components()) throw InvalidArgument("y_coeffs: J exceeds available components");
  const Matrix scores = y_centered.values * weighted_eigenfunctions(basis, j).transpose();
  return flatten(scores);
}

Vector solve(const ATensor& a, const Vector& y_v, double lambda) {
  if (!(lambda > 0) || !std::isfinite(lambda)) throw InvalidArgument("solve: lambda must be positive and finite");
  if (y_v.size() != a.matrix.rows()) throw InvalidArgument("solve: dimension mismatch");
  if (!a.matrix.allFinite() || !y_v.allFinite()) throw InvalidArgument("solve: non-finite input");

  Matrix system = a.matrix;
  system.diagonal().array() += lambda;
  Eigen::LLT<Matrix> llt(system);
  if (llt.info() == Eigen::Success) {
    Vector alpha = llt.solve(y_v);
    if (alpha.allFinite()) return alpha;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.matrix);
  if (es.info() != Eigen::Success) throw NumericError("solve: eigendecomposition failed");
  const Vector d = es.eigenvalues().cwiseMax(0.0).array() + lambda;
  return es.eigenvectors() * ((es.eigenvectors().transpose() * y_v).cwiseQuotient(d));
}

SpectralRidge::SpectralRidge(const ATensor& a) : n_(a.n), j_(a.j) {
  if (a.kron) {
    kron_ = true;
    Eigen::SelfAdjointEigenSolver<Matrix> ew(a.kron->curves), eb(a.kron->components);
    if (ew.info() != Eigen::Success || eb.info() != Eigen::Success)
      throw NumericError("SpectralRidge: eigendecomposition failed");
    u_ = ew.eigenvectors();
    q_ = eb.eigenvectors();
    const Vector lw = ew.eigenvalues().cwiseMax(0.0), lb = eb.eigenvalues().cwiseMax(0.0);
    eigenvalues_.resize(n_ * j_);
    for (Eigen::Index i = 0; i < n_; ++i) eigenvalues_.segment(i * j_, j_) = lw(i) * lb;
    return;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.matrix);
  if (es.info() != Eigen::Success) throw NumericError("SpectralRidge: eigendecomposition failed");
  v_ = es.eigenvectors();
  eigenvalues_ = es.eigenvalues().cwiseMax(0.0);
}

Vector SpectralRidge::to_spectral(const Vector& y) const {
  if (kron_) return flatten(u_.transpose() * unflatten(y, n_, j_) * q_);
  return v_.transpose() * y;
}

Vector SpectralRidge::from_spectral(const Vector& z) const {
  if (kron_) return flatten(u_ * unflatten(z, n_, j_) * q_.transpose());
  return v_ * z;
}

Vector SpectralRidge::solve(const Vector& y_v, double lambda) const {
  if (!(lambda > 0)) throw InvalidArgument("SpectralRidge::solve: lambda must be positive");
  return from_spectral(to_spectral(y_v).cwiseQuotient((eigenvalues_.array() + lambda).matrix()));
}

Vector SpectralRidge::fitted(const Vector& y_v, double lambda) const {
  const Vector shrink = eigenvalues_.array() / (eigenvalues_.array() + lambda);
  return from_spectral(to_spectral(y_v).cwiseProduct(shrink));
}

double SpectralRidge::trace_smoother(double lambda) const {
  return (eigenvalues_.array() / (eigenvalues_.array() + lambda)).sum();
}

AffrProblem prepare_problem(const FunctionalSample& x, const FunctionalSample& y, const KernelSpec& spec,
                            const TruncationRule& rule) {
  if (x.n() != y.n()) throw InvalidArgument("prepare_problem: x and y have different numbers of curves");
  require_same_grid(x.grid, y.grid, "prepare_problem");
  AffrProblem p;
  p.x = x;
  p.y = y;
  p.kernel = spec;
  p.basis = fpca(y, rule);
  p.y_mean = p.basis.mean_curve;
  const auto centered = center(y);
  p.y_v = y_coeffs(centered.sample, p.basis, p.basis.components());
  p.design = CrossDesign::build(p.x, p.x, p.basis, p.basis.components(), spec);
  p.a = p.design.to_a_tensor(p.basis);
  return p;
}

AffrModel fit(const AffrProblem& problem, double lambda) {
  AffrModel model;
  model.x_train = problem.x;
  model.basis = problem.basis;
  model.kernel = problem.kernel;
  model.lambda = lambda;
  model.y_mean = problem.y_mean;
  const Eigen::Index j = problem.j();
  if (j == 0) {
    model.alpha = Matrix::Zero(problem.n(), 0);
    return model;
  }
  model.alpha = unflatten(solve(problem.a, problem.y_v, lambda), problem.n(), j);
  return model;
}

AffrModel fit(const FunctionalSample& x, const FunctionalSample& y, const KernelSpec& spec,
              const TruncationRule& rule, double lambda) {
  return fit(prepare_problem(x, y, spec, rule), lambda);
}

double predict_g(const AffrModel& model, double t, double s, double x) {
  const KernelSpec& spec = model.kernel;
  if (spec.mask.active() && !spec.mask.contains(t, s)) return 0.0;
  const Grid& grid = model.grid();
  const Eigen::Index m = grid.size();
  const auto ranges = spec.mask.node_ranges(grid);
  const Matrix coef = model.alpha * model.basis.eigenfunctions.topRows(model.j());  // n x M: sum_j alpha_ij v_j(t')
  double acc = 0;
  for (Eigen::Index i = 0; i < model.n(); ++i) {
    for (Eigen::Index tp = 0; tp < m; ++tp) {
      const double kt = kernel_factor(spec.family, spec.delta, t, grid.points(tp));
      double inner = 0;
      for (Eigen::Index sp = ranges[tp].first; sp < ranges[tp].second; ++sp)
        inner += grid.weights(sp) * kernel_factor(spec.family, spec.delta, s, grid.points(sp)) *
                 kernel_factor(spec.family, spec.delta, x, model.x_train.values(i, sp));
      acc += grid.weights(tp) * kt * coef(i, tp) * inner;
    }
  }
  return acc;
}

Matrix g_surface(const AffrModel& model, const Vector& x_new) {
  const Grid& grid = model.grid();
  const Eigen::Index m = grid.size();
  if (x_new.size() != m) throw InvalidArgument("g_surface: curve length does not match grid");
  const KernelSpec& spec = model.kernel;
  const Matrix hs = factor_matrix(spec.family, spec.delta, grid.points, grid.points);
  const Matrix kt = hs;  // same one-dimensional factor on the same nodes
  const Array hs_w = (hs * grid.weights.asDiagonal()).array();  // H_s(s,s') w_s'
  const Matrix vw = weighted_eigenfunctions(model.basis, model.j());

  Array hx;
  if (!spec.mask.active()) {
    Matrix h(model.n(), m);
    for (Eigen::Index i = 0; i < model.n(); ++i) {
      x_factor(spec, x_new, model.x_train.values.row(i).transpose(), hx);
      h.row(i) = (hx * hs_w).rowwise().sum().transpose();
    }
    const Matrix time = kt * vw.transpose();  // M x J
    return time * model.alpha.transpose() * h;
  }

  const auto ranges = spec.mask.node_ranges(grid);
  const Matrix u = model.alpha * vw;  // n x M: w_t' sum_j alpha_ij v_j(t')
  Matrix s_acc = Matrix::Zero(m, m);  // (t', s)
  Array cum(m, m + 1);
  for (Eigen::Index i = 0; i < model.n(); ++i) {
    x_factor(spec, x_new, model.x_train.values.row(i).transpose(), hx);
    const Array weighted = hx * hs_w;  // (s, s')
    cum.col(0).setZero();
    for (Eigen::Index sp = 0; sp < m; ++sp) cum.col(sp + 1) = cum.col(sp) + weighted.col(sp);
    for (Eigen::Index tp = 0; tp < m; ++tp) {
      const auto [f, l] = ranges[tp];
      s_acc.row(tp) += u(i, tp) * (cum.col(l) - cum.col(f)).matrix().transpose();
    }
  }
  Matrix g = kt * s_acc;
  for (Eigen::Index t = 0; t < m; ++t) {
    const auto [f, l] = ranges[t];
    for (Eigen::Index s = 0; s < m; ++s)
      if (s < f || s >= l) g(t, s) = 0.0;
  }
  return g;
}

Vector predict_curve(const AffrModel& model, const Vector& x_new) {
  const Grid& grid = model.grid();
  if (x_new.size() != grid.size()) throw InvalidArgument("predict_curve: curve length does not match grid");
  const Matrix g = g_surface(model, x_new);
  const auto ranges = model.kernel.mask.node_ranges(grid);
  Vector out = model.y_mean;
  for (Eigen::Index t = 0; t < grid.size(); ++t) {
    double acc = 0;
    for (Eigen::Index s = ranges[t].first; s < ranges[t].second; ++s) acc += grid.weights(s) * g(t, s);
    out(t) += acc;
  }
  return out;
}

FunctionalSample predict_curves(const AffrModel& model, const FunctionalSample& x_new) {
  require_same_grid(x_new.grid, model.grid(), "predict_curves");
  Matrix out(x_new.n(), x_new.m());
  if (!model.kernel.mask.active() && model.j() > 0) {
    const CrossDesign d = CrossDesign::build(x_new, model.x_train, model.basis, model.j(), model.kernel);
    out = d.apply(model.alpha).rowwise() + model.y_mean.transpose();
  } else {
    for (Eigen::Index k = 0; k < x_new.n(); ++k) out.row(k) = predict_curve(model, x_new.values.row(k).transpose());
  }
  return FunctionalSample(x_new.grid, std::move(out));
}

double objective(const ATensor& a, const Vector& y_v, const Vector& alpha, double lambda) {
  const Vector a_alpha = a.matrix * alpha;
  return (y_v - a_alpha).squaredNorm() + lambda * alpha.dot(a_alpha);
}

double objective(const AffrModel& model, const FunctionalSample& x, const FunctionalSample& y, double lambda) {
  require_same_grid(x.grid, model.grid(), "objective");
  const ATensor a = build_a_fast(x, model.basis, model.j(), model.kernel);
  const Matrix centered = y.values.rowwise() - model.y_mean.transpose();
  const Vector y_v = y_coeffs(FunctionalSample(y.grid, centered), model.basis, model.j());
  return objective(a, y_v, flatten(model.alpha), lambda);
}

}  // namespace affr
