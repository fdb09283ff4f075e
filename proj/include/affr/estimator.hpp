#pragma once

// Additive function-on-function regression in an RKHS of trivariate kernels.
//
// The fitted surface is
//   g(t,s,x) = sum_ij alpha_ij  int int k((t,s,x); (t',s',X_i(s'))) v_j(t') dt' ds'
// with v_j the response eigenfunctions. Coefficients solve the ridge system
//   (A_V + lambda I) alpha = Y_V
// where A_V is the (nJ x nJ) matrix A[(i,j),(i',j')] in i-major layout
// (row i*J + j) and Y_V[i*J + j] = <Y_i - mean, v_j>.

#include <Eigen/Dense>

#include <optional>

#include "affr/curves.hpp"
#include "affr/kernels.hpp"

namespace affr {

/// Unmasked kernels make A_V a Kronecker product W (x) B.
struct KroneckerFactors {
  Matrix curves;      // W, n x n: int int H(s,s',X_i'(s),X_i(s')) ds ds'
  Matrix components;  // B, J x J: int int K_T(t,t') v_j'(t) v_j(t') dt dt'
};

struct ATensor {
  Matrix matrix;
  Eigen::Index n = 0;
  Eigen::Index j = 0;
  std::optional<KroneckerFactors> kron;

  double mean_diagonal() const { return matrix.size() ? matrix.diagonal().mean() : 0.0; }
};

/// Direct four-fold quadrature of A over (t,s,t',s'). Refuses n*M > 500.
ATensor build_a_bruteforce(const FunctionalSample& x, const FpcaBasis& basis, Eigen::Index j,
                           const KernelSpec& spec);

/// Separable evaluation of A. Unmasked: W (x) B. Masked: 2-D prefix sums of
/// the cross factor over the s-domains, contracted with K_T and the v_j.
ATensor build_a_fast(const FunctionalSample& x, const FpcaBasis& basis, Eigen::Index j, const KernelSpec& spec);

/// Linear map from coefficients (n_train x J) to predicted centered curves
/// (n_new x M) for a fixed set of new covariate curves:
///   yhat_k(t) = sum_ij alpha_ij F[k*M + t, i*J + j].
/// Stored as curve_factor (n_new x n_train) and time_factor (M x J) when
/// unmasked, as the dense F otherwise.
class CrossDesign {
 public:
  static CrossDesign build(const FunctionalSample& x_new, const FunctionalSample& x_train, const FpcaBasis& basis,
                           Eigen::Index j, const KernelSpec& spec);

  bool separable() const { return separable_; }
  Eigen::Index rows() const { return n_new_; }
  Eigen::Index cols() const { return n_train_; }

  /// Centered predictions, n_new x M.
  Matrix apply(const Matrix& alpha) const;

  /// Restrict to a subset of new curves and a subset of training curves.
  CrossDesign subset(const std::vector<Eigen::Index>& new_rows, const std::vector<Eigen::Index>& train_cols) const;

  /// A_V = (I (x) Vw) F when x_new is the training sample itself.
  ATensor to_a_tensor(const FpcaBasis& basis) const;

  const Matrix& curve_factor() const { return curve_factor_; }
  const Matrix& time_factor() const { return time_factor_; }
  const Matrix& dense() const { return dense_; }

 private:
  bool separable_ = true;
  Eigen::Index n_new_ = 0, n_train_ = 0, m_ = 0, j_ = 0;
  Matrix curve_factor_;
  Matrix time_factor_;
  Matrix dense_;
};

/// Y_V[i*J + j] = <Y_i, v_j> for already-centered responses.
Vector y_coeffs(const FunctionalSample& y_centered, const FpcaBasis& basis, Eigen::Index j);

/// Solves (A_V + lambda I) alpha = Y_V by Cholesky, falling back to an
/// eigendecomposition with negative eigenvalues clipped to zero.
Vector solve(const ATensor& a, const Vector& y_v, double lambda);

/// Eigendecomposition of A_V reused across many lambda values.
/// For Kronecker tensors only the two factors are decomposed.
class SpectralRidge {
 public:
  explicit SpectralRidge(const ATensor& a);

  Vector solve(const Vector& y_v, double lambda) const;
  /// A_V alpha for the ridge solution.
  Vector fitted(const Vector& y_v, double lambda) const;
  /// tr(S) with S = A_V (A_V + lambda I)^{-1}.
  double trace_smoother(double lambda) const;
  Eigen::Index size() const { return eigenvalues_.size(); }

 private:
  Vector to_spectral(const Vector& y) const;
  Vector from_spectral(const Vector& z) const;

  bool kron_ = false;
  Eigen::Index n_ = 0, j_ = 0;
  Vector eigenvalues_;  // length nJ, i-major when kron_
  Matrix u_, q_;        // kron: eigenvectors of W and B
  Matrix v_;            // dense: eigenvectors of A_V
};

struct AffrModel {
  Matrix alpha;  // n x J
  FunctionalSample x_train;
  FpcaBasis basis;  // truncated at J
  KernelSpec kernel;
  double lambda = 0.0;
  Vector y_mean;

  const Grid& grid() const { return x_train.grid; }
  Eigen::Index n() const { return alpha.rows(); }
  Eigen::Index j() const { return alpha.cols(); }
};

/// Everything needed to fit for any lambda: centered responses, basis, A_V
/// and the in-sample cross-design.
struct AffrProblem {
  FunctionalSample x;
  FunctionalSample y;
  KernelSpec kernel;
  FpcaBasis basis;
  Vector y_mean;
  Vector y_v;
  ATensor a;
  CrossDesign design;

  Eigen::Index n() const { return x.n(); }
  Eigen::Index j() const { return basis.components(); }
};

AffrProblem prepare_problem(const FunctionalSample& x, const FunctionalSample& y, const KernelSpec& spec,
                            const TruncationRule& rule);

AffrModel fit(const AffrProblem& problem, double lambda);
AffrModel fit(const FunctionalSample& x, const FunctionalSample& y, const KernelSpec& spec,
              const TruncationRule& rule, double lambda);

/// g at one point by direct double quadrature over the training curves.
double predict_g(const AffrModel& model, double t, double s, double x);

/// g(t_m, s_k, x(s_k)) on the grid (rows t, columns s); zero where s is outside A_t.
Matrix g_surface(const AffrModel& model, const Vector& x_new);

/// Yhat(t) = y_mean(t) + sum_{s in A_t} w_s g(t, s, x(s)).
Vector predict_curve(const AffrModel& model, const Vector& x_new);
FunctionalSample predict_curves(const AffrModel& model, const FunctionalSample& x_new);

/// RSS in the J-dimensional response span plus lambda * alpha' A_V alpha.
double objective(const AffrModel& model, const FunctionalSample& x, const FunctionalSample& y, double lambda);
double objective(const ATensor& a, const Vector& y_v, const Vector& alpha, double lambda);

/// Flatten an n x J coefficient matrix in i-major order and back.
Vector flatten(const Matrix& alpha);
Matrix unflatten(const Vector& alpha_v, Eigen::Index n, Eigen::Index j);

}  // namespace affr
