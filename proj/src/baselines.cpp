#include "affr/baselines.hpp"

#include "affr/errors.hpp"

namespace affr {

namespace {

struct LeastSquares {
  Matrix coefficients;  // p x q
  bool singular = false;
};

// Least-norm solution of design * B = targets via complete orthogonal decomposition.
LeastSquares least_squares(const Matrix& design, const Matrix& targets) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(design);
  LeastSquares out;
  out.singular = cod.rank() < design.cols();
  out.coefficients = cod.solve(targets);
  return out;
}

FpcaBasis predictor_basis(const FunctionalSample& x, Eigen::Index jx) {
  FpcaBasis basis = fpca(x, TruncationRule::fixed(jx));
  if (basis.components() < jx) throw InvalidArgument("linear model: J_X exceeds the numerical rank of X");
  return basis;
}

}  // namespace

LinearFofModel fit_lmr(const FunctionalSample& x, const FunctionalSample& y, Eigen::Index jx, Eigen::Index jy) {
  if (x.n() != y.n()) throw InvalidArgument("fit_lmr: x and y have different numbers of curves");
  require_same_grid(x.grid, y.grid, "fit_lmr");
  LinearFofModel model;
  model.variant = LinearVariant::lmr;
  model.x_basis = predictor_basis(x, jx);
  model.y_basis = fpca(y, TruncationRule::fixed(jy));
  model.x_mean = model.x_basis.mean_curve;
  model.y_mean = model.y_basis.mean_curve;

  const Matrix sx = project_scores(x, model.x_basis, jx);
  const Matrix sy = project_scores(y, model.y_basis, model.y_basis.components());
  const auto ls = least_squares(sx, sy);  // J_X x J_Y
  model.coefficients = ls.coefficients.transpose();
  model.singular_design = ls.singular;
  return model;
}

LinearFofModel fit_lmf(const FunctionalSample& x, const FunctionalSample& y, Eigen::Index jx) {
  if (x.n() != y.n()) throw InvalidArgument("fit_lmf: x and y have different numbers of curves");
  require_same_grid(x.grid, y.grid, "fit_lmf");
  LinearFofModel model;
  model.variant = LinearVariant::lmf;
  model.x_basis = predictor_basis(x, jx);
  model.x_mean = model.x_basis.mean_curve;
  model.y_mean = y.values.colwise().mean().transpose();

  const Matrix sx = project_scores(x, model.x_basis, jx);
  const Matrix yc = y.values.rowwise() - model.y_mean.transpose();
  const auto ls = least_squares(sx, yc);  // J_X x M
  model.coefficients = ls.coefficients.transpose();
  model.singular_design = ls.singular;
  return model;
}

FunctionalSample predict_linear(const LinearFofModel& model, const FunctionalSample& x_new) {
  require_same_grid(x_new.grid, model.grid(), "predict_linear");
  const Matrix scores = project_scores(x_new, model.x_basis, model.x_basis.components());
  Matrix centered;
  if (model.variant == LinearVariant::lmr)
    centered = scores * model.coefficients.transpose() * model.y_basis.eigenfunctions;
  else
    centered = scores * model.coefficients.transpose();
  return FunctionalSample(x_new.grid, centered.rowwise() + model.y_mean.transpose());
}

}  // namespace affr
