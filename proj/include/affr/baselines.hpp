#pragma once

// Function-on-function linear comparators. Both regress on the first J_X
// predictor scores. LMR also reduces the response to J_Y scores; LMF
// regresses every grid value of the response separately.

#include "affr/curves.hpp"

namespace affr {

enum class LinearVariant { lmr, lmf };

struct LinearFofModel {
  LinearVariant variant = LinearVariant::lmf;
  FpcaBasis x_basis;  // J_X components
  FpcaBasis y_basis;  // J_Y components (LMR only)
  Matrix coefficients;  // LMR: J_Y x J_X; LMF: M x J_X
  Vector x_mean;
  Vector y_mean;
  bool singular_design = false;

  const Grid& grid() const { return x_basis.grid; }
};

LinearFofModel fit_lmr(const FunctionalSample& x, const FunctionalSample& y, Eigen::Index jx, Eigen::Index jy);
LinearFofModel fit_lmf(const FunctionalSample& x, const FunctionalSample& y, Eigen::Index jx);

FunctionalSample predict_linear(const LinearFofModel& model, const FunctionalSample& x_new);

}  // namespace affr
