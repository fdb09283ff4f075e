#pragma once

// Penalty selection over lambda grids: K-fold cross-validation on held-out
// integrated squared error, and generalized cross-validation on the
// coefficient system.

#include <cstdint>
#include <vector>

#include "affr/estimator.hpp"
#include "affr/ingest.hpp"

namespace affr {

/// Candidate penalties, nondecreasing. A relative grid is multiplied by the
/// mean diagonal of A_V before use.
struct LambdaGrid {
  std::vector<double> values;
  bool relative = false;

  static LambdaGrid log_spaced(double lo, double hi, int count, bool relative = false);
  static LambdaGrid from_values(std::vector<double> values, bool relative = false);
  /// 25 log-spaced values in [1e-8, 1e2], relative.
  static LambdaGrid standard();

  std::vector<double> resolve(double scale) const;
};

struct SelectionResult {
  double lambda = 0.0;
  std::vector<double> lambdas;  // resolved grid
  std::vector<double> scores;   // CV mean held-out ISE, or GCV
};

/// Index of the minimum score; near-ties (1e-12 relative) go to the later,
/// i.e. larger, lambda.
std::size_t argmin_prefer_larger(const std::vector<double>& scores);

SelectionResult kfold_cv(const AffrProblem& problem, const LambdaGrid& grid, Eigen::Index folds,
                         FoldMode mode = FoldMode::contiguous, std::uint64_t seed = 0);
SelectionResult kfold_cv(const FunctionalSample& x, const FunctionalSample& y, const KernelSpec& spec,
                         const TruncationRule& rule, const LambdaGrid& grid, Eigen::Index folds,
                         FoldMode mode = FoldMode::contiguous, std::uint64_t seed = 0);

/// (1/N)||(I - S)Y||^2 / [(1/N) tr(I - S)]^2 with S = A_V (A_V + lambda I)^{-1}, N = nJ.
double gcv(const SpectralRidge& ridge, const Vector& y_v, double lambda);
double gcv(const ATensor& a, const Vector& y_v, double lambda);

SelectionResult select_gcv(const AffrProblem& problem, const LambdaGrid& grid);
SelectionResult select_gcv(const FunctionalSample& x, const FunctionalSample& y, const KernelSpec& spec,
                           const TruncationRule& rule, const LambdaGrid& grid);

}  // namespace affr
