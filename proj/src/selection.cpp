#include "affr/selection.hpp"

#include <cmath>
#include <string>

#include "affr/errors.hpp"

namespace affr {

LambdaGrid LambdaGrid::log_spaced(double lo, double hi, int count, bool relative) {
  if (!(lo > 0) || !(hi >= lo) || count < 1) throw InvalidArgument("LambdaGrid: need 0 < lo <= hi and count >= 1");
  LambdaGrid g;
  g.relative = relative;
  const double a = std::log10(lo), b = std::log10(hi);
  for (int k = 0; k < count; ++k) g.values.push_back(count == 1 ? lo : std::pow(10.0, a + (b - a) * k / (count - 1)));
  return g;
}

LambdaGrid LambdaGrid::from_values(std::vector<double> values, bool relative) {
  if (values.empty()) throw InvalidArgument("LambdaGrid: empty grid");
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!(values[k] > 0) || !std::isfinite(values[k])) throw InvalidArgument("LambdaGrid: values must be positive");
    if (k > 0 && values[k] < values[k - 1]) throw InvalidArgument("LambdaGrid: values must be nondecreasing");
  }
  return {std::move(values), relative};
}

LambdaGrid LambdaGrid::standard() { return log_spaced(1e-8, 1e2, 25, true); }

std::vector<double> LambdaGrid::resolve(double scale) const {
  if (!relative) return values;
  if (!(scale > 0)) scale = 1.0;
  std::vector<double> out(values);
  for (auto& v : out) v *= scale;
  return out;
}

std::size_t argmin_prefer_larger(const std::vector<double>& scores) {
  if (scores.empty()) throw InvalidArgument("argmin_prefer_larger: no scores");
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k)
    if (scores[k] <= scores[best] + 1e-12 * std::abs(scores[best])) best = k;
  return best;
}

SelectionResult kfold_cv(const AffrProblem& problem, const LambdaGrid& grid, Eigen::Index folds, FoldMode mode,
                         std::uint64_t seed) {
  const Eigen::Index n = problem.n(), j = problem.j();
  const auto fold_sets = fold_split(n, folds, mode, seed);
  for (const auto& f : fold_sets)
    if (f.size() < 2) throw InvalidArgument("kfold_cv: every fold needs at least 2 curves");

  SelectionResult result;
  result.lambdas = grid.resolve(problem.a.mean_diagonal());
  result.scores.assign(result.lambdas.size(), 0.0);

  const Grid& g = problem.y.grid;
  const Matrix y_centered = problem.y.values.rowwise() - problem.y_mean.transpose();
  const Matrix y_scores = unflatten(problem.y_v, n, j);

  for (const auto& held : fold_sets) {
    std::vector<Eigen::Index> train;
    std::vector<bool> is_held(static_cast<size_t>(n), false);
    for (auto k : held) is_held[k] = true;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!is_held[i]) train.push_back(i);

    const Matrix y_held = y_centered(held, Eigen::all);
    if (j == 0) {
      const double ise = (y_held.array().square().matrix() * g.weights).sum();
      for (auto& s : result.scores) s += ise;
      continue;
    }

    ATensor a_train;
    a_train.n = static_cast<Eigen::Index>(train.size());
    a_train.j = j;
    std::vector<Eigen::Index> idx;
    for (auto i : train)
      for (Eigen::Index c = 0; c < j; ++c) idx.push_back(i * j + c);
    if (problem.a.kron) {
      a_train.kron = KroneckerFactors{problem.a.kron->curves(train, train), problem.a.kron->components};
    } else {
      a_train.matrix = problem.a.matrix(idx, idx);
    }
    const SpectralRidge ridge(a_train);
    const Vector y_train = flatten(y_scores(train, Eigen::all));
    const CrossDesign design = problem.design.subset(held, train);

    for (std::size_t k = 0; k < result.lambdas.size(); ++k) {
      const Matrix alpha = unflatten(ridge.solve(y_train, result.lambdas[k]), a_train.n, j);
      const Matrix resid = y_held - design.apply(alpha);
      result.scores[k] += (resid.array().square().matrix() * g.weights).sum();
    }
  }
  for (auto& s : result.scores) s /= static_cast<double>(n);
  result.lambda = result.lambdas[argmin_prefer_larger(result.scores)];
  return result;
}

SelectionResult kfold_cv(const FunctionalSample& x, const FunctionalSample& y, const KernelSpec& spec,
                         const TruncationRule& rule, const LambdaGrid& grid, Eigen::Index folds, FoldMode mode,
                         std::uint64_t seed) {
  return kfold_cv(prepare_problem(x, y, spec, rule), grid, folds, mode, seed);
}

double gcv(const SpectralRidge& ridge, const Vector& y_v, double lambda) {
  if (!(lambda > 0)) throw InvalidArgument("gcv: lambda must be positive");
  const double n = static_cast<double>(ridge.size());
  if (n == 0) throw InvalidState("gcv: empty system");
  const double residual = (y_v - ridge.fitted(y_v, lambda)).squaredNorm() / n;
  const double dof = 1.0 - ridge.trace_smoother(lambda) / n;
  if (!(dof > 1e-14)) throw InvalidState("gcv: tr(I - S) is not positive at lambda = " + std::to_string(lambda));
  return residual / (dof * dof);
}

double gcv(const ATensor& a, const Vector& y_v, double lambda) { return gcv(SpectralRidge(a), y_v, lambda); }

SelectionResult select_gcv(const AffrProblem& problem, const LambdaGrid& grid) {
  SelectionResult result;
  result.lambdas = grid.resolve(problem.a.mean_diagonal());
  if (problem.j() == 0) {
    result.scores.assign(result.lambdas.size(), 0.0);
    result.lambda = result.lambdas.back();
    return result;
  }
  const SpectralRidge ridge(problem.a);
  for (double lambda : result.lambdas) result.scores.push_back(gcv(ridge, problem.y_v, lambda));
  result.lambda = result.lambdas[argmin_prefer_larger(result.scores)];
  return result;
}

SelectionResult select_gcv(const FunctionalSample& x, const FunctionalSample& y, const KernelSpec& spec,
                           const TruncationRule& rule, const LambdaGrid& grid) {
  return select_gcv(prepare_problem(x, y, spec, rule), grid);
}

}  // namespace affr
