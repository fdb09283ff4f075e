#pragma once

// Synthetic data and experiment engine: Matern-5/2 Gaussian processes, the
// three regression surfaces, prediction-error metrics, Monte-Carlo excess
// risk, rate studies and table runs.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "affr/estimator.hpp"
#include "affr/ingest.hpp"
#include "affr/selection.hpp"

namespace affr {

enum class ScenarioTag { a, b, c };

std::string to_string(ScenarioTag tag);
ScenarioTag parse_scenario(const std::string& name);

/// (a) t s x, (b) t + s + x^2, (c) t s x^2 + x^4.
double scenario_g(ScenarioTag tag, double t, double s, double x);

struct Scenario {
  ScenarioTag tag = ScenarioTag::a;
  double g(double t, double s, double x) const { return scenario_g(tag, t, s, x); }
};

/// Deterministic child seed for stream `stream` of `master` (splitmix64).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

double matern52(double lag, double rho);

struct MaternCov {
  Grid grid;
  double rho = 0.25;
  Matrix matrix;
};

MaternCov matern_cov(const Grid& grid, double rho);

/// Lower Cholesky factor of the covariance, adding jitter 1e-10 ... 1e-6 only if needed.
Matrix gp_factor(const MaternCov& cov);

FunctionalSample sample_gp(const MaternCov& cov, Eigen::Index n, std::mt19937_64& rng);
FunctionalSample sample_gp(const MaternCov& cov, Eigen::Index n, std::uint64_t seed);

struct Dataset {
  FunctionalSample x;
  FunctionalSample y;
  FunctionalSample truth;  // E[Y | X]
};

/// Y_i(t) = sum_s w_s g(t, s, X_i(s)) + noise_scale * eps_i(t); X and eps are
/// independent Matern GPs drawn from one seeded stream (X first).
Dataset gen_dataset(ScenarioTag tag, Eigen::Index n, Eigen::Index m, double rho, std::uint64_t seed,
                    double noise_scale = 1.0);
Dataset gen_dataset(ScenarioTag tag, Eigen::Index n, const MaternCov& cov, std::mt19937_64& rng,
                    double noise_scale = 1.0);

/// sum_i ||Y_i - Yhat_i||^2 by quadrature.
double mspe(const FunctionalSample& y, const Matrix& y_hat);

/// (MSPE_mean - MSPE) / MSPE_mean, with the mean-only prediction y_train_mean.
double rpe(const FunctionalSample& y_test, const FunctionalSample& y_hat, const Vector& y_train_mean);

struct RiskEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Fitted surface on the (t, s) grid for one covariate curve.
using SurfaceFn = std::function<Matrix(const Vector& x)>;

/// Monte-Carlo estimate of E int int (ghat(t,s,X(s)) - g(t,s,X(s)))^2 dt ds
/// over fresh Matern draws of X.
RiskEstimate excess_risk(const SurfaceFn& surface, const Grid& grid, ScenarioTag tag, Eigen::Index n_mc, double rho,
                         std::uint64_t seed);

/// The fitted surface includes the response mean, spread evenly over A_t, so
/// that its s-integral is the model's prediction.
RiskEstimate excess_risk(const AffrModel& model, ScenarioTag tag, Eigen::Index n_mc, double rho, std::uint64_t seed);

struct FitOptions {
  TruncationRule rule = TruncationRule::fixed(3);
  LambdaGrid grid = LambdaGrid::standard();
  Eigen::Index folds = 5;
  bool use_gcv = false;
  std::uint64_t seed = 0;
};

/// Prepare, select lambda, fit.
AffrModel fit_selected(const FunctionalSample& x, const FunctionalSample& y, const KernelSpec& spec,
                       const FitOptions& options, SelectionResult* selection = nullptr);

struct RateRow {
  Eigen::Index n = 0;
  double median_risk = 0.0;
  std::vector<double> risks;
};

struct RateStudy {
  std::vector<RateRow> rows;
  double slope = 0.0;  // least-squares slope of log median risk on log n
};

struct RateConfig {
  ScenarioTag scenario = ScenarioTag::b;
  std::vector<Eigen::Index> ns{25, 50, 100, 200};
  Eigen::Index reps = 30;
  KernelSpec kernel{KernelFamily::gaussian, 1.0};
  FitOptions fit;
  Eigen::Index m = 50;
  double rho = 0.25;
  Eigen::Index n_mc = 50;
  std::uint64_t seed = 1;
};

RateStudy rate_study(const RateConfig& config);

struct TableConfig {
  std::vector<ScenarioTag> scenarios{ScenarioTag::a, ScenarioTag::b, ScenarioTag::c};
  Eigen::Index n_train = 150;
  Eigen::Index n_test = 150;
  Eigen::Index m = 50;
  double rho = 0.25;
  Eigen::Index reps = 100;
  std::uint64_t seed = 1;
  double noise_scale = 1.0;

  bool linear = true;
  Eigen::Index jx = 3;
  Eigen::Index jy_linear = 3;

  bool affr = true;
  std::vector<KernelFamily> families{KernelFamily::gaussian};
  std::vector<double> deltas{1.0};
  std::vector<Eigen::Index> js{3};
  bool historical = false;
  bool use_gcv = false;
  Eigen::Index folds = 5;
  LambdaGrid grid = LambdaGrid::standard();
  double fixed_lambda = 0.0;  // > 0 bypasses selection
};

struct ExperimentReport {
  ScenarioTag scenario = ScenarioTag::a;
  std::string method;  // lmr, lmf, affr, affr-historical
  std::string family;  // kernel family, empty for linear rows
  double delta = 0.0;
  Eigen::Index j = 0;
  Eigen::Index reps = 0;
  double rpe_mean = 0.0;
  double rpe_sd = 0.0;
  double pev_mean = 0.0;  // response PEV at J (AFFR/LMR rows)
  double runtime_s = 0.0;
  std::vector<double> rpes;
};

std::vector<ExperimentReport> run_table(const TableConfig& config);

void write_report_csv(const std::vector<ExperimentReport>& reports, std::ostream& out);

}  // namespace affr
