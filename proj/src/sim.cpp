#include "affr/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "affr/baselines.hpp"
#include "affr/errors.hpp"

namespace affr {

std::string to_string(ScenarioTag tag) {
  switch (tag) {
    case ScenarioTag::a: return "a";
    case ScenarioTag::b: return "b";
    case ScenarioTag::c: return "c";
  }
  return "a";
}

ScenarioTag parse_scenario(const std::string& name) {
  if (name == "a") return ScenarioTag::a;
  if (name == "b") return ScenarioTag::b;
  if (name == "c") return ScenarioTag::c;
  throw InvalidArgument("unknown scenario '" + name + "' (expected a, b or c)");
}

double scenario_g(ScenarioTag tag, double t, double s, double x) {
  switch (tag) {
    case ScenarioTag::a: return t * s * x;
    case ScenarioTag::b: return t + s + x * x;
    case ScenarioTag::c: return t * s * x * x + x * x * x * x;
  }
  return 0.0;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double matern52(double lag, double rho) {
  const double r = std::sqrt(5.0) * std::abs(lag) / rho;
  return (1.0 + r + r * r / 3.0) * std::exp(-r);
}

MaternCov matern_cov(const Grid& grid, double rho) {
  if (!(rho > 0)) throw InvalidArgument("matern_cov: rho must be positive");
  MaternCov cov;
  cov.grid = grid;
  cov.rho = rho;
  const Eigen::Index m = grid.size();
  cov.matrix.resize(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b) cov.matrix(a, b) = matern52(grid.points(a) - grid.points(b), rho);
  return cov;
}

Matrix gp_factor(const MaternCov& cov) {
  const Eigen::Index m = cov.matrix.rows();
  Eigen::LLT<Matrix> llt(cov.matrix);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  for (double jitter = 1e-10; jitter <= 1e-6 * 1.0001; jitter *= 10) {
    llt.compute(cov.matrix + jitter * Matrix::Identity(m, m));
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw NumericError("gp_factor: Cholesky failed even with jitter 1e-6");
}

namespace {

FunctionalSample draw(const Grid& grid, const Matrix& factor, Eigen::Index n, std::mt19937_64& rng) {
  if (n < 1) throw InvalidArgument("sample_gp: n must be at least 1");
  std::normal_distribution<double> normal;
  const Eigen::Index m = factor.rows();
  Matrix z(m, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < m; ++k) z(k, i) = normal(rng);
  return FunctionalSample(grid, (factor * z).transpose());
}

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<long>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double med = *mid;
  if (v.size() % 2 == 0) med = 0.5 * (med + *std::max_element(v.begin(), mid));
  return med;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

FunctionalSample sample_gp(const MaternCov& cov, Eigen::Index n, std::mt19937_64& rng) {
  return draw(cov.grid, gp_factor(cov), n, rng);
}

FunctionalSample sample_gp(const MaternCov& cov, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_gp(cov, n, rng);
}

Dataset gen_dataset(ScenarioTag tag, Eigen::Index n, const MaternCov& cov, std::mt19937_64& rng,
                    double noise_scale) {
  const Matrix factor = gp_factor(cov);
  const Grid& grid = cov.grid;
  const Eigen::Index m = grid.size();
  Dataset d;
  d.x = draw(grid, factor, n, rng);
  const FunctionalSample eps = draw(grid, factor, n, rng);
  Matrix truth(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index t = 0; t < m; ++t) {
      double acc = 0;
      for (Eigen::Index s = 0; s < m; ++s)
        acc += grid.weights(s) * scenario_g(tag, grid.points(t), grid.points(s), d.x.values(i, s));
      truth(i, t) = acc;
    }
  d.y = FunctionalSample(grid, truth + noise_scale * eps.values);
  d.truth = FunctionalSample(grid, std::move(truth));
  return d;
}

Dataset gen_dataset(ScenarioTag tag, Eigen::Index n, Eigen::Index m, double rho, std::uint64_t seed,
                    double noise_scale) {
  std::mt19937_64 rng(seed);
  return gen_dataset(tag, n, matern_cov(make_grid(m), rho), rng, noise_scale);
}

double mspe(const FunctionalSample& y, const Matrix& y_hat) {
  if (y_hat.rows() != y.n() || y_hat.cols() != y.m()) throw InvalidArgument("mspe: shape mismatch");
  return ((y.values - y_hat).array().square().matrix() * y.grid.weights).sum();
}

double rpe(const FunctionalSample& y_test, const FunctionalSample& y_hat, const Vector& y_train_mean) {
  require_same_grid(y_test.grid, y_hat.grid, "rpe");
  if (y_train_mean.size() != y_test.m()) throw InvalidArgument("rpe: mean curve length does not match grid");
  const Matrix mean_pred = y_train_mean.transpose().replicate(y_test.n(), 1);
  const double reference = mspe(y_test, mean_pred);
  if (!(reference > 0)) throw InvalidState("rpe: mean-only MSPE is zero");
  return (reference - mspe(y_test, y_hat.values)) / reference;
}

RiskEstimate excess_risk(const SurfaceFn& surface, const Grid& grid, ScenarioTag tag, Eigen::Index n_mc, double rho,
                         std::uint64_t seed) {
  if (n_mc < 1) throw InvalidArgument("excess_risk: n_mc must be at least 1");
  const FunctionalSample xs = sample_gp(matern_cov(grid, rho), n_mc, seed);
  const Eigen::Index m = grid.size();
  std::vector<double> vals(static_cast<size_t>(n_mc));
  for (Eigen::Index r = 0; r < n_mc; ++r) {
    const Vector x = xs.values.row(r).transpose();
    const Matrix fitted = surface(x);
    double acc = 0;
    for (Eigen::Index s = 0; s < m; ++s)
      for (Eigen::Index t = 0; t < m; ++t) {
        const double d = fitted(t, s) - scenario_g(tag, grid.points(t), grid.points(s), x(s));
        acc += grid.weights(t) * grid.weights(s) * d * d;
      }
    vals[r] = acc;
  }
  RiskEstimate est;
  est.mean = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(n_mc);
  if (n_mc > 1) {
    double ss = 0;
    for (double v : vals) ss += (v - est.mean) * (v - est.mean);
    est.std_error = std::sqrt(ss / static_cast<double>(n_mc - 1) / static_cast<double>(n_mc));
  }
  return est;
}

RiskEstimate excess_risk(const AffrModel& model, ScenarioTag tag, Eigen::Index n_mc, double rho, std::uint64_t seed) {
  const Grid& grid = model.grid();
  const auto ranges = model.kernel.mask.node_ranges(grid);
  SurfaceFn surface = [&](const Vector& x) {
    Matrix g = g_surface(model, x);
    for (Eigen::Index t = 0; t < grid.size(); ++t) {
      const auto [f, l] = ranges[t];
      const double length = grid.weights.segment(f, l - f).sum();
      if (length > 0)
        for (Eigen::Index s = f; s < l; ++s) g(t, s) += model.y_mean(t) / length;
    }
    return g;
  };
  return excess_risk(surface, grid, tag, n_mc, rho, seed);
}

AffrModel fit_selected(const FunctionalSample& x, const FunctionalSample& y, const KernelSpec& spec,
                       const FitOptions& options, SelectionResult* selection) {
  const AffrProblem problem = prepare_problem(x, y, spec, options.rule);
  const SelectionResult sel = options.use_gcv ? select_gcv(problem, options.grid)
                                              : kfold_cv(problem, options.grid, options.folds, FoldMode::contiguous,
                                                         options.seed);
  if (selection) *selection = sel;
  return fit(problem, sel.lambda);
}

RateStudy rate_study(const RateConfig& config) {
  for (std::size_t k = 1; k < config.ns.size(); ++k)
    if (config.ns[k] <= config.ns[k - 1]) throw InvalidArgument("rate_study: sample sizes must be increasing");
  if (config.reps < 1) throw InvalidArgument("rate_study: reps must be at least 1");
  const MaternCov cov = matern_cov(make_grid(config.m), config.rho);

  RateStudy study;
  for (std::size_t k = 0; k < config.ns.size(); ++k) {
    RateRow row;
    row.n = config.ns[k];
    row.risks.assign(static_cast<size_t>(config.reps), 0.0);
#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index r = 0; r < config.reps; ++r) {
      const std::uint64_t rep_seed = derive_seed(derive_seed(config.seed, static_cast<std::uint64_t>(row.n)),
                                                 static_cast<std::uint64_t>(r));
      std::mt19937_64 rng(rep_seed);
      const Dataset data = gen_dataset(config.scenario, row.n, cov, rng);
      const AffrModel model = fit_selected(data.x, data.y, config.kernel, config.fit);
      row.risks[r] = excess_risk(model, config.scenario, config.n_mc, config.rho, derive_seed(rep_seed, 1)).mean;
    }
    row.median_risk = median(row.risks);
    study.rows.push_back(std::move(row));
  }

  if (study.rows.size() >= 2) {
    double mx = 0, my = 0;
    for (const auto& r : study.rows) {
      mx += std::log(static_cast<double>(r.n));
      my += std::log(r.median_risk);
    }
    mx /= static_cast<double>(study.rows.size());
    my /= static_cast<double>(study.rows.size());
    double sxy = 0, sxx = 0;
    for (const auto& r : study.rows) {
      const double dx = std::log(static_cast<double>(r.n)) - mx;
      sxy += dx * (std::log(r.median_risk) - my);
      sxx += dx * dx;
    }
    study.slope = sxy / sxx;
  }
  return study;
}

std::vector<ExperimentReport> run_table(const TableConfig& config) {
  if (config.reps < 1) throw InvalidArgument("run_table: reps must be at least 1");
  const MaternCov cov = matern_cov(make_grid(config.m), config.rho);

  // Row layout per scenario: [lmr, lmf,] then family x delta x J.
  struct Slot {
    std::string method;
    KernelFamily family = KernelFamily::gaussian;
    double delta = 0.0;
    Eigen::Index j = 0;
  };
  std::vector<Slot> slots;
  if (config.linear) {
    slots.push_back({"lmr", KernelFamily::gaussian, 0.0, config.jy_linear});
    slots.push_back({"lmf", KernelFamily::gaussian, 0.0, 0});
  }
  if (config.affr)
    for (auto fam : config.families)
      for (double delta : config.deltas)
        for (auto j : config.js) slots.push_back({config.historical ? "affr-historical" : "affr", fam, delta, j});

  std::vector<ExperimentReport> reports;
  for (std::size_t sc = 0; sc < config.scenarios.size(); ++sc) {
    const ScenarioTag tag = config.scenarios[sc];
    const auto n_slots = slots.size();
    std::vector<std::vector<double>> rpes(n_slots, std::vector<double>(static_cast<size_t>(config.reps)));
    std::vector<std::vector<double>> pevs(n_slots, std::vector<double>(static_cast<size_t>(config.reps)));
    std::vector<std::vector<double>> times(n_slots, std::vector<double>(static_cast<size_t>(config.reps)));

#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index r = 0; r < config.reps; ++r) {
      std::mt19937_64 rng(derive_seed(derive_seed(config.seed, static_cast<std::uint64_t>(tag)), static_cast<std::uint64_t>(r)));
      const Dataset train = gen_dataset(tag, config.n_train, cov, rng, config.noise_scale);
      const Dataset test = gen_dataset(tag, config.n_test, cov, rng, config.noise_scale);
      const Vector y_mean = train.y.values.colwise().mean().transpose();

      for (std::size_t k = 0; k < n_slots; ++k) {
        const Slot& slot = slots[k];
        const auto start = std::chrono::steady_clock::now();
        if (slot.method == "lmr") {
          const auto model = fit_lmr(train.x, train.y, config.jx, slot.j);
          rpes[k][r] = rpe(test.y, predict_linear(model, test.x), y_mean);
          pevs[k][r] = model.y_basis.pev(std::max<Eigen::Index>(slot.j - 1, 0));
        } else if (slot.method == "lmf") {
          const auto model = fit_lmf(train.x, train.y, config.jx);
          rpes[k][r] = rpe(test.y, predict_linear(model, test.x), y_mean);
          pevs[k][r] = 1.0;
        } else {
          const KernelSpec spec(slot.family, slot.delta,
                                config.historical ? DomainMask::historical() : DomainMask::none());
          const AffrProblem problem = prepare_problem(train.x, train.y, spec, TruncationRule::fixed(slot.j));
          double lambda = config.fixed_lambda;
          if (!(lambda > 0)) {
            lambda = config.use_gcv ? select_gcv(problem, config.grid).lambda
                                    : kfold_cv(problem, config.grid, config.folds).lambda;
          }
          const AffrModel model = fit(problem, lambda);
          rpes[k][r] = rpe(test.y, predict_curves(model, test.x), y_mean);
          pevs[k][r] = problem.basis.pev(std::max<Eigen::Index>(slot.j - 1, 0));
        }
        times[k][r] = seconds_since(start);
      }
    }

    for (std::size_t k = 0; k < n_slots; ++k) {
      ExperimentReport rep;
      rep.scenario = tag;
      rep.method = slots[k].method;
      rep.family = slots[k].method.rfind("affr", 0) == 0 ? to_string(slots[k].family) : "";
      rep.delta = slots[k].delta;
      rep.j = slots[k].j;
      rep.reps = config.reps;
      rep.rpes = rpes[k];
      const double n = static_cast<double>(config.reps);
      rep.rpe_mean = std::accumulate(rpes[k].begin(), rpes[k].end(), 0.0) / n;
      double ss = 0;
      for (double v : rpes[k]) ss += (v - rep.rpe_mean) * (v - rep.rpe_mean);
      rep.rpe_sd = config.reps > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
      rep.pev_mean = std::accumulate(pevs[k].begin(), pevs[k].end(), 0.0) / n;
      rep.runtime_s = std::accumulate(times[k].begin(), times[k].end(), 0.0);
      reports.push_back(std::move(rep));
    }
  }
  return reports;
}

void write_report_csv(const std::vector<ExperimentReport>& reports, std::ostream& out) {
  out << "scenario,method,kernel,delta,J,reps,rpe_mean,rpe_sd,pev_mean,runtime_s\n";
  char buf[256];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%.6g,%ld,%ld,%.6f,%.6f,%.6f,%.3f\n", to_string(r.scenario).c_str(),
                  r.method.c_str(), r.family.c_str(), r.delta, static_cast<long>(r.j), static_cast<long>(r.reps),
                  r.rpe_mean, r.rpe_sd, r.pev_mean, r.runtime_s);
    out << buf;
  }
}

}  // namespace affr
