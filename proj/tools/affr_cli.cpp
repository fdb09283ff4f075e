// affr: command-line front end.
//
// Exit codes: 0 success, 1 numeric/model error, 2 I/O or configuration error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "affr/baselines.hpp"
#include "affr/errors.hpp"
#include "affr/estimator.hpp"
#include "affr/ingest.hpp"
#include "affr/kernels.hpp"
#include "affr/model_io.hpp"
#include "affr/parallel.hpp"
#include "affr/selection.hpp"
#include "affr/sim.hpp"

namespace {

using nlohmann::json;
using namespace affr;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Options shared by commands that fit an AFFR model.
struct KernelOptions {
  std::string family = "gaussian";
  std::string delta = "auto";
  std::string mask = "none";
  Eigen::Index bandwidth_pairs = 1000;
};

struct PenaltyOptions {
  std::string select = "cv";
  Eigen::Index folds = 5;
  std::string lambda_grid;
  double lambda = 0.0;
  std::string fold_mode = "contiguous";
};

struct TruncationOptions {
  Eigen::Index j = 0;
  double pev = 0.85;
};

void add_kernel_options(CLI::App* cmd, KernelOptions& o) {
  cmd->add_option("--kernel", o.family, "Kernel family")->check(CLI::IsMember({"gaussian", "exponential"}))
      ->capture_default_str();
  cmd->add_option("--delta", o.delta, "Kernel bandwidth, or 'auto' for the median heuristic")->capture_default_str();
  cmd->add_option("--mask", o.mask, "Domain mask")->check(CLI::IsMember({"none", "historical"}))->capture_default_str();
  cmd->add_option("--bandwidth-pairs", o.bandwidth_pairs, "Random pairs used by --delta auto")
      ->check(CLI::Range(2, 100000000))
      ->capture_default_str();
}

void add_penalty_options(CLI::App* cmd, PenaltyOptions& o) {
  cmd->add_option("--select", o.select, "Penalty selector")->check(CLI::IsMember({"cv", "gcv"}))->capture_default_str();
  cmd->add_option("--folds", o.folds, "Cross-validation folds")->check(CLI::Range(2, 1000000))->capture_default_str();
  cmd->add_option("--lambda-grid", o.lambda_grid,
                  "Absolute grid lo:hi:count (log-spaced); default is 25 values in [1e-8,1e2] x mean diag(A_V)");
  cmd->add_option("--lambda", o.lambda, "Fixed penalty; bypasses selection")->check(CLI::PositiveNumber);
  cmd->add_option("--fold-mode", o.fold_mode, "Fold assignment for cv")
      ->check(CLI::IsMember({"contiguous", "shuffled"}))
      ->capture_default_str();
}

void add_truncation_options(CLI::App* cmd, TruncationOptions& o) {
  cmd->add_option("--j", o.j, "Fixed number of response components (0 = use --pev)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--pev", o.pev, "Explained-variance cutoff for the response components")
      ->check(CLI::Range(1e-9, 1.0))
      ->capture_default_str();
}

LambdaGrid parse_lambda_grid(const std::string& text) {
  if (text.empty()) return LambdaGrid::standard();
  double lo = 0, hi = 0;
  int count = 0;
  char c1 = 0, c2 = 0;
  std::istringstream ss(text);
  if (!(ss >> lo >> c1 >> hi >> c2 >> count) || c1 != ':' || c2 != ':' || !(lo > 0) || hi < lo || count < 1)
    throw ConfigError("--lambda-grid expects lo:hi:count with 0 < lo <= hi, got '" + text + "'");
  return LambdaGrid::log_spaced(lo, hi, count, false);
}

TruncationRule truncation(const TruncationOptions& o) {
  return o.j > 0 ? TruncationRule::fixed(o.j) : TruncationRule::pev(o.pev);
}

struct ResolvedKernel {
  KernelSpec spec;
  json log;
};

ResolvedKernel resolve_kernel(const KernelOptions& o, const FunctionalSample& x, std::uint64_t seed) {
  ResolvedKernel r;
  double delta = 0.0;
  r.log = {{"family", o.family}, {"mask", o.mask}};
  if (o.delta == "auto") {
    const auto est = median_bandwidth(x, o.bandwidth_pairs, seed);
    if (est.fallback) std::cerr << "warning: degenerate data for the median heuristic; using delta = 1\n";
    delta = est.delta;
    r.log["delta_source"] = "median";
    r.log["bandwidth_pairs"] = o.bandwidth_pairs;
  } else {
    try {
      std::size_t used = 0;
      delta = std::stod(o.delta, &used);
      if (used != o.delta.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError("--delta expects a positive number or 'auto', got '" + o.delta + "'");
    }
    if (!(delta > 0)) throw ConfigError("--delta must be positive");
    r.log["delta_source"] = "fixed";
  }
  r.log["delta"] = delta;
  r.spec = KernelSpec(parse_kernel_family(o.family), delta, parse_mask(o.mask));
  return r;
}

struct AffrFitResult {
  AffrModel model;
  SelectionResult selection;
  json log;
};

AffrFitResult fit_affr(const FunctionalSample& x, const FunctionalSample& y, const KernelSpec& spec,
                       const TruncationOptions& trunc, const PenaltyOptions& pen, std::uint64_t seed) {
  AffrFitResult r;
  const AffrProblem problem = prepare_problem(x, y, spec, truncation(trunc));
  const LambdaGrid grid = parse_lambda_grid(pen.lambda_grid);
  if (pen.lambda > 0) {
    r.selection.lambda = pen.lambda;
    r.log["lambda_source"] = "fixed";
  } else if (pen.select == "gcv") {
    r.selection = select_gcv(problem, grid);
    r.log["lambda_source"] = "gcv";
  } else {
    r.selection = kfold_cv(problem, grid, pen.folds,
                           pen.fold_mode == "shuffled" ? FoldMode::shuffled : FoldMode::contiguous, seed);
    r.log["lambda_source"] = "cv";
    r.log["folds"] = pen.folds;
    r.log["fold_mode"] = pen.fold_mode;
  }
  r.log["lambda"] = r.selection.lambda;
  r.log["lambda_grid"] = pen.lambda_grid.empty() ? "relative:1e-8:1e2:25" : pen.lambda_grid;
  r.log["J"] = problem.j();
  r.log["pev"] = problem.j() > 0 ? problem.basis.pev(problem.j() - 1) : 0.0;
  if (problem.basis.rank_deficient) std::cerr << "warning: fewer response components available than requested\n";
  r.model = fit(problem, r.selection.lambda);
  return r;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

void write_config_log(const std::string& output_path, const json& config) {
  write_text(output_path + ".config.json", config.dump(2) + "\n");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(text);
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string x_path, y_path, out = "model.json", report;
  std::string method = "affr";
  Eigen::Index jx = 3, jy = 3;
  std::uint64_t seed = 1;
  KernelOptions kernel;
  PenaltyOptions penalty;
  TruncationOptions trunc;
};

int run_fit(const FitArgs& a, const json& common) {
  const FunctionalSample x = read_curves(a.x_path);
  const FunctionalSample y = read_curves(a.y_path);
  if (x.n() != y.n()) throw ConfigError("x and y files hold different numbers of curves");

  json config = common;
  config["command"] = "fit";
  config["x"] = a.x_path;
  config["y"] = a.y_path;
  config["method"] = a.method;
  config["seed"] = a.seed;
  json report;
  AnyModel model;
  if (a.method == "affr") {
    const auto kernel = resolve_kernel(a.kernel, x, a.seed);
    auto r = fit_affr(x, y, kernel.spec, a.trunc, a.penalty, a.seed);
    config["kernel"] = kernel.log;
    config["penalty"] = r.log;
    report["lambda"] = r.selection.lambda;
    report["J"] = r.model.j();
    report["pev"] = r.log["pev"];
    if (!r.selection.scores.empty()) report["selection"] = {{"lambdas", r.selection.lambdas}, {"scores", r.selection.scores}};
    model = std::move(r.model);
  } else if (a.method == "lmr") {
    auto m = fit_lmr(x, y, a.jx, a.jy);
    if (m.singular_design) std::cerr << "warning: singular score design; using the least-norm solution\n";
    config["jx"] = a.jx;
    config["jy"] = a.jy;
    report["J"] = m.y_basis.components();
    report["pev"] = m.y_basis.components() > 0 ? m.y_basis.pev(m.y_basis.components() - 1) : 0.0;
    model = std::move(m);
  } else {
    auto m = fit_lmf(x, y, a.jx);
    if (m.singular_design) std::cerr << "warning: singular score design; using the least-norm solution\n";
    config["jx"] = a.jx;
    model = std::move(m);
  }
  const FunctionalSample fitted = predict(model, x);
  report["method"] = a.method;
  report["n"] = x.n();
  report["in_sample_mspe"] = mspe(y, fitted.values);

  save_model(model, a.out);
  const std::string report_path = a.report.empty() ? a.out + ".report.json" : a.report;
  write_text(report_path, report.dump(2) + "\n");
  write_config_log(a.out, config);
  std::cout << report.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string model_path, x_path, out = "predictions.csv", y_path, surface_out;
  Eigen::Index surface_res = 25;
  Eigen::Index surface_curve = 0;
};

double interpolate(const Grid& grid, const Vector& curve, double s) {
  const double* begin = grid.points.data();
  const auto hi = std::upper_bound(begin, begin + grid.size(), s) - begin;
  if (hi <= 0) return curve(0);
  if (hi >= grid.size()) return curve(grid.size() - 1);
  const double a = grid.points(hi - 1), b = grid.points(hi);
  const double w = (s - a) / (b - a);
  return (1 - w) * curve(hi - 1) + w * curve(hi);
}

int run_predict(const PredictArgs& a, const json& common) {
  std::ifstream probe(a.model_path);
  if (!probe) throw IoError("model file '" + a.model_path + "' not found");
  const AnyModel model = load_model(a.model_path);
  const FunctionalSample x = read_curves(a.x_path);
  const FunctionalSample yhat = predict(model, x);
  write_curves(yhat, a.out);

  json config = common;
  config["command"] = "predict";
  config["model"] = a.model_path;
  config["x"] = a.x_path;
  json metrics;
  if (!a.y_path.empty()) {
    const FunctionalSample y = read_curves(a.y_path);
    metrics["mspe"] = mspe(y, yhat.values);
    config["y"] = a.y_path;
  }
  if (!a.surface_out.empty()) {
    const auto* m = std::get_if<AffrModel>(&model);
    if (!m) throw ConfigError("--surface-out needs an AFFR model");
    if (a.surface_curve < 0 || a.surface_curve >= x.n()) throw ConfigError("--surface-curve out of range");
    const Vector curve = x.values.row(a.surface_curve).transpose();
    std::ofstream out(a.surface_out);
    if (!out) throw IoError("cannot write '" + a.surface_out + "'");
    out << "t,s,x,ghat\n";
    char buf[128];
    for (Eigen::Index p = 0; p < a.surface_res; ++p)
      for (Eigen::Index q = 0; q < a.surface_res; ++q) {
        const double t = static_cast<double>(p) / static_cast<double>(a.surface_res - 1);
        const double s = static_cast<double>(q) / static_cast<double>(a.surface_res - 1);
        const double xv = interpolate(x.grid, curve, s);
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.17g,%.17g\n", t, s, xv, predict_g(*m, t, s, xv));
        out << buf;
      }
    config["surface"] = {{"out", a.surface_out}, {"resolution", a.surface_res}, {"curve", a.surface_curve}};
  }
  write_config_log(a.out, config);
  if (!metrics.empty()) {
    write_text(a.out + ".metrics.json", metrics.dump(2) + "\n");
    std::cout << metrics.dump(2) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate: K-fold out-of-sample RPE for several methods

struct EvaluateArgs {
  std::string x_path, y_path, out = "evaluation.csv";
  std::string methods = "affr,affr-historical,lmr,lmf";
  Eigen::Index folds = 3;
  Eigen::Index jx = 5, jy = 5;
  std::uint64_t seed = 1;
  KernelOptions kernel;
  PenaltyOptions penalty;
  TruncationOptions trunc;
};

int run_evaluate(EvaluateArgs a, const json& common) {
  const FunctionalSample x = read_curves(a.x_path);
  const FunctionalSample y = read_curves(a.y_path);
  if (x.n() != y.n()) throw ConfigError("x and y files hold different numbers of curves");
  const auto methods = split_list(a.methods);
  for (const auto& m : methods)
    if (m != "affr" && m != "affr-historical" && m != "lmr" && m != "lmf")
      throw ConfigError("unknown method '" + m + "'");
  const auto folds = fold_split(x.n(), a.folds);

  json config = common;
  config["command"] = "evaluate";
  config["x"] = a.x_path;
  config["y"] = a.y_path;
  config["folds"] = a.folds;
  config["methods"] = methods;
  config["jx"] = a.jx;
  config["jy"] = a.jy;
  config["seed"] = a.seed;
  config["fold_details"] = json::array();

  std::ostringstream csv;
  csv << "method,fold,rpe\n";
  std::vector<std::vector<double>> scores(methods.size());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<Eigen::Index> train;
    std::vector<bool> held(static_cast<size_t>(x.n()), false);
    for (auto k : folds[f]) held[k] = true;
    for (Eigen::Index i = 0; i < x.n(); ++i)
      if (!held[i]) train.push_back(i);
    const FunctionalSample xtr(x.grid, x.values(train, Eigen::all));
    const FunctionalSample ytr(y.grid, y.values(train, Eigen::all));
    const FunctionalSample xte(x.grid, x.values(folds[f], Eigen::all));
    const FunctionalSample yte(y.grid, y.values(folds[f], Eigen::all));
    const Vector y_mean = ytr.values.colwise().mean().transpose();
    json detail = {{"fold", f + 1}};

    for (std::size_t k = 0; k < methods.size(); ++k) {
      const std::string& m = methods[k];
      FunctionalSample pred;
      if (m == "lmr") {
        pred = predict_linear(fit_lmr(xtr, ytr, a.jx, a.jy), xte);
      } else if (m == "lmf") {
        pred = predict_linear(fit_lmf(xtr, ytr, a.jx), xte);
      } else {
        KernelOptions ko = a.kernel;
        ko.mask = m == "affr-historical" ? "historical" : "none";
        const auto kernel = resolve_kernel(ko, xtr, a.seed);
        const auto r = fit_affr(xtr, ytr, kernel.spec, a.trunc, a.penalty, a.seed);
        pred = predict_curves(r.model, xte);
        detail[m] = {{"kernel", kernel.log}, {"penalty", r.log}};
      }
      const double score = rpe(yte, pred, y_mean);
      scores[k].push_back(score);
      char buf[128];
      std::snprintf(buf, sizeof buf, "%s,%zu,%.6f\n", m.c_str(), f + 1, score);
      csv << buf;
    }
    config["fold_details"].push_back(detail);
  }
  for (std::size_t k = 0; k < methods.size(); ++k) {
    double mean = 0;
    for (double v : scores[k]) mean += v;
    mean /= static_cast<double>(scores[k].size());
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s,mean,%.6f\n", methods[k].c_str(), mean);
    csv << buf;
  }
  write_text(a.out, csv.str());
  write_config_log(a.out, config);
  std::cout << csv.str();
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string scenario = "b", prefix = "sim";
  Eigen::Index n = 150, m = 50;
  double rho = 0.25, noise = 1.0;
  std::uint64_t seed = 1;
  Eigen::Index surface_res = 0;
};

int run_simulate(const SimulateArgs& a, const json& common) {
  const ScenarioTag tag = parse_scenario(a.scenario);
  const Dataset d = gen_dataset(tag, a.n, a.m, a.rho, a.seed, a.noise);
  write_curves(d.x, a.prefix + "_x.csv");
  write_curves(d.y, a.prefix + "_y.csv");
  write_curves(d.truth, a.prefix + "_truth.csv");
  json config = common;
  config["command"] = "simulate";
  config["scenario"] = a.scenario;
  config["n"] = a.n;
  config["M"] = a.m;
  config["rho"] = a.rho;
  config["noise_scale"] = a.noise;
  config["seed"] = a.seed;
  if (a.surface_res > 1) {
    const std::string path = a.prefix + "_surface.csv";
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "t,s,x,g\n";
    const Vector curve = d.x.values.row(0).transpose();
    char buf[128];
    for (Eigen::Index p = 0; p < a.surface_res; ++p)
      for (Eigen::Index q = 0; q < a.surface_res; ++q) {
        const double t = static_cast<double>(p) / static_cast<double>(a.surface_res - 1);
        const double s = static_cast<double>(q) / static_cast<double>(a.surface_res - 1);
        const double xv = interpolate(d.x.grid, curve, s);
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.17g,%.17g\n", t, s, xv, scenario_g(tag, t, s, xv));
        out << buf;
      }
    config["surface_resolution"] = a.surface_res;
  }
  write_config_log(a.prefix, config);
  return 0;
}

// ---------------------------------------------------------------------------
// table

struct TableArgs {
  std::string config_path, out = "table.csv";
  std::string scenarios = "a,b,c", kernels = "gaussian", deltas = "1", js = "3", methods = "linear,affr";
  Eigen::Index reps = 100, n_train = 150, n_test = 150, m = 50, jx = 3, jy_linear = 3;
  double rho = 0.25, noise = 1.0;
  std::uint64_t seed = 1;
  std::string mask = "none";
  PenaltyOptions penalty;
};

template <class T>
std::string join(const std::vector<T>& v) {
  std::ostringstream ss;
  for (std::size_t k = 0; k < v.size(); ++k) ss << (k ? "," : "") << v[k];
  return ss.str();
}

// Values from a JSON config file; explicit flags win.
void apply_table_config(const std::string& path, TableArgs& a, CLI::App* cmd) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config file: ") + e.what());
  }
  const auto set = [&](const char* flag, auto apply) {
    if (cmd->count(flag) == 0) apply();
  };
  auto list_text = [](const json& v) -> std::string {
    if (v.is_array()) {
      std::vector<std::string> items;
      for (const auto& e : v) items.push_back(e.is_string() ? e.get<std::string>() : e.dump());
      return join(items);
    }
    return v.is_string() ? v.get<std::string>() : v.dump();
  };
  try {
    if (j.contains("scenario")) set("--scenario", [&] { a.scenarios = list_text(j["scenario"]); });
    if (j.contains("n_train")) set("--n-train", [&] { a.n_train = j["n_train"].get<Eigen::Index>(); });
    if (j.contains("n_test")) set("--n-test", [&] { a.n_test = j["n_test"].get<Eigen::Index>(); });
    if (j.contains("M")) set("--m", [&] { a.m = j["M"].get<Eigen::Index>(); });
    if (j.contains("rho")) set("--rho", [&] { a.rho = j["rho"].get<double>(); });
    if (j.contains("reps")) set("--reps", [&] { a.reps = j["reps"].get<Eigen::Index>(); });
    if (j.contains("seed")) set("--seed", [&] { a.seed = j["seed"].get<std::uint64_t>(); });
    if (j.contains("J")) set("--jy", [&] { a.js = list_text(j["J"]); });
    if (j.contains("jx")) set("--jx", [&] { a.jx = j["jx"].get<Eigen::Index>(); });
    if (j.contains("jy_linear")) set("--jy-linear", [&] { a.jy_linear = j["jy_linear"].get<Eigen::Index>(); });
    if (j.contains("methods")) set("--methods", [&] { a.methods = list_text(j["methods"]); });
    if (j.contains("noise_scale")) set("--noise", [&] { a.noise = j["noise_scale"].get<double>(); });
    if (j.contains("mask")) set("--mask", [&] { a.mask = j["mask"].get<std::string>(); });
    if (j.contains("kernel")) {
      const json& k = j["kernel"];
      if (k.contains("family")) set("--kernel", [&] { a.kernels = list_text(k["family"]); });
      if (k.contains("delta")) set("--delta", [&] { a.deltas = list_text(k["delta"]); });
    }
    if (j.contains("lambda")) {
      const json& l = j["lambda"];
      if (l.contains("select")) set("--select", [&] { a.penalty.select = l["select"].get<std::string>(); });
      if (l.contains("folds")) set("--folds", [&] { a.penalty.folds = l["folds"].get<Eigen::Index>(); });
      if (l.contains("grid")) set("--lambda-grid", [&] { a.penalty.lambda_grid = l["grid"].get<std::string>(); });
      if (l.contains("value")) set("--lambda", [&] { a.penalty.lambda = l["value"].get<double>(); });
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config file: ") + e.what());
  }
}

int run_table_cmd(TableArgs a, CLI::App* cmd, const json& common) {
  if (!a.config_path.empty()) apply_table_config(a.config_path, a, cmd);
  TableConfig c;
  c.scenarios.clear();
  for (const auto& s : split_list(a.scenarios)) c.scenarios.push_back(parse_scenario(s));
  c.families.clear();
  for (const auto& k : split_list(a.kernels)) c.families.push_back(parse_kernel_family(k));
  c.deltas.clear();
  for (const auto& d : split_list(a.deltas)) c.deltas.push_back(std::stod(d));
  c.js.clear();
  for (const auto& j : split_list(a.js)) c.js.push_back(std::stol(j));
  const auto methods = split_list(a.methods);
  c.linear = std::find(methods.begin(), methods.end(), "linear") != methods.end();
  c.affr = std::find(methods.begin(), methods.end(), "affr") != methods.end();
  c.reps = a.reps;
  c.n_train = a.n_train;
  c.n_test = a.n_test;
  c.m = a.m;
  c.rho = a.rho;
  c.noise_scale = a.noise;
  c.seed = a.seed;
  c.jx = a.jx;
  c.jy_linear = a.jy_linear;
  c.historical = a.mask == "historical";
  c.use_gcv = a.penalty.select == "gcv";
  c.folds = a.penalty.folds;
  c.grid = parse_lambda_grid(a.penalty.lambda_grid);
  c.fixed_lambda = a.penalty.lambda;

  const auto reports = run_table(c);
  std::ostringstream csv;
  write_report_csv(reports, csv);
  write_text(a.out, csv.str());

  json config = common;
  config["command"] = "table";
  config["scenario"] = split_list(a.scenarios);
  config["kernel"] = {{"family", split_list(a.kernels)}, {"delta", c.deltas}, {"mask", a.mask}};
  config["J"] = c.js;
  config["methods"] = methods;
  config["n_train"] = c.n_train;
  config["n_test"] = c.n_test;
  config["M"] = c.m;
  config["rho"] = c.rho;
  config["reps"] = c.reps;
  config["seed"] = c.seed;
  config["jx"] = c.jx;
  config["jy_linear"] = c.jy_linear;
  config["noise_scale"] = c.noise_scale;
  config["lambda"] = {{"select", c.fixed_lambda > 0 ? "fixed" : a.penalty.select},
                      {"folds", c.folds},
                      {"grid", a.penalty.lambda_grid.empty() ? "relative:1e-8:1e2:25" : a.penalty.lambda_grid},
                      {"value", c.fixed_lambda}};
  write_config_log(a.out, config);
  std::cout << csv.str();
  return 0;
}

// ---------------------------------------------------------------------------
// rate

struct RateArgs {
  std::string scenario = "b", ns = "25,50,100,200", kernel = "gaussian", out = "rate.csv";
  double delta = 1.0, rho = 0.25;
  Eigen::Index reps = 30, j = 3, m = 50, n_mc = 50;
  std::uint64_t seed = 1;
  PenaltyOptions penalty;
};

int run_rate(const RateArgs& a, const json& common) {
  RateConfig c;
  c.scenario = parse_scenario(a.scenario);
  c.ns.clear();
  for (const auto& n : split_list(a.ns)) c.ns.push_back(std::stol(n));
  c.reps = a.reps;
  c.kernel = KernelSpec(parse_kernel_family(a.kernel), a.delta);
  c.fit.rule = TruncationRule::fixed(a.j);
  c.fit.grid = parse_lambda_grid(a.penalty.lambda_grid);
  c.fit.folds = a.penalty.folds;
  c.fit.use_gcv = a.penalty.select == "gcv";
  c.m = a.m;
  c.rho = a.rho;
  c.n_mc = a.n_mc;
  c.seed = a.seed;
  const RateStudy study = rate_study(c);

  std::ostringstream csv;
  csv << "n,median_excess_risk\n";
  char buf[128];
  for (const auto& r : study.rows) {
    std::snprintf(buf, sizeof buf, "%ld,%.8g\n", static_cast<long>(r.n), r.median_risk);
    csv << buf;
  }
  write_text(a.out, csv.str());
  json config = common;
  config["command"] = "rate";
  config["scenario"] = a.scenario;
  config["ns"] = c.ns;
  config["reps"] = a.reps;
  config["kernel"] = {{"family", a.kernel}, {"delta", a.delta}};
  config["J"] = a.j;
  config["M"] = a.m;
  config["rho"] = a.rho;
  config["n_mc"] = a.n_mc;
  config["seed"] = a.seed;
  config["lambda"] = {{"select", a.penalty.select}, {"folds", a.penalty.folds}};
  config["log_log_slope"] = study.slope;
  write_config_log(a.out, config);
  std::cout << csv.str() << "slope," << study.slope << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// ingest-cidr

struct IngestArgs {
  std::string prices, out = "cidr.csv";
  int max_gap = 5;
};

int run_ingest(const IngestArgs& a, const json& common) {
  PriceReadReport rep;
  const PricePanel panel = read_prices(a.prices, &rep, a.max_gap);
  for (long line : rep.dropped_lines) std::cerr << "warning: dropped day on line " << line << " (missing minutes)\n";
  if (panel.prices.rows() == 0) throw IoError("no complete trading days in '" + a.prices + "'");
  write_curves(cidr(panel), a.out);
  json config = common;
  config["command"] = "ingest-cidr";
  config["prices"] = a.prices;
  config["max_gap"] = a.max_gap;
  config["days"] = panel.prices.rows();
  config["minutes"] = panel.prices.cols();
  config["dropped_lines"] = rep.dropped_lines;
  config["forward_filled"] = rep.filled;
  write_config_log(a.out, config);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Additive function-on-function regression toolkit"};
  app.require_subcommand(1);
  int threads = -1;
  app.add_option("--threads", threads, "Worker threads (0 = auto); AFFR_THREADS is used when unset")
      ->check(CLI::NonNegativeNumber);

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model to curve files");
  fit_cmd->add_option("--x", fit_args.x_path, "Covariate curves CSV")->required();
  fit_cmd->add_option("--y", fit_args.y_path, "Response curves CSV")->required();
  fit_cmd->add_option("--method", fit_args.method, "Model")->check(CLI::IsMember({"affr", "lmr", "lmf"}))
      ->capture_default_str();
  fit_cmd->add_option("--jx", fit_args.jx, "Predictor components (linear models)")->capture_default_str();
  fit_cmd->add_option("--jy", fit_args.jy, "Response components (LMR)")->capture_default_str();
  fit_cmd->add_option("--seed", fit_args.seed, "Master seed")->capture_default_str();
  fit_cmd->add_option("--out", fit_args.out, "Model file")->capture_default_str();
  fit_cmd->add_option("--report", fit_args.report, "Fit report (default <out>.report.json)");
  add_kernel_options(fit_cmd, fit_args.kernel);
  add_penalty_options(fit_cmd, fit_args.penalty);
  add_truncation_options(fit_cmd, fit_args.trunc);

  PredictArgs predict_args;
  auto* predict_cmd = app.add_subcommand("predict", "Predict response curves from a model file");
  predict_cmd->add_option("--model", predict_args.model_path, "Model file")->required();
  predict_cmd->add_option("--x", predict_args.x_path, "Covariate curves CSV")->required();
  predict_cmd->add_option("--out", predict_args.out, "Predicted curves CSV")->capture_default_str();
  predict_cmd->add_option("--y", predict_args.y_path, "Observed responses; writes <out>.metrics.json with the MSPE");
  predict_cmd->add_option("--surface-out", predict_args.surface_out, "Tidy CSV of ghat(t,s,X(s)) for one curve");
  predict_cmd->add_option("--surface-res", predict_args.surface_res, "Surface resolution per axis")
      ->check(CLI::Range(2, 10000))
      ->capture_default_str();
  predict_cmd->add_option("--surface-curve", predict_args.surface_curve, "0-based curve index for the surface")
      ->capture_default_str();

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "K-fold out-of-sample RPE of several methods");
  eval_cmd->add_option("--x", eval_args.x_path, "Covariate curves CSV")->required();
  eval_cmd->add_option("--y", eval_args.y_path, "Response curves CSV")->required();
  eval_cmd->add_option("--out", eval_args.out, "Results CSV")->capture_default_str();
  eval_cmd->add_option("--methods", eval_args.methods, "Comma list of affr, affr-historical, lmr, lmf")
      ->capture_default_str();
  eval_cmd->add_option("--eval-folds", eval_args.folds, "Evaluation folds")->check(CLI::Range(2, 1000000))
      ->capture_default_str();
  eval_cmd->add_option("--jx", eval_args.jx, "Predictor components (linear models)")->capture_default_str();
  eval_cmd->add_option("--jy", eval_args.jy, "Response components (LMR)")->capture_default_str();
  eval_cmd->add_option("--seed", eval_args.seed, "Master seed")->capture_default_str();
  add_kernel_options(eval_cmd, eval_args.kernel);
  add_penalty_options(eval_cmd, eval_args.penalty);
  add_truncation_options(eval_cmd, eval_args.trunc);
  eval_args.penalty.select = "gcv";

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic dataset");
  sim_cmd->add_option("--scenario", sim_args.scenario, "Regression surface")->check(CLI::IsMember({"a", "b", "c"}))
      ->capture_default_str();
  sim_cmd->add_option("--n", sim_args.n, "Curves")->check(CLI::PositiveNumber)->capture_default_str();
  sim_cmd->add_option("--m", sim_args.m, "Grid points")->check(CLI::Range(2, 100000))->capture_default_str();
  sim_cmd->add_option("--rho", sim_args.rho, "Matern range")->check(CLI::PositiveNumber)->capture_default_str();
  sim_cmd->add_option("--noise", sim_args.noise, "Noise scale")->check(CLI::NonNegativeNumber)->capture_default_str();
  sim_cmd->add_option("--seed", sim_args.seed, "Seed")->capture_default_str();
  sim_cmd->add_option("--prefix", sim_args.prefix, "Output prefix (<prefix>_x.csv, _y.csv, _truth.csv)")
      ->capture_default_str();
  sim_cmd->add_option("--surface-res", sim_args.surface_res, "Also write <prefix>_surface.csv of g(t,s,X_1(s))");

  TableArgs table_args;
  auto* table_cmd = app.add_subcommand("table", "Replicated RPE experiment");
  table_cmd->add_option("--config", table_args.config_path, "JSON experiment config");
  table_cmd->add_option("--scenario", table_args.scenarios, "Comma list of scenarios")->capture_default_str();
  table_cmd->add_option("--kernel", table_args.kernels, "Comma list of kernel families")->capture_default_str();
  table_cmd->add_option("--delta", table_args.deltas, "Comma list of bandwidths")->capture_default_str();
  table_cmd->add_option("--jy", table_args.js, "Comma list of response components for AFFR")->capture_default_str();
  table_cmd->add_option("--methods", table_args.methods, "Comma list from linear, affr")->capture_default_str();
  table_cmd->add_option("--reps", table_args.reps, "Replications")->check(CLI::PositiveNumber)->capture_default_str();
  table_cmd->add_option("--n-train", table_args.n_train, "Training curves")->capture_default_str();
  table_cmd->add_option("--n-test", table_args.n_test, "Test curves")->capture_default_str();
  table_cmd->add_option("--m", table_args.m, "Grid points")->capture_default_str();
  table_cmd->add_option("--rho", table_args.rho, "Matern range")->capture_default_str();
  table_cmd->add_option("--noise", table_args.noise, "Noise scale")->capture_default_str();
  table_cmd->add_option("--jx", table_args.jx, "Predictor components (linear models)")->capture_default_str();
  table_cmd->add_option("--jy-linear", table_args.jy_linear, "Response components (LMR)")->capture_default_str();
  table_cmd->add_option("--mask", table_args.mask, "Domain mask")->check(CLI::IsMember({"none", "historical"}))
      ->capture_default_str();
  table_cmd->add_option("--seed", table_args.seed, "Master seed")->capture_default_str();
  table_cmd->add_option("--out", table_args.out, "Report CSV")->capture_default_str();
  add_penalty_options(table_cmd, table_args.penalty);

  RateArgs rate_args;
  auto* rate_cmd = app.add_subcommand("rate", "Excess-risk decay study");
  rate_cmd->add_option("--scenario", rate_args.scenario, "Regression surface")->check(CLI::IsMember({"a", "b", "c"}))
      ->capture_default_str();
  rate_cmd->add_option("--ns", rate_args.ns, "Comma list of increasing sample sizes")->capture_default_str();
  rate_cmd->add_option("--reps", rate_args.reps, "Replications per n")->check(CLI::PositiveNumber)
      ->capture_default_str();
  rate_cmd->add_option("--kernel", rate_args.kernel, "Kernel family")
      ->check(CLI::IsMember({"gaussian", "exponential"}))
      ->capture_default_str();
  rate_cmd->add_option("--delta", rate_args.delta, "Kernel bandwidth")->check(CLI::PositiveNumber)
      ->capture_default_str();
  rate_cmd->add_option("--j", rate_args.j, "Response components")->capture_default_str();
  rate_cmd->add_option("--m", rate_args.m, "Grid points")->capture_default_str();
  rate_cmd->add_option("--rho", rate_args.rho, "Matern range")->capture_default_str();
  rate_cmd->add_option("--n-mc", rate_args.n_mc, "Monte-Carlo draws per risk estimate")->capture_default_str();
  rate_cmd->add_option("--seed", rate_args.seed, "Master seed")->capture_default_str();
  rate_cmd->add_option("--out", rate_args.out, "Results CSV")->capture_default_str();
  add_penalty_options(rate_cmd, rate_args.penalty);

  IngestArgs ingest_args;
  auto* ingest_cmd = app.add_subcommand("ingest-cidr", "Convert intraday prices to cumulative intraday returns");
  ingest_cmd->add_option("--prices", ingest_args.prices, "Price CSV (rows = days, header = clock times)")->required();
  ingest_cmd->add_option("--out", ingest_args.out, "Curves CSV")->capture_default_str();
  ingest_cmd->add_option("--max-gap", ingest_args.max_gap, "Longest run of missing minutes to forward fill")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const int resolved_threads = threads >= 0 ? threads : threads_from_env();
  set_threads(resolved_threads);
  const json common = {{"threads", resolved_threads}};

  try {
    if (*fit_cmd) return run_fit(fit_args, common);
    if (*predict_cmd) return run_predict(predict_args, common);
    if (*eval_cmd) return run_evaluate(eval_args, common);
    if (*sim_cmd) return run_simulate(sim_args, common);
    if (*table_cmd) return run_table_cmd(table_args, table_cmd, common);
    if (*rate_cmd) return run_rate(rate_args, common);
    if (*ingest_cmd) return run_ingest(ingest_args, common);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
