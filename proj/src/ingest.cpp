#include "affr/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "affr/errors.hpp"

namespace affr {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* begin = t.data();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::vector<Eigen::Index>> fold_split(Eigen::Index n, Eigen::Index folds, FoldMode mode,
                                                  std::uint64_t seed) {
  if (folds < 1) throw InvalidArgument("fold_split: need at least one fold");
  if (folds > n) throw InvalidArgument("fold_split: more folds than curves");
  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  if (mode == FoldMode::shuffled) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::vector<Eigen::Index>> out(static_cast<size_t>(folds));
  Eigen::Index pos = 0;
  for (Eigen::Index f = 0; f < folds; ++f) {
    const Eigen::Index size = n / folds + (f < n % folds ? 1 : 0);
    out[f].assign(order.begin() + pos, order.begin() + pos + size);
    if (mode == FoldMode::shuffled) std::sort(out[f].begin(), out[f].end());
    pos += size;
  }
  return out;
}

FunctionalSample cidr(const PricePanel& panel) {
  const Eigen::Index m = panel.prices.cols();
  if (m < 2) throw InvalidArgument("cidr: need at least 2 minutes per day");
  for (Eigen::Index i = 0; i < panel.prices.rows(); ++i)
    for (Eigen::Index k = 0; k < m; ++k)
      if (!(panel.prices(i, k) > 0) || !std::isfinite(panel.prices(i, k)))
        throw InvalidArgument("cidr: nonpositive price at day " + std::to_string(i + 1) + ", minute " +
                              std::to_string(k + 1));
  Matrix out(panel.prices.rows(), m);
  for (Eigen::Index i = 0; i < panel.prices.rows(); ++i) {
    const double open = std::log(panel.prices(i, 0));
    out(i, 0) = 0.0;
    for (Eigen::Index k = 1; k < m; ++k) out(i, k) = 100.0 * (std::log(panel.prices(i, k)) - open);
  }
  return FunctionalSample(make_grid(m), std::move(out));
}

FunctionalSample read_curves(std::istream& in) {
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line) || trim(line).empty()) throw IoError("read_curves: empty input", 1);
  ++line_no;
  const auto header = split_fields(line);
  Vector points(static_cast<Eigen::Index>(header.size()));
  for (std::size_t k = 0; k < header.size(); ++k) {
    const std::string h = trim(header[k]);
    double v = 0;
    if (h.rfind("t=", 0) != 0 || !parse_double(h.substr(2), v))
      throw IoError("read_curves: header field " + std::to_string(k + 1) + " is not of the form t=<value>", line_no);
    points(static_cast<Eigen::Index>(k)) = v;
    if (k > 0 && !(v > points(static_cast<Eigen::Index>(k) - 1)))
      throw IoError("read_curves: grid points in header are not strictly increasing", line_no);
  }
  if (points.size() < 2) throw IoError("read_curves: need at least 2 grid points", line_no);

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (static_cast<Eigen::Index>(fields.size()) != points.size())
      throw IoError("read_curves: row has " + std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(points.size()),
                    line_no);
    std::vector<double> row(fields.size());
    for (std::size_t k = 0; k < fields.size(); ++k)
      if (!parse_double(fields[k], row[k]) || !std::isfinite(row[k]))
        throw IoError("read_curves: bad number '" + trim(fields[k]) + "' in column " + std::to_string(k + 1), line_no);
    rows.push_back(std::move(row));
  }

  Matrix values(static_cast<Eigen::Index>(rows.size()), points.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Eigen::Index k = 0; k < points.size(); ++k) values(static_cast<Eigen::Index>(i), k) = rows[i][k];

  // Canonical equispaced headers map back onto make_grid exactly.
  Grid grid = make_grid(points.size());
  if ((grid.points - points).cwiseAbs().maxCoeff() > 1e-12) grid = make_grid(points);
  return FunctionalSample(std::move(grid), std::move(values));
}

FunctionalSample read_curves(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open curve file '" + path + "'");
  return read_curves(in);
}

void write_curves(const FunctionalSample& sample, std::ostream& out) {
  for (Eigen::Index k = 0; k < sample.m(); ++k) out << (k ? "," : "") << "t=" << format_double(sample.grid.points(k));
  out << '\n';
  for (Eigen::Index i = 0; i < sample.n(); ++i) {
    for (Eigen::Index k = 0; k < sample.m(); ++k) out << (k ? "," : "") << format_double(sample.values(i, k));
    out << '\n';
  }
}

void write_curves(const FunctionalSample& sample, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write curve file '" + path + "'");
  write_curves(sample, out);
  if (!out) throw IoError("write failed for '" + path + "'");
}

PricePanel read_prices(std::istream& in, PriceReadReport* report, int max_gap) {
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line) || trim(line).empty()) throw IoError("read_prices: empty input", 1);
  ++line_no;
  PricePanel panel;
  for (const auto& f : split_fields(line)) panel.minutes.push_back(trim(f));
  const auto m = static_cast<Eigen::Index>(panel.minutes.size());
  if (m < 2) throw IoError("read_prices: need at least 2 minute columns", line_no);

  PriceReadReport local;
  PriceReadReport& rep = report ? *report : local;
  std::vector<std::vector<double>> days;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (static_cast<Eigen::Index>(fields.size()) != m)
      throw IoError("read_prices: row has " + std::to_string(fields.size()) + " fields, expected " + std::to_string(m),
                    line_no);
    std::vector<double> row(fields.size());
    bool keep = true;
    int gap = 0;
    long filled = 0;
    for (std::size_t k = 0; k < fields.size(); ++k) {
      if (trim(fields[k]).empty()) {
        if (k == 0 || ++gap > max_gap) {
          keep = false;
          break;
        }
        row[k] = row[k - 1];
        ++filled;
        continue;
      }
      gap = 0;
      if (!parse_double(fields[k], row[k]))
        throw IoError("read_prices: bad number '" + trim(fields[k]) + "' in column " + std::to_string(k + 1), line_no);
    }
    if (!keep) {
      rep.dropped_lines.push_back(line_no);
      continue;
    }
    rep.filled += filled;
    days.push_back(std::move(row));
  }
  panel.prices.resize(static_cast<Eigen::Index>(days.size()), m);
  for (std::size_t i = 0; i < days.size(); ++i)
    for (Eigen::Index k = 0; k < m; ++k) panel.prices(static_cast<Eigen::Index>(i), k) = days[i][k];
  return panel;
}

PricePanel read_prices(const std::string& path, PriceReadReport* report, int max_gap) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open price file '" + path + "'");
  return read_prices(in, report, max_gap);
}

}  // namespace affr
