#pragma once

// Curve and price files, the cumulative intraday return transform, and
// fold slicing.
//
// Curve CSV: a header `t=<g_0>,t=<g_1>,...` with the grid points, then one
// row of decimal values per curve.
// Price CSV: a header of clock labels (one per minute), then one row of
// prices per day. Empty fields mark missing minutes.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "affr/curves.hpp"

namespace affr {

enum class FoldMode { contiguous, shuffled };

/// Partition 0..n-1 into K folds whose sizes differ by at most one; the
/// first n % K folds get the extra element. Shuffled mode permutes with `seed`
/// before cutting.
std::vector<std::vector<Eigen::Index>> fold_split(Eigen::Index n, Eigen::Index folds, FoldMode mode = FoldMode::contiguous,
                                                  std::uint64_t seed = 0);

inline std::vector<std::vector<Eigen::Index>> fold_split(const FunctionalSample& sample, Eigen::Index folds,
                                                         FoldMode mode = FoldMode::contiguous, std::uint64_t seed = 0) {
  return fold_split(sample.n(), folds, mode, seed);
}

struct PricePanel {
  std::vector<std::string> minutes;  // clock labels
  Matrix prices;                     // days x minutes
};

/// R_i(t_j) = 100 (ln P_i(t_j) - ln P_i(t_1)) on an equispaced [0,1] grid.
FunctionalSample cidr(const PricePanel& panel);

FunctionalSample read_curves(const std::string& path);
FunctionalSample read_curves(std::istream& in);
void write_curves(const FunctionalSample& sample, const std::string& path);
void write_curves(const FunctionalSample& sample, std::ostream& out);

struct PriceReadReport {
  std::vector<long> dropped_lines;  // days removed for unrecoverable gaps
  long filled = 0;                  // minutes forward-filled
};

/// Reads a price CSV. Runs of up to `max_gap` missing minutes are forward
/// filled; a longer run, or a missing opening minute, drops the day.
PricePanel read_prices(std::istream& in, PriceReadReport* report = nullptr, int max_gap = 5);
PricePanel read_prices(const std::string& path, PriceReadReport* report = nullptr, int max_gap = 5);

}  // namespace affr
