#pragma once

// Worker-count control for the OpenMP loops in the library.

#include <algorithm>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace affr {

/// 0 = leave the runtime default. Negative values are treated as 0.
inline void set_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

/// Reads AFFR_THREADS; returns 0 when unset or malformed.
inline int threads_from_env() {
  const char* v = std::getenv("AFFR_THREADS");
  if (!v) return 0;
  try {
    return std::max(0, std::stoi(v));
  } catch (...) {
    return 0;
  }
}

}  // namespace affr
