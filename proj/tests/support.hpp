// SPDX-License-Identifier: Apache-2.0
// Hand-rolled generators for the randomized tests.
#pragma once

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "rda/error.hpp"
#include "rda/numerics.hpp"
#include "rda/probvec.hpp"

namespace rda::testing {

inline std::mt19937_64 rng_for(std::uint64_t seed) { return std::mt19937_64(seed * 0x9E3779B97F4A7C15ull + 1); }

/// Dirichlet(alpha) via normalized gammas; resampled on total underflow.
inline ProbVec random_simplex(std::size_t n, double alpha, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(alpha, 1.0);
  for (;;) {
    std::vector<double> x(n);
    double s = 0.0;
    for (auto& v : x) s += (v = g(rng));
    if (s > 0.0 && std::isfinite(s)) return normalize(x);
  }
}

inline ProbVec random_simplex(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, 2);
  static constexpr double alphas[] = {0.05, 0.5, 1.0};
  return random_simplex(n, alphas[pick(rng)], rng);
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                            double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = g(rng);
  return m;
}

inline ModelParams random_model(std::size_t in, std::vector<std::size_t> hidden, std::size_t n,
                                std::mt19937_64& rng) {
  auto p = ModelParams::zeros(in, hidden, n);
  std::normal_distribution<double> g(0.0, 0.5);
  for (auto t : p.tensors())
    for (auto& v : t) v = g(rng);
  return p;
}

/// Category of the rda::Error thrown by `f`; fails the test when nothing is thrown.
template <typename F>
ErrorCategory category_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.category();
  }
  FAIL("expected an rda::Error");
  return ErrorCategory::Assertion;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace rda::testing
