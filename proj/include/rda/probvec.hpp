// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace rda {

/// Floor applied to probabilities inside logarithms.
inline constexpr double kLogClamp = 1e-12;

/// A point on the probability simplex. Construction validates the invariant
/// (entries in [0, 1], sum within 1e-9 of one).
class ProbVec {
 public:
  ProbVec() = default;
  explicit ProbVec(std::vector<double> values);

  static ProbVec uniform(std::size_t n);
  static ProbVec one_hot(std::size_t n, std::size_t index);

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }

  friend bool operator==(const ProbVec&, const ProbVec&) = default;

 private:
  std::vector<double> values_;
};

struct HardLabel {
  std::size_t index = 0;
  friend bool operator==(HardLabel, HardLabel) = default;
};

/// x_i / sum(x). Throws Usage on negative, non-finite or all-zero input.
ProbVec normalize(std::span<const double> x);

/// Reverse Operation: Norm(1 - q), i.e. (1 - q_j)/(n - 1). Requires n >= 2.
/// Rank order reverses strictly even where masses differ by less than the
/// output resolution; entries may then sit a few ulps off the closed form.
ProbVec reverse(const ProbVec& q);

/// Shannon entropy in nats with 0 ln 0 = 0.
double entropy(const ProbVec& p);

double cross_entropy_hard(HardLabel target, const ProbVec& pred);
double cross_entropy_soft(const ProbVec& target, const ProbVec& pred);

/// Index of the largest entry; ties go to the lowest index.
HardLabel argmax_label(const ProbVec& p);

/// Uniform draw from the n - 1 classes other than y.
HardLabel sample_complementary(HardLabel y, std::size_t n, std::mt19937_64& rng);

/// Max-shifted softmax. Throws Numerical on non-finite logits.
ProbVec softmax(std::span<const double> logits);

/// Half the L1 distance.
double total_variation(const ProbVec& a, const ProbVec& b);

}  // namespace rda
