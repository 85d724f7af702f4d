// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rda/numerics.hpp"
#include "rda/probvec.hpp"

namespace rda {

/// Isotropic Gaussian classes. Centers sit on a ring in the first two
/// coordinates; any further coordinates are pure noise.
struct SyntheticSource {
  std::size_t num_classes = 10;
  std::size_t dim = 2;
  std::vector<std::vector<double>> class_centers;
  double spread = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

SyntheticSource make_ring_source(std::size_t num_classes, std::size_t dim, double radius = 4.0,
                                 double spread = 1.0, std::uint64_t seed = 0);

// Class-distribution protocols. Class index 0 is the head of every labeled
// profile.
namespace protocol {
/// Balanced labeled and unlabeled sets.
struct Matched {
  std::size_t labels = 40;
};
/// Exponential labeled profile fixed by the head count and total, balanced
/// unlabeled set.
struct ImbalancedLabeled {
  std::size_t n0 = 10;
  std::size_t labels = 40;
};
/// Imbalanced labeled profile plus an unlabeled profile ordered the other way.
struct MismatchedBoth {
  std::size_t n0 = 10;
  std::size_t labels = 40;
  double gamma = 10.0;
};
struct BalancedLabeledImbalancedUnlabeled {
  std::size_t labels = 40;
  double gamma = 10.0;
};
/// Labeled head N1 with ratio gamma_l; unlabeled head M1 with ratio gamma_u,
/// optionally in reversed class order.
struct Darp {
  std::size_t n1 = 1500;
  std::size_t m1 = 3000;
  double gamma_l = 100.0;
  double gamma_u = 1.0;
  bool reversed = false;
};
}  // namespace protocol

using Protocol = std::variant<protocol::Matched, protocol::ImbalancedLabeled,
                              protocol::MismatchedBoth,
                              protocol::BalancedLabeledImbalancedUnlabeled, protocol::Darp>;

struct DatasetSpec {
  Protocol protocol = protocol::Matched{};
  std::size_t m0 = 500;  ///< per-class unlabeled base count
  std::size_t num_classes = 10;

  void validate() const;
};

/// Protocol name as used on the command line and in config files.
std::string protocol_name(const Protocol& p);

struct SplitCounts {
  std::vector<std::size_t> labeled_per_class;
  std::vector<std::size_t> unlabeled_per_class;

  friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

struct GammaSearchResult {
  std::size_t gamma_x = 0;
  std::vector<std::size_t> counts;  ///< before top-up
};

/// Upper end of the natural-number sweep in gamma_search.
inline constexpr std::size_t kGammaSearchLimit = 1'000'000;

/// Smallest natural gamma_x with sum_i floor(N0 * gamma_x^{-(i-1)/(n-1)}) < D_x.
/// Throws Protocol when no such gamma_x exists.
GammaSearchResult gamma_search(std::size_t labels, std::size_t n0, std::size_t num_classes);

/// Adds one label to classes 1, 2, ... in turn until the total reaches
/// `labels`; class 0 is untouched. Throws Protocol when the shortfall is n or
/// more.
std::vector<std::size_t> top_up(std::vector<std::size_t> counts, std::size_t labels);

/// round(M0 * gamma^{-(n-i)/(n-1)}) for class i = 1..n.
std::vector<std::size_t> unlabeled_counts_reversed(std::size_t m0, double gamma,
                                                   std::size_t num_classes);

SplitCounts darp_counts(std::size_t n1, std::size_t m1, double gamma_l, double gamma_u,
                        std::size_t num_classes, bool reversed);

SplitCounts split_counts(const DatasetSpec& spec);

struct LabeledExample {
  std::vector<double> features;
  HardLabel label;
  HardLabel complementary;  ///< resampled by the trainer every step
};

struct UnlabeledExample {
  std::vector<double> features;
  HardLabel true_label;  ///< evaluation only
};

struct TestExample {
  std::vector<double> features;
  HardLabel label;
};

struct Dataset {
  std::size_t num_classes = 0;
  std::size_t dim = 0;
  std::vector<LabeledExample> labeled;
  std::vector<UnlabeledExample> unlabeled;
  std::vector<TestExample> test;

  /// Empirical class marginal of the labeled split.
  ProbVec labeled_marginal() const;
  /// Class marginal of the unlabeled split's hidden labels.
  ProbVec unlabeled_marginal() const;
};

inline constexpr std::size_t kTestPerClass = 500;

/// Draws every split from the source's class Gaussians. Deterministic in
/// (source, split, seed).
Dataset materialize(const SyntheticSource& source, const SplitCounts& split, std::uint64_t seed,
                    std::size_t test_per_class = kTestPerClass);

/// One row per example: split tag, class, features.
void write_dataset_csv(const Dataset& data, std::ostream& os);

enum class AugmentMode { Weak, Strong };

struct AugmentParams {
  double sigma_weak = 0.1;
  double sigma_strong = 0.5;
  double drop_prob = 0.15;
};

/// Weak: additive N(0, sigma_weak^2). Strong: additive N(0, sigma_strong^2)
/// then each coordinate zeroed with probability drop_prob.
std::vector<double> augment(std::span<const double> features, AugmentMode mode,
                            const AugmentParams& params, std::mt19937_64& rng);

}  // namespace rda
