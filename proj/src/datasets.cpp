// SPDX-License-Identifier: Apache-2.0
#include "rda/datasets.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include "rda/error.hpp"

namespace rda {

namespace {

// pow() can land a hair below an exact integer (10 * 8^{-1/3} = 4.999...).
std::size_t floor_count(double x) { return static_cast<std::size_t>(std::floor(x + 1e-9)); }
std::size_t round_count(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

double profile(double head, double ratio, double exponent_numer, std::size_t n) {
  return head * std::pow(ratio, -exponent_numer / static_cast<double>(n - 1));
}

std::vector<std::size_t> balanced(std::size_t total, std::size_t n) {
  std::vector<std::size_t> counts(n, total / n);
  return top_up(std::move(counts), total);
}

std::mt19937_64 stream(std::uint64_t source_seed, std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(source_seed), static_cast<std::uint32_t>(source_seed >> 32),
                    static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag)};
  return std::mt19937_64(seq);
}

std::vector<double> draw(const SyntheticSource& source, std::size_t cls, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(source.dim);
  for (std::size_t d = 0; d < source.dim; ++d)
    x[d] = source.class_centers[cls][d] + source.spread * normal(rng);
  return x;
}

ProbVec marginal_of(std::vector<double> counts) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (total == 0.0) return ProbVec::uniform(counts.size());
  return normalize(counts);
}

}  // namespace

void SyntheticSource::validate() const {
  require(num_classes >= 2, ErrorCategory::Config, "source: need at least two classes");
  require(dim >= 1, ErrorCategory::Config, "source: zero feature dimension");
  require(class_centers.size() == num_classes, ErrorCategory::Config,
          "source: center count differs from class count");
  for (const auto& c : class_centers)
    require(c.size() == dim, ErrorCategory::Config, "source: center dimension mismatch");
  require(spread > 0.0, ErrorCategory::Config, "source: spread must be positive");
}

SyntheticSource make_ring_source(std::size_t num_classes, std::size_t dim, double radius,
                                 double spread, std::uint64_t seed) {
  require(dim >= 2, ErrorCategory::Config, "ring source: needs at least two dimensions");
  SyntheticSource s{num_classes, dim, {}, spread, seed};
  for (std::size_t k = 0; k < num_classes; ++k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(num_classes);
    std::vector<double> c(dim, 0.0);
    c[0] = radius * std::cos(angle);
    c[1] = radius * std::sin(angle);
    s.class_centers.push_back(std::move(c));
  }
  s.validate();
  return s;
}

void DatasetSpec::validate() const {
  require(num_classes >= 2, ErrorCategory::Config, "dataset: need at least two classes");
  require(m0 >= 1, ErrorCategory::Config, "dataset: m0 must be at least 1");
  std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, protocol::Darp>) {
          require(p.n1 >= 1 && p.m1 >= 1, ErrorCategory::Config, "darp: counts must be >= 1");
          require(p.gamma_l >= 1.0 && p.gamma_u >= 1.0, ErrorCategory::Config,
                  "darp: imbalance ratios must be >= 1");
        } else {
          require(p.labels >= 1, ErrorCategory::Config, "dataset: labels must be >= 1");
          if constexpr (requires { p.n0; })
            require(p.n0 >= 1 && p.n0 <= p.labels, ErrorCategory::Config,
                    "dataset: n0 must lie in [1, labels]");
          if constexpr (requires { p.gamma; })
            require(p.gamma >= 1.0, ErrorCategory::Config, "dataset: gamma must be >= 1");
        }
      },
      protocol);
}

std::string protocol_name(const Protocol& p) {
  struct Namer {
    std::string operator()(const protocol::Matched&) const { return "matched"; }
    std::string operator()(const protocol::ImbalancedLabeled&) const { return "imbalanced_labeled"; }
    std::string operator()(const protocol::MismatchedBoth&) const { return "mismatched_both"; }
    std::string operator()(const protocol::BalancedLabeledImbalancedUnlabeled&) const {
      return "balanced_labeled_imbalanced_unlabeled";
    }
    std::string operator()(const protocol::Darp&) const { return "darp"; }
  };
  return std::visit(Namer{}, p);
}

GammaSearchResult gamma_search(std::size_t labels, std::size_t n0, std::size_t num_classes) {
  require(num_classes >= 2, ErrorCategory::Usage, "gamma_search: need at least two classes");
  require(n0 >= 1 && n0 <= labels, ErrorCategory::Usage, "gamma_search: requires 1 <= N0 <= D_x");
  // For large gamma every tail class floors to zero and the sum tends to N0,
  // so the strict constraint is unreachable when N0 == D_x.
  if (n0 == labels) {
    std::ostringstream os;
    os << "gamma_search: infeasible, N0 = D_x = " << labels;
    fail(ErrorCategory::Protocol, os.str());
  }
  std::vector<std::size_t> counts(num_classes);
  for (std::size_t gamma = 1; gamma <= kGammaSearchLimit; ++gamma) {
    std::size_t sum = 0;
    for (std::size_t i = 0; i < num_classes; ++i) {
      counts[i] = floor_count(profile(static_cast<double>(n0), static_cast<double>(gamma),
                                      static_cast<double>(i), num_classes));
      sum += counts[i];
    }
    if (sum < labels) return {gamma, counts};
  }
  fail(ErrorCategory::Protocol, "gamma_search: no feasible gamma within search limit");
}

std::vector<std::size_t> top_up(std::vector<std::size_t> counts, std::size_t labels) {
  const std::size_t sum = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  require(sum <= labels, ErrorCategory::Protocol, "top_up: counts already exceed the label budget");
  const std::size_t residual = labels - sum;
  if (residual >= counts.size()) {
    std::ostringstream os;
    os << "top_up: " << residual << " missing labels for " << counts.size()
       << " classes; expected fewer than one round";
    fail(ErrorCategory::Protocol, os.str());
  }
  for (std::size_t k = 1; k <= residual; ++k) ++counts[k];
  return counts;
}

std::vector<std::size_t> unlabeled_counts_reversed(std::size_t m0, double gamma,
                                                   std::size_t num_classes) {
  require(gamma >= 1.0, ErrorCategory::Usage, "unlabeled_counts_reversed: gamma must be >= 1");
  require(num_classes >= 2, ErrorCategory::Usage, "unlabeled_counts_reversed: need two classes");
  std::vector<std::size_t> counts(num_classes);
  for (std::size_t i = 0; i < num_classes; ++i)
    counts[i] = round_count(profile(static_cast<double>(m0), gamma,
                                    static_cast<double>(num_classes - 1 - i), num_classes));
  return counts;
}

SplitCounts darp_counts(std::size_t n1, std::size_t m1, double gamma_l, double gamma_u,
                        std::size_t num_classes, bool reversed) {
  require(num_classes >= 2, ErrorCategory::Usage, "darp_counts: need two classes");
  require(gamma_l > 0.0 && gamma_u > 0.0, ErrorCategory::Usage, "darp_counts: ratios must be > 0");
  SplitCounts split;
  for (std::size_t i = 0; i < num_classes; ++i) {
    split.labeled_per_class.push_back(
        round_count(profile(static_cast<double>(n1), gamma_l, static_cast<double>(i), num_classes)));
    const double exponent = static_cast<double>(reversed ? num_classes - 1 - i : i);
    split.unlabeled_per_class.push_back(
        round_count(profile(static_cast<double>(m1), gamma_u, exponent, num_classes)));
  }
  return split;
}

SplitCounts split_counts(const DatasetSpec& spec) {
  spec.validate();
  const std::size_t n = spec.num_classes;
  struct Builder {
    const DatasetSpec& spec;
    std::size_t n;
    SplitCounts operator()(const protocol::Matched& p) const {
      return {balanced(p.labels, n), std::vector<std::size_t>(n, spec.m0)};
    }
    SplitCounts operator()(const protocol::ImbalancedLabeled& p) const {
      return {top_up(gamma_search(p.labels, p.n0, n).counts, p.labels),
              std::vector<std::size_t>(n, spec.m0)};
    }
    SplitCounts operator()(const protocol::MismatchedBoth& p) const {
      return {top_up(gamma_search(p.labels, p.n0, n).counts, p.labels),
              unlabeled_counts_reversed(spec.m0, p.gamma, n)};
    }
    SplitCounts operator()(const protocol::BalancedLabeledImbalancedUnlabeled& p) const {
      return {balanced(p.labels, n), unlabeled_counts_reversed(spec.m0, p.gamma, n)};
    }
    SplitCounts operator()(const protocol::Darp& p) const {
      return darp_counts(p.n1, p.m1, p.gamma_l, p.gamma_u, n, p.reversed);
    }
  };
  return std::visit(Builder{spec, n}, spec.protocol);
}

ProbVec Dataset::labeled_marginal() const {
  std::vector<double> counts(num_classes, 0.0);
  for (const auto& ex : labeled) counts[ex.label.index] += 1.0;
  return marginal_of(std::move(counts));
}

ProbVec Dataset::unlabeled_marginal() const {
  std::vector<double> counts(num_classes, 0.0);
  for (const auto& ex : unlabeled) counts[ex.true_label.index] += 1.0;
  return marginal_of(std::move(counts));
}

Dataset materialize(const SyntheticSource& source, const SplitCounts& split, std::uint64_t seed,
                    std::size_t test_per_class) {
  source.validate();
  const std::size_t n = source.num_classes;
  require(split.labeled_per_class.size() == n && split.unlabeled_per_class.size() == n,
          ErrorCategory::Config, "materialize: split class count differs from source");

  Dataset data;
  data.num_classes = n;
  data.dim = source.dim;

  // Separate streams per split keep the test set fixed across protocols.
  auto labeled_rng = stream(source.seed, seed, 1);
  auto unlabeled_rng = stream(source.seed, seed, 2);
  auto test_rng = stream(source.seed, seed, 3);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t k = 0; k < split.labeled_per_class[c]; ++k)
      data.labeled.push_back({draw(source, c, labeled_rng), HardLabel{c}, HardLabel{c == 0 ? 1u : 0u}});
    for (std::size_t k = 0; k < split.unlabeled_per_class[c]; ++k)
      data.unlabeled.push_back({draw(source, c, unlabeled_rng), HardLabel{c}});
    for (std::size_t k = 0; k < test_per_class; ++k)
      data.test.push_back({draw(source, c, test_rng), HardLabel{c}});
  }
  return data;
}

void write_dataset_csv(const Dataset& data, std::ostream& os) {
  os << "split,class";
  for (std::size_t d = 0; d < data.dim; ++d) os << ",f" << d;
  os << '\n';
  const auto old_precision = os.precision(17);
  auto row = [&](const char* tag, HardLabel label, const std::vector<double>& f) {
    os << tag << ',' << label.index;
    for (double v : f) os << ',' << v;
    os << '\n';
  };
  for (const auto& ex : data.labeled) row("labeled", ex.label, ex.features);
  for (const auto& ex : data.unlabeled) row("unlabeled", ex.true_label, ex.features);
  for (const auto& ex : data.test) row("test", ex.label, ex.features);
  os.precision(old_precision);
}

std::vector<double> augment(std::span<const double> features, AugmentMode mode,
                            const AugmentParams& params, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> out(features.begin(), features.end());
  const double sigma = mode == AugmentMode::Weak ? params.sigma_weak : params.sigma_strong;
  for (double& v : out) v += sigma * normal(rng);
  if (mode == AugmentMode::Strong)
    for (double& v : out)
      if (unit(rng) < params.drop_prob) v = 0.0;
  return out;
}

}  // namespace rda
