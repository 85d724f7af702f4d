// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <deque>
#include <span>

#include "rda/probvec.hpp"

namespace rda {

/// Floor applied to tracker means before they appear in an alignment ratio.
inline constexpr double kTrackerFloor = 1e-8;

/// Windowed mean of per-batch mean predictions over the last `capacity`
/// batches. Empty trackers report the uniform distribution.
class DistributionTracker {
 public:
  static constexpr std::size_t kDefaultCapacity = 128;

  explicit DistributionTracker(std::size_t num_classes,
                               std::size_t capacity = kDefaultCapacity);

  /// Appends the arithmetic mean of `batch_preds`, evicting the oldest entry
  /// when the window is full.
  void update(std::span<const ProbVec> batch_preds);
  /// Appends an already-averaged batch mean.
  void push_mean(ProbVec batch_mean);

  ProbVec mean() const;

  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return window_.size(); }
  /// Oldest first.
  const std::deque<ProbVec>& window() const noexcept { return window_; }

  friend bool operator==(const DistributionTracker&, const DistributionTracker&) = default;

 private:
  std::size_t num_classes_;
  std::size_t capacity_;
  std::deque<ProbVec> window_;
};

/// Running estimates of E[p], E[q], E[p̄], E[q̄] over unlabeled batches.
struct AlignmentState {
  DistributionTracker tracker_p;
  DistributionTracker tracker_q;
  DistributionTracker tracker_p_rev;
  DistributionTracker tracker_q_rev;

  explicit AlignmentState(std::size_t num_classes,
                          std::size_t capacity = DistributionTracker::kDefaultCapacity);

  std::size_t num_classes() const noexcept { return tracker_p.num_classes(); }
  /// All four trackers hold the same number of batches.
  std::size_t batches() const noexcept { return tracker_p.size(); }

  /// Records one unlabeled batch of weak-view predictions from both heads.
  void update(std::span<const ProbVec> p, std::span<const ProbVec> q);

  friend bool operator==(const AlignmentState&, const AlignmentState&) = default;
};

/// Snapshot of the four tracker means, taken once per step.
struct AlignmentMeans {
  ProbVec p, q, p_rev, q_rev;
  static AlignmentMeans of(const AlignmentState& state);
};

/// Norm(x * numerator / denominator) with both tracker means floored.
ProbVec rescale(const ProbVec& x, const ProbVec& numerator, const ProbVec& denominator);

/// p̃ = Norm(p * Ψ(q̄) / Ψ(p)).
ProbVec reciprocal_align_p(const ProbVec& p, const AlignmentState& state);
ProbVec reciprocal_align_p(const ProbVec& p, const AlignmentMeans& means);
/// q̃ = Norm(q * Ψ(p̄) / Ψ(q)).
ProbVec reciprocal_align_q(const ProbVec& q, const AlignmentState& state);
ProbVec reciprocal_align_q(const ProbVec& q, const AlignmentMeans& means);

/// Classic distribution alignment toward the labeled-class prior:
/// Norm(p * prior / Ψ(p)).
ProbVec prior_align(const ProbVec& p, const ProbVec& prior, const DistributionTracker& tracker_p);
ProbVec prior_align(const ProbVec& p, const ProbVec& prior, const ProbVec& tracker_p_mean);

}  // namespace rda
