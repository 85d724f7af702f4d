// SPDX-License-Identifier: Apache-2.0
#include "rda/alignment.hpp"

#include <algorithm>
#include <vector>

#include "rda/error.hpp"

namespace rda {

DistributionTracker::DistributionTracker(std::size_t num_classes, std::size_t capacity)
    : num_classes_(num_classes), capacity_(capacity) {
  require(num_classes > 0, ErrorCategory::Config, "tracker: zero classes");
  require(capacity > 0, ErrorCategory::Config, "tracker: zero capacity");
}

void DistributionTracker::update(std::span<const ProbVec> batch_preds) {
  require(!batch_preds.empty(), ErrorCategory::Usage, "tracker_update: empty batch");
  std::vector<double> acc(num_classes_, 0.0);
  for (const auto& p : batch_preds) {
    require(p.size() == num_classes_, ErrorCategory::Usage, "tracker_update: class count mismatch");
    for (std::size_t i = 0; i < num_classes_; ++i) acc[i] += p[i];
  }
  push_mean(normalize(acc));
}

void DistributionTracker::push_mean(ProbVec batch_mean) {
  require(batch_mean.size() == num_classes_, ErrorCategory::Usage,
          "tracker_update: class count mismatch");
  if (window_.size() == capacity_) window_.pop_front();
  window_.push_back(std::move(batch_mean));
}

ProbVec DistributionTracker::mean() const {
  if (window_.empty()) return ProbVec::uniform(num_classes_);
  std::vector<double> acc(num_classes_, 0.0);
  for (const auto& m : window_)
    for (std::size_t i = 0; i < num_classes_; ++i) acc[i] += m[i];
  return normalize(acc);
}

AlignmentState::AlignmentState(std::size_t num_classes, std::size_t capacity)
    : tracker_p(num_classes, capacity),
      tracker_q(num_classes, capacity),
      tracker_p_rev(num_classes, capacity),
      tracker_q_rev(num_classes, capacity) {}

void AlignmentState::update(std::span<const ProbVec> p, std::span<const ProbVec> q) {
  require(p.size() == q.size(), ErrorCategory::Usage, "alignment update: batch size mismatch");
  std::vector<ProbVec> p_rev, q_rev;
  p_rev.reserve(p.size());
  q_rev.reserve(q.size());
  for (const auto& v : p) p_rev.push_back(reverse(v));
  for (const auto& v : q) q_rev.push_back(reverse(v));
  tracker_p.update(p);
  tracker_q.update(q);
  tracker_p_rev.update(p_rev);
  tracker_q_rev.update(q_rev);
}

AlignmentMeans AlignmentMeans::of(const AlignmentState& state) {
  return {state.tracker_p.mean(), state.tracker_q.mean(), state.tracker_p_rev.mean(),
          state.tracker_q_rev.mean()};
}

ProbVec rescale(const ProbVec& x, const ProbVec& numerator, const ProbVec& denominator) {
  require(x.size() == numerator.size() && x.size() == denominator.size(), ErrorCategory::Usage,
          "alignment: class count mismatch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double num = std::max(numerator[i], kTrackerFloor);
    const double den = std::max(denominator[i], kTrackerFloor);
    out[i] = num == den ? x[i] : x[i] * (num / den);
  }
  return normalize(out);
}

ProbVec reciprocal_align_p(const ProbVec& p, const AlignmentState& state) {
  return rescale(p, state.tracker_q_rev.mean(), state.tracker_p.mean());
}

ProbVec reciprocal_align_p(const ProbVec& p, const AlignmentMeans& means) {
  return rescale(p, means.q_rev, means.p);
}

ProbVec reciprocal_align_q(const ProbVec& q, const AlignmentState& state) {
  return rescale(q, state.tracker_p_rev.mean(), state.tracker_q.mean());
}

ProbVec reciprocal_align_q(const ProbVec& q, const AlignmentMeans& means) {
  return rescale(q, means.p_rev, means.q);
}

ProbVec prior_align(const ProbVec& p, const ProbVec& prior, const DistributionTracker& tracker_p) {
  return rescale(p, prior, tracker_p.mean());
}

ProbVec prior_align(const ProbVec& p, const ProbVec& prior, const ProbVec& tracker_p_mean) {
  return rescale(p, prior, tracker_p_mean);
}

}  // namespace rda
