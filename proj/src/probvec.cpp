// SPDX-License-Identifier: Apache-2.0
#include "rda/probvec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rda/error.hpp"

namespace rda {

ProbVec::ProbVec(std::vector<double> values) : values_(std::move(values)) {
  require(!values_.empty(), ErrorCategory::Usage, "ProbVec: empty vector");
  double sum = 0.0;
  for (double v : values_) {
    require(std::isfinite(v) && v >= 0.0 && v <= 1.0, ErrorCategory::Usage,
            "ProbVec: entry outside [0, 1]");
    sum += v;
  }
  require(std::abs(sum - 1.0) <= 1e-9, ErrorCategory::Usage, "ProbVec: entries do not sum to 1");
}

ProbVec ProbVec::uniform(std::size_t n) {
  return ProbVec(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

ProbVec ProbVec::one_hot(std::size_t n, std::size_t index) {
  require(index < n, ErrorCategory::Usage, "ProbVec::one_hot: index out of range");
  std::vector<double> v(n, 0.0);
  v[index] = 1.0;
  return ProbVec(std::move(v));
}

ProbVec normalize(std::span<const double> x) {
  require(!x.empty(), ErrorCategory::Usage, "normalize: empty input");
  double sum = 0.0;
  for (double v : x) {
    require(std::isfinite(v) && v >= 0.0, ErrorCategory::Usage,
            "normalize: negative or non-finite entry");
    sum += v;
  }
  require(sum > 0.0, ErrorCategory::Usage, "normalize: all-zero input");
  std::vector<double> out(x.begin(), x.end());
  for (double& v : out) v /= sum;
  return ProbVec(std::move(out));
}

ProbVec reverse(const ProbVec& q) {
  const std::size_t n = q.size();
  require(n >= 2, ErrorCategory::Usage, "reverse: needs at least two classes");
  // Closed form, rounded once from extended precision.
  std::vector<double> r(n);
  const long double denom = static_cast<long double>(n - 1);
  for (std::size_t j = 0; j < n; ++j)
    r[j] = static_cast<double>((1.0L - static_cast<long double>(q[j])) / denom);

  // Distinct masses closer than one ulp of the output would round to equal
  // values. Walk classes from most to least likely and step each strictly
  // smaller mass at least one ulp above its predecessor, so rank order
  // reverses exactly and ties stay ties. The shift is at most n - 1 ulps.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return q[a] > q[b]; });
  for (std::size_t k = 1; k < n; ++k) {
    const std::size_t prev = order[k - 1], cur = order[k];
    if (q[cur] == q[prev]) r[cur] = r[prev];
    else if (r[cur] <= r[prev]) r[cur] = std::nextafter(r[prev], 2.0);
  }
  return ProbVec(std::move(r));
}

double entropy(const ProbVec& p) {
  double h = 0.0;
  for (double v : p.values())
    if (v > 0.0) h -= v * std::log(v);
  return std::max(h, 0.0);
}

double cross_entropy_hard(HardLabel target, const ProbVec& pred) {
  require(target.index < pred.size(), ErrorCategory::Usage,
          "cross_entropy_hard: label out of range");
  return -std::log(std::max(pred[target.index], kLogClamp));
}

double cross_entropy_soft(const ProbVec& target, const ProbVec& pred) {
  require(target.size() == pred.size(), ErrorCategory::Usage,
          "cross_entropy_soft: class count mismatch");
  double ce = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (target[i] > 0.0) ce -= target[i] * std::log(std::max(pred[i], kLogClamp));
  return ce;
}

HardLabel argmax_label(const ProbVec& p) {
  const auto v = p.values();
  return HardLabel{static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin())};
}

HardLabel sample_complementary(HardLabel y, std::size_t n, std::mt19937_64& rng) {
  require(n >= 2, ErrorCategory::Usage, "sample_complementary: needs at least two classes");
  require(y.index < n, ErrorCategory::Usage, "sample_complementary: label out of range");
  std::uniform_int_distribution<std::size_t> pick(0, n - 2);
  std::size_t k = pick(rng);
  if (k >= y.index) ++k;
  return HardLabel{k};
}

ProbVec softmax(std::span<const double> logits) {
  require(!logits.empty(), ErrorCategory::Usage, "softmax: empty logits");
  for (double v : logits)
    if (!std::isfinite(v)) fail(ErrorCategory::Numerical, "softmax: non-finite logit");
  const double shift = *std::max_element(logits.begin(), logits.end());
  std::vector<double> e(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += (e[i] = std::exp(logits[i] - shift));
  for (double& v : e) v /= sum;
  return ProbVec(std::move(e));
}

double total_variation(const ProbVec& a, const ProbVec& b) {
  require(a.size() == b.size(), ErrorCategory::Usage, "total_variation: class count mismatch");
  double l1 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) l1 += std::abs(a[i] - b[i]);
  return std::min(0.5 * l1, 1.0);
}

}  // namespace rda
