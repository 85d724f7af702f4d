// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "rda/alignment.hpp"
#include "rda/datasets.hpp"
#include "rda/error.hpp"
#include "rda/harness.hpp"
#include "rda/probvec.hpp"
#include "rda/trainer.hpp"

using namespace rda;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void run_criterion(int id, const char* title, double time_limit_s, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  const bool in_time = secs <= time_limit_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("[%s] criterion %d %s: %s; %.1f s (limit %.0f s)%s\n", pass ? "PASS" : "FAIL", id, title,
              o.detail.c_str(), secs, time_limit_s, in_time ? "" : " TOO SLOW");
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Dirichlet draw through normalized gamma variates.
std::vector<double> dirichlet(std::size_t n, double alpha, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(alpha, 1.0);
  for (;;) {
    std::vector<double> x(n);
    double s = 0.0;
    for (auto& v : x) s += (v = g(rng));
    if (s > 0.0) {
      for (auto& v : x) v /= s;
      return x;
    }
  }
}

ProbVec simplex_point(std::size_t n, double alpha, std::mt19937_64& rng) {
  return normalize(dirichlet(n, alpha, rng));
}

// ---------------------------------------------------------------------------

Outcome reverse_closed_form() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (std::size_t n = 2; n <= 20; ++n)
    for (int t = 0; t < 10000; ++t) {
      const auto q = simplex_point(n, t % 2 ? 1.0 : 0.05, rng);
      const auto r = reverse(q);
      // Norm(1 - q) computed directly, against the closed form.
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += 1.0 - q[j];
      for (std::size_t j = 0; j < n; ++j) {
        const double closed = (1.0 - q[j]) / static_cast<double>(n - 1);
        worst = std::max({worst, std::abs(r[j] - closed), std::abs((1.0 - q[j]) / s - closed)});
      }
    }
  const auto report = verify_reverse(10000, 102);
  worst = std::max(worst, report.max_deviation);
  return {worst <= 1e-12, fmt("max |Norm(1-q) - (1-q_j)/(n-1)| = %.3g over n=2..20, 1e4 points each (tol 1e-12)", worst)};
}

Outcome theorem1_suite() {
  const std::size_t ns[] = {2, 5, 10, 26, 100};
  const auto report = verify_theorem1(ns, 100000, 103);
  bool ok = report.rows.size() == 5;
  std::string detail;
  for (const auto& row : report.rows) {
    const bool row_ok = row.num_classes == 2 ? std::abs(row.min_gap) <= 1e-12 : row.min_gap >= -1e-10;
    ok = ok && row_ok;
    detail += "n=" + std::to_string(row.num_classes) + " min gap " + fmt("%.3g", row.min_gap) + "; ";
  }
  return {ok && report.passed, detail + "1e5 draws each, alpha in {0.05, 1}"};
}

Outcome order_reversal() {
  std::mt19937_64 rng(104);
  std::size_t pairs = 0, violations = 0;
  for (std::size_t n = 2; n <= 20; ++n)
    for (int t = 0; t < 3000; ++t) {
      auto raw = dirichlet(n, t % 3 == 0 ? 0.05 : 1.0, rng);
      // Inject exact ties in a third of the draws.
      if (t % 3 == 2 && n >= 3) raw[n - 1] = raw[0];
      const auto q = normalize(raw);
      const auto r = reverse(q);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          ++pairs;
          if (q[i] == q[j]) {
            if (r[i] != r[j]) ++violations;
          } else if (q[i] > q[j] && !(r[i] < r[j])) {
            ++violations;
          }
        }
    }
  const std::string detail = std::to_string(violations) + " rank violations over " + std::to_string(pairs) +
                             " ordered pairs, near-vertex draws and exact ties included";
  return {violations == 0, detail};
}

Outcome gradient_check() {
  double worst = 0.0;
  std::size_t coords = SIZE_MAX;
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto r = rda_gradcheck(seed, 1e-4);
    worst = std::max(worst, r.max_relative_error);
    coords = std::min(coords, r.coordinates_checked);
    ok = ok && r.passed && r.max_relative_error <= 1e-4 && r.coordinates_checked >= 200;
  }
  return {ok, fmt("max relative error %.3g (tol 1e-4)", worst) + ", at least " + std::to_string(coords) +
                  " coordinates per check, 5 random nets, h=1e-5"};
}

Outcome alignment_algebra() {
  std::mt19937_64 rng(105);
  double identity_dev = 0.0;
  std::size_t invalid = 0;
  auto check_valid = [&](const ProbVec& p) {
    double s = 0.0;
    for (double v : p.values()) {
      if (!(v >= 0.0 && v <= 1.0)) ++invalid;
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) ++invalid;
  };
  for (int t = 0; t < 5000; ++t) {
    const std::size_t n = 2 + static_cast<std::size_t>(t % 20);
    const double alpha = t % 2 ? 0.02 : 1.0;
    const auto p = simplex_point(n, alpha, rng);
    const auto m = simplex_point(n, alpha, rng);
    const auto o = simplex_point(n, alpha, rng);
    const auto ap = reciprocal_align_p(p, AlignmentMeans{m, o, o, m});
    const auto aq = reciprocal_align_q(p, AlignmentMeans{o, m, m, o});
    const auto da = prior_align(p, m, m);
    for (std::size_t c = 0; c < n; ++c)
      identity_dev = std::max({identity_dev, std::abs(ap[c] - p[c]), std::abs(aq[c] - p[c]),
                               std::abs(da[c] - p[c])});
    const AlignmentMeans any{simplex_point(n, alpha, rng), simplex_point(n, alpha, rng),
                             simplex_point(n, alpha, rng), simplex_point(n, alpha, rng)};
    check_valid(reciprocal_align_p(p, any));
    check_valid(reciprocal_align_q(p, any));
    check_valid(prior_align(p, any.q, any.p));
  }

  DistributionTracker tracker(6, 128);
  std::deque<std::vector<double>> window;
  double eviction_dev = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const auto m = simplex_point(6, 0.5, rng);
    tracker.push_mean(m);
    window.emplace_back(m.values().begin(), m.values().end());
    if (window.size() > 128) window.pop_front();
    const auto got = tracker.mean();
    for (std::size_t c = 0; c < 6; ++c) {
      double s = 0.0;
      for (const auto& w : window) s += w[c];
      eviction_dev = std::max(eviction_dev, std::abs(got[c] - s / static_cast<double>(window.size())));
    }
  }
  const bool ok = identity_dev <= 1e-12 && invalid == 0 && eviction_dev <= 1e-12;
  return {ok, fmt("identity deviation %.3g (tol 1e-12)", identity_dev) + ", " + std::to_string(invalid) +
                  " invalid outputs over 15000, " + fmt("eviction deviation %.3g over 1000 updates", eviction_dev)};
}

// Exhaustive sweep over natural gamma, independent of the library.
std::vector<std::size_t> profile(std::size_t n0, std::size_t n, std::size_t g, std::size_t& sum) {
  std::vector<std::size_t> c(n);
  sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = -static_cast<double>(i) / static_cast<double>(n - 1);
    c[i] = static_cast<std::size_t>(std::floor(static_cast<double>(n0) * std::pow(static_cast<double>(g), e) + 1e-9));
    sum += c[i];
  }
  return c;
}

// Exhaustive sweep over natural gamma, independent of the library. The
// profile total never grows with gamma, so the last candidate decides
// feasibility up front.
bool sweep_oracle(std::size_t d, std::size_t n0, std::size_t n, std::vector<std::size_t>& out) {
  std::size_t s = 0;
  profile(n0, n, kGammaSearchLimit, s);
  if (s >= d) return false;
  for (std::size_t g = 1; g <= kGammaSearchLimit; ++g) {
    auto c = profile(n0, n, g, s);
    if (s < d) {
      if (d - s >= n) return false;
      for (std::size_t i = 1; s < d; ++i, ++s) ++c[i];
      out = c;
      return true;
    }
  }
  return false;
}

Outcome protocol_counts() {
  std::mt19937_64 rng(106);
  std::size_t checked = 0, attempts = 0, mismatches = 0;
  while (checked < 50 && attempts < 100000) {
    ++attempts;
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 20)(rng);
    const std::size_t n0 = std::uniform_int_distribution<std::size_t>(2, 200)(rng);
    const std::size_t d = std::uniform_int_distribution<std::size_t>(n0 + 1, n0 * n)(rng);
    std::vector<std::size_t> want;
    if (!sweep_oracle(d, n0, n, want)) continue;
    const auto got = top_up(gamma_search(d, n0, n).counts, d);
    std::size_t total = 0;
    for (auto v : got) total += v;
    if (got != want || total != d) ++mismatches;
    ++checked;
  }
  const auto darp = darp_counts(1500, 3000, 100.0, 1.0, 10, false);
  const bool darp_ok = darp.labeled_per_class[9] == 15 && darp.labeled_per_class[0] == 1500;
  const auto flat = darp_counts(400, 700, 1.0, 1.0, 10, false);
  bool flat_ok = true;
  for (std::size_t c = 0; c < 10; ++c)
    flat_ok = flat_ok && flat.labeled_per_class[c] == 400 && flat.unlabeled_per_class[c] == 700;
  flat_ok = flat_ok && unlabeled_counts_reversed(500, 1.0, 10) == std::vector<std::size_t>(10, 500);
  const bool ok = checked == 50 && mismatches == 0 && darp_ok && flat_ok;
  return {ok, std::to_string(mismatches) + " mismatches vs sweep oracle over " + std::to_string(checked) +
                  " triples with exact totals; DARP N_10 = " + std::to_string(darp.labeled_per_class[9]) +
                  " (want 15); gamma=1 uniform " + (flat_ok ? "yes" : "no")};
}

// ---------------------------------------------------------------------------

struct Experiments {
  fs::path root;
  std::vector<Summary> runs;  ///< every summary produced, for criterion 10
};

Experiments experiments;

ExperimentConfig desk_config(Protocol protocol, std::size_t dim, const std::string& name) {
  ExperimentConfig c;
  c.run.dataset.protocol = std::move(protocol);
  c.run.dataset.num_classes = 10;
  c.run.train.num_classes = 10;
  c.run.source.dim = dim;
  c.seeds = {0, 1, 2, 3, 4};
  c.output_dir = experiments.root / name;
  c.plots = false;
  return c;
}

const Summary& row_summary(const ComparisonTable& t, Method m) {
  for (const auto& s : t.summaries)
    if (s.method == m) return s;
  fail(ErrorCategory::Assertion, "missing summary");
}

Outcome mismatched_experiment() {
  const auto cfg = desk_config(protocol::ImbalancedLabeled{30, 100}, 4, "imbalanced_labeled");
  const std::vector<Method> methods{Method::Rda, Method::FixMatch};
  const auto t = compare(methods, cfg);
  for (const auto& s : t.summaries) experiments.runs.push_back(s);
  const auto& rda = row_summary(t, Method::Rda);
  const auto& fm = row_summary(t, Method::FixMatch);
  int tv_wins = 0;
  for (std::size_t i = 0; i < rda.seeds.size(); ++i)
    if (rda.seeds[i].final_marginal_tv < fm.seeds[i].final_marginal_tv) ++tv_wins;
  const double gap = 100.0 * (rda.mean_accuracy - fm.mean_accuracy);
  const bool ok = rda.completed == 5 && fm.completed == 5 && gap >= 3.0 && tv_wins >= 4;
  return {ok, fmt("RDA %.4f", rda.mean_accuracy) + fmt(" vs FixMatch %.4f", fm.mean_accuracy) +
                  fmt(", gap %.2f points (need >= 3)", gap) + ", TV wins " + std::to_string(tv_wins) +
                  "/5 (need >= 4)"};
}

Outcome prior_alignment_failure() {
  const auto cfg = desk_config(protocol::MismatchedBoth{30, 100, 10.0}, 4, "mismatched_both");
  const std::vector<Method> methods{Method::Rda, Method::FixMatchDa};
  const auto t = compare(methods, cfg);
  for (const auto& s : t.summaries) experiments.runs.push_back(s);
  const auto& rda = row_summary(t, Method::Rda);
  const auto& da = row_summary(t, Method::FixMatchDa);
  const bool ok = rda.completed == 5 && da.completed == 5 && da.mean_accuracy <= rda.mean_accuracy;
  return {ok, fmt("FixMatch+DA %.4f", da.mean_accuracy) + fmt(" vs RDA %.4f (need DA <= RDA)", rda.mean_accuracy)};
}

Outcome matched_sanity() {
  const auto cfg = desk_config(protocol::Matched{250}, 2, "matched");
  const std::vector<Method> methods{Method::Rda, Method::FixMatch};
  const auto t = compare(methods, cfg);
  for (const auto& s : t.summaries) experiments.runs.push_back(s);
  const auto& rda = row_summary(t, Method::Rda);
  const auto& fm = row_summary(t, Method::FixMatch);
  const double diff = 100.0 * (rda.mean_accuracy - fm.mean_accuracy);
  const bool ok = rda.completed == 5 && fm.completed == 5 && std::abs(diff) <= 2.0;
  return {ok, fmt("RDA %.4f", rda.mean_accuracy) + fmt(" vs FixMatch %.4f", fm.mean_accuracy) +
                  fmt(", difference %.2f points (need within 2)", diff)};
}

bool same_step(const StepOutput& a, const StepOutput& b) {
  return a.loss_total == b.loss_total && a.loss_sd == b.loss_sd && a.loss_sa == b.loss_sa &&
         a.loss_cd == b.loss_cd && a.loss_ca == b.loss_ca && a.mask_rate == b.mask_rate &&
         a.batch_pseudo_marginal == b.batch_pseudo_marginal && a.pseudo_counts == b.pseudo_counts &&
         a.argmax_counts == b.argmax_counts && a.pred_sum == b.pred_sum &&
         a.pred_entropy_sum == b.pred_entropy_sum;
}

Outcome participation_invariants() {
  std::size_t rda_steps = 0, partial = 0, epochs = 0, negative_mi = 0;
  for (const auto& s : experiments.runs)
    for (const auto& seed : s.seeds) {
      if (s.method == Method::Rda) {
        rda_steps += seed.metrics.step_mask_rates.size();
        for (double m : seed.metrics.step_mask_rates)
          if (m != 1.0) ++partial;
      }
      for (const auto& e : seed.metrics.epochs) {
        ++epochs;
        if (!(e.mi_proxy >= 0.0)) ++negative_mi;
      }
    }

  // Checkpoints at the start, mid-epoch, on an epoch boundary and late in
  // the run, for every method.
  RunSpec spec;
  spec.dataset.protocol = protocol::MismatchedBoth{30, 100, 10.0};
  spec.dataset.m0 = 100;
  spec.train.epochs = 3;
  spec.train.steps_per_epoch = 12;
  spec.test_per_class = 50;
  std::size_t resumes = 0, diverged = 0;
  for (Method m : {Method::Rda, Method::FixMatch, Method::FixMatchDa}) {
    spec.train.method = m;
    Trainer original(spec);
    for (std::size_t at : {0, 5, 12, 29}) {
      while (original.step_count() < at) original.step();
      Trainer resumed = Trainer::from_checkpoint(original.checkpoint());
      bool same = true;
      for (int k = 0; k < 5; ++k) {
        const auto a = original.step();
        const auto b = resumed.step();
        same = same && same_step(a, b);
      }
      same = same && original.params() == resumed.params() && original.optimizer().momentum_buffers == resumed.optimizer().momentum_buffers &&
             original.alignment() == resumed.alignment() && original.rngs() == resumed.rngs() &&
             original.metrics().epochs == resumed.metrics().epochs;
      ++resumes;
      if (!same) ++diverged;
    }
  }
  const bool ok = rda_steps > 0 && partial == 0 && epochs > 0 && negative_mi == 0 && diverged == 0;
  return {ok, std::to_string(partial) + " of " + std::to_string(rda_steps) + " RDA steps below full mask; " +
                  std::to_string(negative_mi) + " of " + std::to_string(epochs) + " epochs with negative MI proxy; " +
                  std::to_string(diverged) + " of " + std::to_string(resumes) + " checkpoint resumes diverged within 5 steps"};
}

}  // namespace

int main() {
  experiments.root = fs::temp_directory_path() / ("rda_acceptance_" + std::to_string(std::random_device{}()));
  fs::create_directories(experiments.root);

  run_criterion(1, "reverse closed form", 5, reverse_closed_form);
  run_criterion(2, "reverse entropy inequality", 30, theorem1_suite);
  run_criterion(3, "order reversal", 5, order_reversal);
  run_criterion(4, "gradient check", 10, gradient_check);
  run_criterion(5, "alignment algebra", 5, alignment_algebra);
  run_criterion(6, "protocol counts", 5, protocol_counts);
  run_criterion(7, "imbalanced labeled experiment", 600, mismatched_experiment);
  run_criterion(8, "prior alignment under reversed unlabeled", 600, prior_alignment_failure);
  run_criterion(9, "matched setting", 600, matched_sanity);
  run_criterion(10, "full participation and resumability", 600, participation_invariants);

  std::error_code ec;
  fs::remove_all(experiments.root, ec);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
