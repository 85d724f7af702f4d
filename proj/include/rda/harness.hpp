// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rda/numerics.hpp"
#include "rda/serialization.hpp"
#include "rda/trainer.hpp"

namespace rda {

struct ExperimentConfig {
  RunSpec run;  ///< run.train.seed is replaced by each entry of `seeds`
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::filesystem::path output_dir = "rda_out";
  bool plots = true;
  std::size_t max_parallel = 1;  ///< seeds trained concurrently

  void validate() const;
};

/// Top level keys: dataset, source, train, test_per_class, seeds,
/// output_dir, plots, max_parallel. Missing keys keep their defaults.
ExperimentConfig experiment_from_json(const Json& j);
Json experiment_to_json(const ExperimentConfig& c);

struct SeedResult {
  std::uint64_t seed = 0;
  bool complete = false;
  std::string error;
  double final_accuracy = 0.0;
  double final_marginal_tv = 0.0;
  RunMetrics metrics;
};

struct Summary {
  Method method = Method::Rda;
  std::vector<SeedResult> seeds;
  std::size_t completed = 0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_marginal_tv = 0.0;
  double std_marginal_tv = 0.0;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation; 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

/// Trains every seed, writes <out>/seed_<s>/metrics.csv (plus SVG plots when
/// enabled) and <out>/summary.json. Seeds that fail are marked incomplete and
/// excluded from the statistics.
Summary run_experiment(const ExperimentConfig& config);

Json summary_to_json(const Summary& s);

// Metrics CSV: epoch,accuracy,loss_total,loss_sd,loss_sa,loss_cd,loss_ca,
// marginal_tv,h_expected,h_mean,mi_proxy,marginal_0..marginal_{n-1}
std::string metrics_csv_header(std::size_t num_classes);
void write_metrics_csv(std::span<const EpochRecord> epochs, std::ostream& os);
std::vector<EpochRecord> read_metrics_csv(std::istream& is);

struct ComparisonRow {
  Method method = Method::Rda;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_marginal_tv = 0.0;
  double std_marginal_tv = 0.0;
  bool best_accuracy = false;
  bool best_marginal_tv = false;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  std::vector<Summary> summaries;
};

/// Runs each method on the same datasets and seeds under <out>/<method>
/// (suffixed when a method repeats) and writes <out>/comparison.csv.
ComparisonTable compare(std::span<const Method> methods, const ExperimentConfig& shared);

void write_comparison_csv(const ComparisonTable& table, std::ostream& os);
std::vector<ComparisonRow> read_comparison_csv(std::istream& is);

struct Theorem1Row {
  std::size_t num_classes = 0;
  double min_gap = 0.0;  ///< min over trials of H(reverse(p)) - H(p)
  std::vector<double> worst_p;
  bool asserted = false;  ///< n = 2 and n >= 5 are asserted
  bool passed = true;
};

struct Theorem1Report {
  std::vector<Theorem1Row> rows;
  bool passed = true;
};

/// Half the trials draw from Dirichlet(0.05) (near-vertex), half from
/// Dirichlet(1) (uniform on the simplex).
Theorem1Report verify_theorem1(std::span<const std::size_t> class_counts, std::size_t trials,
                               std::uint64_t seed);

struct ReverseReport {
  std::size_t trials_per_n = 0;
  double max_deviation = 0.0;         ///< |Norm(1-q) - (1-q_j)/(n-1)|
  std::size_t order_violations = 0;   ///< rank-order pairs not reversed
  double involution_deviation = 0.0;  ///< n = 2: |reverse(reverse(q)) - q|
  std::vector<double> counterexample;
  bool passed = true;
};

/// Random q for every n in [2, 20].
ReverseReport verify_reverse(std::size_t trials, std::uint64_t seed);

/// Gradient check of the full RDA objective (both supervised and both
/// consistency terms, targets built through the real alignment path) on a
/// random 2-16-16 two-head net, 4 labeled and 4 unlabeled rows.
GradCheckReport rda_gradcheck(std::uint64_t seed, double tolerance);

/// accuracy.svg, marginal.svg, confidence.svg. Throws Usage on empty
/// metrics and Io when the directory cannot be written.
std::vector<std::filesystem::path> emit_plots(const RunMetrics& metrics,
                                              const std::filesystem::path& output_dir);

Json theorem1_to_json(const Theorem1Report& r);
Json reverse_to_json(const ReverseReport& r);
Json gradcheck_to_json(const GradCheckReport& r);
Json comparison_to_json(const ComparisonTable& t);

/// Dirichlet(alpha) draw; retries on total underflow.
std::vector<double> sample_dirichlet(std::size_t n, double alpha, std::mt19937_64& rng);

}  // namespace rda
