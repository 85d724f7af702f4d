// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rda/alignment.hpp"
#include "rda/datasets.hpp"
#include "rda/numerics.hpp"
#include "rda/probvec.hpp"

namespace rda {

enum class Method { Rda, FixMatch, FixMatchDa };

std::string method_name(Method m);
/// Accepts "rda", "fixmatch", "fixmatch_da". Throws Config otherwise.
Method parse_method(std::string_view name);

struct TrainConfig {
  std::size_t batch_size = 16;  ///< B
  std::size_t mu = 4;           ///< unlabeled batch is mu * B
  double lambda_a = 1.0;
  double lambda_cd = 1.0;  ///< also the unsupervised weight of the baselines
  double lambda_ca = 1.0;
  std::size_t epochs = 60;
  std::size_t steps_per_epoch = 64;
  Method method = Method::Rda;
  double tau = 0.95;  ///< baselines only
  std::uint64_t seed = 0;
  std::size_t num_classes = 10;

  std::vector<std::size_t> hidden = {64, 64};
  double base_lr = 0.03;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  AugmentParams augment;

  std::size_t unlabeled_batch_size() const noexcept { return mu * batch_size; }
  std::size_t total_steps() const noexcept { return epochs * steps_per_epoch; }
  void validate() const;
};

/// Raw (un-augmented) batches as drawn from the dataset.
struct LabeledBatch {
  Matrix features;
  std::vector<HardLabel> labels;
};

struct UnlabeledBatch {
  Matrix features;
  std::vector<HardLabel> true_labels;  ///< diagnostics only
};

/// Independent generator streams, so that methods which skip a draw (the
/// baselines never sample complementary labels) still see identical
/// augmentations and batch orders.
struct StepRngs {
  std::mt19937_64 sampling;
  std::mt19937_64 augment;
  std::mt19937_64 complementary;

  static StepRngs from_seed(std::uint64_t seed);
  friend bool operator==(const StepRngs&, const StepRngs&) = default;
};

struct LossWeights {
  double a = 1.0;
  double cd = 1.0;
  double ca = 1.0;
};

/// Everything the differentiable part of a step sees. Targets are constants.
struct LossInputs {
  Matrix labeled;                        ///< weak view, B rows
  std::vector<HardLabel> labels;
  std::vector<HardLabel> complementary;  ///< empty: no auxiliary supervised term
  Matrix unlabeled;                      ///< strong view, mu*B rows
  std::vector<HardLabel> pseudo;         ///< hard targets for the default head
  std::vector<double> mask;              ///< per-row 0/1 weight; empty means all ones
  std::vector<ProbVec> soft;             ///< targets for the auxiliary head; empty: no term
};

struct LossTerms {
  double total = 0.0;
  double sd = 0.0;
  double sa = 0.0;
  double cd = 0.0;
  double ca = 0.0;
};

/// total = sd + a*sa + cd_w*cd + ca_w*ca, each term averaged over its own batch
/// (cd divides by the full unlabeled batch size, masked rows contribute 0).
/// Writes analytic parameter gradients when `grads` is non-null.
LossTerms compute_loss(const ModelParams& params, const LossInputs& inputs,
                       const LossWeights& weights, Gradients* grads);

struct StepOutput {
  double loss_total = 0.0;
  double loss_sd = 0.0;
  double loss_sa = 0.0;
  double loss_cd = 0.0;
  double loss_ca = 0.0;
  ProbVec batch_pseudo_marginal;
  double mask_rate = 0.0;

  // Diagnostics over the weak unlabeled view.
  std::vector<double> pseudo_counts;  ///< pseudo-labels that entered the loss
  std::vector<double> argmax_counts;  ///< argmax of raw p, masked or not
  std::vector<double> pred_sum;       ///< sum of p over the batch
  double pred_entropy_sum = 0.0;      ///< sum of H(p) over the batch
};

/// One iteration of reciprocal distribution alignment training:
/// complementary labels, both supervised terms, reciprocally aligned targets
/// for the weak view, consistency on the strong view, tracker update, SGD.
StepOutput rda_step(ModelParams& params, OptimizerState& opt, AlignmentState& align,
                    const LabeledBatch& labeled, const UnlabeledBatch& unlabeled,
                    const TrainConfig& config, double lr, StepRngs& rngs);

/// Confidence-thresholded pseudo-labelling on the default head only.
StepOutput fixmatch_step(ModelParams& params, OptimizerState& opt, const LabeledBatch& labeled,
                         const UnlabeledBatch& unlabeled, const TrainConfig& config, double lr,
                         StepRngs& rngs);

/// fixmatch_step with p replaced by prior_align(p, prior, tracker) before
/// thresholding; the tracker records raw p every step.
StepOutput fixmatch_da_step(ModelParams& params, OptimizerState& opt,
                            DistributionTracker& tracker_p, const ProbVec& prior,
                            const LabeledBatch& labeled, const UnlabeledBatch& unlabeled,
                            const TrainConfig& config, double lr, StepRngs& rngs);

struct EvalResult {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  std::vector<std::pair<double, bool>> confidences;  ///< (max prob, correct)
};

/// Accuracy of the default head.
EvalResult evaluate(const ModelParams& params, std::span<const TestExample> test);

struct EpochRecord {
  std::size_t epoch = 0;
  double accuracy = 0.0;
  double loss_total = 0.0;
  double loss_sd = 0.0;
  double loss_sa = 0.0;
  double loss_cd = 0.0;
  double loss_ca = 0.0;
  double marginal_tv = 0.0;
  double h_expected = 0.0;
  double h_mean = 0.0;
  double mi_proxy = 0.0;
  ProbVec pseudo_marginal;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct RunMetrics {
  Method method = Method::Rda;
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;  ///< epoch 0 is the initial model
  ProbVec true_unlabeled_marginal;
  std::vector<double> per_class_accuracy;  ///< final model
  std::vector<std::pair<double, bool>> confidences;  ///< final model, test set
  std::vector<double> step_mask_rates;
  bool aborted = false;
  std::string abort_reason;

  double final_accuracy() const { return epochs.empty() ? 0.0 : epochs.back().accuracy; }
};

/// Synthetic ring source parameters.
struct SourceConfig {
  std::size_t dim = 2;
  double radius = 4.0;
  double spread = 1.0;
  std::uint64_t seed = 0;
};

/// Everything needed to regenerate a run's data and model from scratch.
struct RunSpec {
  DatasetSpec dataset;
  SourceConfig source;
  TrainConfig train;
  std::size_t test_per_class = kTestPerClass;

  void validate() const;
};

Dataset build_dataset(const RunSpec& spec);

/// Reshuffles the index range at every pass; a batch that crosses the end of
/// a pass continues into a fresh shuffle.
class EpochSampler {
 public:
  EpochSampler() = default;
  explicit EpochSampler(std::size_t population) : population_(population) {}

  std::vector<std::size_t> next(std::size_t count, std::mt19937_64& rng);

  std::size_t population() const noexcept { return population_; }
  const std::vector<std::size_t>& order() const noexcept { return order_; }
  std::size_t position() const noexcept { return position_; }
  void restore(std::vector<std::size_t> order, std::size_t position);

  friend bool operator==(const EpochSampler&, const EpochSampler&) = default;

 private:
  std::size_t population_ = 0;
  std::vector<std::size_t> order_;
  std::size_t position_ = 0;
};

/// Running sums for the epoch currently in progress.
struct EpochAccumulator {
  std::size_t steps = 0;
  double loss_total = 0.0, loss_sd = 0.0, loss_sa = 0.0, loss_cd = 0.0, loss_ca = 0.0;
  std::vector<double> pseudo_counts;
  std::vector<double> argmax_counts;
  std::vector<double> pred_sum;
  double pred_entropy_sum = 0.0;
  double pred_count = 0.0;

  void reset(std::size_t num_classes);
  void add(const StepOutput& out, std::size_t unlabeled_rows);

  friend bool operator==(const EpochAccumulator&, const EpochAccumulator&) = default;
};

/// Owns a model, its optimizer and alignment state, generators and batch
/// samplers for one run. Not thread-safe; separate instances share nothing.
class Trainer {
 public:
  explicit Trainer(RunSpec spec);

  const RunSpec& spec() const noexcept { return spec_; }
  const TrainConfig& config() const noexcept { return spec_.train; }
  const Dataset& data() const noexcept { return data_; }
  const ModelParams& params() const noexcept { return params_; }
  const OptimizerState& optimizer() const noexcept { return opt_; }
  const AlignmentState& alignment() const noexcept { return align_; }
  const StepRngs& rngs() const noexcept { return rngs_; }
  std::size_t step_count() const noexcept { return step_; }
  const RunMetrics& metrics() const noexcept { return metrics_; }
  bool finished() const noexcept { return step_ >= spec_.train.total_steps(); }

  /// One step of the configured method; closes the epoch (evaluation plus
  /// a new EpochRecord) when it was the epoch's last step.
  StepOutput step();

  /// Runs all remaining steps. Step failures end the run with the metrics
  /// gathered so far and `aborted` set.
  const RunMetrics& train();

  /// Serialized full state; from_checkpoint resumes bit-exactly.
  std::string checkpoint() const;
  static Trainer from_checkpoint(const std::string& document);

 private:
  struct RestoreTag {};
  Trainer(RunSpec spec, RestoreTag);

  void record_initial_epoch();
  void close_epoch();
  EpochRecord make_record(std::size_t epoch, const EvalResult& eval) const;

  RunSpec spec_;
  Dataset data_;
  ModelParams params_;
  OptimizerState opt_;
  AlignmentState align_;
  ProbVec labeled_prior_;
  StepRngs rngs_;
  EpochSampler labeled_sampler_;
  EpochSampler unlabeled_sampler_;
  std::size_t step_ = 0;
  EpochAccumulator acc_;
  RunMetrics metrics_;

  friend struct CheckpointCodec;
};

/// Shorthand: build, train to completion, return metrics.
RunMetrics train(const RunSpec& spec);

}  // namespace rda
