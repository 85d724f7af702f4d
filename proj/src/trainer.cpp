// SPDX-License-Identifier: Apache-2.0
#include "rda/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rda/error.hpp"
#include "rda/serialization.hpp"

namespace rda {

std::string method_name(Method m) {
  switch (m) {
    case Method::Rda: return "rda";
    case Method::FixMatch: return "fixmatch";
    case Method::FixMatchDa: return "fixmatch_da";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "rda") return Method::Rda;
  if (name == "fixmatch") return Method::FixMatch;
  if (name == "fixmatch_da") return Method::FixMatchDa;
  fail(ErrorCategory::Config, "unknown method '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  require(batch_size >= 1, ErrorCategory::Config, "train: batch_size must be >= 1");
  require(mu >= 1, ErrorCategory::Config, "train: mu must be >= 1");
  require(lambda_a >= 0.0 && lambda_cd >= 0.0 && lambda_ca >= 0.0, ErrorCategory::Config,
          "train: loss weights must be >= 0");
  require(steps_per_epoch >= 1, ErrorCategory::Config, "train: steps_per_epoch must be >= 1");
  require(num_classes >= 2, ErrorCategory::Config, "train: need at least two classes");
  require(std::isfinite(tau), ErrorCategory::Config, "train: tau must be finite");
  require(base_lr > 0.0 && momentum >= 0.0 && weight_decay >= 0.0, ErrorCategory::Config,
          "train: optimizer settings out of range");
  require(augment.sigma_weak >= 0.0 && augment.sigma_strong >= 0.0 && augment.drop_prob >= 0.0 &&
              augment.drop_prob <= 1.0,
          ErrorCategory::Config, "train: augmentation settings out of range");
}

void RunSpec::validate() const {
  dataset.validate();
  train.validate();
  require(dataset.num_classes == train.num_classes, ErrorCategory::Config,
          "run: dataset and train disagree on num_classes");
  require(source.dim >= 2, ErrorCategory::Config, "run: source dim must be >= 2");
  require(source.spread > 0.0, ErrorCategory::Config, "run: source spread must be positive");
}

Dataset build_dataset(const RunSpec& spec) {
  const auto source = make_ring_source(spec.dataset.num_classes, spec.source.dim, spec.source.radius,
                                       spec.source.spread, spec.source.seed);
  return materialize(source, split_counts(spec.dataset), spec.train.seed, spec.test_per_class);
}

StepRngs StepRngs::from_seed(std::uint64_t seed) {
  auto make = [seed](std::uint32_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      tag};
    return std::mt19937_64(seq);
  };
  return {make(11), make(12), make(13)};
}

namespace {

Matrix augmented(const Matrix& raw, AugmentMode mode, const AugmentParams& params,
                 std::mt19937_64& rng) {
  Matrix out(raw.rows(), raw.cols());
  for (std::size_t r = 0; r < raw.rows(); ++r) {
    const auto row = augment(raw.row(r), mode, params, rng);
    std::copy(row.begin(), row.end(), out.row(r).begin());
  }
  return out;
}

struct Views {
  Matrix labeled_weak;
  Matrix unlabeled_weak;
  Matrix unlabeled_strong;
};

// Draw order is fixed so every method consumes the augmentation stream alike.
Views make_views(const LabeledBatch& labeled, const UnlabeledBatch& unlabeled,
                 const AugmentParams& params, std::mt19937_64& rng) {
  Views v;
  v.labeled_weak = augmented(labeled.features, AugmentMode::Weak, params, rng);
  v.unlabeled_weak = augmented(unlabeled.features, AugmentMode::Weak, params, rng);
  v.unlabeled_strong = augmented(unlabeled.features, AugmentMode::Strong, params, rng);
  return v;
}

void check_batches(const LabeledBatch& labeled, const UnlabeledBatch& unlabeled,
                   const TrainConfig& config) {
  require(labeled.features.rows() == config.batch_size &&
              labeled.labels.size() == config.batch_size,
          ErrorCategory::Usage, "step: labeled batch size differs from config");
  require(unlabeled.features.rows() == config.unlabeled_batch_size(), ErrorCategory::Usage,
          "step: unlabeled batch size differs from mu * B");
}

std::vector<ProbVec> softmax_rows(const Matrix& logits) {
  std::vector<ProbVec> out;
  out.reserve(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) out.push_back(softmax(logits.row(r)));
  return out;
}

void check_finite(const LossTerms& t) {
  if (std::isfinite(t.total)) return;
  std::ostringstream os;
  os << "non-finite loss: total=" << t.total << " sd=" << t.sd << " sa=" << t.sa
     << " cd=" << t.cd << " ca=" << t.ca;
  fail(ErrorCategory::Numerical, os.str());
}

StepOutput make_output(const LossTerms& t, const LossWeights& w, std::size_t n,
                       std::span<const ProbVec> weak_p, std::span<const HardLabel> pseudo,
                       std::span<const double> mask) {
  StepOutput out;
  out.loss_sd = t.sd;
  out.loss_sa = t.sa;
  out.loss_cd = t.cd;
  out.loss_ca = t.ca;
  out.loss_total = t.sd + w.a * t.sa + w.cd * t.cd + w.ca * t.ca;
  out.pseudo_counts.assign(n, 0.0);
  out.argmax_counts.assign(n, 0.0);
  out.pred_sum.assign(n, 0.0);
  double kept = 0.0;
  for (std::size_t i = 0; i < weak_p.size(); ++i) {
    const double m = mask.empty() ? 1.0 : mask[i];
    if (m > 0.0) out.pseudo_counts[pseudo[i].index] += 1.0;
    kept += m;
    out.argmax_counts[argmax_label(weak_p[i]).index] += 1.0;
    for (std::size_t c = 0; c < n; ++c) out.pred_sum[c] += weak_p[i][c];
    out.pred_entropy_sum += entropy(weak_p[i]);
  }
  out.mask_rate = weak_p.empty() ? 0.0 : kept / static_cast<double>(weak_p.size());
  out.batch_pseudo_marginal =
      kept > 0.0 ? normalize(out.pseudo_counts) : normalize(out.argmax_counts);
  return out;
}

// Shared tail of both baselines: threshold the (possibly aligned) weak-view
// predictions, build the masked consistency target, take the SGD step.
StepOutput threshold_step(ModelParams& params, OptimizerState& opt, const LabeledBatch& labeled,
                          const Views& views, std::span<const ProbVec> raw_p,
                          std::span<const ProbVec> guess, const TrainConfig& config, double lr) {
  LossInputs in;
  in.labeled = views.labeled_weak;
  in.labels = labeled.labels;
  in.unlabeled = views.unlabeled_strong;
  for (const auto& g : guess) {
    const HardLabel hard = argmax_label(g);
    in.pseudo.push_back(hard);
    in.mask.push_back(g[hard.index] >= config.tau ? 1.0 : 0.0);
  }
  const LossWeights weights{0.0, config.lambda_cd, 0.0};
  Gradients grads;
  const LossTerms terms = compute_loss(params, in, weights, &grads);
  check_finite(terms);
  sgd_step(params, grads, opt, lr);
  return make_output(terms, weights, config.num_classes, raw_p, in.pseudo, in.mask);
}

}  // namespace

LossTerms compute_loss(const ModelParams& params, const LossInputs& in, const LossWeights& w,
                       Gradients* grads) {
  const std::size_t b = in.labeled.rows();
  const std::size_t u = in.unlabeled.rows();
  const std::size_t n = params.num_classes();
  require(in.labels.size() == b, ErrorCategory::Usage, "loss: label count mismatch");
  require(in.complementary.empty() || in.complementary.size() == b, ErrorCategory::Usage,
          "loss: complementary label count mismatch");
  require(in.pseudo.size() == u, ErrorCategory::Usage, "loss: pseudo-label count mismatch");
  require(in.mask.empty() || in.mask.size() == u, ErrorCategory::Usage, "loss: mask size mismatch");
  require(in.soft.empty() || in.soft.size() == u, ErrorCategory::Usage,
          "loss: soft target count mismatch");
  require(b > 0, ErrorCategory::Usage, "loss: empty labeled batch");
  require(u == 0 || in.unlabeled.cols() == in.labeled.cols(), ErrorCategory::Usage,
          "loss: feature width mismatch");

  Matrix stacked(b + u, in.labeled.cols());
  std::copy(in.labeled.values().begin(), in.labeled.values().end(), stacked.values().begin());
  std::copy(in.unlabeled.values().begin(), in.unlabeled.values().end(),
            stacked.values().begin() + static_cast<std::ptrdiff_t>(in.labeled.size()));
  const ForwardResult fwd = forward_two_head(params, stacked);

  Matrix grad_d(b + u, n), grad_a(b + u, n);
  LossTerms t;
  const double inv_b = 1.0 / static_cast<double>(b);
  const double inv_u = u == 0 ? 0.0 : 1.0 / static_cast<double>(u);

  for (std::size_t r = 0; r < b; ++r) {
    const ProbVec pd = softmax(fwd.logits_d.row(r));
    t.sd += cross_entropy_hard(in.labels[r], pd);
    for (std::size_t c = 0; c < n; ++c)
      grad_d(r, c) = (pd[c] - (c == in.labels[r].index ? 1.0 : 0.0)) * inv_b;
    if (!in.complementary.empty()) {
      const ProbVec pa = softmax(fwd.logits_a.row(r));
      t.sa += cross_entropy_hard(in.complementary[r], pa);
      for (std::size_t c = 0; c < n; ++c)
        grad_a(r, c) = w.a * (pa[c] - (c == in.complementary[r].index ? 1.0 : 0.0)) * inv_b;
    }
  }
  for (std::size_t i = 0; i < u; ++i) {
    const std::size_t r = b + i;
    const double m = in.mask.empty() ? 1.0 : in.mask[i];
    if (m > 0.0) {
      const ProbVec ps = softmax(fwd.logits_d.row(r));
      t.cd += m * cross_entropy_hard(in.pseudo[i], ps);
      for (std::size_t c = 0; c < n; ++c)
        grad_d(r, c) = w.cd * m * (ps[c] - (c == in.pseudo[i].index ? 1.0 : 0.0)) * inv_u;
    }
    if (!in.soft.empty()) {
      const ProbVec qs = softmax(fwd.logits_a.row(r));
      t.ca += cross_entropy_soft(in.soft[i], qs);
      for (std::size_t c = 0; c < n; ++c) grad_a(r, c) = w.ca * (qs[c] - in.soft[i][c]) * inv_u;
    }
  }
  t.sd *= inv_b;
  t.sa *= inv_b;
  t.cd *= inv_u;
  t.ca *= inv_u;
  t.total = t.sd + w.a * t.sa + w.cd * t.cd + w.ca * t.ca;
  if (grads) *grads = backward(params, fwd.cache, grad_d, grad_a);
  return t;
}

StepOutput rda_step(ModelParams& params, OptimizerState& opt, AlignmentState& align,
                    const LabeledBatch& labeled, const UnlabeledBatch& unlabeled,
                    const TrainConfig& config, double lr, StepRngs& rngs) {
  check_batches(labeled, unlabeled, config);
  const std::size_t n = config.num_classes;
  require(align.num_classes() == n, ErrorCategory::Usage, "rda_step: tracker class count mismatch");

  LossInputs in;
  in.labels = labeled.labels;
  for (const auto& y : labeled.labels)
    in.complementary.push_back(sample_complementary(y, n, rngs.complementary));

  Views views = make_views(labeled, unlabeled, config.augment, rngs.augment);
  const ForwardResult weak = forward_two_head(params, views.unlabeled_weak);
  const auto p = softmax_rows(weak.logits_d);
  const auto q = softmax_rows(weak.logits_a);

  // Targets use the trackers as they stood before this batch.
  const AlignmentMeans means = AlignmentMeans::of(align);
  for (std::size_t i = 0; i < p.size(); ++i) {
    in.pseudo.push_back(argmax_label(reciprocal_align_p(p[i], means)));
    in.soft.push_back(reciprocal_align_q(q[i], means));
  }
  in.labeled = std::move(views.labeled_weak);
  in.unlabeled = std::move(views.unlabeled_strong);

  const LossWeights weights{config.lambda_a, config.lambda_cd, config.lambda_ca};
  Gradients grads;
  const LossTerms terms = compute_loss(params, in, weights, &grads);
  check_finite(terms);

  align.update(p, q);
  sgd_step(params, grads, opt, lr);
  return make_output(terms, weights, n, p, in.pseudo, {});
}

StepOutput fixmatch_step(ModelParams& params, OptimizerState& opt, const LabeledBatch& labeled,
                         const UnlabeledBatch& unlabeled, const TrainConfig& config, double lr,
                         StepRngs& rngs) {
  check_batches(labeled, unlabeled, config);
  const Views views = make_views(labeled, unlabeled, config.augment, rngs.augment);
  const auto p = softmax_rows(forward_two_head(params, views.unlabeled_weak).logits_d);
  return threshold_step(params, opt, labeled, views, p, p, config, lr);
}

StepOutput fixmatch_da_step(ModelParams& params, OptimizerState& opt,
                            DistributionTracker& tracker_p, const ProbVec& prior,
                            const LabeledBatch& labeled, const UnlabeledBatch& unlabeled,
                            const TrainConfig& config, double lr, StepRngs& rngs) {
  check_batches(labeled, unlabeled, config);
  const Views views = make_views(labeled, unlabeled, config.augment, rngs.augment);
  const auto p = softmax_rows(forward_two_head(params, views.unlabeled_weak).logits_d);
  const ProbVec running = tracker_p.mean();
  std::vector<ProbVec> aligned;
  aligned.reserve(p.size());
  for (const auto& v : p) aligned.push_back(prior_align(v, prior, running));
  StepOutput out = threshold_step(params, opt, labeled, views, p, aligned, config, lr);
  tracker_p.update(p);
  return out;
}

EvalResult evaluate(const ModelParams& params, std::span<const TestExample> test) {
  require(!test.empty(), ErrorCategory::Usage, "evaluate: empty test set");
  const std::size_t n = params.num_classes();
  Matrix x(test.size(), params.input_dim());
  for (std::size_t i = 0; i < test.size(); ++i) {
    require(test[i].features.size() == x.cols(), ErrorCategory::Config,
            "evaluate: feature width mismatch");
    std::copy(test[i].features.begin(), test[i].features.end(), x.row(i).begin());
  }
  const auto probs = softmax_rows(forward_two_head(params, x).logits_d);

  EvalResult result;
  std::vector<double> hits(n, 0.0), totals(n, 0.0);
  double correct = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const HardLabel pred = argmax_label(probs[i]);
    const bool ok = pred == test[i].label;
    correct += ok ? 1.0 : 0.0;
    hits[test[i].label.index] += ok ? 1.0 : 0.0;
    totals[test[i].label.index] += 1.0;
    result.confidences.emplace_back(probs[i][pred.index], ok);
  }
  result.accuracy = correct / static_cast<double>(test.size());
  for (std::size_t c = 0; c < n; ++c)
    result.per_class_accuracy.push_back(totals[c] > 0.0 ? hits[c] / totals[c] : 0.0);
  return result;
}

std::vector<std::size_t> EpochSampler::next(std::size_t count, std::mt19937_64& rng) {
  require(population_ > 0, ErrorCategory::Usage, "sampler: empty population");
  std::vector<std::size_t> out;
  out.reserve(count);
  while (out.size() < count) {
    if (position_ >= order_.size()) {
      order_.resize(population_);
      for (std::size_t i = 0; i < population_; ++i) order_[i] = i;
      std::shuffle(order_.begin(), order_.end(), rng);
      position_ = 0;
    }
    out.push_back(order_[position_++]);
  }
  return out;
}

void EpochSampler::restore(std::vector<std::size_t> order, std::size_t position) {
  require(position <= order.size(), ErrorCategory::Config, "sampler: position past end of order");
  order_ = std::move(order);
  position_ = position;
}

void EpochAccumulator::reset(std::size_t num_classes) {
  *this = EpochAccumulator{};
  pseudo_counts.assign(num_classes, 0.0);
  argmax_counts.assign(num_classes, 0.0);
  pred_sum.assign(num_classes, 0.0);
}

void EpochAccumulator::add(const StepOutput& out, std::size_t unlabeled_rows) {
  ++steps;
  loss_total += out.loss_total;
  loss_sd += out.loss_sd;
  loss_sa += out.loss_sa;
  loss_cd += out.loss_cd;
  loss_ca += out.loss_ca;
  for (std::size_t c = 0; c < pseudo_counts.size(); ++c) {
    pseudo_counts[c] += out.pseudo_counts[c];
    argmax_counts[c] += out.argmax_counts[c];
    pred_sum[c] += out.pred_sum[c];
  }
  pred_entropy_sum += out.pred_entropy_sum;
  pred_count += static_cast<double>(unlabeled_rows);
}

Trainer::Trainer(RunSpec spec) : Trainer(std::move(spec), RestoreTag{}) {
  record_initial_epoch();
}

Trainer::Trainer(RunSpec spec, RestoreTag)
    : spec_((spec.validate(), std::move(spec))),
      data_(build_dataset(spec_)),
      align_(spec_.train.num_classes),
      labeled_prior_(data_.labeled_marginal()),
      rngs_(StepRngs::from_seed(spec_.train.seed)),
      labeled_sampler_(data_.labeled.size()),
      unlabeled_sampler_(data_.unlabeled.size()) {
  const auto& cfg = spec_.train;
  std::seed_seq init_seq{static_cast<std::uint32_t>(cfg.seed),
                         static_cast<std::uint32_t>(cfg.seed >> 32), 10u};
  std::mt19937_64 init_rng(init_seq);
  params_ = ModelParams::initialized(data_.dim, cfg.hidden, cfg.num_classes, init_rng);
  opt_ = OptimizerState::for_params(params_, cfg.momentum, cfg.weight_decay, cfg.base_lr);
  acc_.reset(cfg.num_classes);
  metrics_.method = cfg.method;
  metrics_.seed = cfg.seed;
  metrics_.true_unlabeled_marginal = data_.unlabeled_marginal();
  if (cfg.total_steps() > 0) {
    require(!data_.labeled.empty(), ErrorCategory::Config, "run: labeled split is empty");
    require(!data_.unlabeled.empty(), ErrorCategory::Config, "run: unlabeled split is empty");
  }
}

void Trainer::record_initial_epoch() {
  // Epoch 0: untrained model, diagnostics from one clean pass over the
  // unlabeled split using the method's own pseudo-labelling rule.
  const std::size_t n = spec_.train.num_classes;
  StepOutput probe;
  probe.pseudo_counts.assign(n, 0.0);
  probe.argmax_counts.assign(n, 0.0);
  probe.pred_sum.assign(n, 0.0);
  if (!data_.unlabeled.empty()) {
    Matrix x(data_.unlabeled.size(), data_.dim);
    for (std::size_t i = 0; i < data_.unlabeled.size(); ++i)
      std::copy(data_.unlabeled[i].features.begin(), data_.unlabeled[i].features.end(),
                x.row(i).begin());
    const ForwardResult fwd = forward_two_head(params_, x);
    const auto p = softmax_rows(fwd.logits_d);
    const AlignmentMeans means = AlignmentMeans::of(align_);
    std::vector<HardLabel> pseudo;
    std::vector<double> mask;
    for (const auto& v : p) {
      switch (spec_.train.method) {
        case Method::Rda:
          pseudo.push_back(argmax_label(reciprocal_align_p(v, means)));
          mask.push_back(1.0);
          break;
        case Method::FixMatch:
        case Method::FixMatchDa: {
          const ProbVec g = spec_.train.method == Method::FixMatch
                                ? v
                                : prior_align(v, labeled_prior_, means.p);
          const HardLabel h = argmax_label(g);
          pseudo.push_back(h);
          mask.push_back(g[h.index] >= spec_.train.tau ? 1.0 : 0.0);
          break;
        }
      }
    }
    probe = make_output(LossTerms{}, LossWeights{}, n, p, pseudo, mask);
  }
  acc_.reset(n);
  acc_.add(probe, data_.unlabeled.size());
  acc_.steps = 0;
  const EvalResult eval = evaluate(params_, data_.test);
  metrics_.epochs.push_back(make_record(0, eval));
  metrics_.per_class_accuracy = eval.per_class_accuracy;
  metrics_.confidences = eval.confidences;
  acc_.reset(n);
}

EpochRecord Trainer::make_record(std::size_t epoch, const EvalResult& eval) const {
  EpochRecord r;
  r.epoch = epoch;
  r.accuracy = eval.accuracy;
  if (acc_.steps > 0) {
    const double s = static_cast<double>(acc_.steps);
    r.loss_total = acc_.loss_total / s;
    r.loss_sd = acc_.loss_sd / s;
    r.loss_sa = acc_.loss_sa / s;
    r.loss_cd = acc_.loss_cd / s;
    r.loss_ca = acc_.loss_ca / s;
  }
  const auto sum = [](const std::vector<double>& v) {
    double t = 0.0;
    for (double x : v) t += x;
    return t;
  };
  const std::size_t n = spec_.train.num_classes;
  if (sum(acc_.pseudo_counts) > 0.0) r.pseudo_marginal = normalize(acc_.pseudo_counts);
  else if (sum(acc_.argmax_counts) > 0.0) r.pseudo_marginal = normalize(acc_.argmax_counts);
  else r.pseudo_marginal = ProbVec::uniform(n);
  r.marginal_tv = total_variation(r.pseudo_marginal, metrics_.true_unlabeled_marginal);
  if (acc_.pred_count > 0.0) {
    r.h_expected = entropy(normalize(acc_.pred_sum));
    r.h_mean = acc_.pred_entropy_sum / acc_.pred_count;
    r.mi_proxy = r.h_expected - r.h_mean;
    // Jensen makes this non-negative; only summation rounding can dip below.
    if (r.mi_proxy < 0.0 && r.mi_proxy > -1e-12) r.mi_proxy = 0.0;
  }
  return r;
}

void Trainer::close_epoch() {
  const EvalResult eval = evaluate(params_, data_.test);
  metrics_.epochs.push_back(make_record(step_ / spec_.train.steps_per_epoch, eval));
  metrics_.per_class_accuracy = eval.per_class_accuracy;
  metrics_.confidences = eval.confidences;
  acc_.reset(spec_.train.num_classes);
}

StepOutput Trainer::step() {
  require(!finished(), ErrorCategory::Usage, "trainer: run already finished");
  const auto& cfg = spec_.train;
  const double lr = lr_at(LrSchedule{cfg.base_lr, cfg.total_steps()}, step_);

  LabeledBatch lb{Matrix(cfg.batch_size, data_.dim), {}};
  for (std::size_t i = 0; const std::size_t idx : labeled_sampler_.next(cfg.batch_size, rngs_.sampling)) {
    const auto& ex = data_.labeled[idx];
    std::copy(ex.features.begin(), ex.features.end(), lb.features.row(i++).begin());
    lb.labels.push_back(ex.label);
  }
  const std::size_t u = cfg.unlabeled_batch_size();
  UnlabeledBatch ub{Matrix(u, data_.dim), {}};
  for (std::size_t i = 0; const std::size_t idx : unlabeled_sampler_.next(u, rngs_.sampling)) {
    const auto& ex = data_.unlabeled[idx];
    std::copy(ex.features.begin(), ex.features.end(), ub.features.row(i++).begin());
    ub.true_labels.push_back(ex.true_label);
  }

  StepOutput out;
  switch (cfg.method) {
    case Method::Rda:
      out = rda_step(params_, opt_, align_, lb, ub, cfg, lr, rngs_);
      break;
    case Method::FixMatch:
      out = fixmatch_step(params_, opt_, lb, ub, cfg, lr, rngs_);
      break;
    case Method::FixMatchDa:
      out = fixmatch_da_step(params_, opt_, align_.tracker_p, labeled_prior_, lb, ub, cfg, lr,
                             rngs_);
      break;
  }
  metrics_.step_mask_rates.push_back(out.mask_rate);
  acc_.add(out, u);
  ++step_;
  if (step_ % cfg.steps_per_epoch == 0) close_epoch();
  return out;
}

const RunMetrics& Trainer::train() {
  while (!finished() && !metrics_.aborted) {
    try {
      step();
    } catch (const Error& e) {
      std::ostringstream os;
      os << "step " << step_ << ": " << e.what();
      metrics_.aborted = true;
      metrics_.abort_reason = os.str();
    }
  }
  return metrics_;
}

struct CheckpointCodec {
  static std::string encode(const Trainer& t) {
    auto rng_text = [](const std::mt19937_64& g) {
      std::ostringstream os;
      os << g;
      return os.str();
    };
    auto sampler = [](const EpochSampler& s) {
      return Json{{"order", s.order()}, {"position", s.position()}};
    };
    Json acc{{"steps", t.acc_.steps},
             {"loss_total", t.acc_.loss_total},
             {"loss_sd", t.acc_.loss_sd},
             {"loss_sa", t.acc_.loss_sa},
             {"loss_cd", t.acc_.loss_cd},
             {"loss_ca", t.acc_.loss_ca},
             {"pseudo_counts", t.acc_.pseudo_counts},
             {"argmax_counts", t.acc_.argmax_counts},
             {"pred_sum", t.acc_.pred_sum},
             {"pred_entropy_sum", t.acc_.pred_entropy_sum},
             {"pred_count", t.acc_.pred_count}};
    Json doc{{"format", "rda-checkpoint"},
             {"version", 1},
             {"run", t.spec_},
             {"step", t.step_},
             {"params", t.params_},
             {"optimizer", t.opt_},
             {"alignment", t.align_},
             {"rng", {{"sampling", rng_text(t.rngs_.sampling)},
                      {"augment", rng_text(t.rngs_.augment)},
                      {"complementary", rng_text(t.rngs_.complementary)}}},
             {"labeled_sampler", sampler(t.labeled_sampler_)},
             {"unlabeled_sampler", sampler(t.unlabeled_sampler_)},
             {"epoch_accumulator", acc},
             {"metrics", t.metrics_}};
    return doc.dump();
  }

  static Trainer decode(const std::string& text) {
    Json doc;
    try {
      doc = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCategory::Config, std::string("checkpoint: parse error: ") + e.what());
    }
    try {
      require(doc.value("format", "") == "rda-checkpoint" && doc.value("version", 0) == 1,
              ErrorCategory::Config, "checkpoint: unrecognized format");
      Trainer t(doc.at("run").get<RunSpec>(), Trainer::RestoreTag{});
      t.step_ = doc.at("step").get<std::size_t>();
      t.params_ = doc.at("params").get<ModelParams>();
      t.opt_ = doc.at("optimizer").get<OptimizerState>();
      t.align_ = alignment_from_json(doc.at("alignment"));
      auto rng_from = [](const Json& j, std::mt19937_64& g) {
        std::istringstream is(j.get<std::string>());
        is >> g;
        require(!is.fail(), ErrorCategory::Config, "checkpoint: bad generator state");
      };
      rng_from(doc.at("rng").at("sampling"), t.rngs_.sampling);
      rng_from(doc.at("rng").at("augment"), t.rngs_.augment);
      rng_from(doc.at("rng").at("complementary"), t.rngs_.complementary);
      auto sampler_from = [](const Json& j, EpochSampler& s) {
        s.restore(j.at("order").get<std::vector<std::size_t>>(),
                  j.at("position").get<std::size_t>());
      };
      sampler_from(doc.at("labeled_sampler"), t.labeled_sampler_);
      sampler_from(doc.at("unlabeled_sampler"), t.unlabeled_sampler_);
      const Json& acc = doc.at("epoch_accumulator");
      t.acc_.steps = acc.at("steps").get<std::size_t>();
      t.acc_.loss_total = acc.at("loss_total").get<double>();
      t.acc_.loss_sd = acc.at("loss_sd").get<double>();
      t.acc_.loss_sa = acc.at("loss_sa").get<double>();
      t.acc_.loss_cd = acc.at("loss_cd").get<double>();
      t.acc_.loss_ca = acc.at("loss_ca").get<double>();
      t.acc_.pseudo_counts = acc.at("pseudo_counts").get<std::vector<double>>();
      t.acc_.argmax_counts = acc.at("argmax_counts").get<std::vector<double>>();
      t.acc_.pred_sum = acc.at("pred_sum").get<std::vector<double>>();
      t.acc_.pred_entropy_sum = acc.at("pred_entropy_sum").get<double>();
      t.acc_.pred_count = acc.at("pred_count").get<double>();
      t.metrics_ = doc.at("metrics").get<RunMetrics>();
      require(t.params_.num_classes() == t.spec_.train.num_classes, ErrorCategory::Config,
              "checkpoint: model class count mismatch");
      return t;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCategory::Config, std::string("checkpoint: ") + e.what());
    }
  }
};

std::string Trainer::checkpoint() const { return CheckpointCodec::encode(*this); }

Trainer Trainer::from_checkpoint(const std::string& document) {
  return CheckpointCodec::decode(document);
}

RunMetrics train(const RunSpec& spec) {
  Trainer t(spec);
  return t.train();
}

}  // namespace rda
