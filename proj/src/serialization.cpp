// SPDX-License-Identifier: Apache-2.0
#include "rda/serialization.hpp"

#include <algorithm>
#include <string>

#include "rda/error.hpp"

namespace rda {

namespace {

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCategory::Config, std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

template <typename T>
T read_req(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) fail(ErrorCategory::Config, std::string("missing key '") + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::Config, std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const char* context) {
  if (!j.is_object()) fail(ErrorCategory::Config, std::string(context) + ": expected an object");
  for (const auto& item : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known)
      fail(ErrorCategory::Config, std::string(context) + ": unknown key '" + item.key() + "'");
  }
}

void to_json(Json& j, const AugmentParams& a) {
  j = Json{{"sigma_weak", a.sigma_weak}, {"sigma_strong", a.sigma_strong},
           {"drop_prob", a.drop_prob}};
}

void from_json(const Json& j, AugmentParams& a) {
  check_keys(j, {"sigma_weak", "sigma_strong", "drop_prob"}, "augment");
  read_opt(j, "sigma_weak", a.sigma_weak);
  read_opt(j, "sigma_strong", a.sigma_strong);
  read_opt(j, "drop_prob", a.drop_prob);
}

void to_json(Json& j, const TrainConfig& c) {
  j = Json{{"batch_size", c.batch_size},
           {"mu", c.mu},
           {"lambda_a", c.lambda_a},
           {"lambda_cd", c.lambda_cd},
           {"lambda_ca", c.lambda_ca},
           {"epochs", c.epochs},
           {"steps_per_epoch", c.steps_per_epoch},
           {"method", method_name(c.method)},
           {"tau", c.tau},
           {"seed", c.seed},
           {"num_classes", c.num_classes},
           {"hidden", c.hidden},
           {"base_lr", c.base_lr},
           {"momentum", c.momentum},
           {"weight_decay", c.weight_decay},
           {"augment", c.augment}};
}

void from_json(const Json& j, TrainConfig& c) {
  check_keys(j,
             {"batch_size", "mu", "lambda_a", "lambda_cd", "lambda_ca", "epochs",
              "steps_per_epoch", "method", "tau", "seed", "num_classes", "hidden", "base_lr",
              "momentum", "weight_decay", "augment"},
             "train");
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "mu", c.mu);
  read_opt(j, "lambda_a", c.lambda_a);
  read_opt(j, "lambda_cd", c.lambda_cd);
  read_opt(j, "lambda_ca", c.lambda_ca);
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "steps_per_epoch", c.steps_per_epoch);
  if (j.contains("method")) c.method = parse_method(read_req<std::string>(j, "method"));
  read_opt(j, "tau", c.tau);
  read_opt(j, "seed", c.seed);
  read_opt(j, "num_classes", c.num_classes);
  read_opt(j, "hidden", c.hidden);
  read_opt(j, "base_lr", c.base_lr);
  read_opt(j, "momentum", c.momentum);
  read_opt(j, "weight_decay", c.weight_decay);
  if (j.contains("augment")) c.augment = j.at("augment").get<AugmentParams>();
}

void to_json(Json& j, const DatasetSpec& d) {
  j = Json{{"protocol", protocol_name(d.protocol)}, {"m0", d.m0}, {"num_classes", d.num_classes}};
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, protocol::Darp>) {
          j["n1"] = p.n1;
          j["m1"] = p.m1;
          j["gamma_l"] = p.gamma_l;
          j["gamma_u"] = p.gamma_u;
          j["reversed"] = p.reversed;
        } else {
          j["labels"] = p.labels;
          if constexpr (requires { p.n0; }) j["n0"] = p.n0;
          if constexpr (requires { p.gamma; }) j["gamma"] = p.gamma;
        }
      },
      d.protocol);
}

void from_json(const Json& j, DatasetSpec& d) {
  check_keys(j,
             {"protocol", "m0", "num_classes", "labels", "n0", "gamma", "n1", "m1", "gamma_l",
              "gamma_u", "reversed"},
             "dataset");
  read_opt(j, "m0", d.m0);
  read_opt(j, "num_classes", d.num_classes);
  std::string name = protocol_name(d.protocol);
  read_opt(j, "protocol", name);
  auto fill = [&](auto p) {
    if constexpr (requires { p.labels; }) read_opt(j, "labels", p.labels);
    if constexpr (requires { p.n0; }) read_opt(j, "n0", p.n0);
    if constexpr (requires { p.gamma; }) read_opt(j, "gamma", p.gamma);
    if constexpr (requires { p.gamma_l; }) {
      read_opt(j, "n1", p.n1);
      read_opt(j, "m1", p.m1);
      read_opt(j, "gamma_l", p.gamma_l);
      read_opt(j, "gamma_u", p.gamma_u);
      read_opt(j, "reversed", p.reversed);
    }
    d.protocol = p;
  };
  if (name == "matched") fill(protocol::Matched{});
  else if (name == "imbalanced_labeled") fill(protocol::ImbalancedLabeled{});
  else if (name == "mismatched_both") fill(protocol::MismatchedBoth{});
  else if (name == "balanced_labeled_imbalanced_unlabeled")
    fill(protocol::BalancedLabeledImbalancedUnlabeled{});
  else if (name == "darp") fill(protocol::Darp{});
  else fail(ErrorCategory::Config, "unknown protocol '" + name + "'");
}

void to_json(Json& j, const SourceConfig& s) {
  j = Json{{"dim", s.dim}, {"radius", s.radius}, {"spread", s.spread}, {"seed", s.seed}};
}

void from_json(const Json& j, SourceConfig& s) {
  check_keys(j, {"dim", "radius", "spread", "seed"}, "source");
  read_opt(j, "dim", s.dim);
  read_opt(j, "radius", s.radius);
  read_opt(j, "spread", s.spread);
  read_opt(j, "seed", s.seed);
}

void to_json(Json& j, const RunSpec& r) {
  j = Json{{"dataset", r.dataset},
           {"source", r.source},
           {"train", r.train},
           {"test_per_class", r.test_per_class}};
}

void from_json(const Json& j, RunSpec& r) {
  check_keys(j, {"dataset", "source", "train", "test_per_class"}, "run");
  if (j.contains("dataset")) r.dataset = j.at("dataset").get<DatasetSpec>();
  if (j.contains("source")) r.source = j.at("source").get<SourceConfig>();
  r.train.num_classes = r.dataset.num_classes;
  if (j.contains("train")) from_json(j.at("train"), r.train);
  read_opt(j, "test_per_class", r.test_per_class);
}

void to_json(Json& j, const SplitCounts& s) {
  j = Json{{"labeled_per_class", s.labeled_per_class},
           {"unlabeled_per_class", s.unlabeled_per_class}};
}

void to_json(Json& j, const Matrix& m) {
  j = Json{{"rows", m.rows()},
           {"cols", m.cols()},
           {"data", std::vector<double>(m.values().begin(), m.values().end())}};
}

void from_json(const Json& j, Matrix& m) {
  const auto rows = read_req<std::size_t>(j, "rows");
  const auto cols = read_req<std::size_t>(j, "cols");
  const auto data = read_req<std::vector<double>>(j, "data");
  require(data.size() == rows * cols, ErrorCategory::Config, "matrix: data length mismatch");
  m = Matrix(rows, cols);
  std::copy(data.begin(), data.end(), m.values().begin());
}

void to_json(Json& j, const DenseLayer& l) { j = Json{{"weight", l.weight}, {"bias", l.bias}}; }

void from_json(const Json& j, DenseLayer& l) {
  l.weight = read_req<Matrix>(j, "weight");
  l.bias = read_req<std::vector<double>>(j, "bias");
}

void to_json(Json& j, const ModelParams& p) {
  j = Json{{"trunk", p.trunk}, {"head_d", p.head_d}, {"head_a", p.head_a}};
}

void from_json(const Json& j, ModelParams& p) {
  p.trunk = read_req<std::vector<DenseLayer>>(j, "trunk");
  p.head_d = read_req<DenseLayer>(j, "head_d");
  p.head_a = read_req<DenseLayer>(j, "head_a");
  p.validate();
}

void to_json(Json& j, const OptimizerState& o) {
  j = Json{{"momentum_buffers", o.momentum_buffers},
           {"momentum", o.momentum},
           {"weight_decay", o.weight_decay},
           {"base_lr", o.base_lr}};
}

void from_json(const Json& j, OptimizerState& o) {
  o.momentum_buffers = read_req<ModelParams>(j, "momentum_buffers");
  o.momentum = read_req<double>(j, "momentum");
  o.weight_decay = read_req<double>(j, "weight_decay");
  o.base_lr = read_req<double>(j, "base_lr");
}

void to_json(Json& j, const ProbVec& p) {
  j = std::vector<double>(p.values().begin(), p.values().end());
}

void from_json(const Json& j, ProbVec& p) { p = ProbVec(j.get<std::vector<double>>()); }

void to_json(Json& j, const DistributionTracker& t) {
  j = Json{{"num_classes", t.num_classes()},
           {"capacity", t.capacity()},
           {"window", std::vector<ProbVec>(t.window().begin(), t.window().end())}};
}

DistributionTracker tracker_from_json(const Json& j) {
  DistributionTracker t(read_req<std::size_t>(j, "num_classes"),
                        read_req<std::size_t>(j, "capacity"));
  const auto window = read_req<std::vector<ProbVec>>(j, "window");
  require(window.size() <= t.capacity(), ErrorCategory::Config, "tracker: window over capacity");
  for (const auto& m : window) t.push_mean(m);
  return t;
}

void to_json(Json& j, const AlignmentState& a) {
  j = Json{{"tracker_p", a.tracker_p},
           {"tracker_q", a.tracker_q},
           {"tracker_p_rev", a.tracker_p_rev},
           {"tracker_q_rev", a.tracker_q_rev}};
}

AlignmentState alignment_from_json(const Json& j) {
  auto p = tracker_from_json(j.at("tracker_p"));
  AlignmentState a(p.num_classes(), p.capacity());
  a.tracker_p = std::move(p);
  a.tracker_q = tracker_from_json(j.at("tracker_q"));
  a.tracker_p_rev = tracker_from_json(j.at("tracker_p_rev"));
  a.tracker_q_rev = tracker_from_json(j.at("tracker_q_rev"));
  return a;
}

void to_json(Json& j, const EpochRecord& r) {
  j = Json{{"epoch", r.epoch},         {"accuracy", r.accuracy},       {"loss_total", r.loss_total},
           {"loss_sd", r.loss_sd},     {"loss_sa", r.loss_sa},         {"loss_cd", r.loss_cd},
           {"loss_ca", r.loss_ca},     {"marginal_tv", r.marginal_tv}, {"h_expected", r.h_expected},
           {"h_mean", r.h_mean},       {"mi_proxy", r.mi_proxy},
           {"pseudo_marginal", r.pseudo_marginal}};
}

void from_json(const Json& j, EpochRecord& r) {
  r.epoch = read_req<std::size_t>(j, "epoch");
  r.accuracy = read_req<double>(j, "accuracy");
  r.loss_total = read_req<double>(j, "loss_total");
  r.loss_sd = read_req<double>(j, "loss_sd");
  r.loss_sa = read_req<double>(j, "loss_sa");
  r.loss_cd = read_req<double>(j, "loss_cd");
  r.loss_ca = read_req<double>(j, "loss_ca");
  r.marginal_tv = read_req<double>(j, "marginal_tv");
  r.h_expected = read_req<double>(j, "h_expected");
  r.h_mean = read_req<double>(j, "h_mean");
  r.mi_proxy = read_req<double>(j, "mi_proxy");
  r.pseudo_marginal = read_req<ProbVec>(j, "pseudo_marginal");
}

void to_json(Json& j, const RunMetrics& m) {
  j = Json{{"method", method_name(m.method)},
           {"seed", m.seed},
           {"epochs", m.epochs},
           {"true_unlabeled_marginal", m.true_unlabeled_marginal},
           {"per_class_accuracy", m.per_class_accuracy},
           {"confidences", m.confidences},
           {"step_mask_rates", m.step_mask_rates},
           {"aborted", m.aborted},
           {"abort_reason", m.abort_reason}};
}

void from_json(const Json& j, RunMetrics& m) {
  m.method = parse_method(read_req<std::string>(j, "method"));
  m.seed = read_req<std::uint64_t>(j, "seed");
  m.epochs = read_req<std::vector<EpochRecord>>(j, "epochs");
  m.true_unlabeled_marginal = read_req<ProbVec>(j, "true_unlabeled_marginal");
  m.per_class_accuracy = read_req<std::vector<double>>(j, "per_class_accuracy");
  m.confidences = read_req<std::vector<std::pair<double, bool>>>(j, "confidences");
  m.step_mask_rates = read_req<std::vector<double>>(j, "step_mask_rates");
  m.aborted = read_req<bool>(j, "aborted");
  m.abort_reason = read_req<std::string>(j, "abort_reason");
}

}  // namespace rda
