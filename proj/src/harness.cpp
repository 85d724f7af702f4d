// SPDX-License-Identifier: Apache-2.0
#include "rda/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <iomanip>
#include <sstream>

#include "rda/error.hpp"

namespace rda {

namespace fs = std::filesystem;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCategory::Config, "csv: bad number '" + s + "'");
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    fail(ErrorCategory::Io, "cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCategory::Io, "cannot open " + path.string() + " for writing");
  os << text;
  if (!os) fail(ErrorCategory::Io, "write failed for " + path.string());
}

SeedResult run_seed(const ExperimentConfig& config, std::uint64_t seed) {
  SeedResult r;
  r.seed = seed;
  try {
    RunSpec spec = config.run;
    spec.train.seed = seed;
    Trainer trainer(spec);
    r.metrics = trainer.train();
    r.complete = !r.metrics.aborted;
    r.error = r.metrics.abort_reason;
    if (!r.metrics.epochs.empty()) {
      r.final_accuracy = r.metrics.epochs.back().accuracy;
      r.final_marginal_tv = r.metrics.epochs.back().marginal_tv;
    }
    const fs::path dir = config.output_dir / ("seed_" + std::to_string(seed));
    ensure_dir(dir);
    std::ostringstream csv;
    write_metrics_csv(r.metrics.epochs, csv);
    write_text(dir / "metrics.csv", csv.str());
    if (config.plots && !r.metrics.epochs.empty()) emit_plots(r.metrics, dir);
  } catch (const std::exception& e) {
    r.complete = false;
    r.error = e.what();
  }
  return r;
}

Summary summarize(Method method, std::vector<SeedResult> seeds) {
  Summary s;
  s.method = method;
  s.seeds = std::move(seeds);
  std::vector<double> acc, tv;
  for (const auto& r : s.seeds)
    if (r.complete) {
      acc.push_back(r.final_accuracy);
      tv.push_back(r.final_marginal_tv);
    }
  s.completed = acc.size();
  const auto a = mean_std(acc), t = mean_std(tv);
  s.mean_accuracy = a.mean;
  s.std_accuracy = a.std;
  s.mean_marginal_tv = t.mean;
  s.std_marginal_tv = t.std;
  return s;
}

}  // namespace

void ExperimentConfig::validate() const {
  run.validate();
  require(!seeds.empty(), ErrorCategory::Config, "experiment: at least one seed required");
  require(!output_dir.empty(), ErrorCategory::Config, "experiment: output_dir is empty");
  require(max_parallel >= 1, ErrorCategory::Config, "experiment: max_parallel must be >= 1");
}

ExperimentConfig experiment_from_json(const Json& j) {
  check_keys(j,
             {"dataset", "source", "train", "test_per_class", "seeds", "output_dir", "plots",
              "max_parallel"},
             "experiment");
  ExperimentConfig c;
  Json run = Json::object();
  for (const char* k : {"dataset", "source", "train", "test_per_class"})
    if (j.contains(k)) run[k] = j.at(k);
  c.run = run.get<RunSpec>();
  try {
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("plots")) c.plots = j.at("plots").get<bool>();
    if (j.contains("max_parallel")) c.max_parallel = j.at("max_parallel").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::Config, std::string("experiment: ") + e.what());
  }
  c.validate();
  return c;
}

Json experiment_to_json(const ExperimentConfig& c) {
  Json j = c.run;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir.string();
  j["plots"] = c.plots;
  j["max_parallel"] = c.max_parallel;
  return j;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd m;
  if (values.empty()) return m;
  for (double v : values) m.mean += v;
  m.mean /= static_cast<double>(values.size());
  if (values.size() < 2) return m;
  double ss = 0.0;
  for (double v : values) ss += (v - m.mean) * (v - m.mean);
  m.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return m;
}

Summary run_experiment(const ExperimentConfig& config) {
  config.validate();
  ensure_dir(config.output_dir);
  std::vector<SeedResult> results(config.seeds.size());
  for (std::size_t start = 0; start < config.seeds.size(); start += config.max_parallel) {
    const std::size_t end = std::min(config.seeds.size(), start + config.max_parallel);
    std::vector<std::future<SeedResult>> jobs;
    for (std::size_t i = start; i < end; ++i)
      jobs.push_back(std::async(config.max_parallel > 1 ? std::launch::async : std::launch::deferred,
                                run_seed, std::cref(config), config.seeds[i]));
    for (std::size_t i = start; i < end; ++i) results[i] = jobs[i - start].get();
  }
  Summary s = summarize(config.run.train.method, std::move(results));
  write_text(config.output_dir / "summary.json", summary_to_json(s).dump(2) + "\n");
  return s;
}

Json summary_to_json(const Summary& s) {
  Json seeds = Json::array();
  std::vector<std::uint64_t> incomplete;
  for (const auto& r : s.seeds) {
    seeds.push_back({{"seed", r.seed},
                     {"complete", r.complete},
                     {"final_accuracy", r.final_accuracy},
                     {"final_marginal_tv", r.final_marginal_tv},
                     {"error", r.error}});
    if (!r.complete) incomplete.push_back(r.seed);
  }
  return Json{{"method", method_name(s.method)},
              {"seeds", seeds},
              {"completed", s.completed},
              {"incomplete_seeds", incomplete},
              {"mean_accuracy", s.mean_accuracy},
              {"std_accuracy", s.std_accuracy},
              {"mean_marginal_tv", s.mean_marginal_tv},
              {"std_marginal_tv", s.std_marginal_tv}};
}

std::string metrics_csv_header(std::size_t num_classes) {
  std::string h =
      "epoch,accuracy,loss_total,loss_sd,loss_sa,loss_cd,loss_ca,marginal_tv,h_expected,h_mean,"
      "mi_proxy";
  for (std::size_t c = 0; c < num_classes; ++c) h += ",marginal_" + std::to_string(c);
  return h;
}

void write_metrics_csv(std::span<const EpochRecord> epochs, std::ostream& os) {
  const std::size_t n = epochs.empty() ? 0 : epochs.front().pseudo_marginal.size();
  os << metrics_csv_header(n) << '\n';
  for (const auto& r : epochs) {
    os << r.epoch;
    for (double v : {r.accuracy, r.loss_total, r.loss_sd, r.loss_sa, r.loss_cd, r.loss_ca,
                     r.marginal_tv, r.h_expected, r.h_mean, r.mi_proxy})
      os << ',' << fmt17(v);
    for (double v : r.pseudo_marginal.values()) os << ',' << fmt17(v);
    os << '\n';
  }
}

std::vector<EpochRecord> read_metrics_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) fail(ErrorCategory::Config, "csv: missing header");
  const auto header = split_csv_line(line);
  require(header.size() >= 11, ErrorCategory::Config, "csv: header too short");
  const std::size_t n = header.size() - 11;
  require(line == metrics_csv_header(n), ErrorCategory::Config, "csv: unexpected header");
  std::vector<EpochRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    require(cells.size() == header.size(), ErrorCategory::Config, "csv: wrong column count");
    EpochRecord r;
    r.epoch = static_cast<std::size_t>(std::stoull(cells[0]));
    double* fields[] = {&r.accuracy, &r.loss_total, &r.loss_sd, &r.loss_sa, &r.loss_cd,
                        &r.loss_ca,  &r.marginal_tv, &r.h_expected, &r.h_mean, &r.mi_proxy};
    for (std::size_t k = 0; k < 10; ++k) *fields[k] = parse_double(cells[k + 1]);
    std::vector<double> marginal;
    for (std::size_t c = 0; c < n; ++c) marginal.push_back(parse_double(cells[11 + c]));
    r.pseudo_marginal = ProbVec(std::move(marginal));
    out.push_back(std::move(r));
  }
  return out;
}

ComparisonTable compare(std::span<const Method> methods, const ExperimentConfig& shared) {
  require(methods.size() >= 2, ErrorCategory::Config, "compare: needs at least two methods");
  shared.validate();
  ensure_dir(shared.output_dir);
  ComparisonTable table;
  for (std::size_t i = 0; i < methods.size(); ++i) {
    ExperimentConfig cfg = shared;
    cfg.run.train.method = methods[i];
    std::string sub = method_name(methods[i]);
    if (std::count(methods.begin(), methods.begin() + static_cast<std::ptrdiff_t>(i), methods[i]) > 0)
      sub += "_" + std::to_string(i);
    cfg.output_dir = shared.output_dir / sub;
    table.summaries.push_back(run_experiment(cfg));
    const Summary& s = table.summaries.back();
    table.rows.push_back({s.method, s.mean_accuracy, s.std_accuracy, s.mean_marginal_tv,
                          s.std_marginal_tv, false, false});
  }
  double best_acc = -1.0, best_tv = 2.0;
  for (const auto& r : table.rows) {
    best_acc = std::max(best_acc, r.mean_accuracy);
    best_tv = std::min(best_tv, r.mean_marginal_tv);
  }
  for (auto& r : table.rows) {
    r.best_accuracy = r.mean_accuracy == best_acc;
    r.best_marginal_tv = r.mean_marginal_tv == best_tv;
  }
  std::ostringstream csv;
  write_comparison_csv(table, csv);
  write_text(shared.output_dir / "comparison.csv", csv.str());
  write_text(shared.output_dir / "comparison.json", comparison_to_json(table).dump(2) + "\n");
  return table;
}

void write_comparison_csv(const ComparisonTable& table, std::ostream& os) {
  os << "method,mean_accuracy,std_accuracy,mean_marginal_tv,std_marginal_tv,best_accuracy,"
        "best_marginal_tv\n";
  for (const auto& r : table.rows)
    os << method_name(r.method) << ',' << fmt17(r.mean_accuracy) << ',' << fmt17(r.std_accuracy)
       << ',' << fmt17(r.mean_marginal_tv) << ',' << fmt17(r.std_marginal_tv) << ','
       << (r.best_accuracy ? 1 : 0) << ',' << (r.best_marginal_tv ? 1 : 0) << '\n';
}

std::vector<ComparisonRow> read_comparison_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) fail(ErrorCategory::Config, "csv: missing header");
  std::vector<ComparisonRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    require(c.size() == 7, ErrorCategory::Config, "csv: wrong column count");
    rows.push_back({parse_method(c[0]), parse_double(c[1]), parse_double(c[2]), parse_double(c[3]),
                    parse_double(c[4]), c[5] == "1", c[6] == "1"});
  }
  return rows;
}

std::vector<double> sample_dirichlet(std::size_t n, double alpha, std::mt19937_64& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> x(n);
  for (;;) {
    double sum = 0.0;
    for (double& v : x) sum += (v = gamma(rng));
    if (sum > 0.0 && std::isfinite(sum)) {
      for (double& v : x) v /= sum;
      return x;
    }
  }
}

Theorem1Report verify_theorem1(std::span<const std::size_t> class_counts, std::size_t trials,
                               std::uint64_t seed) {
  require(trials >= 1, ErrorCategory::Usage, "verify_theorem1: trials must be >= 1");
  require(!class_counts.empty(), ErrorCategory::Usage, "verify_theorem1: no class counts given");
  Theorem1Report report;
  for (std::size_t n : class_counts) {
    require(n >= 2, ErrorCategory::Usage, "verify_theorem1: n must be >= 2");
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(n)};
    std::mt19937_64 rng(seq);
    Theorem1Row row;
    row.num_classes = n;
    row.asserted = n == 2 || n >= 5;
    row.min_gap = std::numeric_limits<double>::infinity();
    double worst_abs = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      const double alpha = t % 2 == 0 ? 0.05 : 1.0;
      const ProbVec p = normalize(sample_dirichlet(n, alpha, rng));
      const double gap = entropy(reverse(p)) - entropy(p);
      if (gap < row.min_gap) {
        row.min_gap = gap;
        if (n != 2) row.worst_p.assign(p.values().begin(), p.values().end());
      }
      if (n == 2 && std::abs(gap) >= worst_abs) {
        worst_abs = std::abs(gap);
        row.worst_p.assign(p.values().begin(), p.values().end());
      }
    }
    if (n == 2) row.passed = worst_abs <= 1e-12;
    else if (n >= 5) row.passed = row.min_gap >= -1e-10;
    report.passed = report.passed && row.passed;
    report.rows.push_back(std::move(row));
  }
  return report;
}

ReverseReport verify_reverse(std::size_t trials, std::uint64_t seed) {
  require(trials >= 1, ErrorCategory::Usage, "verify_reverse: trials must be >= 1");
  ReverseReport report;
  report.trials_per_n = trials;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 7u};
  std::mt19937_64 rng(seq);
  auto note = [&](const ProbVec& q) {
    if (report.counterexample.empty()) report.counterexample.assign(q.values().begin(), q.values().end());
  };
  for (std::size_t n = 2; n <= 20; ++n) {
    for (std::size_t t = 0; t < trials; ++t) {
      // Mix interior points, near-vertex points and exact ties.
      const double alpha = t % 3 == 0 ? 0.05 : 1.0;
      std::vector<double> raw = sample_dirichlet(n, alpha, rng);
      if (t % 3 == 2 && n >= 3) raw[1] = raw[0];
      const ProbVec q = normalize(raw);
      const ProbVec r = reverse(q);
      for (std::size_t j = 0; j < n; ++j) {
        const double closed_form = (1.0 - q[j]) / static_cast<double>(n - 1);
        const double dev = std::abs(r[j] - closed_form);
        if (dev > report.max_deviation) report.max_deviation = dev;
        if (dev > 1e-12) note(q);
      }
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          bool ok = true;
          if (q[i] == q[j]) ok = r[i] == r[j];
          else if (q[i] > q[j]) ok = r[i] < r[j];
          if (!ok) {
            ++report.order_violations;
            note(q);
          }
        }
      if (n == 2) {
        const ProbVec back = reverse(r);
        for (std::size_t j = 0; j < 2; ++j)
          report.involution_deviation = std::max(report.involution_deviation, std::abs(back[j] - q[j]));
      }
    }
  }
  report.passed = report.max_deviation <= 1e-12 && report.order_violations == 0 &&
                  report.involution_deviation <= 1e-12;
  if (report.passed) report.counterexample.clear();
  return report;
}

GradCheckReport rda_gradcheck(std::uint64_t seed, double tolerance) {
  constexpr std::size_t kClasses = 5, kDim = 2, kRows = 4;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 21u};
  std::mt19937_64 rng(seq);
  const std::vector<std::size_t> hidden = {16, 16};
  const ModelParams params = ModelParams::initialized(kDim, hidden, kClasses, rng);
  std::normal_distribution<double> normal(0.0, 1.5);

  auto random_rows = [&](std::size_t rows) {
    Matrix m(rows, kDim);
    for (double& v : m.values()) v = normal(rng);
    return m;
  };

  // Trackers filled with a few random batches so alignment is not the identity.
  AlignmentState align(kClasses);
  for (int b = 0; b < 3; ++b) {
    std::vector<ProbVec> p, q;
    for (std::size_t i = 0; i < kRows; ++i) {
      p.push_back(normalize(sample_dirichlet(kClasses, 1.0, rng)));
      q.push_back(normalize(sample_dirichlet(kClasses, 1.0, rng)));
    }
    align.update(p, q);
  }

  LossInputs in;
  in.labeled = random_rows(kRows);
  std::uniform_int_distribution<std::size_t> cls(0, kClasses - 1);
  for (std::size_t i = 0; i < kRows; ++i) {
    in.labels.push_back(HardLabel{cls(rng)});
    in.complementary.push_back(sample_complementary(in.labels.back(), kClasses, rng));
  }
  const Matrix weak = random_rows(kRows);
  in.unlabeled = random_rows(kRows);
  const ForwardResult fwd = forward_two_head(params, weak);
  const AlignmentMeans means = AlignmentMeans::of(align);
  for (std::size_t i = 0; i < kRows; ++i) {
    in.pseudo.push_back(argmax_label(reciprocal_align_p(softmax(fwd.logits_d.row(i)), means)));
    in.soft.push_back(reciprocal_align_q(softmax(fwd.logits_a.row(i)), means));
  }

  const LossWeights weights{1.0, 1.0, 1.0};
  const LossFn loss = [&](const ModelParams& p, Gradients* g) {
    return compute_loss(p, in, weights, g).total;
  };
  return grad_check(params, loss, tolerance, rng, 200, 1e-5);
}

Json theorem1_to_json(const Theorem1Report& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"n", row.num_classes},
                    {"min_gap", row.min_gap},
                    {"asserted", row.asserted},
                    {"passed", row.passed},
                    {"worst_p", row.worst_p}});
  return Json{{"check", "theorem1"}, {"passed", r.passed}, {"rows", rows}};
}

Json reverse_to_json(const ReverseReport& r) {
  return Json{{"check", "reverse"},
              {"passed", r.passed},
              {"trials_per_n", r.trials_per_n},
              {"max_deviation", r.max_deviation},
              {"order_violations", r.order_violations},
              {"involution_deviation", r.involution_deviation},
              {"counterexample", r.counterexample}};
}

Json gradcheck_to_json(const GradCheckReport& r) {
  return Json{{"check", "gradcheck"},
              {"passed", r.passed},
              {"max_relative_error", r.max_relative_error},
              {"coordinates_checked", r.coordinates_checked},
              {"worst_coordinate", r.worst_coordinate},
              {"worst_analytic", r.worst_analytic},
              {"worst_numeric", r.worst_numeric}};
}

Json comparison_to_json(const ComparisonTable& t) {
  Json rows = Json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"method", method_name(r.method)},
                    {"mean_accuracy", r.mean_accuracy},
                    {"std_accuracy", r.std_accuracy},
                    {"mean_marginal_tv", r.mean_marginal_tv},
                    {"std_marginal_tv", r.std_marginal_tv},
                    {"best_accuracy", r.best_accuracy},
                    {"best_marginal_tv", r.best_marginal_tv}});
  Json summaries = Json::array();
  for (const auto& s : t.summaries) summaries.push_back(summary_to_json(s));
  return Json{{"rows", rows}, {"summaries", summaries}};
}

}  // namespace rda
