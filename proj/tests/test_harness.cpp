// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rda/harness.hpp"
#include "support.hpp"

using namespace rda;
using rda::testing::category_of;
using rda::testing::rng_for;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("rda_test_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

ExperimentConfig tiny_experiment(const fs::path& out) {
  ExperimentConfig c;
  c.run.dataset.num_classes = 4;
  c.run.dataset.m0 = 30;
  c.run.dataset.protocol = protocol::ImbalancedLabeled{6, 16};
  c.run.train.num_classes = 4;
  c.run.train.batch_size = 4;
  c.run.train.mu = 2;
  c.run.train.hidden = {8};
  c.run.train.epochs = 2;
  c.run.train.steps_per_epoch = 4;
  c.run.test_per_class = 20;
  c.seeds = {0, 1, 2};
  c.output_dir = out;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("mean and sample standard deviation") {
  const double one[] = {0.7};
  CHECK(mean_std(one).mean == 0.7);
  CHECK(mean_std(one).std == 0.0);
  const double same[] = {0.5, 0.5, 0.5, 0.5, 0.5};
  CHECK(mean_std(same).std == 0.0);
  const double spread[] = {1.0, 2.0, 3.0, 4.0};
  CHECK(mean_std(spread).mean == 2.5);
  CHECK(mean_std(spread).std == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
}

TEST_CASE("run_experiment with a single seed reports zero spread") {
  TempDir dir("single");
  auto cfg = tiny_experiment(dir.path);
  cfg.seeds = {4};
  const auto s = run_experiment(cfg);
  CHECK(s.completed == 1);
  CHECK(s.std_accuracy == 0.0);
  CHECK(s.std_marginal_tv == 0.0);
  CHECK(fs::exists(dir.path / "seed_4" / "metrics.csv"));
  CHECK(fs::exists(dir.path / "seed_4" / "accuracy.svg"));
  CHECK(fs::exists(dir.path / "seed_4" / "marginal.svg"));
  CHECK(fs::exists(dir.path / "seed_4" / "confidence.svg"));
  CHECK(fs::exists(dir.path / "summary.json"));
}

TEST_CASE("repeated seed values give zero variance") {
  TempDir dir("repeat");
  auto cfg = tiny_experiment(dir.path);
  cfg.seeds = {3, 3, 3, 3, 3};
  cfg.plots = false;
  const auto s = run_experiment(cfg);
  CHECK(s.completed == 5);
  CHECK(s.std_accuracy == 0.0);
  CHECK(s.std_marginal_tv == 0.0);
}

TEST_CASE("summary statistics match a recomputation from the emitted files") {
  TempDir dir("recompute");
  auto cfg = tiny_experiment(dir.path);
  cfg.max_parallel = 2;
  const auto s = run_experiment(cfg);
  std::vector<double> acc, tv;
  for (auto seed : cfg.seeds) {
    std::ifstream is(dir.path / ("seed_" + std::to_string(seed)) / "metrics.csv");
    const auto rows = read_metrics_csv(is);
    REQUIRE(rows.size() == cfg.run.train.epochs + 1);
    acc.push_back(rows.back().accuracy);
    tv.push_back(rows.back().marginal_tv);
  }
  const auto a = mean_std(acc), t = mean_std(tv);
  const auto j = Json::parse(slurp(dir.path / "summary.json"));
  CHECK(std::abs(j.at("mean_accuracy").get<double>() - a.mean) <= 1e-12);
  CHECK(std::abs(j.at("std_accuracy").get<double>() - a.std) <= 1e-12);
  CHECK(std::abs(j.at("mean_marginal_tv").get<double>() - t.mean) <= 1e-12);
  CHECK(std::abs(j.at("std_marginal_tv").get<double>() - t.std) <= 1e-12);
  CHECK(std::abs(s.mean_accuracy - a.mean) <= 1e-12);
  CHECK(j.at("incomplete_seeds").empty());
}

TEST_CASE("parallel and sequential seeds agree") {
  TempDir a("seq"), b("par");
  auto ca = tiny_experiment(a.path), cb = tiny_experiment(b.path);
  ca.plots = cb.plots = false;
  cb.max_parallel = 3;
  const auto sa = run_experiment(ca), sb = run_experiment(cb);
  for (std::size_t i = 0; i < sa.seeds.size(); ++i)
    CHECK(sa.seeds[i].metrics.epochs == sb.seeds[i].metrics.epochs);
}

TEST_CASE("failing seeds are recorded as incomplete") {
  TempDir dir("fail");
  auto cfg = tiny_experiment(dir.path);
  cfg.plots = false;
  // A huge learning rate drives the logits to overflow.
  cfg.run.train.base_lr = 1e200;
  cfg.seeds = {0};
  const auto s = run_experiment(cfg);
  CHECK(s.completed == 0);
  CHECK_FALSE(s.seeds[0].complete);
  CHECK_FALSE(s.seeds[0].error.empty());
  const auto j = Json::parse(slurp(dir.path / "summary.json"));
  CHECK(j.at("incomplete_seeds") == Json::array({0}));
  // Partial metrics still land on disk.
  std::ifstream is(dir.path / "seed_0" / "metrics.csv");
  CHECK(read_metrics_csv(is).size() >= 1);
}

TEST_CASE("metrics csv round-trips at full precision") {
  auto rng = rng_for(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<EpochRecord> rows;
  for (std::size_t e = 0; e < 20; ++e) {
    EpochRecord r;
    r.epoch = e;
    for (double* f : {&r.accuracy, &r.loss_total, &r.loss_sd, &r.loss_sa, &r.loss_cd, &r.loss_ca,
                      &r.marginal_tv, &r.h_expected, &r.h_mean, &r.mi_proxy})
      *f = u(rng) * std::pow(10.0, std::uniform_int_distribution<int>(-12, 3)(rng));
    r.pseudo_marginal = testing::random_simplex(6, rng);
    rows.push_back(r);
  }
  std::ostringstream os;
  write_metrics_csv(rows, os);
  std::istringstream is(os.str());
  CHECK(read_metrics_csv(is) == rows);
  CHECK(os.str().rfind(metrics_csv_header(6) + "\n", 0) == 0);
  CHECK(os.str().find('\r') == std::string::npos);
  CHECK(metrics_csv_header(2) ==
        "epoch,accuracy,loss_total,loss_sd,loss_sa,loss_cd,loss_ca,marginal_tv,h_expected,h_mean,"
        "mi_proxy,marginal_0,marginal_1");
}

TEST_CASE("metrics csv reader rejects malformed input") {
  std::istringstream bad_header("epoch,accuracy\n");
  CHECK(category_of([&] { read_metrics_csv(bad_header); }) == ErrorCategory::Config);
  std::istringstream bad_cell(metrics_csv_header(2) + "\n0,x,0,0,0,0,0,0,0,0,0,0.5,0.5\n");
  CHECK(category_of([&] { read_metrics_csv(bad_cell); }) == ErrorCategory::Config);
}

TEST_CASE("compare runs every method on the same data") {
  TempDir dir("compare");
  auto cfg = tiny_experiment(dir.path);
  cfg.plots = false;
  const std::vector<Method> same{Method::Rda, Method::Rda};
  const auto t = compare(same, cfg);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0].mean_accuracy == t.rows[1].mean_accuracy);
  CHECK(t.rows[0].std_accuracy == t.rows[1].std_accuracy);
  CHECK(t.rows[0].mean_marginal_tv == t.rows[1].mean_marginal_tv);
  CHECK(t.rows[0].best_accuracy);
  CHECK(t.rows[1].best_accuracy);
  CHECK(fs::exists(dir.path / "rda" / "summary.json"));
  CHECK(fs::exists(dir.path / "rda_1" / "summary.json"));

  const std::vector<Method> three{Method::Rda, Method::FixMatch, Method::FixMatchDa};
  TempDir dir3("compare3");
  cfg.output_dir = dir3.path;
  const auto t3 = compare(three, cfg);
  CHECK(t3.rows.size() == 3);
  int winners = 0;
  for (const auto& r : t3.rows) winners += r.best_accuracy ? 1 : 0;
  CHECK(winners >= 1);

  std::ifstream is(dir3.path / "comparison.csv");
  const auto back = read_comparison_csv(is);
  REQUIRE(back.size() == t3.rows.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].method == t3.rows[i].method);
    CHECK(back[i].mean_accuracy == t3.rows[i].mean_accuracy);
    CHECK(back[i].std_accuracy == t3.rows[i].std_accuracy);
    CHECK(back[i].mean_marginal_tv == t3.rows[i].mean_marginal_tv);
    CHECK(back[i].std_marginal_tv == t3.rows[i].std_marginal_tv);
    CHECK(back[i].best_accuracy == t3.rows[i].best_accuracy);
    CHECK(back[i].best_marginal_tv == t3.rows[i].best_marginal_tv);
  }

  const std::vector<Method> one{Method::Rda};
  CHECK(category_of([&] { compare(one, cfg); }) == ErrorCategory::Config);
}

TEST_CASE("verify_theorem1") {
  const std::size_t ns[] = {2, 3, 4, 5, 10};
  const auto r = verify_theorem1(ns, 4000, 7);
  CHECK(r.passed);
  REQUIRE(r.rows.size() == 5);
  CHECK(std::abs(r.rows[0].min_gap) <= 1e-12);
  CHECK(r.rows[0].asserted);
  CHECK_FALSE(r.rows[1].asserted);
  CHECK_FALSE(r.rows[2].asserted);
  CHECK(r.rows[3].min_gap >= -1e-10);
  CHECK(r.rows[4].min_gap >= -1e-10);

  // Vertex case for n = 5: reverse is uniform over four classes.
  const auto v = ProbVec::one_hot(5, 0);
  CHECK(entropy(reverse(v)) - entropy(v) == doctest::Approx(std::log(4.0)).epsilon(1e-15));

  const auto again = verify_theorem1(ns, 4000, 7);
  for (std::size_t i = 0; i < 5; ++i) CHECK(again.rows[i].min_gap == r.rows[i].min_gap);
  const std::size_t bad[] = {1};
  CHECK(category_of([&] { verify_theorem1(bad, 10, 0); }) == ErrorCategory::Usage);
  CHECK(category_of([&] { verify_theorem1(ns, 0, 0); }) == ErrorCategory::Usage);
}

TEST_CASE("verify_reverse") {
  const auto r = verify_reverse(300, 3);
  CHECK(r.passed);
  CHECK(r.max_deviation <= 1e-12);
  CHECK(r.order_violations == 0);
  CHECK(r.involution_deviation <= 1e-12);
  CHECK(r.counterexample.empty());
  const auto again = verify_reverse(300, 3);
  CHECK(again.max_deviation == r.max_deviation);
}

TEST_CASE("rda_gradcheck passes at 1e-4") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto r = rda_gradcheck(seed, 1e-4);
    CHECK(r.passed);
    CHECK(r.coordinates_checked >= 200);
  }
}

TEST_CASE("emit_plots") {
  TempDir dir("plots");
  RunMetrics m;
  CHECK(category_of([&] { emit_plots(m, dir.path); }) == ErrorCategory::Usage);

  EpochRecord r;
  r.accuracy = 0.5;
  r.pseudo_marginal = ProbVec({0.25, 0.75});
  m.epochs.push_back(r);
  m.true_unlabeled_marginal = ProbVec::uniform(2);
  m.confidences = {{0.9, true}, {0.6, false}};
  const auto files = emit_plots(m, dir.path);
  REQUIRE(files.size() == 3);
  for (const auto& f : files) {
    const auto svg = slurp(f);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
  }
  // One epoch still draws a single point.
  CHECK(slurp(dir.path / "accuracy.svg").find("<circle") != std::string::npos);

  // A regular file where the directory should go.
  const fs::path blocker = dir.path / "blocker";
  std::ofstream(blocker) << "x";
  CHECK(category_of([&] { emit_plots(m, blocker / "sub"); }) == ErrorCategory::Io);
}

TEST_CASE("experiment config json") {
  const auto j = Json::parse(R"({
    "dataset": {"protocol": "mismatched_both", "labels": 40, "n0": 10, "gamma": 5, "m0": 50},
    "train": {"epochs": 3, "method": "fixmatch_da", "tau": 0.9},
    "seeds": [7, 8],
    "output_dir": "somewhere",
    "plots": false
  })");
  const auto c = experiment_from_json(j);
  CHECK(protocol_name(c.run.dataset.protocol) == "mismatched_both");
  CHECK(std::get<protocol::MismatchedBoth>(c.run.dataset.protocol).gamma == 5.0);
  CHECK(c.run.train.method == Method::FixMatchDa);
  CHECK(c.run.train.tau == 0.9);
  CHECK(c.seeds == std::vector<std::uint64_t>{7, 8});
  CHECK_FALSE(c.plots);
  const auto back = experiment_from_json(experiment_to_json(c));
  CHECK(experiment_to_json(back) == experiment_to_json(c));

  CHECK(category_of([] { experiment_from_json(Json::parse(R"({"sedes": [1]})")); }) == ErrorCategory::Config);
  CHECK(category_of([] { experiment_from_json(Json::parse(R"({"seeds": []})")); }) == ErrorCategory::Config);
  CHECK(category_of([] {
          experiment_from_json(Json::parse(R"({"dataset": {"protocol": "cifar"}})"));
        }) == ErrorCategory::Config);
}
