// SPDX-License-Identifier: Apache-2.0
// Command-line front end. Talks to the library through the C interface only.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rda/rda.h"

namespace {

using Json = nlohmann::json;

constexpr int kUsageExit = RDA_ERR_USAGE;

struct Owned {
  char* p = nullptr;
  ~Owned() { rda_string_free(p); }
};

int report(rda_status st, const char* what) {
  if (st != RDA_OK) std::fprintf(stderr, "rda %s: %s\n", what, rda_last_error());
  return static_cast<int>(st);
}

Json load_config(const std::string& path) {
  if (path.empty()) return Json::object();
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  try {
    return Json::parse(is);
  } catch (const Json::exception& e) {
    throw std::runtime_error("config " + path + ": " + e.what());
  }
}

std::string default_output_root() {
  if (const char* env = std::getenv("RDA_OUTPUT_ROOT"); env && *env) return env;
  return "rda_out";
}

// Flags shared by run/compare/dataset. Unset flags leave the config file alone.
struct Overrides {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::string method;
  std::string protocol;
  std::string out;
  std::optional<std::size_t> epochs, steps_per_epoch, batch_size, mu, classes, labels, n0, m0,
      dim, max_parallel, n1, m1, test_per_class;
  std::optional<double> gamma, tau, gamma_l, gamma_u, lr, lambda_a, lambda_cd, lambda_ca;
  bool reversed = false;
  bool no_plots = false;

  void add_dataset_flags(CLI::App* app) {
    app->add_option("--config", config, "JSON experiment config")->check(CLI::ExistingFile);
    app->add_option("--protocol", protocol,
                    "matched | imbalanced_labeled | mismatched_both | "
                    "balanced_labeled_imbalanced_unlabeled | darp");
    app->add_option("--classes", classes, "number of classes");
    app->add_option("--labels", labels, "total labeled examples (D_x)");
    app->add_option("--n0", n0, "labeled count of the head class");
    app->add_option("--m0", m0, "unlabeled base count per class");
    app->add_option("--gamma", gamma, "unlabeled imbalance ratio");
    app->add_option("--n1", n1, "darp: labeled head count");
    app->add_option("--m1", m1, "darp: unlabeled head count");
    app->add_option("--gamma-l", gamma_l, "darp: labeled imbalance ratio");
    app->add_option("--gamma-u", gamma_u, "darp: unlabeled imbalance ratio");
    app->add_flag("--reversed", reversed, "darp: reverse the unlabeled profile");
  }

  void add_train_flags(CLI::App* app) {
    add_dataset_flags(app);
    app->add_option("--seed", seeds, "seed (repeatable)");
    app->add_option("--out", out, "output directory (default $RDA_OUTPUT_ROOT or ./rda_out)");
    app->add_option("--epochs", epochs);
    app->add_option("--steps-per-epoch", steps_per_epoch);
    app->add_option("--batch-size", batch_size);
    app->add_option("--mu", mu);
    app->add_option("--tau", tau, "confidence threshold of the baselines");
    app->add_option("--lr", lr, "base learning rate");
    app->add_option("--lambda-a", lambda_a);
    app->add_option("--lambda-cd", lambda_cd);
    app->add_option("--lambda-ca", lambda_ca);
    app->add_option("--dim", dim, "feature dimension of the synthetic source");
    app->add_option("--test-per-class", test_per_class);
    app->add_option("--max-parallel", max_parallel, "seeds trained concurrently");
    app->add_flag("--no-plots", no_plots, "skip SVG output");
  }

  void apply_dataset(Json& d) const {
    if (!protocol.empty()) d["protocol"] = protocol;
    if (classes) d["num_classes"] = *classes;
    if (labels) d["labels"] = *labels;
    if (n0) d["n0"] = *n0;
    if (m0) d["m0"] = *m0;
    if (gamma) d["gamma"] = *gamma;
    if (n1) d["n1"] = *n1;
    if (m1) d["m1"] = *m1;
    if (gamma_l) d["gamma_l"] = *gamma_l;
    if (gamma_u) d["gamma_u"] = *gamma_u;
    if (reversed) d["reversed"] = true;
  }

  Json experiment() const {
    Json j = load_config(config);
    if (!j.is_object()) throw std::runtime_error("config must be a JSON object");
    Json& d = j["dataset"];
    if (d.is_null()) d = Json::object();
    apply_dataset(d);
    Json& t = j["train"];
    if (t.is_null()) t = Json::object();
    if (!method.empty()) t["method"] = method;
    if (epochs) t["epochs"] = *epochs;
    if (steps_per_epoch) t["steps_per_epoch"] = *steps_per_epoch;
    if (batch_size) t["batch_size"] = *batch_size;
    if (mu) t["mu"] = *mu;
    if (tau) t["tau"] = *tau;
    if (lr) t["base_lr"] = *lr;
    if (lambda_a) t["lambda_a"] = *lambda_a;
    if (lambda_cd) t["lambda_cd"] = *lambda_cd;
    if (lambda_ca) t["lambda_ca"] = *lambda_ca;
    if (classes) t["num_classes"] = *classes;
    if (dim) j["source"]["dim"] = *dim;
    if (test_per_class) j["test_per_class"] = *test_per_class;
    if (!seeds.empty()) j["seeds"] = seeds;
    if (max_parallel) j["max_parallel"] = *max_parallel;
    if (no_plots) j["plots"] = false;
    if (!out.empty()) j["output_dir"] = out;
    else if (!j.contains("output_dir")) j["output_dir"] = default_output_root();
    return j;
  }
};

int cmd_run(const Overrides& o) {
  const std::string cfg = o.experiment().dump();
  Owned summary;
  const rda_status st = rda_run_experiment(cfg.c_str(), &summary.p);
  if (summary.p) std::cout << summary.p << '\n';
  return report(st, "run");
}

int cmd_compare(const Overrides& o, const std::string& methods) {
  const std::string cfg = o.experiment().dump();
  Owned table;
  const rda_status st = rda_compare(cfg.c_str(), methods.c_str(), &table.p);
  if (table.p) std::cout << table.p << '\n';
  return report(st, "compare");
}

int cmd_dataset(const Overrides& o, const std::string& export_path, std::uint64_t seed) {
  Json d = o.config.empty() ? Json::object() : load_config(o.config).value("dataset", Json::object());
  o.apply_dataset(d);
  const std::string text = d.dump();
  Owned counts;
  rda_status st = rda_dataset_counts(text.c_str(), &counts.p);
  if (st != RDA_OK) return report(st, "dataset");
  std::cout << counts.p << '\n';
  if (!export_path.empty()) {
    Json run = o.config.empty() ? Json::object() : load_config(o.config);
    run.erase("seeds");
    run.erase("output_dir");
    run.erase("plots");
    run.erase("max_parallel");
    run["dataset"] = d;
    run["train"]["seed"] = seed;
    if (o.dim) run["source"]["dim"] = *o.dim;
    if (o.test_per_class) run["test_per_class"] = *o.test_per_class;
    const std::string rtext = run.dump();
    st = rda_dataset_export_csv(rtext.c_str(), export_path.c_str());
  }
  return report(st, "dataset");
}

std::vector<std::uint64_t> parse_list(const std::string& csv) {
  std::vector<std::uint64_t> out;
  std::istringstream is(csv);
  for (std::string item; std::getline(is, item, ',');)
    if (!item.empty()) out.push_back(std::stoull(item));
  return out;
}

int cmd_verify(const std::string& what, const std::string& ns, std::uint64_t trials,
               std::uint64_t seed) {
  int worst = 0;
  if (what == "theorem1" || what == "all") {
    const auto counts = parse_list(ns);
    Owned r;
    const rda_status st = rda_verify_theorem1(counts.data(), counts.size(), trials, seed, &r.p);
    if (r.p) std::cout << r.p << '\n';
    if (const int code = report(st, "verify theorem1")) worst = code;
  }
  if (what == "reverse" || what == "all") {
    Owned r;
    const rda_status st = rda_verify_reverse(trials, seed, &r.p);
    if (r.p) std::cout << r.p << '\n';
    if (const int code = report(st, "verify reverse")) worst = code;
  }
  return worst;
}

int cmd_gradcheck(std::uint64_t seed, double tol) {
  Owned r;
  const rda_status st = rda_gradcheck(seed, tol, &r.p);
  if (r.p) std::cout << r.p << '\n';
  return report(st, "gradcheck");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reciprocal distribution alignment laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rda_version()));

  Overrides run_opts;
  auto* run = app.add_subcommand("run", "train one method over several seeds");
  run_opts.add_train_flags(run);
  run->add_option("--method", run_opts.method, "rda | fixmatch | fixmatch_da");

  Overrides cmp_opts;
  std::string methods = "rda,fixmatch";
  auto* cmp = app.add_subcommand("compare", "train several methods on identical data and seeds");
  cmp_opts.add_train_flags(cmp);
  cmp->add_option("--method", methods, "comma-separated methods (at least two)");

  std::string what = "all", ns = "2,3,4,5,10,26,100";
  std::uint64_t trials = 10000, verify_seed = 0;
  auto* verify = app.add_subcommand("verify", "check the reverse operation and entropy inequality");
  verify->add_option("what", what, "theorem1 | reverse | all")
      ->check(CLI::IsMember({"theorem1", "reverse", "all"}));
  verify->add_option("--n", ns, "class counts for the entropy check, comma-separated");
  verify->add_option("--trials", trials);
  verify->add_option("--seed", verify_seed);

  Overrides ds_opts;
  std::string export_path;
  std::uint64_t ds_seed = 0;
  auto* dataset = app.add_subcommand("dataset", "print per-class split counts");
  ds_opts.add_dataset_flags(dataset);
  dataset->add_option("--export", export_path, "also write the materialized splits as CSV");
  dataset->add_option("--seed", ds_seed, "sampling seed for --export");
  dataset->add_option("--dim", ds_opts.dim);
  dataset->add_option("--test-per-class", ds_opts.test_per_class);

  std::uint64_t gc_seed = 0;
  double gc_tol = 1e-4;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the RDA objective");
  gradcheck->add_option("--seed", gc_seed);
  gradcheck->add_option("--tol", gc_tol);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageExit;
  }

  try {
    if (*run) return cmd_run(run_opts);
    if (*cmp) return cmd_compare(cmp_opts, methods);
    if (*verify) return cmd_verify(what, ns, trials, verify_seed);
    if (*dataset) return cmd_dataset(ds_opts, export_path, ds_seed);
    if (*gradcheck) return cmd_gradcheck(gc_seed, gc_tol);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "rda: %s\n", e.what());
    return RDA_ERR_CONFIG;
  }
  return kUsageExit;
}
