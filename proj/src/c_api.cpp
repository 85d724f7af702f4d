// SPDX-License-Identifier: Apache-2.0
#include "rda/rda.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "rda/error.hpp"
#include "rda/harness.hpp"

struct rda_trainer {
  rda::Trainer impl;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

rda_status set_error(rda_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
rda_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const rda::Error& e) {
    return set_error(static_cast<rda_status>(static_cast<int>(e.category())), e.what());
  } catch (const nlohmann::json::exception& e) {
    return set_error(RDA_ERR_CONFIG, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(RDA_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(RDA_ERR_INTERNAL, e.what());
  }
}

rda::Json parse(const char* text, const char* what) {
  if (!text) rda::fail(rda::ErrorCategory::Usage, std::string(what) + " is null");
  try {
    return rda::Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    rda::fail(rda::ErrorCategory::Config, std::string(what) + ": " + e.what());
  }
}

rda_status emit(const rda::Json& j, char** out) {
  if (!out) return set_error(RDA_ERR_USAGE, "output pointer is null");
  *out = dup_string(j.dump(2));
  return *out ? RDA_OK : set_error(RDA_ERR_INTERNAL, "out of memory");
}

rda::Json step_to_json(const rda::StepOutput& s) {
  return rda::Json{{"loss_total", s.loss_total},
                   {"loss_sd", s.loss_sd},
                   {"loss_sa", s.loss_sa},
                   {"loss_cd", s.loss_cd},
                   {"loss_ca", s.loss_ca},
                   {"mask_rate", s.mask_rate},
                   {"batch_pseudo_marginal", s.batch_pseudo_marginal}};
}

}  // namespace

extern "C" {

const char* rda_version(void) { return "1.0.0"; }

const char* rda_last_error(void) { return g_last_error.c_str(); }

void rda_string_free(char* s) { std::free(s); }

rda_status rda_run_experiment(const char* config_json, char** summary_json) {
  return guarded([&] {
    const auto config = rda::experiment_from_json(parse(config_json, "config"));
    const auto summary = rda::run_experiment(config);
    return emit(rda::summary_to_json(summary), summary_json);
  });
}

rda_status rda_compare(const char* config_json, const char* methods_csv, char** table_json) {
  return guarded([&] {
    const auto config = rda::experiment_from_json(parse(config_json, "config"));
    if (!methods_csv) rda::fail(rda::ErrorCategory::Usage, "methods is null");
    std::vector<rda::Method> methods;
    std::istringstream is(methods_csv);
    for (std::string name; std::getline(is, name, ',');)
      if (!name.empty()) methods.push_back(rda::parse_method(name));
    const auto table = rda::compare(methods, config);
    return emit(rda::comparison_to_json(table), table_json);
  });
}

rda_status rda_verify_theorem1(const uint64_t* class_counts, size_t count, uint64_t trials,
                               uint64_t seed, char** report_json) {
  return guarded([&] {
    if (!class_counts && count > 0) rda::fail(rda::ErrorCategory::Usage, "class_counts is null");
    std::vector<std::size_t> ns(class_counts, class_counts + count);
    const auto report = rda::verify_theorem1(ns, trials, seed);
    const rda_status st = emit(rda::theorem1_to_json(report), report_json);
    if (st != RDA_OK) return st;
    return report.passed ? RDA_OK : set_error(RDA_ERR_ASSERTION, "entropy inequality violated");
  });
}

rda_status rda_verify_reverse(uint64_t trials, uint64_t seed, char** report_json) {
  return guarded([&] {
    const auto report = rda::verify_reverse(trials, seed);
    const rda_status st = emit(rda::reverse_to_json(report), report_json);
    if (st != RDA_OK) return st;
    return report.passed ? RDA_OK : set_error(RDA_ERR_ASSERTION, "reverse operation check failed");
  });
}

rda_status rda_gradcheck(uint64_t seed, double tolerance, char** report_json) {
  return guarded([&] {
    const auto report = rda::rda_gradcheck(seed, tolerance);
    const rda_status st = emit(rda::gradcheck_to_json(report), report_json);
    if (st != RDA_OK) return st;
    return report.passed ? RDA_OK : set_error(RDA_ERR_ASSERTION, "gradient check failed");
  });
}

rda_status rda_dataset_counts(const char* dataset_json, char** counts_json) {
  return guarded([&] {
    const auto spec = parse(dataset_json, "dataset").get<rda::DatasetSpec>();
    rda::Json j = rda::split_counts(spec);
    j["protocol"] = rda::protocol_name(spec.protocol);
    if (const auto* p = std::get_if<rda::protocol::ImbalancedLabeled>(&spec.protocol))
      j["gamma_x"] = rda::gamma_search(p->labels, p->n0, spec.num_classes).gamma_x;
    if (const auto* p = std::get_if<rda::protocol::MismatchedBoth>(&spec.protocol))
      j["gamma_x"] = rda::gamma_search(p->labels, p->n0, spec.num_classes).gamma_x;
    return emit(j, counts_json);
  });
}

rda_status rda_dataset_export_csv(const char* run_json, const char* path) {
  return guarded([&] {
    if (!path) rda::fail(rda::ErrorCategory::Usage, "path is null");
    const auto spec = parse(run_json, "run").get<rda::RunSpec>();
    spec.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) rda::fail(rda::ErrorCategory::Io, std::string("cannot open ") + path);
    rda::write_dataset_csv(rda::build_dataset(spec), os);
    if (!os) rda::fail(rda::ErrorCategory::Io, std::string("write failed for ") + path);
    return RDA_OK;
  });
}

rda_status rda_trainer_create(const char* run_json, rda_trainer** out) {
  return guarded([&] {
    if (!out) rda::fail(rda::ErrorCategory::Usage, "output pointer is null");
    auto spec = parse(run_json, "run").get<rda::RunSpec>();
    *out = new rda_trainer{rda::Trainer(std::move(spec))};
    return RDA_OK;
  });
}

rda_status rda_trainer_load_checkpoint(const char* path, rda_trainer** out) {
  return guarded([&] {
    if (!out || !path) rda::fail(rda::ErrorCategory::Usage, "null argument");
    std::ifstream is(path, std::ios::binary);
    if (!is) rda::fail(rda::ErrorCategory::Io, std::string("cannot open ") + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    *out = new rda_trainer{rda::Trainer::from_checkpoint(buf.str())};
    return RDA_OK;
  });
}

rda_status rda_trainer_save_checkpoint(const rda_trainer* trainer, const char* path) {
  return guarded([&] {
    if (!trainer || !path) rda::fail(rda::ErrorCategory::Usage, "null argument");
    std::ofstream os(path, std::ios::binary);
    if (!os) rda::fail(rda::ErrorCategory::Io, std::string("cannot open ") + path);
    os << trainer->impl.checkpoint();
    if (!os) rda::fail(rda::ErrorCategory::Io, std::string("write failed for ") + path);
    return RDA_OK;
  });
}

rda_status rda_trainer_step(rda_trainer* trainer, char** step_json) {
  return guarded([&] {
    if (!trainer) rda::fail(rda::ErrorCategory::Usage, "trainer is null");
    const auto out = trainer->impl.step();
    return step_json ? emit(step_to_json(out), step_json) : RDA_OK;
  });
}

rda_status rda_trainer_train(rda_trainer* trainer, char** metrics_json) {
  return guarded([&] {
    if (!trainer) rda::fail(rda::ErrorCategory::Usage, "trainer is null");
    const auto& m = trainer->impl.train();
    if (metrics_json) {
      const rda_status st = emit(rda::Json(m), metrics_json);
      if (st != RDA_OK) return st;
    }
    return m.aborted ? set_error(RDA_ERR_NUMERICAL, m.abort_reason) : RDA_OK;
  });
}

rda_status rda_trainer_metrics(const rda_trainer* trainer, char** metrics_json) {
  return guarded([&] {
    if (!trainer) rda::fail(rda::ErrorCategory::Usage, "trainer is null");
    return emit(rda::Json(trainer->impl.metrics()), metrics_json);
  });
}

uint64_t rda_trainer_step_count(const rda_trainer* trainer) {
  return trainer ? trainer->impl.step_count() : 0;
}

uint64_t rda_trainer_total_steps(const rda_trainer* trainer) {
  return trainer ? trainer->impl.config().total_steps() : 0;
}

void rda_trainer_destroy(rda_trainer* trainer) { delete trainer; }

}  // extern "C"
