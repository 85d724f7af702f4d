// SPDX-License-Identifier: Apache-2.0
#pragma once

// JSON mappings for configuration and checkpoint state. Doubles are written
// in shortest round-trip form, so every state value reloads bit-exactly.

#include <json.hpp>

#include "rda/alignment.hpp"
#include "rda/datasets.hpp"
#include "rda/numerics.hpp"
#include "rda/trainer.hpp"

namespace rda {

using Json = nlohmann::json;

void to_json(Json& j, const AugmentParams& a);
void from_json(const Json& j, AugmentParams& a);

void to_json(Json& j, const TrainConfig& c);
void from_json(const Json& j, TrainConfig& c);

void to_json(Json& j, const DatasetSpec& d);
void from_json(const Json& j, DatasetSpec& d);

void to_json(Json& j, const SourceConfig& s);
void from_json(const Json& j, SourceConfig& s);

/// `train.num_classes` defaults to `dataset.num_classes` when omitted.
void to_json(Json& j, const RunSpec& r);
void from_json(const Json& j, RunSpec& r);

void to_json(Json& j, const SplitCounts& s);

void to_json(Json& j, const Matrix& m);
void from_json(const Json& j, Matrix& m);
void to_json(Json& j, const DenseLayer& l);
void from_json(const Json& j, DenseLayer& l);
void to_json(Json& j, const ModelParams& p);
void from_json(const Json& j, ModelParams& p);
void to_json(Json& j, const OptimizerState& o);
void from_json(const Json& j, OptimizerState& o);

void to_json(Json& j, const ProbVec& p);
void from_json(const Json& j, ProbVec& p);
void to_json(Json& j, const DistributionTracker& t);
DistributionTracker tracker_from_json(const Json& j);
void to_json(Json& j, const AlignmentState& a);
AlignmentState alignment_from_json(const Json& j);

void to_json(Json& j, const EpochRecord& r);
void from_json(const Json& j, EpochRecord& r);
void to_json(Json& j, const RunMetrics& m);
void from_json(const Json& j, RunMetrics& m);

/// Rejects keys outside `allowed` with a Config error naming `context`.
void check_keys(const Json& j, std::initializer_list<const char*> allowed, const char* context);

}  // namespace rda
