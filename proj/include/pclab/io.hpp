#pragma once

#include "pclab/envs.hpp"
#include "pclab/experiments.hpp"
#include "pclab/metrics.hpp"
#include "pclab/nets.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace pclab {

using json = nlohmann::ordered_json;

/// Version stamped into every JSON document this library writes.
inline constexpr int kSchemaVersion = 1;

json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j, const std::string& field);

json to_json(const GeneratorSpec& spec);
json to_json(const Dataset& data);
json to_json(const NetworkParams& params);
json to_json(const TrainConfig& config);
json to_json(const TrainTrace& trace);
json to_json(const BandReport& band);
json to_json(const MetricsReport& report);
json to_json(const ExperimentConfig& config);

/// Parsers reject unknown keys and report the offending field through
/// ConfigError. Config parsers fill omitted optional fields with defaults.
GeneratorSpec generator_spec_from_json(const json& j);
Dataset dataset_from_json(const json& j);
NetworkParams params_from_json(const json& j);
TrainConfig train_config_from_json(const json& j);
ExperimentConfig experiment_config_from_json(const json& j);

/// Applies "key=value" to a JSON object. Dotted keys address nested objects
/// ("train.depth=5"); the value is parsed as JSON when possible and kept as a
/// string otherwise.
void apply_override(json& target, std::string_view assignment);

/// step,loss[,accuracy]
std::string trace_to_csv(const TrainTrace& trace);
/// row,state_*,action_*,target_*,env_id,class_label
std::string metas_to_csv(const Dataset& data);
/// metric,value for every scalar of the report.
std::string metrics_to_csv(const MetricsReport& report);
std::string matrix_to_csv(const Matrix& m);

json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);
/// Serializes with two-space indent and a trailing newline.
std::string dump_json(const json& j);

}  // namespace pclab
