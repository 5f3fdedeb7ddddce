#pragma once

// JSON run reports. Variables are referenced by header name and 1-based column,
// classes by their level name, rows by their identifier.

#include <string>

#include "json.hpp"
#include "robsel/common.hpp"
#include "robsel/ml_subset.hpp"
#include "robsel/redda.hpp"
#include "robsel/scoring.hpp"
#include "robsel/simlab.hpp"
#include "robsel/tbic.hpp"

namespace robsel {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

/// Pretty-printed report with a trailing newline.
std::string render(const Json& report);

Json variable_json(const LabeledDataset& data, int column);
Json variables_json(const LabeledDataset& data, std::span<const int> columns);
Json class_mapping_json(const LabeledDataset& data);
Json rows_json(const LabeledDataset& data, std::span<const int> rows);

/// `columns` maps the parameter dimensions to data columns.
Json params_json(const ClassParams& params, const LabeledDataset& data, std::span<const int> columns);
Json redda_json(const ReddaFit& fit, const LabeledDataset& data, std::span<const int> columns);
Json selection_json(const SelectionResult& result, const LabeledDataset& data);
Json ml_subset_json(const MlSubsetFit& fit, const LabeledDataset& data);
Json prediction_json(const Prediction& pred, const LabeledDataset& train, const LabeledDataset& test);
Json outlier_json(const OutlierScores& scores, const LabeledDataset& test, int top_k);

ExperimentConfig experiment_config_from_json(const Json& j);
Json experiment_config_json(const ExperimentConfig& config);
Json experiment_json(const ExperimentReport& report);
Json gamma_monitor_json(const GammaMonitorReport& report, const GammaMonitorConfig& config, const LabeledDataset& data);

}  // namespace robsel
