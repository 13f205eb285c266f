#pragma once

#include "kpiguard/pipeline.hpp"

#include <json.hpp>

#include <filesystem>

namespace kpiguard {

inline constexpr int kModelFormatVersion = 1;

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const AutoencoderModel& model);
AutoencoderModel autoencoder_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RbmModel& model);
RbmModel rbm_from_json(const nlohmann::json& j);

nlohmann::json to_json(const OcsvmModel& model);
OcsvmModel ocsvm_from_json(const nlohmann::json& j);

nlohmann::json to_json(const NormStats& stats);
NormStats norm_from_json(const nlohmann::json& j);

nlohmann::json to_json(const BundleConfig& cfg);
BundleConfig bundle_config_from_json(const nlohmann::json& j);

/// Writes bundle.json and baseline_graph.csv into `dir`.
void save_bundle(const PipelineBundle& bundle, const std::filesystem::path& dir);

/// Loads and verifies that every component matches the stored catalog hash.
PipelineBundle load_bundle(const std::filesystem::path& dir);

} // namespace kpiguard
