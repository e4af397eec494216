#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "htn/network.hpp"
#include "htn/training.hpp"
#include "htn/tree.hpp"

namespace htn {

struct VersionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MalformedInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kArchiveFormatVersion = 1;

// A trained model plus everything needed to apply it: vocabulary, the
// configuration it was trained with, and how far training got. JSON with
// shortest-round-trip number formatting, so a save/load cycle reproduces
// every parameter bit for bit.
struct ModelArchive {
  HtnModel model;
  LabelVocab vocab;
  TrainConfig config;
  std::size_t epochs_completed = 0;
};

void save_archive(const ModelArchive& archive, const std::filesystem::path& path);
void save_archive(const ModelArchive& archive, std::ostream& out);

// Throws VersionMismatch on an unknown format_version, MalformedInput on
// anything else wrong with the document.
ModelArchive load_archive(const std::filesystem::path& path);
ModelArchive load_archive(std::istream& in);

// Training configuration as a JSON document; unknown keys are rejected.
TrainConfig parse_train_config(const std::string& json_text);
std::string train_config_to_json(const TrainConfig& config);

std::string normalization_name(Normalization n);
Normalization normalization_from_name(const std::string& name);

// Metrics as a single-line JSON record for machine-readable output.
std::string metrics_to_json(const Metrics& metrics);

// Lambda tensors of one module as a JSON object and back.
nlohmann::json params_to_json(const HtmmParameters& params);
HtmmParameters params_from_json(const nlohmann::json& j);

}  // namespace htn
