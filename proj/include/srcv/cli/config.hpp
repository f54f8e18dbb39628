#pragma once

// Run configuration: a flat `key = value` file with [model], [train],
// [loss] and [eval] sections, plus `section.key=value` overrides.

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "srcv/train.hpp"

namespace srcv::cli {

struct RunConfig {
  TrainConfig train;  // train.model holds the model section
  std::optional<nn::DistanceKind> eval_distance;  // unset: use the training distance
  // Every (section.key, value) applied, in order.
  std::vector<std::pair<std::string, std::string>> assignments;

  // Throws ConfigError. Requires at least one positive lambda.
  void validate() const;
};

// Throws ConfigError naming the key for unknown keys or malformed values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

// "section.key=value"
void apply_override(RunConfig& config, std::string_view assignment);

// Throws IoError when unreadable, ParseError/ConfigError for bad content.
void load_config_file(RunConfig& config, const std::filesystem::path& path);
void parse_config(RunConfig& config, std::string_view text, const std::string& source);

// Every recognised "section.key".
const std::set<std::string>& known_keys();

nn::DistanceKind parse_distance(std::string_view text);
const char* to_string(nn::DistanceKind kind) noexcept;

}  // namespace srcv::cli
