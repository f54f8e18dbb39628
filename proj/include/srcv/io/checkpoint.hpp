#pragma once

// Checkpoint = JSON manifest + sibling payload of raw little-endian float64
// tensors, concatenated in manifest order. The manifest records the model
// config, the tensor index (name, rows, cols, offset in elements) and the
// payload file name, which sits next to the manifest.

#include <filesystem>
#include <map>
#include <string>

#include "srcv/model.hpp"

namespace srcv::io {

inline constexpr int kCheckpointVersion = 1;

// `model.json` -> `model.bin`
std::filesystem::path payload_path_for(const std::filesystem::path& manifest);

void save_checkpoint(const ModelParams& params, const std::filesystem::path& manifest,
                     const std::map<std::string, std::string>& metadata = {});

// Throws BadMagic (empty/non-JSON/foreign manifest), VersionMismatch (format
// version, or tensor index disagreeing with the shapes the config implies),
// TruncatedPayload, NonFiniteValue.
ModelParams load_checkpoint(const std::filesystem::path& manifest,
                            std::map<std::string, std::string>* metadata = nullptr);

}  // namespace srcv::io
