#pragma once

// A dataset directory holds captions.csv, features.bin, lexicon.tsv and
// embeddings.tsv. prepare_items() turns it into model inputs.

#include <cstddef>
#include <filesystem>
#include <vector>

#include "srcv/io/features.hpp"
#include "srcv/io/synth.hpp"
#include "srcv/model.hpp"
#include "srcv/text_roles.hpp"

namespace srcv::io {

struct Dataset {
  std::vector<Caption> captions;
  FeatureArchive features;
  RoleLexicon lexicon;
  EmbeddingTable table = EmbeddingTable::hashed(1, 0);
};

inline constexpr const char* kCaptionsFile = "captions.csv";
inline constexpr const char* kFeaturesFile = "features.bin";
inline constexpr const char* kLexiconFile = "lexicon.tsv";
inline constexpr const char* kEmbeddingsFile = "embeddings.tsv";

// Throws IoError naming the first missing file.
Dataset load_dataset(const std::filesystem::path& dir);
void write_dataset(const std::filesystem::path& dir, const SynthDataset& data);

// Token matrix for the video encoder: one pooled row per modality, or every
// segment of every modality for VideoTokens::segment.
Matrix video_tokens(const ClipFeatures& clip, Pooling pooling, VideoTokens tokens);

struct PreparedItem {
  Caption caption;
  RoleVectors roles;
  Matrix tokens;
};

struct PreparedSet {
  std::vector<PreparedItem> items;
  std::size_t dropped_missing_role = 0;
};

// Word/feature widths and modality count the dataset implies for a model.
void fill_data_dims(const Dataset& data, ModelConfig& config);

// Throws Incompatible when the dataset's widths differ from `config`, and
// Index when a caption's video_id has no clip. Captions missing a noun or
// verb are dropped and counted.
PreparedSet prepare_items(const Dataset& data, const ModelConfig& config);

}  // namespace srcv::io
