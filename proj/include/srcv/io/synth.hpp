#pragma once

// Synthetic kitchen-action dataset: captions templated from verb/noun
// classes and video features built from per-modality class prototypes.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "srcv/io/features.hpp"
#include "srcv/text_roles.hpp"

namespace srcv::io {

struct SynthSpec {
  std::size_t n_verb_classes = 8;
  std::size_t n_noun_classes = 8;
  std::size_t n_items = 400;
  std::size_t feature_dim = 64;
  std::size_t segments = 5;
  std::size_t word_dim = 64;
  double noise_sigma = 0.1;
  std::uint64_t seed = 42;
  std::vector<std::string> modalities = {"rgb", "flow", "audio"};

  // Throws ConfigError naming the field.
  void validate() const;
};

struct SynthDataset {
  std::vector<Caption> captions;
  FeatureArchive features;
  RoleLexicon lexicon;
  EmbeddingTable table;
  std::vector<std::string> vocabulary;  // every token the captions use
};

// Verb classes are assigned round-robin then shuffled, so each verb class
// gets floor or ceil of n_items / n_verb_classes items. Each item takes one
// or two distinct noun classes. A clip's base feature per modality is
// verb prototype + mean of its noun prototypes (standard normal
// components) plus N(0, noise_sigma^2) item noise; it is tiled over the
// segments with zero-mean jitter of scale 0.1 * noise_sigma. Stored
// values are rounded to float32.
SynthDataset synth_dataset(const SynthSpec& spec);

std::string verb_word(std::size_t verb_class);
std::string noun_word(std::size_t noun_class);

}  // namespace srcv::io
