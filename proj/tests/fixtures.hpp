#pragma once

#include "srcv/io/dataset.hpp"
#include "srcv/io/synth.hpp"
#include "srcv/train.hpp"

namespace testing {

// Small synthetic set wired to a matching model config.
struct TinySet {
  srcv::io::Dataset data;
  srcv::io::PreparedSet prepared;
  srcv::TrainConfig config;
};

inline TinySet tiny_set(std::size_t items = 24, std::uint64_t seed = 7, double noise = 0.1) {
  srcv::io::SynthSpec spec;
  spec.n_items = items;
  spec.n_verb_classes = 4;
  spec.n_noun_classes = 4;
  spec.feature_dim = 12;
  spec.word_dim = 10;
  spec.segments = 3;
  spec.noise_sigma = noise;
  spec.seed = seed;
  srcv::io::SynthDataset s = srcv::io::synth_dataset(spec);
  TinySet t;
  t.data.captions = std::move(s.captions);
  t.data.features = std::move(s.features);
  t.data.lexicon = std::move(s.lexicon);
  t.data.table = std::move(s.table);
  t.config.batch_size = 8;
  t.config.epochs = 3;
  t.config.learning_rate = 0.05;
  t.config.model.embed_dim = 6;
  t.config.model.model_dim = 8;
  t.config.model.heads = 2;
  t.config.model.ff_hidden = 16;
  t.config.model.text_hidden = 12;
  srcv::io::fill_data_dims(t.data, t.config.model);
  t.prepared = srcv::io::prepare_items(t.data, t.config.model);
  return t;
}

}  // namespace testing
