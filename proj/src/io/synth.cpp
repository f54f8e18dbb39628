#include "srcv/io/synth.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <set>

#include "srcv/errors.hpp"
#include "srcv/random.hpp"

namespace srcv::io {
namespace {

constexpr std::array<const char*, 16> kVerbs = {"cut",  "wash", "open",  "close", "take", "put",
                                                "pour", "stir", "peel",  "mix",   "turn", "dry",
                                                "fill", "move", "shake", "squeeze"};
constexpr std::array<const char*, 16> kNouns = {"tomato", "pan",    "knife", "fridge", "plate",
                                                "onion",  "cup",    "spoon", "bowl",   "lid",
                                                "tap",    "sponge", "bread", "carrot", "bottle",
                                                "drawer"};

}  // namespace

std::string verb_word(std::size_t verb_class) {
  return verb_class < kVerbs.size() ? kVerbs[verb_class] : "verb" + std::to_string(verb_class);
}

std::string noun_word(std::size_t noun_class) {
  return noun_class < kNouns.size() ? kNouns[noun_class] : "noun" + std::to_string(noun_class);
}

void SynthSpec::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::Config, msg); };
  if (n_items < 1) fail("items must be at least 1");
  if (n_verb_classes < 1) fail("verbs must be at least 1");
  if (n_noun_classes < 1) fail("nouns must be at least 1");
  if (feature_dim < 1) fail("dim must be at least 1");
  if (segments < 1) fail("segments must be at least 1");
  if (word_dim < 1) fail("word-dim must be at least 1");
  if (!(noise_sigma >= 0.0)) fail("noise must be non-negative");
  if (modalities.empty()) fail("at least one modality is required");
}

SynthDataset synth_dataset(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t n_mod = spec.modalities.size();
  const std::size_t dim = spec.feature_dim;

  auto prototypes = [&](std::size_t count) {
    std::vector<std::vector<std::vector<double>>> protos(n_mod);
    for (auto& per_mod : protos) {
      per_mod.assign(count, std::vector<double>(dim));
      for (auto& p : per_mod) {
        for (double& v : p) v = rng.normal();
      }
    }
    return protos;
  };
  const auto verb_protos = prototypes(spec.n_verb_classes);
  const auto noun_protos = prototypes(spec.n_noun_classes);

  std::vector<std::size_t> verbs(spec.n_items);
  for (std::size_t i = 0; i < verbs.size(); ++i) verbs[i] = i % spec.n_verb_classes;
  for (std::size_t i = verbs.size(); i > 1; --i) std::swap(verbs[i - 1], verbs[rng.below(i)]);

  SynthDataset out{{}, FeatureArchive(spec.modalities), {}, EmbeddingTable::hashed(spec.word_dim, spec.seed), {}};
  std::set<std::string> vocab = {"the", "and"};
  std::vector<double> base(dim);
  std::vector<double> jitter(spec.segments * dim);
  for (std::size_t i = 0; i < spec.n_items; ++i) {
    Caption c;
    char id[32];
    std::snprintf(id, sizeof id, "item_%05zu", i);
    c.id = id;
    std::snprintf(id, sizeof id, "clip_%05zu", i);
    c.video_id = id;
    c.verb_class = verbs[i];
    const std::size_t n_nouns = spec.n_noun_classes >= 2 ? 1 + rng.below(2) : 1;
    while (c.noun_classes.size() < n_nouns) {
      const std::size_t n = rng.below(spec.n_noun_classes);
      if (std::find(c.noun_classes.begin(), c.noun_classes.end(), n) == c.noun_classes.end()) {
        c.noun_classes.push_back(n);
      }
    }
    c.text = verb_word(c.verb_class) + " the " + noun_word(c.noun_classes[0]);
    if (n_nouns == 2) c.text += " and " + noun_word(c.noun_classes[1]);
    vocab.insert(verb_word(c.verb_class));
    for (std::size_t n : c.noun_classes) vocab.insert(noun_word(n));
    std::sort(c.noun_classes.begin(), c.noun_classes.end());

    ClipFeatures clip;
    clip.id = c.video_id;
    for (std::size_t m = 0; m < n_mod; ++m) {
      for (std::size_t d = 0; d < dim; ++d) {
        double noun_mean = 0.0;
        for (std::size_t n : c.noun_classes) noun_mean += noun_protos[m][n][d];
        noun_mean /= static_cast<double>(c.noun_classes.size());
        base[d] = verb_protos[m][c.verb_class][d] + noun_mean + spec.noise_sigma * rng.normal();
      }
      for (double& v : jitter) v = 0.1 * spec.noise_sigma * rng.normal();
      for (std::size_t d = 0; d < dim; ++d) {
        double mean = 0.0;
        for (std::size_t s = 0; s < spec.segments; ++s) mean += jitter[s * dim + d];
        mean /= static_cast<double>(spec.segments);
        for (std::size_t s = 0; s < spec.segments; ++s) jitter[s * dim + d] -= mean;
      }
      Matrix segs(spec.segments, dim);
      for (std::size_t s = 0; s < spec.segments; ++s) {
        for (std::size_t d = 0; d < dim; ++d) {
          segs(s, d) = static_cast<double>(static_cast<float>(base[d] + jitter[s * dim + d]));
        }
      }
      clip.modalities.push_back(std::move(segs));
    }
    out.features.add(std::move(clip));
    out.captions.push_back(std::move(c));
  }
  for (std::size_t v = 0; v < spec.n_verb_classes; ++v) out.lexicon.add(verb_word(v), Role::verb);
  for (std::size_t n = 0; n < spec.n_noun_classes; ++n) out.lexicon.add(noun_word(n), Role::noun);
  out.vocabulary.assign(vocab.begin(), vocab.end());
  return out;
}

}  // namespace srcv::io
