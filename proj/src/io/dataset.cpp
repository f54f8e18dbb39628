#include "srcv/io/dataset.hpp"

#include <filesystem>

#include "srcv/errors.hpp"
#include "srcv/io/captions.hpp"

namespace srcv::io {

Dataset load_dataset(const std::filesystem::path& dir) {
  for (const char* name : {kCaptionsFile, kFeaturesFile, kLexiconFile, kEmbeddingsFile}) {
    if (!std::filesystem::exists(dir / name)) {
      throw Error(ErrorKind::Io, "missing " + (dir / name).string());
    }
  }
  Dataset d;
  d.captions = load_captions(dir / kCaptionsFile);
  d.features = load_features(dir / kFeaturesFile);
  d.lexicon = RoleLexicon::load(dir / kLexiconFile);
  d.table = EmbeddingTable::load(dir / kEmbeddingsFile);
  return d;
}

void write_dataset(const std::filesystem::path& dir, const SynthDataset& data) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  save_captions(dir / kCaptionsFile, data.captions);
  save_features(dir / kFeaturesFile, data.features);
  data.lexicon.save(dir / kLexiconFile);
  data.table.save(dir / kEmbeddingsFile, data.vocabulary);
}

Matrix video_tokens(const ClipFeatures& clip, Pooling pooling, VideoTokens tokens) {
  if (tokens == VideoTokens::modality) {
    Matrix out(clip.modalities.size(), clip.dim());
    for (std::size_t m = 0; m < clip.modalities.size(); ++m) {
      const auto pooled = temporal_pool(clip.modalities[m], pooling);
      std::copy(pooled.begin(), pooled.end(), out.row(m).begin());
    }
    return out;
  }
  Matrix out(clip.modalities.size() * clip.segments(), clip.dim());
  auto dst = out.values().begin();
  for (const Matrix& m : clip.modalities) dst = std::copy(m.values().begin(), m.values().end(), dst);
  return out;
}

void fill_data_dims(const Dataset& data, ModelConfig& config) {
  config.word_dim = data.table.dim();
  config.feature_dim = data.features.dim();
  config.modalities = data.features.modality_names().size();
}

PreparedSet prepare_items(const Dataset& data, const ModelConfig& config) {
  if (data.table.dim() != config.word_dim) {
    throw Error(ErrorKind::Incompatible, "word vectors have dim " + std::to_string(data.table.dim()) +
                                             ", model expects " + std::to_string(config.word_dim));
  }
  if (data.features.dim() != config.feature_dim ||
      data.features.modality_names().size() != config.modalities) {
    throw Error(ErrorKind::Incompatible,
                "features are " + std::to_string(data.features.modality_names().size()) + " x " +
                    std::to_string(data.features.dim()) + ", model expects " +
                    std::to_string(config.modalities) + " x " + std::to_string(config.feature_dim));
  }
  PreparedSet out;
  for (const Caption& c : data.captions) {
    const ClipFeatures* clip = data.features.find(c.video_id);
    if (clip == nullptr) {
      throw Error(ErrorKind::Index, "caption " + c.id + " refers to unknown clip " + c.video_id);
    }
    RoleVectors roles = role_vectors(tag_roles(tokenize(c.text), data.lexicon), data.table);
    if (roles.missing_role()) {
      ++out.dropped_missing_role;
      continue;
    }
    out.items.push_back(
        PreparedItem{c, std::move(roles), video_tokens(*clip, config.pooling, config.video_tokens)});
  }
  return out;
}

}  // namespace srcv::io
