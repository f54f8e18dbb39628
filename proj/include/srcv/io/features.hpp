#pragma once

// Binary feature archive, little-endian:
//
//   magic "SRCV" | version u32 = 1 | n_clips u32 | n_modalities u8
//   per modality: name_len u8, name bytes (UTF-8)
//   per clip:     id_len u16, id bytes, segments u32, dim u32,
//                 n_modalities x segments x dim float32, modality-major
//
// Values are float32 on disk and double in memory; writing a value that is
// not exactly representable as float32 rounds it.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "srcv/matrix.hpp"
#include "srcv/model.hpp"

namespace srcv::io {

struct ClipFeatures {
  std::string id;
  std::vector<Matrix> modalities;  // each segments x dim

  std::size_t segments() const noexcept {
    return modalities.empty() ? 0 : modalities.front().rows();
  }
  std::size_t dim() const noexcept { return modalities.empty() ? 0 : modalities.front().cols(); }
};

class FeatureArchive {
 public:
  FeatureArchive() = default;
  explicit FeatureArchive(std::vector<std::string> modality_names)
      : modality_names_(std::move(modality_names)) {}

  // Throws ShapeError on modality count or segment/dim inconsistency and
  // DuplicateId on a repeated clip id.
  void add(ClipFeatures clip);

  const std::vector<std::string>& modality_names() const noexcept { return modality_names_; }
  const std::vector<ClipFeatures>& clips() const noexcept { return clips_; }
  // Feature width shared by every clip; 0 for an empty archive.
  std::size_t dim() const noexcept { return clips_.empty() ? 0 : clips_.front().dim(); }
  // nullptr when absent.
  const ClipFeatures* find(const std::string& id) const;

  friend bool operator==(const FeatureArchive& a, const FeatureArchive& b) {
    return a.modality_names_ == b.modality_names_ && a.clips_.size() == b.clips_.size() &&
           std::equal(a.clips_.begin(), a.clips_.end(), b.clips_.begin(),
                      [](const ClipFeatures& x, const ClipFeatures& y) {
                        return x.id == y.id && x.modalities == y.modalities;
                      });
  }

 private:
  std::vector<std::string> modality_names_;
  std::vector<ClipFeatures> clips_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr std::uint32_t kFeatureArchiveVersion = 1;

std::vector<char> encode_features(const FeatureArchive& archive);
// Throws BadMagic, VersionMismatch, TruncatedPayload, NonFiniteValue.
FeatureArchive decode_features(std::span<const char> bytes);

void save_features(const std::filesystem::path& path, const FeatureArchive& archive);
FeatureArchive load_features(const std::filesystem::path& path);

// Column-wise mean or max over the segment axis. Throws EmptyMatrix for
// zero segments.
std::vector<double> temporal_pool(const Matrix& segments, Pooling mode);

}  // namespace srcv::io
