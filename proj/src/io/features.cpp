#include "srcv/io/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "srcv/errors.hpp"
#include "srcv/io/binary.hpp"
#include "srcv/io/files.hpp"

namespace srcv::io {
namespace {

constexpr std::string_view kMagic = "SRCV";

}  // namespace

void FeatureArchive::add(ClipFeatures clip) {
  if (clip.modalities.size() != modality_names_.size()) {
    throw Error(ErrorKind::Shape, "clip " + clip.id + " has " +
                                      std::to_string(clip.modalities.size()) + " modalities, expected " +
                                      std::to_string(modality_names_.size()));
  }
  for (const Matrix& m : clip.modalities) {
    if (m.rows() != clip.segments() || m.cols() != clip.dim()) {
      throw Error(ErrorKind::Shape, "clip " + clip.id + ": modalities disagree on shape");
    }
  }
  if (!clips_.empty() && clip.dim() != dim()) {
    throw Error(ErrorKind::Shape, "clip " + clip.id + " has dim " + std::to_string(clip.dim()) +
                                      ", archive uses " + std::to_string(dim()));
  }
  if (!index_.emplace(clip.id, clips_.size()).second) {
    throw Error(ErrorKind::DuplicateId, "duplicate clip id '" + clip.id + "'");
  }
  clips_.push_back(std::move(clip));
}

const ClipFeatures* FeatureArchive::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &clips_[it->second];
}

std::vector<char> encode_features(const FeatureArchive& archive) {
  const auto& names = archive.modality_names();
  if (names.size() > std::numeric_limits<std::uint8_t>::max()) {
    throw Error(ErrorKind::Shape, "too many modalities for the archive format");
  }
  ByteWriter w;
  w.put_bytes(kMagic);
  w.put_uint<std::uint32_t>(kFeatureArchiveVersion);
  w.put_uint<std::uint32_t>(static_cast<std::uint32_t>(archive.clips().size()));
  w.put_uint<std::uint8_t>(static_cast<std::uint8_t>(names.size()));
  for (const auto& name : names) {
    if (name.size() > std::numeric_limits<std::uint8_t>::max()) {
      throw Error(ErrorKind::Shape, "modality name too long: " + name);
    }
    w.put_uint<std::uint8_t>(static_cast<std::uint8_t>(name.size()));
    w.put_bytes(name);
  }
  for (const auto& clip : archive.clips()) {
    if (clip.id.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw Error(ErrorKind::Shape, "clip id too long");
    }
    w.put_uint<std::uint16_t>(static_cast<std::uint16_t>(clip.id.size()));
    w.put_bytes(clip.id);
    w.put_uint<std::uint32_t>(static_cast<std::uint32_t>(clip.segments()));
    w.put_uint<std::uint32_t>(static_cast<std::uint32_t>(clip.dim()));
    for (const Matrix& m : clip.modalities) {
      for (double v : m.values()) w.put_f32(static_cast<float>(v));
    }
  }
  return w.bytes();
}

FeatureArchive decode_features(std::span<const char> bytes) {
  if (bytes.size() < kMagic.size() ||
      std::string_view(bytes.data(), kMagic.size()) != kMagic) {
    throw Error(ErrorKind::BadMagic, "feature archive does not start with 'SRCV'");
  }
  ByteReader r(bytes.subspan(kMagic.size()));
  const auto version = r.get_uint<std::uint32_t>();
  if (version != kFeatureArchiveVersion) {
    throw Error(ErrorKind::VersionMismatch, "feature archive version " + std::to_string(version) +
                                                ", expected " +
                                                std::to_string(kFeatureArchiveVersion));
  }
  const auto n_clips = r.get_uint<std::uint32_t>();
  const auto n_modalities = r.get_uint<std::uint8_t>();
  std::vector<std::string> names;
  for (std::uint8_t m = 0; m < n_modalities; ++m) {
    const auto len = r.get_uint<std::uint8_t>();
    names.push_back(r.get_bytes(len));
  }
  FeatureArchive archive(std::move(names));
  for (std::uint32_t c = 0; c < n_clips; ++c) {
    ClipFeatures clip;
    const auto id_len = r.get_uint<std::uint16_t>();
    clip.id = r.get_bytes(id_len);
    const auto segments = r.get_uint<std::uint32_t>();
    const auto dim = r.get_uint<std::uint32_t>();
    const std::uint64_t count = static_cast<std::uint64_t>(segments) * dim;
    if (count * 4 * n_modalities > r.remaining()) {
      throw Error(ErrorKind::TruncatedPayload, "clip " + clip.id + " promises " +
                                                   std::to_string(count * 4 * n_modalities) +
                                                   " payload bytes, " +
                                                   std::to_string(r.remaining()) + " remain");
    }
    for (std::uint8_t m = 0; m < n_modalities; ++m) {
      std::vector<double> values(count);
      for (double& v : values) v = r.get_f32();
      for (double v : values) {
        if (!std::isfinite(v)) {
          throw Error(ErrorKind::NonFinite, "clip " + clip.id + " contains NaN or Inf");
        }
      }
      clip.modalities.push_back(Matrix::from_data(segments, dim, std::move(values)));
    }
    archive.add(std::move(clip));
  }
  if (r.remaining() != 0) {
    throw Error(ErrorKind::Parse, std::to_string(r.remaining()) + " trailing bytes after last clip");
  }
  return archive;
}

void save_features(const std::filesystem::path& path, const FeatureArchive& archive) {
  write_file(path, encode_features(archive));
}

FeatureArchive load_features(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_features(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.message());
  }
}

std::vector<double> temporal_pool(const Matrix& segments, Pooling mode) {
  if (segments.rows() == 0) throw Error(ErrorKind::EmptyMatrix, "temporal_pool of zero segments");
  // Each column is reduced in sorted value order so the result does not
  // depend on segment order, bit for bit.
  std::vector<double> out(segments.cols());
  std::vector<double> column(segments.rows());
  for (std::size_t j = 0; j < out.size(); ++j) {
    for (std::size_t r = 0; r < segments.rows(); ++r) column[r] = segments(r, j);
    if (mode == Pooling::max) {
      out[j] = *std::max_element(column.begin(), column.end());
    } else {
      std::sort(column.begin(), column.end());
      double acc = 0.0;
      for (double v : column) acc += v;
      out[j] = acc / static_cast<double>(column.size());
    }
  }
  return out;
}

}  // namespace srcv::io
