#include "srcv/io/checkpoint.hpp"

#include <cmath>
#include <json.hpp>
#include <vector>

#include "srcv/errors.hpp"
#include "srcv/io/binary.hpp"
#include "srcv/io/files.hpp"

namespace srcv::io {
namespace {

using nlohmann::json;

constexpr const char* kFormat = "srcv-checkpoint";

json config_to_json(const ModelConfig& c) {
  return json{{"word_dim", c.word_dim},
              {"feature_dim", c.feature_dim},
              {"modalities", c.modalities},
              {"embed_dim", c.embed_dim},
              {"model_dim", c.model_dim},
              {"heads", c.heads},
              {"ff_hidden", c.ff_width()},
              {"text_hidden", c.text_width()},
              {"text_self_attention", c.text_self_attention},
              {"single_space", c.single_space},
              {"pooling", to_string(c.pooling)},
              {"video_tokens", to_string(c.video_tokens)},
              {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.word_dim = j.at("word_dim").get<std::size_t>();
  c.feature_dim = j.at("feature_dim").get<std::size_t>();
  c.modalities = j.at("modalities").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.model_dim = j.at("model_dim").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.ff_hidden = j.at("ff_hidden").get<std::size_t>();
  c.text_hidden = j.at("text_hidden").get<std::size_t>();
  c.text_self_attention = j.at("text_self_attention").get<bool>();
  c.single_space = j.at("single_space").get<bool>();
  const auto pooling = j.at("pooling").get<std::string>();
  if (pooling != "mean" && pooling != "max") {
    throw Error(ErrorKind::VersionMismatch, "unknown pooling '" + pooling + "'");
  }
  c.pooling = pooling == "max" ? Pooling::max : Pooling::mean;
  const auto tokens = j.at("video_tokens").get<std::string>();
  if (tokens != "modality" && tokens != "segment") {
    throw Error(ErrorKind::VersionMismatch, "unknown video_tokens '" + tokens + "'");
  }
  c.video_tokens = tokens == "segment" ? VideoTokens::segment : VideoTokens::modality;
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::filesystem::path payload_path_for(const std::filesystem::path& manifest) {
  auto p = manifest;
  p.replace_extension(".bin");
  return p;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& manifest,
                     const std::map<std::string, std::string>& metadata) {
  const auto payload = payload_path_for(manifest);
  json tensors = json::array();
  ByteWriter w;
  std::size_t offset = 0;
  params.visit([&](const std::string& name, const Matrix& m) {
    tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", offset}});
    for (double v : m.values()) w.put_f64(v);
    offset += m.size();
  });
  json doc{{"format", kFormat},
           {"version", kCheckpointVersion},
           {"config", config_to_json(params.config)},
           {"seed", params.config.seed},
           {"payload", payload.filename().string()},
           {"dtype", "float64-le"},
           {"tensors", std::move(tensors)},
           {"metadata", metadata}};
  const std::string text = doc.dump(2) + "\n";
  write_file(payload, w.bytes());
  write_file(manifest, std::span<const char>(text.data(), text.size()));
}

ModelParams load_checkpoint(const std::filesystem::path& manifest,
                            std::map<std::string, std::string>* metadata) {
  const auto manifest_bytes = read_file(manifest);
  json doc;
  try {
    doc = json::parse(manifest_bytes.begin(), manifest_bytes.end());
  } catch (const json::exception&) {
    throw Error(ErrorKind::BadMagic, manifest.string() + " is not a checkpoint manifest");
  }
  if (!doc.is_object() || doc.value("format", std::string()) != kFormat) {
    throw Error(ErrorKind::BadMagic, manifest.string() + " is not a checkpoint manifest");
  }
  try {
    if (doc.at("version").get<int>() != kCheckpointVersion) {
      throw Error(ErrorKind::VersionMismatch,
                  "checkpoint version " + doc.at("version").dump() + ", expected " +
                      std::to_string(kCheckpointVersion));
    }
    ModelConfig config = config_from_json(doc.at("config"));
    try {
      config.validate();
    } catch (const Error& e) {
      throw Error(ErrorKind::VersionMismatch, "manifest config invalid: " + e.message());
    }
    // Shapes implied by the config must match the manifest index exactly.
    ModelParams params = init_params(config, 0);
    const json& index = doc.at("tensors");
    std::size_t i = 0;
    std::size_t expected_offset = 0;
    params.visit([&](const std::string& name, const Matrix& m) {
      if (i >= index.size()) {
        throw Error(ErrorKind::VersionMismatch, "manifest lists too few tensors");
      }
      const json& t = index[i++];
      if (t.at("name").get<std::string>() != name || t.at("rows").get<std::size_t>() != m.rows() ||
          t.at("cols").get<std::size_t>() != m.cols() ||
          t.at("offset").get<std::size_t>() != expected_offset) {
        throw Error(ErrorKind::VersionMismatch,
                    "tensor '" + t.at("name").get<std::string>() +
                        "' does not match the shape the config implies for '" + name + "' (" +
                        std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")");
      }
      expected_offset += m.size();
    });
    if (i != index.size()) throw Error(ErrorKind::VersionMismatch, "manifest lists extra tensors");

    const auto payload = manifest.parent_path() / doc.at("payload").get<std::string>();
    const auto bytes = read_file(payload);
    if (bytes.size() < expected_offset * 8) {
      throw Error(ErrorKind::TruncatedPayload, payload.string() + " holds " +
                                                   std::to_string(bytes.size()) + " bytes, need " +
                                                   std::to_string(expected_offset * 8));
    }
    if (bytes.size() > expected_offset * 8) {
      throw Error(ErrorKind::VersionMismatch, payload.string() + " is larger than the manifest says");
    }
    ByteReader r(bytes);
    params.visit([&](const std::string& name, Matrix& m) {
      for (double& v : m.values()) {
        v = r.get_f64();
        if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "tensor " + name + " has NaN/Inf");
      }
    });
    if (metadata) {
      metadata->clear();
      if (auto it = doc.find("metadata"); it != doc.end()) {
        *metadata = it->get<std::map<std::string, std::string>>();
      }
    }
    return params;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::VersionMismatch, manifest.string() + ": malformed manifest (" +
                                                std::string(e.what()) + ")");
  }
}

}  // namespace srcv::io
