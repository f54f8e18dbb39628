#include "srcv/cli/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "srcv/errors.hpp"
#include "srcv/io/files.hpp"

namespace srcv::cli {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  throw Error(ErrorKind::Config, std::string(key) + ": expected " + expected + ", got '" +
                                     std::string(value) + "'");
}

std::size_t to_size(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || end != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || end != v.data() + v.size()) bad_value(key, v, "an unsigned integer");
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || end != v.data() + v.size() || !std::isfinite(out)) {
    bad_value(key, v, "a finite number");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "true or false");
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto model_size = [&](const char* name, std::size_t ModelConfig::*field) {
      t[std::string("model.") + name] = [field](RunConfig& c, auto k, auto v) {
        c.train.model.*field = to_size(k, v);
      };
    };
    model_size("word_dim", &ModelConfig::word_dim);
    model_size("feature_dim", &ModelConfig::feature_dim);
    model_size("modalities", &ModelConfig::modalities);
    model_size("embed_dim", &ModelConfig::embed_dim);
    model_size("model_dim", &ModelConfig::model_dim);
    model_size("heads", &ModelConfig::heads);
    model_size("ff_hidden", &ModelConfig::ff_hidden);
    model_size("text_hidden", &ModelConfig::text_hidden);
    t["model.text_self_attention"] = [](RunConfig& c, auto k, auto v) {
      c.train.model.text_self_attention = to_bool(k, v);
    };
    t["model.single_space"] = [](RunConfig& c, auto k, auto v) {
      c.train.model.single_space = to_bool(k, v);
    };
    t["model.pooling"] = [](RunConfig& c, auto k, auto v) {
      if (v == "mean") c.train.model.pooling = Pooling::mean;
      else if (v == "max") c.train.model.pooling = Pooling::max;
      else bad_value(k, v, "mean or max");
    };
    t["model.video_tokens"] = [](RunConfig& c, auto k, auto v) {
      if (v == "modality") c.train.model.video_tokens = VideoTokens::modality;
      else if (v == "segment") c.train.model.video_tokens = VideoTokens::segment;
      else bad_value(k, v, "modality or segment");
    };
    t["model.seed"] = [](RunConfig& c, auto k, auto v) { c.train.model.seed = to_u64(k, v); };

    t["train.batch_size"] = [](RunConfig& c, auto k, auto v) { c.train.batch_size = to_size(k, v); };
    t["train.learning_rate"] = [](RunConfig& c, auto k, auto v) {
      c.train.learning_rate = to_double(k, v);
    };
    t["train.epochs"] = [](RunConfig& c, auto k, auto v) { c.train.epochs = to_size(k, v); };
    t["train.per_anchor"] = [](RunConfig& c, auto k, auto v) { c.train.per_anchor = to_size(k, v); };
    t["train.seed"] = [](RunConfig& c, auto k, auto v) { c.train.seed = to_u64(k, v); };
    t["train.reshuffle"] = [](RunConfig& c, auto k, auto v) { c.train.reshuffle = to_bool(k, v); };
    t["train.record_time"] = [](RunConfig& c, auto k, auto v) {
      c.train.record_time = to_bool(k, v);
    };

    static const char* const kDirs[] = {"vt", "tv", "vv", "tt"};
    for (std::size_t d = 0; d < 4; ++d) {
      t[std::string("loss.lambda_") + kDirs[d]] = [d](RunConfig& c, auto k, auto v) {
        c.train.weights.lambda[d] = to_double(k, v);
      };
      t[std::string("loss.margin_") + kDirs[d]] = [d](RunConfig& c, auto k, auto v) {
        c.train.weights.margin[d] = to_double(k, v);
      };
    }
    t["loss.margin"] = [](RunConfig& c, auto k, auto v) {
      c.train.weights.set_margin(to_double(k, v));
    };
    t["loss.distance"] = [](RunConfig& c, auto, auto v) { c.train.distance = parse_distance(v); };
    t["loss.joint"] = [](RunConfig& c, auto k, auto v) { c.train.joint_loss = to_bool(k, v); };

    t["eval.distance"] = [](RunConfig& c, auto, auto v) { c.eval_distance = parse_distance(v); };
    return t;
  }();
  return table;
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  train.weights.validate();
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k;
    for (const auto& [name, setter] : setters()) k.insert(name);
    return k;
  }();
  return keys;
}

nn::DistanceKind parse_distance(std::string_view text) {
  if (text == "euclidean") return nn::DistanceKind::euclidean;
  if (text == "squared_euclidean") return nn::DistanceKind::squared_euclidean;
  if (text == "cosine") return nn::DistanceKind::cosine;
  throw Error(ErrorKind::Config, "distance must be euclidean, squared_euclidean or cosine, got '" +
                                     std::string(text) + "'");
}

const char* to_string(nn::DistanceKind kind) noexcept {
  switch (kind) {
    case nn::DistanceKind::euclidean: return "euclidean";
    case nn::DistanceKind::squared_euclidean: return "squared_euclidean";
    case nn::DistanceKind::cosine: return "cosine";
  }
  return "?";
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  const auto it = setters().find(key);
  if (it == setters().end()) {
    throw Error(ErrorKind::Config, "unknown config key '" + std::string(key) + "'");
  }
  it->second(config, key, value);
  config.assignments.emplace_back(std::string(key), std::string(value));
}

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw Error(ErrorKind::Config,
                "override must look like section.key=value, got '" + std::string(assignment) + "'");
  }
  apply_setting(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void parse_config(RunConfig& config, std::string_view text, const std::string& source) {
  std::string section;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorKind::Parse, where + ": unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "model" && section != "train" && section != "loss" && section != "eval") {
        throw Error(ErrorKind::Config, where + ": unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorKind::Parse, where + ": expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string full = key.find('.') == std::string_view::npos && !section.empty()
                                 ? section + "." + std::string(key)
                                 : std::string(key);
    try {
      apply_setting(config, full, trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(e.kind(), where + ": " + e.message());
    }
  }
}

void load_config_file(RunConfig& config, const std::filesystem::path& path) {
  const std::vector<char> bytes = io::read_file(path);
  parse_config(config, std::string_view(bytes.data(), bytes.size()), path.string());
}

}  // namespace srcv::cli
