#include "srcv/cli/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "srcv/cli/config.hpp"
#include "srcv/eval.hpp"
#include "srcv/gradcheck_suite.hpp"
#include "srcv/io/checkpoint.hpp"
#include "srcv/io/dataset.hpp"
#include "srcv/io/files.hpp"
#include "srcv/io/synth.hpp"
#include "srcv/train.hpp"

namespace srcv::cli {
namespace fs = std::filesystem;

namespace {

constexpr const char* kCheckpointFile = "checkpoint.json";
constexpr const char* kTrainLogFile = "train_log.csv";
constexpr const char* kMetricsFile = "metrics.csv";

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
};

RunConfig build_config(const GlobalOptions& g) {
  RunConfig config;
  if (!g.config_path.empty()) {
    try {
      load_config_file(config, g.config_path);
    } catch (const Error& e) {
      // An unreadable config file is a usage problem, not a data one.
      throw Error(e.kind() == ErrorKind::Io ? ErrorKind::Config : e.kind(), e.message());
    }
  }
  for (const auto& o : g.overrides) apply_override(config, o);
  if (g.seed) {
    config.train.seed = *g.seed;
    config.train.model.seed = *g.seed;
  }
  return config;
}

void write_text(const fs::path& path, const std::string& text) {
  io::write_file(path, std::span<const char>(text.data(), text.size()));
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
  io::SynthSpec spec;
  std::string out;
};

int cmd_synth(const GlobalOptions& g, SynthArgs args, std::ostream& out) {
  if (g.seed) args.spec.seed = *g.seed;
  args.spec.validate();
  const io::SynthDataset data = io::synth_dataset(args.spec);
  io::write_dataset(args.out, data);
  out << "wrote " << data.captions.size() << " items (" << args.spec.n_verb_classes << " verbs, "
      << args.spec.n_noun_classes << " nouns, " << data.features.modality_names().size()
      << " modalities x " << args.spec.segments << " segments x " << args.spec.feature_dim
      << ") to " << args.out << "\n";
  return kExitOk;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string out;
};

// Data-implied widths replace the configured ones; an explicit setting that
// disagrees with the data is an error.
void adopt_data_dims(const io::Dataset& data, RunConfig& config) {
  ModelConfig implied = config.train.model;
  io::fill_data_dims(data, implied);
  const std::pair<const char*, std::size_t ModelConfig::*> fields[] = {
      {"model.word_dim", &ModelConfig::word_dim},
      {"model.feature_dim", &ModelConfig::feature_dim},
      {"model.modalities", &ModelConfig::modalities}};
  for (const auto& [key, field] : fields) {
    const bool explicit_key = std::any_of(config.assignments.begin(), config.assignments.end(),
                                          [&](const auto& a) { return a.first == key; });
    if (explicit_key && config.train.model.*field != implied.*field) {
      throw Error(ErrorKind::Incompatible, std::string(key) + " is " +
                                               std::to_string(config.train.model.*field) +
                                               " but the dataset implies " +
                                               std::to_string(implied.*field));
    }
  }
  config.train.model = implied;
}

int cmd_train(const GlobalOptions& g, const TrainArgs& args, std::ostream& out,
              std::ostream& err) {
  RunConfig config = build_config(g);
  const io::Dataset data = io::load_dataset(args.data);
  adopt_data_dims(data, config);
  config.validate();
  const io::PreparedSet prepared = io::prepare_items(data, config.train.model);
  if (prepared.dropped_missing_role > 0) {
    err << "skipped " << prepared.dropped_missing_role << " captions without a noun or verb\n";
  }

  const auto started = std::chrono::steady_clock::now();
  const TrainResult result = train(prepared.items, config.train, [&](const EpochRecord& e) {
    char line[160];
    std::snprintf(line, sizeof line, "epoch %3zu  loss %.6f  vt %.4f  tv %.4f  vv %.4f  tt %.4f\n",
                  e.epoch, e.loss, e.terms[0], e.terms[1], e.terms[2], e.terms[3]);
    out << line;
  });
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  fs::create_directories(args.out);
  std::ostringstream log;
  result.log.write_csv(log);
  write_text(fs::path(args.out) / kTrainLogFile, log.str());
  const std::map<std::string, std::string> metadata = {
      {"distance", to_string(config.train.distance)},
      {"items", std::to_string(prepared.items.size())},
      {"epochs", std::to_string(config.train.epochs)},
      {"train_seed", std::to_string(config.train.seed)}};
  io::save_checkpoint(result.params, fs::path(args.out) / kCheckpointFile, metadata);
  out << "saved " << (fs::path(args.out) / kCheckpointFile).string() << "\n";
  char took[64];
  std::snprintf(took, sizeof took, "training took %.1f s\n", seconds);
  err << took;
  return kExitOk;
}

// --- eval / retrieve ---------------------------------------------------------

struct Loaded {
  ModelParams params;
  std::map<std::string, std::string> metadata;
  ModelConfig eval_config;  // checkpoint config with eval-time data modes applied
  nn::DistanceKind distance = nn::DistanceKind::euclidean;
  io::PreparedSet prepared;
};

// Model-section settings must agree with the checkpoint, except the two data
// preparation modes, which may be changed at evaluation time.
ModelConfig reconcile(const RunConfig& config, const ModelConfig& stored) {
  RunConfig probe;
  probe.train.model = stored;
  for (const auto& [key, value] : config.assignments) {
    if (!key.starts_with("model.")) continue;
    apply_setting(probe, key, value);
    ModelConfig lhs = probe.train.model;
    lhs.pooling = stored.pooling;
    lhs.video_tokens = stored.video_tokens;
    lhs.seed = stored.seed;
    if (!(lhs == stored)) {
      throw Error(ErrorKind::Incompatible,
                  key + "=" + value + " does not match the checkpoint's architecture");
    }
  }
  ModelConfig result = stored;
  result.pooling = probe.train.model.pooling;
  result.video_tokens = probe.train.model.video_tokens;
  return result;
}

Loaded load_for_eval(const GlobalOptions& g, const std::string& checkpoint,
                     const std::string& data_dir, const std::vector<std::string>& ablations) {
  const RunConfig config = build_config(g);
  Loaded l;
  l.params = io::load_checkpoint(checkpoint, &l.metadata);
  l.eval_config = reconcile(config, l.params.config);
  for (const auto& a : ablations) {
    if (a == "text-self-attention") {
      if (!l.params.config.text_self_attention) {
        throw Error(ErrorKind::Incompatible,
                    "--ablate text-self-attention: checkpoint was trained without it");
      }
    } else if (a == "single-space") {
      if (!l.params.config.single_space) {
        throw Error(ErrorKind::Incompatible,
                    "--ablate single-space: checkpoint was trained with separate spaces");
      }
    } else if (a == "max-pooling") {
      l.eval_config.pooling = Pooling::max;
    } else {
      throw Error(ErrorKind::Config, "unknown ablation '" + a + "'");
    }
  }
  if (config.eval_distance) {
    l.distance = *config.eval_distance;
  } else if (const auto it = l.metadata.find("distance"); it != l.metadata.end()) {
    l.distance = parse_distance(it->second);
  }
  const io::Dataset data = io::load_dataset(data_dir);
  l.prepared = io::prepare_items(data, l.eval_config);
  if (l.prepared.items.empty()) throw Error(ErrorKind::EmptyDataset, "no usable captions");
  return l;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::vector<std::string> ablate;
};

int cmd_eval(const GlobalOptions& g, const EvalArgs& args, std::ostream& out) {
  const Loaded l = load_for_eval(g, args.checkpoint, args.data, args.ablate);
  const MetricsReport report = evaluate_model(l.params, l.prepared.items, l.distance);
  print_metrics_table(out, report);
  const fs::path dir = args.out.empty() ? fs::path(args.checkpoint).parent_path() : fs::path(args.out);
  if (!dir.empty()) fs::create_directories(dir);
  std::ostringstream csv;
  write_metrics_csv(csv, report);
  write_text(dir / kMetricsFile, csv.str());
  return kExitOk;
}

struct RetrieveArgs {
  std::string checkpoint;
  std::string data;
  std::string query;
  std::string direction = "t2v";
  std::size_t k = 10;
};

int cmd_retrieve(const GlobalOptions& g, const RetrieveArgs& args, std::ostream& out) {
  const Loaded l = load_for_eval(g, args.checkpoint, args.data, {});
  const auto& items = l.prepared.items;
  const bool t2v = args.direction == "t2v";
  std::optional<std::size_t> q;
  for (std::size_t i = 0; i < items.size() && !q; ++i) {
    const Caption& c = items[i].caption;
    if (c.id == args.query || (!t2v && c.video_id == args.query)) q = i;
  }
  if (!q) throw Error(ErrorKind::Index, "unknown query id '" + args.query + "'");

  const Matrix scores = score_items(l.params, items, l.distance);
  std::vector<double> row(items.size());
  for (std::size_t j = 0; j < items.size(); ++j) row[j] = t2v ? scores(*q, j) : scores(j, *q);
  const std::vector<std::size_t> order = rank_gallery(row);
  const std::size_t k = std::min(args.k, order.size());
  out << "rank\tid\tscore\trelevance\n";
  char line[256];
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t j = order[r];
    const Caption& hit = items[j].caption;
    std::snprintf(line, sizeof line, "%zu\t%s\t%.6f\t%.4f\n", r + 1,
                  (t2v ? hit.video_id : hit.id).c_str(), row[j],
                  semantic_similarity(items[*q].caption, hit));
    out << line;
  }
  return kExitOk;
}

// --- gradcheck -----------------------------------------------------------------

struct GradcheckArgs {
  std::string dims;
  std::string fault = "none";
};

nn::FaultSite parse_fault(const std::string& name) {
  static const std::map<std::string, nn::FaultSite> sites = {
      {"none", nn::FaultSite::none},           {"matmul", nn::FaultSite::matmul},
      {"bias", nn::FaultSite::bias},           {"relu", nn::FaultSite::relu},
      {"softmax", nn::FaultSite::softmax},     {"layer_norm", nn::FaultSite::layer_norm},
      {"normalize", nn::FaultSite::normalize}, {"distance", nn::FaultSite::distance},
      {"mean_rows", nn::FaultSite::mean_rows}};
  const auto it = sites.find(name);
  if (it == sites.end()) throw Error(ErrorKind::Config, "unknown fault site '" + name + "'");
  return it->second;
}

int cmd_gradcheck(const GlobalOptions& g, const GradcheckArgs& args, std::ostream& out,
                  std::ostream& err) {
  const GradcheckDims dims = parse_dims(args.dims);
  const nn::FaultSite fault = parse_fault(args.fault);
  const auto started = std::chrono::steady_clock::now();
  const GradcheckReport report = run_gradcheck_suite(dims, g.seed.value_or(42), fault);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  char line[256];
  for (const auto& c : report.components) {
    std::snprintf(line, sizeof line, "%-28s %5zu coords %3zu refined  max rel err %.3e  %s\n",
                  c.component.c_str(), c.coordinates, c.refined, c.max_relative_error,
                  c.passed ? "ok" : "FAIL");
    out << line;
  }
  std::snprintf(line, sizeof line, "gradcheck finished in %.2f s\n", seconds);
  err << line;
  if (report.passed()) return kExitOk;
  for (const auto& c : report.components) {
    if (c.passed) continue;
    std::snprintf(line, sizeof line, "%s: %s analytic %.9g numeric %.9g\n", c.component.c_str(),
                  c.worst_parameter.c_str(), c.worst_analytic, c.worst_numeric);
    err << line;
  }
  return kExitGradcheck;
}

}  // namespace

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Index:
    case ErrorKind::DatasetTooSmall:
    case ErrorKind::EmptyDataset:
    case ErrorKind::TokenizationEmpty:
      return kExitUsage;
    case ErrorKind::Io:
    case ErrorKind::Parse:
    case ErrorKind::BadMagic:
    case ErrorKind::TruncatedPayload:
    case ErrorKind::DuplicateId:
    case ErrorKind::MissingAnnotation:
    case ErrorKind::NonFinite:
      return kExitIo;
    case ErrorKind::NonFiniteLoss:
    case ErrorKind::NonFiniteGradient:
      return kExitNumeric;
    case ErrorKind::Incompatible:
    case ErrorKind::VersionMismatch:
    case ErrorKind::Shape:
      return kExitIncompatible;
    case ErrorKind::TapeEmpty:
    case ErrorKind::EmptyMatrix:
      return kExitInternal;
  }
  return kExitInternal;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantic-role text-video retrieval toolkit", "srcv"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  app.add_option("--config", global.config_path, "Config file (key = value, [sections])");
  app.add_option("--seed", global.seed, "Seed for data synthesis, initialisation and training");
  app.add_option("--set", global.overrides, "Override a config key: section.key=value");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--verbs", synth.spec.n_verb_classes, "Verb classes");
  synth_cmd->add_option("--nouns", synth.spec.n_noun_classes, "Noun classes");
  synth_cmd->add_option("--items", synth.spec.n_items, "Caption/clip pairs");
  synth_cmd->add_option("--feature-dim", synth.spec.feature_dim, "Feature width per modality");
  synth_cmd->add_option("--segments", synth.spec.segments, "Temporal segments per clip");
  synth_cmd->add_option("--word-dim", synth.spec.word_dim, "Word vector width");
  synth_cmd->add_option("--noise", synth.spec.noise_sigma, "Feature noise sigma");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--data", train_args.data, "Dataset directory")->required();
  train_cmd->add_option("--out", train_args.out, "Output directory")->required();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "checkpoint.json")->required();
  eval_cmd->add_option("--data", eval_args.data, "Dataset directory")->required();
  eval_cmd->add_option("--out", eval_args.out, "Directory for metrics.csv");
  eval_cmd->add_option("--ablate", eval_args.ablate,
                       "text-self-attention | single-space | max-pooling");

  RetrieveArgs retrieve_args;
  auto* retrieve_cmd = app.add_subcommand("retrieve", "Rank the gallery for one query");
  retrieve_cmd->add_option("--checkpoint", retrieve_args.checkpoint, "checkpoint.json")->required();
  retrieve_cmd->add_option("--data", retrieve_args.data, "Dataset directory")->required();
  retrieve_cmd->add_option("--query", retrieve_args.query, "Caption id (t2v) or video id (v2t)")
      ->required();
  retrieve_cmd->add_option("--direction", retrieve_args.direction, "t2v or v2t")
      ->check(CLI::IsMember({"t2v", "v2t"}));
  retrieve_cmd->add_option("--k", retrieve_args.k, "Results to list");

  GradcheckArgs gradcheck_args;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  gradcheck_cmd->add_option("--dims", gradcheck_args.dims, "e.g. model_dim=8,heads=2");
  gradcheck_cmd->add_option("--inject-fault", gradcheck_args.fault,
                            "Corrupt one primitive's gradient (test hook)");

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.push_back("srcv");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth_cmd->parsed()) return cmd_synth(global, synth, out);
    if (train_cmd->parsed()) return cmd_train(global, train_args, out, err);
    if (eval_cmd->parsed()) return cmd_eval(global, eval_args, out);
    if (retrieve_cmd->parsed()) return cmd_retrieve(global, retrieve_args, out);
    if (gradcheck_cmd->parsed()) return cmd_gradcheck(global, gradcheck_args, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace srcv::cli
