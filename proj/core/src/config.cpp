#include "lossprobe/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "lossprobe/error.hpp"

namespace lossprobe::harness {

std::vector<std::size_t> default_lengths(PerturbKind kind) {
  if (kind == PerturbKind::noise) return {5, 10, 50, 100, 150, 200};
  return {1, 2, 5, 10, 35, 50, 70, 100, 150, 200};
}

void ExperimentConfig::validate() const {
  const auto bad = [](const std::string& why) { fail(Errc::invalid_argument, "config: " + why); };
  if (version != kConfigVersion) {
    bad(fmt::format("unsupported config version {} (expected {})", version, kConfigVersion));
  }
  if (lengths.empty()) bad("lengths must not be empty");
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] == 0) bad("lengths must be positive");
    if (i > 0 && lengths[i] <= lengths[i - 1]) bad("lengths must be strictly increasing");
    if (start + lengths[i] > sequence_length) {
      bad(fmt::format("start {} + length {} exceeds sequence_length {}", start, lengths[i],
                      sequence_length));
    }
  }
  if (start < 1) bad("start must be >= 1");
  if (workers == 0) bad("workers must be >= 1");
  if (kind == PerturbKind::noise) {
    NoiseTokenModel{noise_mode, noise_vocab, 0}.validate();
  } else if (segments_per_window == 0) {
    bad("segments_per_window must be >= 1");
  }
  detector.validate();
  if (scorer.kind == scoring::ScorerKind::external && scorer.command.empty()) {
    bad("external scorer needs a command");
  }
  if (scorer.kind == scoring::ScorerKind::builtin_ngram && scorer.model.empty() && !toy) {
    bad("builtin-ngram scorer needs a model path or a toy block");
  }
  if (!samples && !toy) bad("either samples or a toy block is required");
  if (toy) {
    toy->corpus.validate();
    if (toy->heldout == 0) bad("toy.heldout must be positive");
  }
  for (const auto& f : formats) {
    if (f != "csv" && f != "json" && f != "svg") bad(fmt::format("unknown report format '{}'", f));
  }
}

namespace {

template <typename T>
void read(const YAML::Node& node, const char* key, T& out) {
  if (node && node[key]) out = node[key].as<T>();
}

void check_keys(const YAML::Node& node, const std::string& where,
                std::initializer_list<std::string_view> allowed) {
  if (!node.IsMap()) fail(Errc::parse_error, fmt::format("config: '{}' must be a mapping", where));
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      fail(Errc::parse_error, fmt::format("config: unknown key '{}' in '{}'", key, where));
    }
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  if (path.is_absolute() || base.empty()) return path;
  return base / path;
}

scoring::ScorerKind parse_scorer_kind(const std::string& text) {
  if (text == "builtin-ngram") return scoring::ScorerKind::builtin_ngram;
  if (text == "external") return scoring::ScorerKind::external;
  fail(Errc::parse_error, fmt::format("unknown scorer kind '{}'", text));
}

}  // namespace

ExperimentConfig parse_config(const std::string& yaml_text, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  try {
    const YAML::Node root = YAML::Load(yaml_text);
    if (!root || !root.IsMap()) fail(Errc::parse_error, "config must be a YAML mapping");
    if (!root["version"]) fail(Errc::parse_error, "config is missing 'version'");
    check_keys(root, "<root>",
               {"version", "experiment", "noise", "shuffle", "analysis", "scorer", "samples", "toy",
                "report"});
    cfg.version = root["version"].as<int>();

    if (const auto e = root["experiment"]) {
      check_keys(e, "experiment",
                 {"kind", "lengths", "start", "sequence_length", "master_seed", "workers"});
      if (e["kind"]) {
        cfg.kind = parse_perturb_kind(e["kind"].as<std::string>());
        cfg.lengths = default_lengths(cfg.kind);
      }
      read(e, "lengths", cfg.lengths);
      read(e, "start", cfg.start);
      read(e, "sequence_length", cfg.sequence_length);
      read(e, "master_seed", cfg.master_seed);
      read(e, "workers", cfg.workers);
    }
    if (const auto n = root["noise"]) {
      check_keys(n, "noise", {"mode", "vocab"});
      if (n["mode"]) cfg.noise_mode = parse_noise_mode(n["mode"].as<std::string>());
      read(n, "vocab", cfg.noise_vocab);
    }
    if (const auto s = root["shuffle"]) {
      check_keys(s, "shuffle", {"segments_per_window"});
      read(s, "segments_per_window", cfg.segments_per_window);
    }
    if (const auto a = root["analysis"]) {
      check_keys(a, "analysis", {"smooth_len", "run_len", "zero_tol", "alternative"});
      read(a, "smooth_len", cfg.detector.smooth_len);
      read(a, "run_len", cfg.detector.run_len);
      read(a, "zero_tol", cfg.detector.zero_tol);
      if (a["alternative"]) cfg.alternative = stats::parse_alternative(a["alternative"].as<std::string>());
    }
    if (const auto s = root["scorer"]) {
      check_keys(s, "scorer",
                 {"kind", "model", "command", "args", "handshake_timeout_ms", "request_timeout_ms"});
      if (s["kind"]) cfg.scorer.kind = parse_scorer_kind(s["kind"].as<std::string>());
      if (s["model"]) cfg.scorer.model = resolve(base_dir, s["model"].as<std::string>());
      read(s, "command", cfg.scorer.command);
      read(s, "args", cfg.scorer.args);
      if (s["handshake_timeout_ms"]) {
        cfg.scorer.handshake_timeout = std::chrono::milliseconds(s["handshake_timeout_ms"].as<long>());
      }
      if (s["request_timeout_ms"]) {
        cfg.scorer.request_timeout = std::chrono::milliseconds(s["request_timeout_ms"].as<long>());
      }
    }
    if (root["samples"]) cfg.samples = resolve(base_dir, root["samples"].as<std::string>());
    if (const auto t = root["toy"]) {
      check_keys(t, "toy", {"corpus", "order", "alpha", "heldout"});
      ToySetup toy;
      if (const auto c = t["corpus"]) {
        check_keys(c, "toy.corpus",
                   {"music_vocab_size", "noise_vocab", "motif_len", "motif_count", "repeats_per_seq",
                    "mutation_rate", "noise_mix_fraction", "n_sequences", "seed"});
        read(c, "music_vocab_size", toy.corpus.music_vocab_size);
        read(c, "noise_vocab", toy.corpus.noise_vocab);
        read(c, "motif_len", toy.corpus.motif_len);
        read(c, "motif_count", toy.corpus.motif_count);
        read(c, "repeats_per_seq", toy.corpus.repeats_per_seq);
        read(c, "mutation_rate", toy.corpus.mutation_rate);
        read(c, "noise_mix_fraction", toy.corpus.noise_mix_fraction);
        read(c, "n_sequences", toy.corpus.n_sequences);
        read(c, "seed", toy.corpus.seed);
      }
      read(t, "order", toy.order);
      read(t, "alpha", toy.alpha);
      read(t, "heldout", toy.heldout);
      cfg.toy = toy;
    }
    if (const auto r = root["report"]) {
      check_keys(r, "report", {"formats"});
      read(r, "formats", cfg.formats);
    }
  } catch (const YAML::Exception& e) {
    fail(Errc::parse_error, fmt::format("config: {}", e.what()));
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_error, fmt::format("cannot open config '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["version"] = cfg.version;
  j["experiment"] = {{"kind", to_string(cfg.kind)},
                     {"lengths", cfg.lengths},
                     {"start", cfg.start},
                     {"sequence_length", cfg.sequence_length},
                     {"master_seed", cfg.master_seed},
                     {"workers", cfg.workers}};
  j["noise"] = {{"mode", to_string(cfg.noise_mode)}, {"vocab", cfg.noise_vocab}};
  j["shuffle"] = {{"segments_per_window", cfg.segments_per_window}};
  j["analysis"] = analysis::to_json(cfg.detector);
  j["analysis"]["alternative"] = stats::to_string(cfg.alternative);
  nlohmann::json scorer = {{"kind", scoring::to_string(cfg.scorer.kind)},
                           {"handshake_timeout_ms", cfg.scorer.handshake_timeout.count()},
                           {"request_timeout_ms", cfg.scorer.request_timeout.count()}};
  if (!cfg.scorer.model.empty()) scorer["model"] = cfg.scorer.model.string();
  if (!cfg.scorer.command.empty()) {
    scorer["command"] = cfg.scorer.command;
    scorer["args"] = cfg.scorer.args;
  }
  j["scorer"] = scorer;
  if (cfg.samples) j["samples"] = cfg.samples->string();
  if (cfg.toy) {
    j["toy"] = {{"corpus", toy::to_json(cfg.toy->corpus)},
                {"order", cfg.toy->order},
                {"alpha", cfg.toy->alpha},
                {"heldout", cfg.toy->heldout}};
  }
  j["report"] = {{"formats", cfg.formats}};
  return j;
}

}  // namespace lossprobe::harness
