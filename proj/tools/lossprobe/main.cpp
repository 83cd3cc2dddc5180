// lossprobe: perturbation experiments on per-token model loss.
//
// Exit codes: 0 success, 1 validation error (bad flags, missing or malformed
// files), 2 runtime/backend failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "lossprobe/analysis.hpp"
#include "lossprobe/error.hpp"
#include "lossprobe/harness.hpp"
#include "lossprobe/perturb.hpp"
#include "lossprobe/scoring.hpp"
#include "lossprobe/signal.hpp"
#include "lossprobe/toymodel.hpp"

namespace fs = std::filesystem;
using namespace lossprobe;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

constexpr const char* kConfigEnv = "LOSSPROBE_CONFIG";

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_error, fmt::format("cannot open '{}'", path.string()));
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(Errc::io_error, fmt::format("cannot write '{}'", path.string()));
  return out;
}

std::set<std::string> split_formats(const std::vector<std::string>& items) {
  std::set<std::string> out;
  for (const auto& item : items) {
    std::size_t pos = 0;
    while (pos <= item.size()) {
      const auto comma = item.find(',', pos);
      const auto part = item.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      if (!part.empty()) out.insert(part);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  return out;
}

// ---- gen-corpus -------------------------------------------------------------

struct GenCorpusArgs {
  toy::CorpusConfig cfg;
  std::size_t first_index = 0;
  fs::path out;
};

void add_gen_corpus(CLI::App& app, GenCorpusArgs& a) {
  auto* sub = app.add_subcommand("gen-corpus", "Generate a synthetic motif corpus (JSON Lines)");
  sub->add_option("--out", a.out, "Output token file (.jsonl)")->required();
  sub->add_option("--music-vocab", a.cfg.music_vocab_size, "Music vocabulary size")
      ->capture_default_str();
  sub->add_option("--noise-vocab", a.cfg.noise_vocab, "Noise token ids (after the music ids)")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_option("--motif-len", a.cfg.motif_len, "Tokens per motif")->capture_default_str();
  sub->add_option("--motif-count", a.cfg.motif_count, "Motifs in the bank")->capture_default_str();
  sub->add_option("--repeats", a.cfg.repeats_per_seq, "Motif repetitions per sequence")
      ->capture_default_str();
  sub->add_option("--mutation-rate", a.cfg.mutation_rate, "Point-mutation probability")
      ->capture_default_str();
  sub->add_option("--noise-mix", a.cfg.noise_mix_fraction,
                  "Fraction of sequences with an embedded noise run")
      ->capture_default_str();
  sub->add_option("--n", a.cfg.n_sequences, "Number of sequences")->capture_default_str();
  sub->add_option("--seed", a.cfg.seed, "Corpus seed")->capture_default_str();
  sub->add_option("--first-index", a.first_index,
                  "Index of the first sequence (held-out sets start after the training set)")
      ->capture_default_str();
}

std::string run_gen_corpus(const GenCorpusArgs& a) {
  const auto corpus = toy::gen_corpus(a.cfg, a.first_index);
  write_sequences(a.out, corpus);
  return fmt::format("wrote {} sequences of {} tokens to {}", corpus.size(),
                     a.cfg.sequence_length(), a.out.string());
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  fs::path corpus;
  std::size_t order = 4;
  double alpha = 0.1;
  fs::path out;
};

void add_train(CLI::App& app, TrainArgs& a) {
  auto* sub = app.add_subcommand("train", "Train a Laplace-smoothed n-gram scorer");
  sub->add_option("--corpus", a.corpus, "Training token file (.jsonl)")->required();
  sub->add_option("--order", a.order, "Context length in tokens")->capture_default_str();
  sub->add_option("--alpha", a.alpha, "Laplace smoothing constant")->capture_default_str();
  sub->add_option("--out", a.out, "Output model file (.json)")->required();
}

std::string run_train(const TrainArgs& a) {
  const auto corpus = read_sequences(a.corpus);
  const auto model = toy::train_ngram(corpus, a.order, a.alpha);
  model.save(a.out);
  return fmt::format("trained {} on {} sequences ({} contexts) -> {}", model.name(),
                     corpus.size(), model.contexts().size(), a.out.string());
}

// ---- perturb ----------------------------------------------------------------

struct PerturbArgs {
  fs::path in;
  fs::path out;
  std::optional<fs::path> spec;
  std::optional<fs::path> spec_out;
  std::string kind = "noise";
  std::size_t start = 250;
  std::size_t length = 0;
  std::uint64_t seed = 0;
  std::string noise_mode = "constant";
  std::vector<TokenId> noise_vocab;
  std::size_t segment_len = 1;
};

void add_perturb(CLI::App& app, PerturbArgs& a) {
  auto* sub = app.add_subcommand("perturb", "Inject noise tokens or shuffle segments");
  sub->add_option("--in", a.in, "Input token file (.jsonl)")->required();
  sub->add_option("--out", a.out, "Output token file (.jsonl)")->required();
  sub->add_option("--spec", a.spec, "Read the perturbation from a JSON spec instead of flags");
  sub->add_option("--spec-out", a.spec_out, "Write the applied perturbation spec as JSON");
  sub->add_option("--kind", a.kind, "noise | shuffle")
      ->check(CLI::IsMember({"noise", "shuffle"}))
      ->capture_default_str();
  sub->add_option("--start", a.start, "Window start (0-based token index)")->capture_default_str();
  sub->add_option("--len", a.length, "Window length in tokens")->capture_default_str();
  sub->add_option("--seed", a.seed, "Seed for iid noise or the shuffle permutation")
      ->capture_default_str();
  sub->add_option("--noise-mode", a.noise_mode, "constant | iid-uniform")
      ->check(CLI::IsMember({"constant", "iid-uniform"}))
      ->capture_default_str();
  sub->add_option("--noise-vocab", a.noise_vocab, "Noise token ids")->delimiter(',');
  sub->add_option("--segment-len", a.segment_len, "Shuffle segment length")->capture_default_str();
}

std::string run_perturb(const PerturbArgs& a) {
  PerturbationSpec spec;
  if (a.spec) {
    auto in = open_in(*a.spec);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::parse_error, fmt::format("'{}': {}", a.spec->string(), e.what()));
    }
    spec = perturbation_from_json(j);
  } else {
    spec.kind = parse_perturb_kind(a.kind);
    spec.window = {a.start, a.length};
    spec.seed = a.seed;
    spec.noise_mode = parse_noise_mode(a.noise_mode);
    spec.noise_vocab = a.noise_vocab;
    spec.segment_len = a.segment_len;
  }
  const auto seqs = read_sequences(a.in);
  std::vector<TokenSequence> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back(apply_perturbation(s, spec));
  write_sequences(a.out, out);
  if (a.spec_out) open_out(*a.spec_out) << to_json(spec).dump(2) << '\n';
  return fmt::format("perturbed {} sequences ({} window [{}, {})) -> {}", out.size(),
                     to_string(spec.kind), spec.window.start, spec.window.end(), a.out.string());
}

// ---- score ------------------------------------------------------------------

struct ScorerArgs {
  std::optional<fs::path> model;
  std::optional<std::string> external;
  std::vector<std::string> external_args;
  long handshake_timeout_ms = 30'000;
  long request_timeout_ms = 0;
};

void add_scorer_flags(CLI::App* sub, ScorerArgs& a) {
  auto* model = sub->add_option("--model", a.model, "Builtin n-gram model file (.json)");
  auto* ext = sub->add_option("--external", a.external, "External adapter program");
  model->excludes(ext);
  sub->add_option("--external-arg", a.external_args, "Argument passed to the adapter (repeatable)");
  sub->add_option("--handshake-timeout-ms", a.handshake_timeout_ms, "Adapter handshake timeout")
      ->capture_default_str();
  sub->add_option("--request-timeout-ms", a.request_timeout_ms,
                  "Adapter per-request timeout (0 = none)")
      ->capture_default_str();
}

std::unique_ptr<scoring::Scorer> open_scorer(const ScorerArgs& a) {
  if (a.model) {
    auto model = std::make_shared<const toy::NGramModel>(toy::NGramModel::load(*a.model));
    return std::make_unique<scoring::BuiltinNgramScorer>(model, a.model->string());
  }
  if (a.external) {
    return scoring::open_external(*a.external, a.external_args,
                                  {std::chrono::milliseconds(a.handshake_timeout_ms),
                                   std::chrono::milliseconds(a.request_timeout_ms)});
  }
  fail(Errc::invalid_argument, "one of --model or --external is required");
}

struct ScoreArgs {
  ScorerArgs scorer;
  fs::path in;
  fs::path out;
};

void add_score(CLI::App& app, ScoreArgs& a) {
  auto* sub = app.add_subcommand("score", "Per-token NLL traces for every sequence in a file");
  add_scorer_flags(sub, a.scorer);
  sub->add_option("--in", a.in, "Input token file (.jsonl)")->required();
  sub->add_option("--out", a.out, "Output trace CSV (sequence_id,scorer_id,index,nll)")
      ->required();
}

std::string run_score(const ScoreArgs& a) {
  const auto seqs = read_sequences(a.in);
  auto scorer = open_scorer(a.scorer);
  std::vector<LossTrace> traces;
  double total = 0.0;
  for (const auto& s : seqs) {
    traces.push_back(scoring::score_sequence(*scorer, s));
    total += traces.back().total();
  }
  auto out = open_out(a.out);
  analysis::write_trace_csv(out, traces);
  return fmt::format("scored {} sequences with {} (total NLL {:.6f} nats) -> {}", traces.size(),
                     scorer->name(), total, a.out.string());
}

// ---- conform ----------------------------------------------------------------

struct ConformArgs {
  ScorerArgs scorer;
  fs::path in;
};

void add_conform(CLI::App& app, ConformArgs& a) {
  auto* sub = app.add_subcommand(
      "conform", "Check a scorer for determinism, length, finiteness and prefix stability");
  add_scorer_flags(sub, a.scorer);
  sub->add_option("--in", a.in, "Token file used as probe sequences (.jsonl)")->required();
}

int run_conform(const ConformArgs& a, std::string& summary) {
  const auto seqs = read_sequences(a.in);
  auto scorer = open_scorer(a.scorer);
  const auto report = scoring::check_conformance(*scorer, seqs);
  for (const auto& f : report.failures) std::cerr << "conformance: " << f << '\n';
  summary = fmt::format("{}: {} sequences checked, {} failures", scorer->name(),
                        report.sequences_checked, report.failures.size());
  return report.passed() ? kExitOk : kExitRuntime;
}

// ---- diff -------------------------------------------------------------------

struct DiffArgs {
  fs::path original;
  fs::path perturbed;
  std::optional<std::string> id;
  std::size_t start = 250;
  std::size_t length = 0;
  std::optional<fs::path> out;
};

void add_diff(CLI::App& app, DiffArgs& a) {
  auto* sub = app.add_subcommand("diff", "Token-wise loss difference of two traces");
  sub->add_option("--original", a.original, "Trace CSV of the original sequence")->required();
  sub->add_option("--perturbed", a.perturbed, "Trace CSV of the perturbed sequence")->required();
  sub->add_option("--id", a.id, "Sequence id to select when a file holds several traces");
  sub->add_option("--start", a.start, "Perturbation window start")->capture_default_str();
  sub->add_option("--len", a.length, "Perturbation window length")->capture_default_str();
  sub->add_option("--out", a.out, "Output diff CSV (index,delta_nll)");
}

LossTrace pick_trace(const fs::path& path, const std::optional<std::string>& id) {
  auto in = open_in(path);
  const auto traces = analysis::read_trace_csv(in);
  if (id) {
    for (const auto& t : traces) {
      if (t.sequence_id == *id) return t;
    }
    fail(Errc::invalid_argument, fmt::format("'{}' has no trace for '{}'", path.string(), *id));
  }
  if (traces.size() != 1) {
    fail(Errc::invalid_argument,
         fmt::format("'{}' holds {} traces; select one with --id", path.string(), traces.size()));
  }
  return traces.front();
}

std::string run_diff(const DiffArgs& a) {
  const auto original = pick_trace(a.original, a.id);
  const auto perturbed = pick_trace(a.perturbed, a.id);
  const auto diff = analysis::token_diff(original, perturbed, {a.start, a.length});
  if (a.out) {
    auto out = open_out(*a.out);
    analysis::write_diff_csv(out, diff.values);
  }
  return fmt::format("global delta NLL {} nats over {} tokens", analysis::global_diff(diff),
                     diff.size());
}

// ---- regions ----------------------------------------------------------------

struct RegionsArgs {
  fs::path diff;
  std::size_t start = 250;
  std::size_t length = 0;
  analysis::DetectorParams params;
  std::optional<fs::path> out;
};

void add_regions(CLI::App& app, RegionsArgs& a) {
  auto* sub = app.add_subcommand("regions", "Detect peak / assimilation / recovery regions");
  sub->add_option("--diff", a.diff, "Diff CSV (index,delta_nll)")->required();
  sub->add_option("--start", a.start, "Perturbation window start")->capture_default_str();
  sub->add_option("--len", a.length, "Perturbation window length")->required();
  sub->add_option("--smooth-len", a.params.smooth_len, "Moving-average width (odd)")
      ->capture_default_str();
  sub->add_option("--run-len", a.params.run_len, "Consecutive tokens needed for a crossing")
      ->capture_default_str();
  sub->add_option("--zero-tol", a.params.zero_tol, "Tolerance band around zero (nats)")
      ->capture_default_str();
  sub->add_option("--out", a.out, "Output JSON (stdout when omitted)");
}

std::string run_regions(const RegionsArgs& a) {
  auto in = open_in(a.diff);
  const auto values = analysis::read_diff_csv(in);
  const PerturbWindow window{a.start, a.length};
  const auto seg = analysis::detect_regions(values, window, a.params);
  nlohmann::json j = {{"window", {{"start", window.start}, {"length", window.length}}},
                      {"regions", analysis::to_json(seg)},
                      {"parameters", analysis::to_json(a.params)},
                      {"rule", analysis::describe_rule(a.params)}};
  if (!seg.peak.empty()) {
    const auto p = analysis::peak_stats(values, window, seg);
    j["peak"] = {{"height", p.height}, {"latency", p.latency}};
  } else {
    j["peak"] = nullptr;
  }
  if (a.out) {
    open_out(*a.out) << j.dump(2) << '\n';
  } else {
    std::cout << j.dump(2) << '\n';
  }
  return fmt::format("peak [{}, {}), assimilation [{}, {}), recovery [{}, {})", seg.peak.start,
                     seg.peak.end, seg.assimilation.start, seg.assimilation.end,
                     seg.recovery.start, seg.recovery.end);
}

// ---- sweep ------------------------------------------------------------------

struct SweepArgs {
  std::optional<fs::path> config;
  fs::path out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::vector<std::size_t> lengths;
  std::vector<std::string> formats;
  std::optional<fs::path> samples;
  std::optional<fs::path> model;
};

void add_sweep(CLI::App& app, SweepArgs& a) {
  auto* sub = app.add_subcommand("sweep", "Run a full perturbation-length sweep from a config");
  sub->add_option("--config", a.config,
                  fmt::format("Experiment config (YAML); defaults to ${}", kConfigEnv));
  sub->add_option("--out", a.out, "Report output directory")->required();
  sub->add_option("--seed", a.seed, "Override experiment.master_seed");
  sub->add_option("--workers", a.workers, "Override experiment.workers");
  sub->add_option("--lengths", a.lengths, "Override experiment.lengths")->delimiter(',');
  sub->add_option("--formats", a.formats, "Override report.formats (csv,json,svg)")
      ->delimiter(',');
  sub->add_option("--samples", a.samples, "Override samples (JSON Lines token file)");
  sub->add_option("--model", a.model, "Override scorer.model (builtin n-gram)");
}

std::string run_sweep_cmd(const SweepArgs& a) {
  fs::path config_path;
  if (a.config) {
    config_path = *a.config;
  } else if (const char* env = std::getenv(kConfigEnv); env && *env) {
    config_path = env;
  } else {
    fail(Errc::invalid_argument, fmt::format("--config is required (or set ${})", kConfigEnv));
  }
  auto cfg = harness::load_config(config_path);
  if (a.seed) cfg.master_seed = *a.seed;
  if (a.workers) cfg.workers = *a.workers;
  if (!a.lengths.empty()) cfg.lengths = a.lengths;
  if (!a.formats.empty()) {
    const auto f = split_formats(a.formats);
    cfg.formats.assign(f.begin(), f.end());
  }
  if (a.samples) cfg.samples = *a.samples;
  if (a.model) {
    cfg.scorer.kind = scoring::ScorerKind::builtin_ngram;
    cfg.scorer.model = *a.model;
  }
  cfg.validate();

  const auto prep = harness::prepare_experiment(cfg);
  const auto report = harness::run_sweep(cfg, prep.samples, prep.factory);
  const auto written = harness::emit_report(
      report, a.out, std::set<std::string>(cfg.formats.begin(), cfg.formats.end()));

  std::string summary = fmt::format("{} rows, {} skipped, {} failed; {} files in {}",
                                    report.rows.size(), report.skipped.size(),
                                    report.failed.size(), written.size(), a.out.string());
  if (report.aggregated.computable) {
    summary += fmt::format("; aggregated pearson r={:.4f} (p={:.3g}), spearman rho={:.4f} (p={:.3g})",
                           report.aggregated.pearson->statistic, report.aggregated.pearson->p_value,
                           report.aggregated.spearman->statistic,
                           report.aggregated.spearman->p_value);
  } else {
    summary += fmt::format("; aggregated correlation not computable: {}", report.aggregated.reason);
  }
  return summary;
}

// ---- report / merge ---------------------------------------------------------

struct ReportArgs {
  fs::path report;
  fs::path out;
  std::vector<std::string> formats;
};

void add_report(CLI::App& app, ReportArgs& a) {
  auto* sub = app.add_subcommand("report", "Re-emit a sweep report (CSV, JSON, SVG charts)");
  sub->add_option("--report", a.report, "Sweep report JSON")->required();
  sub->add_option("--out", a.out, "Output directory")->required();
  sub->add_option("--formats", a.formats, "Formats to emit (csv,json,svg)")
      ->delimiter(',')
      ->default_str("svg");
}

std::string run_report(const ReportArgs& a) {
  const auto report = harness::load_report(a.report);
  auto formats = split_formats(a.formats);
  if (formats.empty()) formats = {"svg"};
  const auto written = harness::emit_report(report, a.out, formats);
  return fmt::format("wrote {} files to {}", written.size(), a.out.string());
}

struct MergeArgs {
  std::vector<fs::path> reports;
  fs::path out;
  std::vector<std::string> formats;
};

void add_merge(CLI::App& app, MergeArgs& a) {
  auto* sub = app.add_subcommand("merge", "Pool several sweep reports and recompute statistics");
  sub->add_option("--report", a.reports, "Sweep report JSON (repeatable)")->required();
  sub->add_option("--out", a.out, "Output directory")->required();
  sub->add_option("--formats", a.formats, "Formats to emit (csv,json,svg)")
      ->delimiter(',')
      ->default_str("csv,json");
}

std::string run_merge(const MergeArgs& a) {
  std::vector<harness::SweepReport> reports;
  for (const auto& p : a.reports) reports.push_back(harness::load_report(p));
  const auto merged = harness::merge_reports(reports);
  auto formats = split_formats(a.formats);
  if (formats.empty()) formats = {"csv", "json"};
  const auto written = harness::emit_report(merged, a.out, formats);
  return fmt::format("merged {} reports ({} rows); wrote {} files to {}", reports.size(),
                     merged.rows.size(), written.size(), a.out.string());
}

// ---- audio-inject -----------------------------------------------------------

struct AudioArgs {
  fs::path in;
  fs::path out;
  std::size_t start_token = 250;
  std::size_t len_tokens = 0;
  double frame_rate = 50.0;
  double offset_db = -20.0;
  std::uint64_t seed = 0;
  bool strict = false;
  std::string encoding = "float32";
  std::string shape = "gaussian";
};

void add_audio(CLI::App& app, AudioArgs& a) {
  auto* sub = app.add_subcommand("audio-inject",
                                 "Splice loudness-matched white noise into a 32 kHz mono WAV");
  sub->add_option("--in", a.in, "Input WAV (mono, 32 kHz, PCM16 or float32)")->required();
  sub->add_option("--out", a.out, "Output WAV")->required();
  sub->add_option("--start-token", a.start_token, "Injection point in tokens")
      ->capture_default_str();
  sub->add_option("--len-tokens", a.len_tokens, "Noise length in tokens")->required();
  sub->add_option("--frame-rate", a.frame_rate, "Tokens per second")->capture_default_str();
  sub->add_option("--offset-db", a.offset_db, "Noise level relative to the input RMS (dB)")
      ->capture_default_str();
  sub->add_option("--seed", a.seed, "Noise seed")->capture_default_str();
  sub->add_flag("--strict", a.strict, "Reject offsets outside [-30, -12] dB");
  sub->add_option("--encoding", a.encoding, "pcm16 | float32")
      ->check(CLI::IsMember({"pcm16", "float32"}))
      ->capture_default_str();
  sub->add_option("--shape", a.shape, "gaussian | uniform")
      ->check(CLI::IsMember({"gaussian", "uniform"}))
      ->capture_default_str();
}

std::string run_audio(const AudioArgs& a) {
  const auto audio = signal::read_wav(a.in);
  const auto start = signal::tokens_to_samples(a.start_token, a.frame_rate, audio.sample_rate_hz);
  const auto count = signal::tokens_to_samples(a.len_tokens, a.frame_rate, audio.sample_rate_hz);
  if (count == 0) fail(Errc::invalid_argument, "--len-tokens must cover at least one sample");
  const auto noise = signal::white_noise(
      count, a.seed, audio.sample_rate_hz,
      a.shape == "gaussian" ? signal::NoiseShape::gaussian : signal::NoiseShape::uniform);
  const auto matched = signal::match_loudness(noise, audio, {a.offset_db}, a.strict);
  for (const auto& w : matched.warnings) spdlog::warn("{}", w);
  const auto out = signal::splice(audio, start, matched.signal);
  signal::write_wav(a.out, out,
                    a.encoding == "pcm16" ? signal::WavEncoding::pcm16 : signal::WavEncoding::float32);
  return fmt::format("spliced {} noise samples at sample {} (gain {:.6g}, {} clipped) -> {}", count,
                     start, matched.gain, matched.clipped_samples, a.out.string());
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("lossprobe"));
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"lossprobe: how per-token model loss reacts to controlled perturbations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", harness::toolkit_version());

  GenCorpusArgs gen;
  TrainArgs train;
  PerturbArgs perturb;
  ScoreArgs score;
  ConformArgs conform;
  DiffArgs diff;
  RegionsArgs regions;
  SweepArgs sweep;
  ReportArgs report;
  MergeArgs merge;
  AudioArgs audio;
  add_gen_corpus(app, gen);
  add_train(app, train);
  add_perturb(app, perturb);
  add_score(app, score);
  add_conform(app, conform);
  add_diff(app, diff);
  add_regions(app, regions);
  add_sweep(app, sweep);
  add_report(app, report);
  add_merge(app, merge);
  add_audio(app, audio);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    std::string summary;
    int code = kExitOk;
    const auto& name = app.get_subcommands().front()->get_name();
    if (name == "gen-corpus") summary = run_gen_corpus(gen);
    else if (name == "train") summary = run_train(train);
    else if (name == "perturb") summary = run_perturb(perturb);
    else if (name == "score") summary = run_score(score);
    else if (name == "conform") code = run_conform(conform, summary);
    else if (name == "diff") summary = run_diff(diff);
    else if (name == "regions") summary = run_regions(regions);
    else if (name == "sweep") summary = run_sweep_cmd(sweep);
    else if (name == "report") summary = run_report(report);
    else if (name == "merge") summary = run_merge(merge);
    else if (name == "audio-inject") summary = run_audio(audio);
    (code == kExitOk ? std::cout : std::cerr) << summary << '\n';
    return code;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return e.is_validation() ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
