#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lossprobe/analysis.hpp"
#include "lossprobe/config.hpp"
#include "lossprobe/scoring.hpp"
#include "lossprobe/sequence.hpp"
#include "lossprobe/stats.hpp"

namespace lossprobe::harness {

std::string toolkit_version();

using ScorerFactory = std::function<std::unique_ptr<scoring::Scorer>()>;

struct SweepRow {
  std::string sample_id;
  std::size_t length = 0;
  std::uint64_t seed = 0;
  double delta_nll = 0.0;
  double original_nll = 0.0;
  double perturbed_nll = 0.0;
  std::optional<analysis::PeakStats> peak;
  analysis::RegionSegmentation regions;
};

struct SkipRecord {
  std::string sample_id;
  std::size_t length = 0;
  std::string reason;
};

struct FailureRecord {
  std::string sample_id;
  std::size_t length = 0;
  std::string error;
};

struct LengthAggregate {
  std::size_t length = 0;
  std::size_t n = 0;
  double mean = 0.0;
  // Sample standard deviation (n - 1 denominator); 0 when n < 2.
  double std = 0.0;
  // Token-wise mean of the per-sample diffs, and the regions detected on it.
  std::vector<double> mean_delta_trace;
  analysis::RegionSegmentation mean_regions;
  std::optional<analysis::PeakStats> mean_peak;
};

enum class CorrelationMode { large_sample, aggregated };
std::string to_string(CorrelationMode mode);

struct CorrelationBlock {
  CorrelationMode mode = CorrelationMode::aggregated;
  bool computable = false;
  std::string reason;
  std::size_t n_points = 0;
  std::optional<stats::StatResult> pearson;
  std::optional<stats::StatResult> spearman;
  std::optional<stats::Regression> ols;
};

struct SweepReport {
  std::string kind = "noise";
  std::size_t window_start = 0;
  std::vector<SweepRow> rows;
  std::vector<SkipRecord> skipped;
  std::vector<FailureRecord> failed;
  std::vector<LengthAggregate> aggregates;
  CorrelationBlock large_sample;
  CorrelationBlock aggregated;
  nlohmann::json provenance;
};

// Seed for the perturbation of (sample, length):
//   derive_seed(derive_seed(master, sample_id), "length", length)
std::uint64_t perturbation_seed(std::uint64_t master, const std::string& sample_id,
                                std::size_t length);

PerturbationSpec make_perturbation(const ExperimentConfig& cfg, const std::string& sample_id,
                                   std::size_t length);

// Runs every (sample, length) pair. Samples longer than cfg.sequence_length
// are truncated, shorter ones (or with an incompatible vocabulary) skipped.
// Scorer failures fail individual rows; the sweep only aborts
// (all_samples_failed) when nothing succeeded and something failed.
SweepReport run_sweep(const ExperimentConfig& cfg, std::span<const TokenSequence> samples,
                      const ScorerFactory& factory);

// Pearson, Spearman and OLS over (length, delta) points. Errors:
// too_few_points, constant_input.
CorrelationBlock correlation_block(std::span<const SweepRow> rows,
                                   std::span<const LengthAggregate> aggregates,
                                   CorrelationMode mode, stats::Alternative alt);

// Per-length n, mean and std rebuilt from rows, in ascending length order.
// Mean traces are left empty.
std::vector<LengthAggregate> aggregate_rows(std::span<const SweepRow> rows);

// Materialized experiment inputs: samples plus a scorer factory.
struct PreparedExperiment {
  std::vector<TokenSequence> samples;
  ScorerFactory factory;
};

// Loads or generates the samples and builds the scorer factory described by
// the config (training the toy n-gram when no model file is given).
PreparedExperiment prepare_experiment(const ExperimentConfig& cfg);

// Pools the rows of several reports (sample ids prefixed "r<k>/") and
// recomputes aggregates and both correlation blocks.
SweepReport merge_reports(std::span<const SweepReport> reports);

// ---- serialization (report.cpp) ----
nlohmann::json to_json(const SweepReport& report);
SweepReport report_from_json(const nlohmann::json& j);
std::string report_json_text(const SweepReport& report);
SweepReport load_report(const std::filesystem::path& path);

inline constexpr const char* kCsvHeader =
    "sample_id,length_tokens,delta_nll,peak_height,peak_latency,peak_start,peak_end,"
    "assimilation_start,assimilation_end,recovery_start,recovery_end,original_nll,"
    "perturbed_nll,seed";
std::string report_csv_text(const SweepReport& report);

// Writes report.csv / report.json / *.svg into `out_dir`. Unknown formats and
// svg with zero rows are rejected before any file is written.
std::vector<std::filesystem::path> emit_report(const SweepReport& report,
                                               const std::filesystem::path& out_dir,
                                               const std::set<std::string>& formats);

// ---- SVG charts (svg.cpp) ----
std::string svg_delta_vs_length(const SweepReport& report);
std::string svg_token_profile(const LengthAggregate& agg, const PerturbWindow& window);

}  // namespace lossprobe::harness
