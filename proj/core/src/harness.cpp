#include "lossprobe/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <thread>
#include <tuple>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "lossprobe/error.hpp"
#include "lossprobe/perturb.hpp"
#include "lossprobe/rng.hpp"
#include "lossprobe/toymodel.hpp"

#ifndef LOSSPROBE_VERSION_STRING
#define LOSSPROBE_VERSION_STRING "0.0.0"
#endif

namespace lossprobe::harness {

std::string toolkit_version() { return LOSSPROBE_VERSION_STRING; }

std::string to_string(CorrelationMode mode) {
  return mode == CorrelationMode::large_sample ? "large-sample" : "aggregated";
}

std::uint64_t perturbation_seed(std::uint64_t master, const std::string& sample_id,
                                std::size_t length) {
  return derive_seed(derive_seed(master, sample_id), "length", length);
}

PerturbationSpec make_perturbation(const ExperimentConfig& cfg, const std::string& sample_id,
                                   std::size_t length) {
  PerturbationSpec spec;
  spec.kind = cfg.kind;
  spec.window = {cfg.start, length};
  spec.seed = perturbation_seed(cfg.master_seed, sample_id, length);
  spec.noise_mode = cfg.noise_mode;
  spec.noise_vocab = cfg.noise_vocab;
  spec.segment_len = std::max<std::size_t>(
      1, (length + cfg.segments_per_window - 1) / cfg.segments_per_window);
  return spec;
}

namespace {

struct SampleResult {
  std::vector<SweepRow> rows;
  std::vector<FailureRecord> failed;
  std::map<std::size_t, std::vector<double>> diffs;
};

SampleResult run_sample(const ExperimentConfig& cfg, const TokenSequence& sample,
                        std::unique_ptr<scoring::Scorer>& scorer, const ScorerFactory& factory) {
  SampleResult out;
  const auto fail_rest = [&](std::size_t from, const std::string& why) {
    for (std::size_t k = from; k < cfg.lengths.size(); ++k) {
      out.failed.push_back({sample.id(), cfg.lengths[k], why});
    }
  };
  try {
    if (!scorer) scorer = factory();
  } catch (const Error& e) {
    fail_rest(0, fmt::format("cannot open scorer: {}", e.what()));
    return out;
  }

  LossTrace original;
  try {
    original = scoring::score_sequence(*scorer, sample);
  } catch (const Error& e) {
    scorer.reset();
    fail_rest(0, fmt::format("scoring original failed: {}", e.what()));
    return out;
  }

  for (std::size_t k = 0; k < cfg.lengths.size(); ++k) {
    const std::size_t length = cfg.lengths[k];
    const auto spec = make_perturbation(cfg, sample.id(), length);
    try {
      const auto perturbed_seq = apply_perturbation(sample, spec);
      if (!scorer) scorer = factory();
      const auto perturbed = scoring::score_sequence(*scorer, perturbed_seq);
      auto diff = analysis::token_diff(original, perturbed, spec.window);

      SweepRow row;
      row.sample_id = sample.id();
      row.length = length;
      row.seed = spec.seed;
      row.delta_nll = analysis::global_diff(diff);
      row.original_nll = original.total();
      row.perturbed_nll = perturbed.total();
      row.regions = analysis::detect_regions(diff, spec.window, cfg.detector);
      if (!row.regions.peak.empty()) row.peak = analysis::peak_stats(diff, row.regions);
      out.rows.push_back(std::move(row));
      out.diffs.emplace(length, std::move(diff.values));
    } catch (const Error& e) {
      if (!e.is_validation()) scorer.reset();
      out.failed.push_back({sample.id(), length, e.what()});
    }
  }
  return out;
}

void fill_mean_profile(LengthAggregate& agg, const PerturbWindow& window,
                       const analysis::DetectorParams& params) {
  if (agg.mean_delta_trace.size() < window.end()) return;
  agg.mean_regions = analysis::detect_regions(agg.mean_delta_trace, window, params);
  agg.mean_peak.reset();
  if (!agg.mean_regions.peak.empty()) {
    agg.mean_peak = analysis::peak_stats(agg.mean_delta_trace, window, agg.mean_regions);
  }
}

CorrelationBlock safe_block(std::span<const SweepRow> rows,
                            std::span<const LengthAggregate> aggregates, CorrelationMode mode,
                            stats::Alternative alt) {
  try {
    return correlation_block(rows, aggregates, mode, alt);
  } catch (const Error& e) {
    CorrelationBlock block;
    block.mode = mode;
    block.computable = false;
    block.reason = e.what();
    block.n_points = mode == CorrelationMode::large_sample ? rows.size() : aggregates.size();
    return block;
  }
}

}  // namespace

std::vector<LengthAggregate> aggregate_rows(std::span<const SweepRow> rows) {
  std::map<std::size_t, std::vector<double>> by_length;
  for (const auto& r : rows) by_length[r.length].push_back(r.delta_nll);
  std::vector<LengthAggregate> out;
  for (const auto& [length, values] : by_length) {
    LengthAggregate agg;
    agg.length = length;
    agg.n = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    agg.mean = sum / static_cast<double>(agg.n);
    if (agg.n > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - agg.mean) * (v - agg.mean);
      agg.std = std::sqrt(ss / static_cast<double>(agg.n - 1));
    }
    out.push_back(std::move(agg));
  }
  return out;
}

CorrelationBlock correlation_block(std::span<const SweepRow> rows,
                                   std::span<const LengthAggregate> aggregates,
                                   CorrelationMode mode, stats::Alternative alt) {
  std::vector<double> x, y;
  if (mode == CorrelationMode::large_sample) {
    for (const auto& r : rows) {
      x.push_back(static_cast<double>(r.length));
      y.push_back(r.delta_nll);
    }
  } else {
    for (const auto& a : aggregates) {
      if (a.n == 0) continue;
      x.push_back(static_cast<double>(a.length));
      y.push_back(a.mean);
    }
  }
  if (x.size() < 3) {
    fail(Errc::too_few_points,
         fmt::format("{} mode has {} points, need >= 3", to_string(mode), x.size()));
  }
  CorrelationBlock block;
  block.mode = mode;
  block.n_points = x.size();
  block.pearson = stats::pearson(x, y, alt);
  block.spearman = stats::spearman(x, y, alt);
  block.ols = stats::linregress(x, y, alt);
  block.computable = true;
  return block;
}

SweepReport run_sweep(const ExperimentConfig& cfg, std::span<const TokenSequence> samples,
                      const ScorerFactory& factory) {
  cfg.validate();
  SweepReport report;
  report.kind = to_string(cfg.kind);
  report.window_start = cfg.start;

  auto first_scorer = factory();
  nlohmann::json scorer_info = {{"kind", scoring::to_string(first_scorer->kind())},
                                {"name", first_scorer->name()},
                                {"descriptor", first_scorer->descriptor()},
                                {"vocab_size", first_scorer->vocab_size()}};
  if (auto* ext = dynamic_cast<scoring::ExternalScorer*>(first_scorer.get())) {
    scorer_info["handshake"] = ext->handshake();
  }

  // Admission: truncate long samples, skip short or incompatible ones.
  std::vector<TokenSequence> admitted;
  {
    std::set<std::string> ids;
    for (const auto& s : samples) {
      if (!ids.insert(s.id()).second) {
        fail(Errc::invalid_argument, fmt::format("duplicate sample id '{}'", s.id()));
      }
    }
  }
  for (const auto& s : samples) {
    std::string reason;
    if (s.size() < cfg.sequence_length) {
      reason = fmt::format("length {} < expected {}", s.size(), cfg.sequence_length);
    } else if (s.vocab_size() > first_scorer->vocab_size()) {
      reason = fmt::format("vocab {} exceeds scorer vocab {}", s.vocab_size(),
                           first_scorer->vocab_size());
    } else if (cfg.kind == PerturbKind::noise) {
      for (TokenId t : cfg.noise_vocab) {
        if (t >= s.vocab_size()) {
          reason = fmt::format("noise token {} outside sample vocab {}", t, s.vocab_size());
          break;
        }
      }
    }
    if (!reason.empty()) {
      spdlog::warn("skipping sample '{}': {}", s.id(), reason);
      for (std::size_t len : cfg.lengths) report.skipped.push_back({s.id(), len, reason});
      continue;
    }
    admitted.push_back(s.truncated(cfg.sequence_length));
  }
  std::sort(admitted.begin(), admitted.end(),
            [](const TokenSequence& a, const TokenSequence& b) { return a.id() < b.id(); });

  std::vector<SampleResult> results(admitted.size());
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(cfg.workers, admitted.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::unique_ptr<scoring::Scorer>> scorers(n_workers);
  scorers[0] = std::move(first_scorer);
  const auto work = [&](std::size_t w) {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= admitted.size()) break;
      results[i] = run_sample(cfg, admitted[i], scorers[w], factory);
    }
  };
  if (n_workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  scorers.clear();

  for (auto& r : results) {
    for (auto& row : r.rows) report.rows.push_back(std::move(row));
    for (auto& f : r.failed) report.failed.push_back(std::move(f));
  }
  std::sort(report.skipped.begin(), report.skipped.end(), [](const auto& a, const auto& b) {
    return std::tie(a.sample_id, a.length) < std::tie(b.sample_id, b.length);
  });
  for (const auto& f : report.failed) {
    spdlog::warn("sample '{}' length {} failed: {}", f.sample_id, f.length, f.error);
  }
  if (report.rows.empty() && !report.failed.empty()) {
    fail(Errc::all_samples_failed,
         fmt::format("all {} scoring attempts failed; first error: {}", report.failed.size(),
                     report.failed.front().error));
  }

  report.aggregates = aggregate_rows(report.rows);
  for (auto& agg : report.aggregates) {
    std::vector<double> sum(cfg.sequence_length, 0.0);
    for (const auto& r : results) {
      const auto it = r.diffs.find(agg.length);
      if (it == r.diffs.end()) continue;
      for (std::size_t t = 0; t < sum.size(); ++t) sum[t] += it->second[t];
    }
    for (auto& v : sum) v /= static_cast<double>(agg.n);
    agg.mean_delta_trace = std::move(sum);
    fill_mean_profile(agg, {cfg.start, agg.length}, cfg.detector);
  }

  report.large_sample =
      safe_block(report.rows, report.aggregates, CorrelationMode::large_sample, cfg.alternative);
  report.aggregated =
      safe_block(report.rows, report.aggregates, CorrelationMode::aggregated, cfg.alternative);

  report.provenance = {
      {"toolkit", "lossprobe"},
      {"toolkit_version", toolkit_version()},
      {"config", to_json(cfg)},
      {"scorer", scorer_info},
      {"seed_derivation",
       "perturbation seed = derive_seed(derive_seed(master_seed, sample_id), \"length\", length); "
       "derive_seed(p, label, i) = splitmix64(splitmix64(p ^ fnv1a64(label)) + i)"},
      {"region_rule", analysis::describe_rule(cfg.detector)},
      {"detector", analysis::to_json(cfg.detector)},
      {"alternative", stats::to_string(cfg.alternative)},
      {"samples_total", samples.size()},
      {"samples_admitted", admitted.size()}};
  return report;
}

PreparedExperiment prepare_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  PreparedExperiment prep;
  if (cfg.samples) {
    prep.samples = read_sequences(*cfg.samples);
  } else {
    auto heldout = cfg.toy->corpus;
    heldout.n_sequences = cfg.toy->heldout;
    heldout.noise_mix_fraction = 0.0;
    prep.samples = toy::gen_corpus(heldout, cfg.toy->corpus.n_sequences);
  }

  if (cfg.scorer.kind == scoring::ScorerKind::external) {
    const auto command = cfg.scorer.command;
    const auto args = cfg.scorer.args;
    const scoring::ExternalOptions opts{cfg.scorer.handshake_timeout, cfg.scorer.request_timeout};
    prep.factory = [command, args, opts]() -> std::unique_ptr<scoring::Scorer> {
      return scoring::open_external(command, args, opts);
    };
    return prep;
  }

  std::shared_ptr<const toy::NGramModel> model;
  std::string descriptor;
  if (!cfg.scorer.model.empty()) {
    model = std::make_shared<const toy::NGramModel>(toy::NGramModel::load(cfg.scorer.model));
    descriptor = cfg.scorer.model.string();
  } else {
    const auto corpus = toy::gen_corpus(cfg.toy->corpus);
    model = std::make_shared<const toy::NGramModel>(
        toy::train_ngram(corpus, cfg.toy->order, cfg.toy->alpha));
    descriptor = fmt::format("toy corpus (seed {}, {} sequences)", cfg.toy->corpus.seed,
                             cfg.toy->corpus.n_sequences);
  }
  prep.factory = [model, descriptor]() -> std::unique_ptr<scoring::Scorer> {
    return std::make_unique<scoring::BuiltinNgramScorer>(model, descriptor);
  };
  return prep;
}

SweepReport merge_reports(std::span<const SweepReport> reports) {
  if (reports.empty()) fail(Errc::invalid_argument, "nothing to merge");
  SweepReport merged;
  merged.kind = reports.front().kind;
  merged.window_start = reports.front().window_start;
  nlohmann::json sources = nlohmann::json::array();
  for (std::size_t k = 0; k < reports.size(); ++k) {
    const auto& r = reports[k];
    if (r.kind != merged.kind || r.window_start != merged.window_start) {
      fail(Errc::invalid_argument, "cannot merge reports with different kind or window start");
    }
    const auto prefix = fmt::format("r{}/", k);
    for (auto row : r.rows) {
      row.sample_id = prefix + row.sample_id;
      merged.rows.push_back(std::move(row));
    }
    for (auto s : r.skipped) {
      s.sample_id = prefix + s.sample_id;
      merged.skipped.push_back(std::move(s));
    }
    for (auto f : r.failed) {
      f.sample_id = prefix + f.sample_id;
      merged.failed.push_back(std::move(f));
    }
    sources.push_back(r.provenance);
  }
  std::sort(merged.rows.begin(), merged.rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.sample_id, a.length) < std::tie(b.sample_id, b.length);
  });

  const auto& prov = reports.front().provenance;
  const auto params = prov.contains("detector") ? analysis::detector_params_from_json(prov["detector"])
                                                : analysis::DetectorParams{};
  const auto alt = prov.contains("alternative")
                       ? stats::parse_alternative(prov["alternative"].get<std::string>())
                       : stats::Alternative::two_sided;

  merged.aggregates = aggregate_rows(merged.rows);
  for (auto& agg : merged.aggregates) {
    // n-weighted mean of the per-report mean traces (equal lengths only).
    std::vector<double> sum;
    std::size_t total = 0;
    bool usable = true;
    for (const auto& r : reports) {
      for (const auto& a : r.aggregates) {
        if (a.length != agg.length || a.mean_delta_trace.empty()) continue;
        if (sum.empty()) sum.assign(a.mean_delta_trace.size(), 0.0);
        if (a.mean_delta_trace.size() != sum.size()) usable = false;
        if (!usable) break;
        for (std::size_t t = 0; t < sum.size(); ++t) {
          sum[t] += a.mean_delta_trace[t] * static_cast<double>(a.n);
        }
        total += a.n;
      }
    }
    if (usable && total > 0) {
      for (auto& v : sum) v /= static_cast<double>(total);
      agg.mean_delta_trace = std::move(sum);
      fill_mean_profile(agg, {merged.window_start, agg.length}, params);
    }
  }
  merged.large_sample =
      safe_block(merged.rows, merged.aggregates, CorrelationMode::large_sample, alt);
  merged.aggregated = safe_block(merged.rows, merged.aggregates, CorrelationMode::aggregated, alt);
  merged.provenance = {{"toolkit", "lossprobe"},
                       {"toolkit_version", toolkit_version()},
                       {"merged_from", sources},
                       {"detector", analysis::to_json(params)},
                       {"region_rule", analysis::describe_rule(params)},
                       {"alternative", stats::to_string(alt)}};
  return merged;
}

}  // namespace lossprobe::harness
