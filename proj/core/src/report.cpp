#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "lossprobe/error.hpp"
#include "lossprobe/harness.hpp"

namespace lossprobe::harness {

namespace {

nlohmann::json opt_peak(const std::optional<analysis::PeakStats>& p) {
  if (!p) return nullptr;
  return {{"height", p->height}, {"latency", p->latency}};
}

std::optional<analysis::PeakStats> peak_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return analysis::PeakStats{j.at("height").get<double>(), j.at("latency").get<std::size_t>()};
}

nlohmann::json block_json(const CorrelationBlock& b) {
  nlohmann::json j = {{"mode", to_string(b.mode)},
                      {"computable", b.computable},
                      {"n_points", b.n_points}};
  if (!b.computable) j["reason"] = b.reason;
  j["pearson"] = b.pearson ? stats::to_json(*b.pearson) : nlohmann::json();
  j["spearman"] = b.spearman ? stats::to_json(*b.spearman) : nlohmann::json();
  j["ols"] = b.ols ? stats::to_json(*b.ols) : nlohmann::json();
  return j;
}

CorrelationBlock block_from(const nlohmann::json& j) {
  CorrelationBlock b;
  b.mode = j.at("mode") == "large-sample" ? CorrelationMode::large_sample
                                          : CorrelationMode::aggregated;
  b.computable = j.at("computable").get<bool>();
  b.n_points = j.at("n_points").get<std::size_t>();
  b.reason = j.value("reason", std::string());
  if (!j.at("pearson").is_null()) b.pearson = stats::stat_result_from_json(j["pearson"]);
  if (!j.at("spearman").is_null()) b.spearman = stats::stat_result_from_json(j["spearman"]);
  if (!j.at("ols").is_null()) b.ols = stats::regression_from_json(j["ols"]);
  return b;
}

}  // namespace

nlohmann::json to_json(const SweepReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"sample_id", r.sample_id},
                    {"length_tokens", r.length},
                    {"seed", r.seed},
                    {"delta_nll", r.delta_nll},
                    {"original_nll", r.original_nll},
                    {"perturbed_nll", r.perturbed_nll},
                    {"peak", opt_peak(r.peak)},
                    {"regions", analysis::to_json(r.regions)}});
  }
  nlohmann::json skipped = nlohmann::json::array();
  for (const auto& s : report.skipped) {
    skipped.push_back({{"sample_id", s.sample_id}, {"length_tokens", s.length}, {"reason", s.reason}});
  }
  nlohmann::json failed = nlohmann::json::array();
  for (const auto& f : report.failed) {
    failed.push_back({{"sample_id", f.sample_id}, {"length_tokens", f.length}, {"error", f.error}});
  }
  nlohmann::json aggs = nlohmann::json::array();
  for (const auto& a : report.aggregates) {
    aggs.push_back({{"length_tokens", a.length},
                    {"n", a.n},
                    {"mean_delta_nll", a.mean},
                    {"std_delta_nll", a.std},
                    {"mean_delta_trace", a.mean_delta_trace},
                    {"mean_regions", analysis::to_json(a.mean_regions)},
                    {"mean_peak", opt_peak(a.mean_peak)}});
  }
  return {{"format", "lossprobe-sweep-report"},
          {"version", 1},
          {"kind", report.kind},
          {"window_start", report.window_start},
          {"rows", rows},
          {"skipped", skipped},
          {"failed", failed},
          {"aggregates", aggs},
          {"correlation",
           {{"large_sample", block_json(report.large_sample)},
            {"aggregated", block_json(report.aggregated)}}},
          {"provenance", report.provenance}};
}

SweepReport report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "lossprobe-sweep-report") fail(Errc::parse_error, "not a sweep report");
    if (j.at("version").get<int>() != 1) fail(Errc::parse_error, "unsupported report version");
    SweepReport r;
    r.kind = j.at("kind").get<std::string>();
    r.window_start = j.at("window_start").get<std::size_t>();
    for (const auto& row : j.at("rows")) {
      SweepRow s;
      s.sample_id = row.at("sample_id").get<std::string>();
      s.length = row.at("length_tokens").get<std::size_t>();
      s.seed = row.at("seed").get<std::uint64_t>();
      s.delta_nll = row.at("delta_nll").get<double>();
      s.original_nll = row.at("original_nll").get<double>();
      s.perturbed_nll = row.at("perturbed_nll").get<double>();
      s.peak = peak_from(row.at("peak"));
      s.regions = analysis::segmentation_from_json(row.at("regions"));
      r.rows.push_back(std::move(s));
    }
    for (const auto& s : j.at("skipped")) {
      r.skipped.push_back({s.at("sample_id").get<std::string>(),
                           s.at("length_tokens").get<std::size_t>(),
                           s.at("reason").get<std::string>()});
    }
    for (const auto& f : j.at("failed")) {
      r.failed.push_back({f.at("sample_id").get<std::string>(),
                          f.at("length_tokens").get<std::size_t>(),
                          f.at("error").get<std::string>()});
    }
    for (const auto& a : j.at("aggregates")) {
      LengthAggregate agg;
      agg.length = a.at("length_tokens").get<std::size_t>();
      agg.n = a.at("n").get<std::size_t>();
      agg.mean = a.at("mean_delta_nll").get<double>();
      agg.std = a.at("std_delta_nll").get<double>();
      agg.mean_delta_trace = a.at("mean_delta_trace").get<std::vector<double>>();
      agg.mean_regions = analysis::segmentation_from_json(a.at("mean_regions"));
      agg.mean_peak = peak_from(a.at("mean_peak"));
      r.aggregates.push_back(std::move(agg));
    }
    r.large_sample = block_from(j.at("correlation").at("large_sample"));
    r.aggregated = block_from(j.at("correlation").at("aggregated"));
    r.provenance = j.at("provenance");
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse_error, fmt::format("bad sweep report: {}", e.what()));
  }
}

std::string report_json_text(const SweepReport& report) { return to_json(report).dump(2) + "\n"; }

SweepReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_error, fmt::format("cannot open report '{}'", path.string()));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse_error, fmt::format("'{}': {}", path.string(), e.what()));
  }
  return report_from_json(j);
}

std::string report_csv_text(const SweepReport& report) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : report.rows) {
    const std::string height = r.peak ? fmt::format("{}", r.peak->height) : "";
    const std::string latency = r.peak ? fmt::format("{}", r.peak->latency) : "";
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.sample_id, r.length,
                       r.delta_nll, height, latency, r.regions.peak.start, r.regions.peak.end,
                       r.regions.assimilation.start, r.regions.assimilation.end,
                       r.regions.recovery.start, r.regions.recovery.end, r.original_nll,
                       r.perturbed_nll, r.seed);
  }
  return out;
}

std::vector<std::filesystem::path> emit_report(const SweepReport& report,
                                               const std::filesystem::path& out_dir,
                                               const std::set<std::string>& formats) {
  for (const auto& f : formats) {
    if (f != "csv" && f != "json" && f != "svg") {
      fail(Errc::invalid_argument, fmt::format("unknown report format '{}'", f));
    }
  }
  if (formats.count("svg") && report.rows.empty()) {
    fail(Errc::invalid_argument, "cannot plot a report with zero samples");
  }

  // Render everything before touching the filesystem.
  std::vector<std::pair<std::filesystem::path, std::string>> files;
  if (formats.count("csv")) files.emplace_back(out_dir / "report.csv", report_csv_text(report));
  if (formats.count("json")) files.emplace_back(out_dir / "report.json", report_json_text(report));
  if (formats.count("svg")) {
    files.emplace_back(out_dir / "delta_vs_length.svg", svg_delta_vs_length(report));
    for (const auto& agg : report.aggregates) {
      if (agg.mean_delta_trace.empty()) continue;
      files.emplace_back(out_dir / fmt::format("token_profile_len{}.svg", agg.length),
                         svg_token_profile(agg, {report.window_start, agg.length}));
    }
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(Errc::io_error, fmt::format("cannot create '{}': {}", out_dir.string(), ec.message()));
  std::vector<std::filesystem::path> written;
  for (const auto& [path, text] : files) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) fail(Errc::io_error, fmt::format("write to '{}' failed", path.string()));
    written.push_back(path);
  }
  return written;
}

}  // namespace lossprobe::harness
