#include "lossprobe/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "lossprobe/error.hpp"

namespace lossprobe::analysis {

DiffTrace token_diff(const LossTrace& original, const LossTrace& perturbed,
                     const PerturbWindow& window) {
  if (original.size() != perturbed.size()) {
    fail(Errc::length_mismatch, fmt::format("traces differ in length ({} vs {})", original.size(),
                                            perturbed.size()));
  }
  if (original.scorer_id != perturbed.scorer_id) {
    fail(Errc::scorer_mismatch, fmt::format("traces come from different scorers ('{}' vs '{}')",
                                            original.scorer_id, perturbed.scorer_id));
  }
  DiffTrace out{std::vector<double>(original.size()), window, original.sequence_id,
                perturbed.sequence_id, original.scorer_id};
  for (std::size_t t = 0; t < out.values.size(); ++t) {
    out.values[t] = perturbed.values[t] - original.values[t];
  }
  return out;
}

double global_diff(const DiffTrace& diff) {
  double acc = 0.0;
  for (double v : diff.values) acc += v;
  return acc;
}

std::vector<double> moving_average(std::span<const double> values, std::size_t window_len) {
  if (window_len == 0 || window_len % 2 == 0) {
    fail(Errc::invalid_argument,
         fmt::format("moving-average window must be odd and positive, got {}", window_len));
  }
  const std::size_t half = window_len / 2;
  const std::size_t n = values.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    double acc = 0.0;
    for (std::size_t j = lo; j < hi; ++j) acc += values[j];
    out[i] = acc / static_cast<double>(hi - lo);
  }
  return out;
}

void DetectorParams::validate() const {
  if (smooth_len == 0 || smooth_len % 2 == 0) {
    fail(Errc::invalid_argument, "smooth_len must be odd and positive");
  }
  if (run_len == 0) fail(Errc::invalid_argument, "run_len must be positive");
  if (!(zero_tol >= 0.0) || !std::isfinite(zero_tol)) {
    fail(Errc::invalid_argument, "zero_tol must be finite and non-negative");
  }
}

namespace {

template <typename Pred>
std::optional<std::size_t> find_run(const std::vector<double>& s, std::size_t from,
                                    std::size_t limit, std::size_t run_len, Pred pred) {
  if (from >= limit) return std::nullopt;
  std::size_t streak = 0;
  // Streak counting; a streak starting at i < limit is accepted once it
  // reaches run_len or the end of the data.
  for (std::size_t i = from; i < s.size(); ++i) {
    if (pred(s[i])) {
      ++streak;
      if (streak == run_len) return i + 1 - run_len;
    } else {
      streak = 0;
      if (i + 1 >= limit) return std::nullopt;
    }
  }
  if (streak > 0) {
    const std::size_t start = s.size() - streak;
    if (start < limit) return start;
  }
  return std::nullopt;
}

}  // namespace

RegionSegmentation detect_regions(std::span<const double> diff, const PerturbWindow& window,
                                  const DetectorParams& params) {
  params.validate();
  if (diff.size() < window.end()) {
    fail(Errc::window_out_of_bounds,
         fmt::format("diff of length {} does not cover window [{}, {})", diff.size(),
                     window.start, window.end()));
  }
  const auto s = moving_average(diff, params.smooth_len);
  const double tol = params.zero_tol;
  const std::size_t ws = window.start;
  const std::size_t we = window.end();
  const std::size_t n = s.size();

  RegionSegmentation seg;
  const auto p = find_run(s, ws, we, params.run_len, [tol](double v) { return v <= tol; });
  const std::size_t peak_end = p.value_or(we);
  seg.peak = {ws, peak_end};

  const auto a = find_run(s, peak_end, n, params.run_len, [tol](double v) { return v >= -tol; });
  seg.assimilation = {peak_end, std::min(we, a.value_or(n))};
  if (seg.assimilation.empty()) seg.assimilation = {peak_end, peak_end};

  const auto r =
      find_run(s, we, n, params.run_len, [tol](double v) { return std::abs(v) <= tol; });
  seg.recovery = {we, r.value_or(n)};
  return seg;
}

RegionSegmentation detect_regions(const DiffTrace& diff, const PerturbWindow& window,
                                  const DetectorParams& params) {
  return detect_regions(std::span<const double>(diff.values), window, params);
}

PeakStats peak_stats(std::span<const double> diff, const PerturbWindow& window,
                     const RegionSegmentation& seg) {
  if (seg.peak.empty()) fail(Errc::empty_region, "no peak region detected");
  if (seg.peak.end > diff.size() || seg.peak.start < window.start) {
    fail(Errc::window_out_of_bounds, "peak range outside the diff");
  }
  std::size_t best = seg.peak.start;
  for (std::size_t i = seg.peak.start + 1; i < seg.peak.end; ++i) {
    if (diff[i] > diff[best]) best = i;
  }
  return {diff[best], best - window.start};
}

PeakStats peak_stats(const DiffTrace& diff, const RegionSegmentation& seg) {
  return peak_stats(diff.values, diff.window, seg);
}

std::string describe_rule(const DetectorParams& p) {
  return fmt::format(
      "moving average (centered, edge-truncated, width {}); peak ends at the first run of {} "
      "tokens <= +{:g} inside the window; assimilation ends at the first run of {} tokens >= "
      "-{:g}, capped at the window end; recovery runs from the window end to the first run of {} "
      "tokens with |value| <= {:g}, else to the sequence end",
      p.smooth_len, p.run_len, p.zero_tol, p.run_len, p.zero_tol, p.run_len, p.zero_tol);
}

nlohmann::json to_json(const Range& r) { return {{"start", r.start}, {"end", r.end}}; }

Range range_from_json(const nlohmann::json& j) {
  return {j.at("start").get<std::size_t>(), j.at("end").get<std::size_t>()};
}

nlohmann::json to_json(const RegionSegmentation& seg) {
  return {{"peak", to_json(seg.peak)},
          {"assimilation", to_json(seg.assimilation)},
          {"recovery", to_json(seg.recovery)}};
}

RegionSegmentation segmentation_from_json(const nlohmann::json& j) {
  return {range_from_json(j.at("peak")), range_from_json(j.at("assimilation")),
          range_from_json(j.at("recovery"))};
}

nlohmann::json to_json(const DetectorParams& p) {
  return {{"smooth_len", p.smooth_len}, {"run_len", p.run_len}, {"zero_tol", p.zero_tol}};
}

DetectorParams detector_params_from_json(const nlohmann::json& j) {
  DetectorParams p;
  p.smooth_len = j.value("smooth_len", p.smooth_len);
  p.run_len = j.value("run_len", p.run_len);
  p.zero_tol = j.value("zero_tol", p.zero_tol);
  return p;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& text, std::size_t lineno) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    fail(Errc::parse_error, fmt::format("line {}: '{}' is not a number", lineno, text));
  }
}

std::size_t parse_index(const std::string& text, std::size_t lineno) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(Errc::parse_error, fmt::format("line {}: '{}' is not an index", lineno, text));
  }
  return v;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

void write_diff_csv(std::ostream& out, std::span<const double> values) {
  out << "index,delta_nll\n";
  for (std::size_t i = 0; i < values.size(); ++i) out << fmt::format("{},{}\n", i, values[i]);
}

std::vector<double> read_diff_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(Errc::parse_error, "empty diff CSV");
  strip_cr(line);
  if (line != "index,delta_nll") {
    fail(Errc::parse_error, fmt::format("unexpected diff CSV header '{}'", line));
  }
  std::vector<double> values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 2) fail(Errc::parse_error, fmt::format("line {}: expected 2 fields", lineno));
    if (parse_index(f[0], lineno) != values.size()) {
      fail(Errc::parse_error, fmt::format("line {}: indices must be consecutive from 0", lineno));
    }
    values.push_back(parse_double(f[1], lineno));
  }
  return values;
}

void write_trace_csv(std::ostream& out, std::span<const LossTrace> traces) {
  out << "sequence_id,scorer_id,index,nll\n";
  for (const auto& tr : traces) {
    for (std::size_t i = 0; i < tr.values.size(); ++i) {
      out << fmt::format("{},{},{},{}\n", tr.sequence_id, tr.scorer_id, i, tr.values[i]);
    }
  }
}

std::vector<LossTrace> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(Errc::parse_error, "empty trace CSV");
  strip_cr(line);
  if (line != "sequence_id,scorer_id,index,nll") {
    fail(Errc::parse_error, fmt::format("unexpected trace CSV header '{}'", line));
  }
  std::vector<LossTrace> traces;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    // Scorer names may contain commas; split off the id, then the last two fields.
    const auto first = line.find(',');
    const auto last = line.rfind(',');
    const auto mid = last == std::string::npos || last == 0 ? std::string::npos
                                                             : line.rfind(',', last - 1);
    if (first == std::string::npos || mid == std::string::npos || mid <= first) {
      fail(Errc::parse_error, fmt::format("line {}: expected 4 fields", lineno));
    }
    const std::string seq_id = line.substr(0, first);
    const std::string scorer = line.substr(first + 1, mid - first - 1);
    const std::size_t index = parse_index(line.substr(mid + 1, last - mid - 1), lineno);
    const double value = parse_double(line.substr(last + 1), lineno);
    if (traces.empty() || traces.back().sequence_id != seq_id ||
        traces.back().scorer_id != scorer) {
      traces.push_back({{}, seq_id, scorer});
    }
    if (index != traces.back().values.size()) {
      fail(Errc::parse_error,
           fmt::format("line {}: index {} out of order for '{}'", lineno, index, seq_id));
    }
    traces.back().values.push_back(value);
  }
  return traces;
}

}  // namespace lossprobe::analysis
