#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lossprobe/sequence.hpp"
#include "lossprobe/trace.hpp"

namespace lossprobe::analysis {

// Token-wise loss difference: values[t] = perturbed[t] - original[t] (nats).
struct DiffTrace {
  std::vector<double> values;
  PerturbWindow window;
  std::string original_id;
  std::string perturbed_id;
  std::string scorer_id;

  std::size_t size() const noexcept { return values.size(); }
};

// Errors: length_mismatch, scorer_mismatch.
DiffTrace token_diff(const LossTrace& original, const LossTrace& perturbed,
                     const PerturbWindow& window);

// Sequence-level difference: sum of the token-wise values.
double global_diff(const DiffTrace& diff);

// Centered moving average; windows are truncated at the edges rather than
// padded. `window_len` must be odd and >= 1.
std::vector<double> moving_average(std::span<const double> values, std::size_t window_len);

// Half-open token range.
struct Range {
  std::size_t start = 0;
  std::size_t end = 0;

  bool empty() const noexcept { return end <= start; }
  std::size_t size() const noexcept { return empty() ? 0 : end - start; }
  friend bool operator==(const Range&, const Range&) = default;
};

struct RegionSegmentation {
  Range peak;
  Range assimilation;
  Range recovery;
  friend bool operator==(const RegionSegmentation&, const RegionSegmentation&) = default;
};

struct DetectorParams {
  std::size_t smooth_len = 5;
  std::size_t run_len = 5;
  double zero_tol = 1e-6;

  void validate() const;
};

// Boundary rule, applied to the smoothed diff s with window [ws, we):
//   peak         [ws, p)  p = first i >= ws with s <= +tol on run_len tokens,
//                         searched inside the window (else we)
//   assimilation [p, a)   a = min(we, first i >= p with s >= -tol on run_len tokens)
//   recovery     [we, r)  r = first i >= we with |s| <= tol on run_len tokens,
//                         else sequence end
// A run that reaches the sequence end early counts if all its tokens qualify.
// Errors: window_out_of_bounds when the diff is shorter than the window end.
RegionSegmentation detect_regions(std::span<const double> diff, const PerturbWindow& window,
                                  const DetectorParams& params = {});
RegionSegmentation detect_regions(const DiffTrace& diff, const PerturbWindow& window,
                                  const DetectorParams& params = {});

struct PeakStats {
  double height = 0.0;
  std::size_t latency = 0;
};

// Height is the maximum raw (unsmoothed) value in the peak range; latency is
// the offset of its first occurrence from the window start. Errors:
// empty_region.
PeakStats peak_stats(std::span<const double> diff, const PerturbWindow& window,
                     const RegionSegmentation& seg);
PeakStats peak_stats(const DiffTrace& diff, const RegionSegmentation& seg);

std::string describe_rule(const DetectorParams& params);

nlohmann::json to_json(const Range& r);
Range range_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RegionSegmentation& seg);
RegionSegmentation segmentation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DetectorParams& params);
DetectorParams detector_params_from_json(const nlohmann::json& j);

// CSV with header `index,delta_nll`.
void write_diff_csv(std::ostream& out, std::span<const double> values);
std::vector<double> read_diff_csv(std::istream& in);

// CSV with header `sequence_id,scorer_id,index,nll`; one or more traces.
void write_trace_csv(std::ostream& out, std::span<const LossTrace> traces);
std::vector<LossTrace> read_trace_csv(std::istream& in);

}  // namespace lossprobe::analysis
