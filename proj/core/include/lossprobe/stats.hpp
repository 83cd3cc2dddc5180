#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace lossprobe::stats {

enum class Alternative { two_sided, less, greater };

std::string to_string(Alternative alt);
Alternative parse_alternative(const std::string& text);

struct StatResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  // "pearson" | "spearman-exact" | "spearman-t" | "ols-slope"
  std::string method;
  Alternative alternative = Alternative::two_sided;
};

nlohmann::json to_json(const StatResult& r);
StatResult stat_result_from_json(const nlohmann::json& j);

// Regularized incomplete beta I_x(a, b), continued fraction (modified Lentz)
// converged to 1e-12 relative.
double incomplete_beta(double a, double b, double x);

// P(T > t) for Student's t with `df` degrees of freedom. Errors: df <= 0.
double student_t_sf(double t, double df);

// p-value of a t statistic under the given alternative.
double t_test_p(double t, double df, Alternative alt);

// Ranks starting at 1; tied values share their mean rank.
std::vector<double> average_ranks(std::span<const double> values);

// Product-moment correlation with a t-test on n-2 degrees of freedom.
// Errors: length_mismatch, too_few_points (n < 3), constant_input.
StatResult pearson(std::span<const double> x, std::span<const double> y,
                   Alternative alt = Alternative::two_sided);

// Pearson r of average ranks. For n <= 10 the p-value enumerates all n!
// rank permutations ("spearman-exact"); above that it uses the t transform
// ("spearman-t").
StatResult spearman(std::span<const double> x, std::span<const double> y,
                    Alternative alt = Alternative::two_sided);

inline constexpr std::size_t kExactSpearmanMaxN = 10;

// Same statistic as spearman(); p-value forced through the t transform.
StatResult spearman_t(std::span<const double> x, std::span<const double> y,
                      Alternative alt = Alternative::two_sided);

struct Regression {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double slope_p = 1.0;
  StatResult result;  // statistic = slope, method "ols-slope"
};

// Ordinary least squares y ~ intercept + slope * x, with a t-test of
// slope != 0 on n-2 degrees of freedom. Errors: length_mismatch,
// too_few_points, constant_input (constant x).
Regression linregress(std::span<const double> x, std::span<const double> y,
                      Alternative alt = Alternative::two_sided);

nlohmann::json to_json(const Regression& r);
Regression regression_from_json(const nlohmann::json& j);

}  // namespace lossprobe::stats
