#include "lossprobe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "lossprobe/error.hpp"

namespace lossprobe::stats {

std::string to_string(Alternative alt) {
  switch (alt) {
    case Alternative::two_sided: return "two-sided";
    case Alternative::less: return "less";
    case Alternative::greater: return "greater";
  }
  return "two-sided";
}

Alternative parse_alternative(const std::string& text) {
  if (text == "two-sided") return Alternative::two_sided;
  if (text == "less") return Alternative::less;
  if (text == "greater") return Alternative::greater;
  fail(Errc::parse_error, fmt::format("unknown alternative '{}'", text));
}

nlohmann::json to_json(const StatResult& r) {
  return {{"statistic", r.statistic},
          {"p_value", r.p_value},
          {"n", r.n},
          {"method", r.method},
          {"alternative", to_string(r.alternative)}};
}

StatResult stat_result_from_json(const nlohmann::json& j) {
  return {j.at("statistic").get<double>(), j.at("p_value").get<double>(),
          j.at("n").get<std::size_t>(), j.at("method").get<std::string>(),
          parse_alternative(j.at("alternative").get<std::string>())};
}

namespace {

constexpr double kCfTolerance = 1e-12;
constexpr int kCfMaxIterations = 10000;

// Continued fraction for I_x(a, b), evaluated by modified Lentz.
double beta_cf(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kCfMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kCfTolerance) return h;
  }
  fail(Errc::invalid_argument, "incomplete beta continued fraction did not converge");
}

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    fail(Errc::length_mismatch, fmt::format("x has {} values, y has {}", x.size(), y.size()));
  }
  if (x.size() < 3) fail(Errc::too_few_points, fmt::format("need n >= 3, got {}", x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      fail(Errc::invalid_argument, fmt::format("non-finite value at index {}", i));
    }
  }
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct Moments {
  double sxx = 0.0, syy = 0.0, sxy = 0.0, mx = 0.0, my = 0.0;
};

Moments moments(std::span<const double> x, std::span<const double> y) {
  Moments m;
  m.mx = mean(x);
  m.my = mean(y);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - m.mx;
    const double dy = y[i] - m.my;
    m.sxx += dx * dx;
    m.syy += dy * dy;
    m.sxy += dx * dy;
  }
  return m;
}

double correlation(std::span<const double> x, std::span<const double> y) {
  const auto m = moments(x, y);
  if (m.sxx == 0.0) fail(Errc::constant_input, "x is constant; correlation undefined");
  if (m.syy == 0.0) fail(Errc::constant_input, "y is constant; correlation undefined");
  return std::clamp(m.sxy / std::sqrt(m.sxx * m.syy), -1.0, 1.0);
}

double r_to_p(double r, std::size_t n, Alternative alt) {
  const double df = static_cast<double>(n - 2);
  const double denom = 1.0 - r * r;
  const double t = denom <= 0.0 ? std::copysign(std::numeric_limits<double>::infinity(), r)
                                 : r * std::sqrt(df / denom);
  return t_test_p(t, df, alt);
}

// Exact permutation p-value for rank correlation: every arrangement of the y
// ranks against the fixed x ranks is equally likely under the null. With tied
// ranks, each distinct arrangement stands for the same number of index
// permutations, so enumerating distinct arrangements keeps the weights equal.
double exact_rank_p(const std::vector<double>& rx, const std::vector<double>& ry,
                    Alternative alt) {
  const double mx = mean(rx);
  const double my = mean(ry);
  std::vector<double> dx(rx.size());
  std::vector<double> dy(ry.size());
  double scale = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    dx[i] = rx[i] - mx;
    dy[i] = ry[i] - my;
    scale += std::abs(dx[i]) * std::abs(dy[i]);
  }
  const auto cross = [&](const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < dx.size(); ++i) s += dx[i] * v[i];
    return s;
  };
  const double observed = cross(dy);
  const double eps = 1e-9 * (scale + 1.0);

  std::sort(dy.begin(), dy.end());
  std::uint64_t total = 0;
  std::uint64_t extreme = 0;
  do {
    const double s = cross(dy);
    ++total;
    bool hit = false;
    switch (alt) {
      case Alternative::two_sided: hit = std::abs(s) >= std::abs(observed) - eps; break;
      case Alternative::less: hit = s <= observed + eps; break;
      case Alternative::greater: hit = s >= observed - eps; break;
    }
    if (hit) ++extreme;
  } while (std::next_permutation(dy.begin(), dy.end()));
  return static_cast<double>(extreme) / static_cast<double>(total);
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) fail(Errc::invalid_argument, "incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) fail(Errc::invalid_argument, "incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_sf(double t, double df) {
  if (!(df > 0.0)) fail(Errc::invalid_argument, "degrees of freedom must be positive");
  if (std::isnan(t)) fail(Errc::invalid_argument, "t statistic is NaN");
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
  return t >= 0.0 ? tail : 1.0 - tail;
}

double t_test_p(double t, double df, Alternative alt) {
  switch (alt) {
    case Alternative::two_sided: return std::min(1.0, 2.0 * student_t_sf(std::abs(t), df));
    case Alternative::less: return student_t_sf(-t, df);
    case Alternative::greater: return student_t_sf(t, df);
  }
  return 1.0;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

StatResult pearson(std::span<const double> x, std::span<const double> y, Alternative alt) {
  check_pair(x, y);
  const double r = correlation(x, y);
  return {r, r_to_p(r, x.size(), alt), x.size(), "pearson", alt};
}

StatResult spearman_t(std::span<const double> x, std::span<const double> y, Alternative alt) {
  check_pair(x, y);
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double rho = correlation(rx, ry);
  return {rho, r_to_p(rho, x.size(), alt), x.size(), "spearman-t", alt};
}

StatResult spearman(std::span<const double> x, std::span<const double> y, Alternative alt) {
  if (x.size() > kExactSpearmanMaxN) return spearman_t(x, y, alt);
  check_pair(x, y);
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double rho = correlation(rx, ry);
  return {rho, exact_rank_p(rx, ry, alt), x.size(), "spearman-exact", alt};
}

Regression linregress(std::span<const double> x, std::span<const double> y, Alternative alt) {
  check_pair(x, y);
  const auto m = moments(x, y);
  if (m.sxx == 0.0) fail(Errc::constant_input, "x is constant; slope undefined");
  Regression out;
  out.slope = m.sxy / m.sxx;
  out.intercept = m.my - out.slope * m.mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (out.intercept + out.slope * x[i]);
    sse += e * e;
  }
  const double df = static_cast<double>(x.size() - 2);
  out.slope_stderr = std::sqrt(sse / df / m.sxx);
  if (out.slope_stderr == 0.0) {
    out.slope_p = out.slope == 0.0 ? 1.0 : 0.0;
  } else {
    out.slope_p = t_test_p(out.slope / out.slope_stderr, df, alt);
  }
  out.result = {out.slope, out.slope_p, x.size(), "ols-slope", alt};
  return out;
}

nlohmann::json to_json(const Regression& r) {
  return {{"slope", r.slope},
          {"intercept", r.intercept},
          {"slope_stderr", r.slope_stderr},
          {"slope_p", r.slope_p},
          {"result", to_json(r.result)}};
}

Regression regression_from_json(const nlohmann::json& j) {
  Regression r;
  r.slope = j.at("slope").get<double>();
  r.intercept = j.at("intercept").get<double>();
  r.slope_stderr = j.at("slope_stderr").get<double>();
  r.slope_p = j.at("slope_p").get<double>();
  r.result = stat_result_from_json(j.at("result"));
  return r;
}

}  // namespace lossprobe::stats
