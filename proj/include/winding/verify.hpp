#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "batch.hpp"
#include "laws.hpp"
#include "paths.hpp"

namespace winding {

struct KsReport {
  double statistic = 0;
  std::size_t n = 0;
  std::size_t m = 0;  // zero for the one-sample test
  double alpha = 0.01;
  double threshold = 0;
  bool pass = false;
};

struct MomentReport {
  double estimate = 0;
  double std_error = 0;
  double target = 0;
  double z_score = 0;
  bool pass = false;
};

// Asymptotic Kolmogorov critical value, sqrt(-ln(alpha/2)/2); 1.628 at 0.01.
inline double ks_critical(double alpha) {
  if (!(alpha > 0 && alpha < 1)) throw std::domain_error("ks_critical: alpha must lie in (0, 1)");
  return std::sqrt(-0.5 * std::log(alpha / 2));
}

inline double ks_statistic(std::vector<double> v, const std::function<double(double)>& cdf) {
  if (v.empty()) throw std::invalid_argument("ks_one_sample: empty batch");
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double F = cdf(v[i]);
    d = std::max({d, F - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - F});
  }
  return d;
}

inline KsReport ks_one_sample(const SampleBatch& batch, const std::function<double(double)>& cdf,
                              double alpha = 0.01) {
  KsReport r;
  r.statistic = ks_statistic(batch.values, cdf);
  r.n = batch.n();
  r.alpha = alpha;
  r.threshold = ks_critical(alpha) / std::sqrt(static_cast<double>(r.n));
  r.pass = r.statistic < r.threshold;
  return r;
}

inline double ks_statistic2(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty batch");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

inline KsReport ks_two_sample(const SampleBatch& a, const SampleBatch& b, double alpha = 0.01) {
  KsReport r;
  r.statistic = ks_statistic2(a.values, b.values);
  r.n = a.n();
  r.m = b.n();
  r.alpha = alpha;
  const double n = static_cast<double>(r.n), m = static_cast<double>(r.m);
  r.threshold = ks_critical(alpha) * std::sqrt((n + m) / (n * m));
  r.pass = r.statistic < r.threshold;
  return r;
}

inline MomentReport moment_check(const SampleBatch& batch, const std::function<double(double)>& transform,
                                 double target, double z_max = 3) {
  if (batch.values.empty()) throw std::invalid_argument("moment_check: empty batch");
  // Welford
  double mean = 0, m2 = 0;
  std::size_t k = 0;
  for (double v : batch.values) {
    const double y = transform(v);
    ++k;
    const double d = y - mean;
    mean += d / static_cast<double>(k);
    m2 += d * (y - mean);
  }
  MomentReport r;
  r.estimate = mean;
  r.target = target;
  const double n = static_cast<double>(k);
  r.std_error = k > 1 ? std::sqrt(m2 / (n - 1) / n) : 0;
  if (r.std_error > 0) {
    r.z_score = (mean - target) / r.std_error;
  } else {
    if (mean != target) throw std::domain_error("moment_check: zero variance with estimate != target");
    r.z_score = 0;
  }
  r.pass = std::fabs(r.z_score) <= z_max;
  return r;
}

struct TailPoint {
  double t = 0;
  double estimate = 0;  // (ln t) P(T > t)
  double std_error = 0;
  std::size_t exceedances = 0;
};

struct TailTrendReport {
  std::vector<TailPoint> points;
  double limit = 0;
  double final_rel_error = 0;
  bool eventually_decreasing = false;
  bool pass = false;
};

struct TailOptions {
  double dt = 0.01;
  double a_cap = 0;  // 0: ten times the largest grid point
  double tolerance = 0.15;
  std::uint64_t first_stream = 0;
  unsigned threads = 0;
};

// (ln t) P(T_c > t) on a grid, from one-sided exit times sampled exactly in
// law; samples capped at a_cap count as exceeding every grid point below it.
inline TailTrendReport tail_trend_check(double c, const std::vector<double>& t_grid, std::size_t n,
                                        std::uint64_t seed, const TailOptions& o = {}) {
  if (t_grid.size() < 2 || !std::is_sorted(t_grid.begin(), t_grid.end()) || !(t_grid.front() > 1))
    throw std::domain_error("tail_trend_check: need an increasing grid above t = 1");
  if (t_grid.back() / t_grid.front() < 999.999)
    throw std::domain_error("tail_trend_check: grid must span at least three decades");
  const double a_cap = o.a_cap > 0 ? o.a_cap : 10 * t_grid.back();
  if (t_grid.back() >= a_cap) throw std::domain_error("tail_trend_check: grid exceeds the sampling cap");
  const SampleBatch b = generate_batch(
      n, seed, o.first_stream, "one-sided-exit",
      [&](RngStream& rng) { return sample_exit_cone_one_sided(c, 1.0, o.dt, rng, a_cap).value; },
      o.threads);
  TailTrendReport r;
  r.limit = tail_constant(c);
  for (double t : t_grid) {
    TailPoint p;
    p.t = t;
    p.exceedances = static_cast<std::size_t>(
        std::count_if(b.values.begin(), b.values.end(), [t](double v) { return v > t; }));
    const double q = static_cast<double>(p.exceedances) / static_cast<double>(n);
    p.estimate = std::log(t) * q;
    p.std_error = std::log(t) * std::sqrt(q * (1 - q) / static_cast<double>(n));
    r.points.push_back(p);
  }
  if (r.points.back().exceedances < 100)
    throw std::runtime_error("tail_trend_check: fewer than 100 exceedances at the largest t");
  // over the upper half of the grid the distance to the limit must not grow
  // by more than two standard errors from one point to the next
  const std::size_t start = r.points.size() / 2;
  r.eventually_decreasing = true;
  for (std::size_t i = start; i + 1 < r.points.size(); ++i) {
    const double d0 = std::fabs(r.points[i].estimate - r.limit);
    const double d1 = std::fabs(r.points[i + 1].estimate - r.limit);
    if (d1 > d0 + 2 * r.points[i + 1].std_error) r.eventually_decreasing = false;
  }
  r.final_rel_error = std::fabs(r.points.back().estimate - r.limit) / r.limit;
  r.pass = r.eventually_decreasing && r.final_rel_error <= o.tolerance;
  return r;
}

struct SpitzerOptions {
  WindingOptions walk{};
  std::uint64_t first_stream = 0;
  unsigned threads = 0;
  double max_statistic = 0.05;
};

// 2 theta_t / ln t for planar BM started at 1
inline SampleBatch spitzer_batch(double t, std::size_t n, std::uint64_t seed, const SpitzerOptions& o = {}) {
  if (!(t > 1)) throw std::domain_error("spitzer_batch: t must exceed 1");
  const double L = std::log(t);
  return generate_batch(
      n, seed, o.first_stream, "spitzer",
      [&](RngStream& rng) { return 2 * simulate_winding_end(t, 1.0, o.walk, rng).theta / L; },
      o.threads);
}

// KS of 2 theta_t / ln t against the standard Cauchy law, with the loose
// bar statistic <= max_statistic in place of an alpha-level threshold.
inline KsReport spitzer_limit_check(double t, std::size_t n, std::uint64_t seed, const SpitzerOptions& o = {}) {
  if (!(t >= 1e4)) throw std::domain_error("spitzer_limit_check: t must be at least 1e4");
  const SampleBatch b = spitzer_batch(t, n, seed, o);
  KsReport r = ks_one_sample(b, [](double x) { return cauchy_cdf(x, 1.0); });
  r.threshold = o.max_statistic;
  r.pass = r.statistic <= o.max_statistic;
  return r;
}

struct SpitzerTrendReport {
  std::vector<double> small_t;  // statistic per seed at the smaller time
  std::vector<double> large_t;
  double mean_small = 0;
  double mean_large = 0;
  bool pass = false;
};

// Mean KS distance to Cauchy(1) over seeds seed, seed+1, ...; passes when
// the mean does not grow from t_small to t_large.
inline SpitzerTrendReport spitzer_trend_check(double t_small, double t_large, std::size_t n, std::uint64_t seed,
                                              int repeats = 5, const SpitzerOptions& o = {}) {
  if (!(t_small > 1) || !(t_large > t_small) || repeats < 1)
    throw std::domain_error("spitzer_trend_check: need 1 < t_small < t_large and repeats >= 1");
  SpitzerTrendReport r;
  auto cauchy = [](double x) { return cauchy_cdf(x, 1.0); };
  for (int k = 0; k < repeats; ++k) {
    r.small_t.push_back(ks_statistic(spitzer_batch(t_small, n, seed + k, o).values, cauchy));
    r.large_t.push_back(ks_statistic(spitzer_batch(t_large, n, seed + k, o).values, cauchy));
    r.mean_small += r.small_t.back() / repeats;
    r.mean_large += r.large_t.back() / repeats;
  }
  r.pass = r.mean_large <= r.mean_small;
  return r;
}

}  // namespace winding
