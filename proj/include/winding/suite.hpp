#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "verify.hpp"

namespace winding {

struct SuiteConfig {
  std::uint64_t seed = 42;
  std::size_t samples = 100000;  // base size; every batch scales with it
  unsigned threads = 0;
  std::set<int> only;  // empty: all criteria
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::vector<std::pair<std::string, double>> values;

  void add(const std::string& key, double v) { values.emplace_back(key, v); }
};

namespace detail {

class SuiteRunner {
public:
  explicit SuiteRunner(const SuiteConfig& cfg) : cfg_(cfg) {}

  // batch size for a nominal n at the default base of 1e5
  std::size_t n(double nominal, std::size_t floor = 200) const {
    const double v = std::round(nominal * static_cast<double>(cfg_.samples) / 1e5);
    return std::max<std::size_t>(floor, static_cast<std::size_t>(v));
  }

  template <class Fn>
  SampleBatch batch(int criterion, std::size_t n, const char* label, Fn fn) {
    // disjoint stream ranges: criterion in the top bits, batch index below
    const std::uint64_t first = (std::uint64_t(criterion) << 48) + (std::uint64_t(next_block_++) << 36);
    return generate_batch(n, cfg_.seed, first, label, fn, cfg_.threads);
  }

  const SuiteConfig& cfg() const { return cfg_; }

private:
  SuiteConfig cfg_;
  int next_block_ = 0;
};

inline void add_ks(CriterionResult& r, const std::string& key, const KsReport& k) {
  r.add(key + ".statistic", k.statistic);
  r.add(key + ".threshold", k.threshold);
}

inline void add_moment(CriterionResult& r, const std::string& key, const MomentReport& m) {
  r.add(key + ".estimate", m.estimate);
  r.add(key + ".target", m.target);
  r.add(key + ".z", m.z_score);
}

inline CriterionResult start(int id);

inline double hit_time_cdf(double t, double a) { return t <= 0 ? 0 : std::erfc(a / std::sqrt(2 * t)); }

}  // namespace detail

inline const std::vector<std::pair<int, std::string>>& suite_criteria() {
  static const std::vector<std::pair<int, std::string>> list = {
      {1, "log-cosh quadrature constant"},
      {2, "fourth moment closed form"},
      {3, "exit-cone sampler moments"},
      {4, "identities in law"},
      {5, "series density vs sampler"},
      {6, "expected log exit time"},
      {7, "Laplace transforms vs Monte Carlo"},
      {8, "Spitzer limit trend"},
      {9, "tail constant trend"},
      {10, "OU asymptotics"},
  };
  return list;
}

namespace detail {
inline CriterionResult start(int id) {
  CriterionResult r;
  r.id = id;
  for (const auto& [k, name] : suite_criteria())
    if (k == id) r.name = name;
  return r;
}
}  // namespace detail

// Runs the selected criteria in order; on_result fires as each completes.
inline std::vector<CriterionResult> run_suite(const SuiteConfig& cfg,
                                              const std::function<void(const CriterionResult&)>& on_result = {}) {
  detail::SuiteRunner S(cfg);
  std::vector<CriterionResult> out;
  const ConeSpec eighth(pi / 8), quarter(pi / 4);
  auto wanted = [&](int id) { return cfg.only.empty() || cfg.only.count(id) > 0; };
  auto finish = [&](CriterionResult r) {
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  };
  auto identity = [](double x) { return x; };

  // exit-cone batches shared by criteria 3, 5, 6, 7 and 10
  SampleBatch cone8, cone4;
  auto need_cone8 = [&] {
    if (cone8.values.empty())
      cone8 = S.batch(3, S.n(1e6), "exit-cone pi/8",
                      [&](RngStream& r) { return sample_exit_cone(eighth, 1, default_cone_dt(eighth.c), r); });
    return cone8;
  };
  auto need_cone4 = [&] {
    if (cone4.values.empty())
      cone4 = S.batch(6, S.n(1e6), "exit-cone pi/4",
                      [&](RngStream& r) { return sample_exit_cone(quarter, 1, default_cone_dt(quarter.c), r); });
    return cone4;
  };

  if (wanted(1)) {
    CriterionResult r = detail::start(1);
    const QuadResult q = quad_semi_infinite([](double z) { return std::log(z) / std::cosh(pi * z / 2); }, pi / 2, 1e-12);
    r.add("integral", q.value);
    r.add("target", -0.7832);
    r.pass = std::fabs(q.value + 0.7832) <= 5e-4;
    finish(r);
  }

  if (wanted(2)) {
    CriterionResult r = detail::start(2);
    r.pass = true;
    for (double c : {0.05, 0.1, 0.3}) {
      const double rel = std::fabs(sinh_moment_integral(c, 4) / sinh_moment4(c) - 1);
      r.add("rel_gap@" + std::to_string(c).substr(0, 4), rel);
      r.pass = r.pass && rel <= 1e-8;
    }
    const double ratio = sinh_moment4(0.01) / (5 * std::pow(0.01, 4));
    r.add("ratio_to_5c4@0.01", ratio);
    r.pass = r.pass && std::fabs(ratio - 1) <= 0.02;
    finish(r);
  }

  if (wanted(3)) {
    CriterionResult r = detail::start(3);
    const MomentReport m = moment_check(need_cone8(), identity, sinh_moment2(eighth.c));
    const SampleBatch two = S.batch(3, S.n(1e6), "two-sided c=1",
                                    [](RngStream& g) { return sample_two_sided_hit(1, default_cone_dt(1), g); });
    const MomentReport m2 = moment_check(two, [](double t) { return t * t; }, 5.0 / 3);
    detail::add_moment(r, "mean_pi/8", m);
    detail::add_moment(r, "second_moment_c=1", m2);
    r.pass = m.pass && m2.pass;
    finish(r);
  }

  if (wanted(4)) {
    CriterionResult r = detail::start(4);
    const double b = 1, a = arcsinh_a(b);
    const std::size_t n = S.n(1e5);
    // Bougerol at u = 1
    const SampleBatch lhs = S.batch(4, n, "sinh beta", [](RngStream& g) { return std::sinh(exp_functional(1, 1e-3, g).beta_end); });
    const SampleBatch rhs = S.batch(4, n, "beta-hat at A", [](RngStream& g) {
      const double A = exp_functional(1, 1e-3, g).A;
      return std::sqrt(A) * g.normal();
    });
    const KsReport k0 = ks_two_sample(lhs, rhs);
    // (i) clock, (ii) angle, (iii) running maximum at an independent hit of b
    const SampleBatch clk = S.batch(4, n, "clock at hit", [b](RngStream& g) { return sample_clock_at_indep_hit(b, g); });
    const KsReport k1 = ks_one_sample(clk, [a](double t) { return detail::hit_time_cdf(t, a); });
    const SampleBatch ang = S.batch(4, n, "angle at hit",
                                    [b](RngStream& g) { return sample_winding_at_indep_hit(b, HitMode::simulated, g); });
    const KsReport k2 = ks_one_sample(ang, [a](double x) { return cauchy_cdf(x, a); });
    const SampleBatch sup = S.batch(4, n, "max angle at hit",
                                    [b](RngStream& g) { return sample_winding_at_indep_hit(b, HitMode::simulated, g, true); });
    const KsReport k3 = ks_one_sample(sup, [a](double x) { return x <= 0 ? 0 : 2 * cauchy_cdf(x, a) - 1; });
    // OU versions, n = 1e4
    const OuSpec ou(1);
    const std::size_t m = S.n(1e4);
    const SampleBatch oub = S.batch(4, m, "ou angle at hit", [&](RngStream& g) { return sample_ou_winding_at_hit(b, ou, 0.01, g); });
    const KsReport k4 = ks_one_sample(oub, [a](double x) { return cauchy_cdf(x, a); });
    const SampleBatch tc = S.batch(4, m, "ou exit time-change",
                                   [&](RngStream& g) { return sample_ou_exit(quarter, ou, default_cone_dt(quarter.c), g); });
    const SampleBatch di = S.batch(4, m, "ou exit direct",
                                   [&](RngStream& g) { return sample_ou_exit(quarter, ou, 0, g, OuMode::direct); });
    const KsReport k5 = ks_two_sample(tc, di);
    detail::add_ks(r, "bougerol", k0);
    detail::add_ks(r, "clock_at_hit", k1);
    detail::add_ks(r, "angle_at_hit", k2);
    detail::add_ks(r, "max_angle_at_hit", k3);
    detail::add_ks(r, "ou_bougerol", k4);
    detail::add_ks(r, "ou_time_change_vs_direct", k5);
    r.pass = k0.pass && k1.pass && k2.pass && k3.pass && k4.pass && k5.pass;
    finish(r);
  }

  if (wanted(5)) {
    CriterionResult r = detail::start(5);
    const ExitConeCdf cdf(quarter);
    SampleBatch b = need_cone4();
    b.values.resize(std::min(b.values.size(), S.n(1e5)));
    const KsReport k = ks_one_sample(b, cdf);
    detail::add_ks(r, "ks", k);
    r.add("density_mass", cdf.captured_mass());
    r.pass = k.pass && std::fabs(cdf.captured_mass() - 1) <= 1e-3;
    finish(r);
  }

  if (wanted(6)) {
    CriterionResult r = detail::start(6);
    auto ln = [](double t) { return std::log(t); };
    const MomentReport m8 = moment_check(need_cone8(), ln, expected_log_exit(eighth));
    const MomentReport m4 = moment_check(need_cone4(), ln, expected_log_exit(quarter));
    detail::add_moment(r, "log_pi/8", m8);
    detail::add_moment(r, "log_pi/4", m4);
    double worst = 0;
    for (auto [c, d] : {std::pair{1.0, 1.0}, std::pair{0.3, 2.0}}) {
      const double lhs = log_sinh_cosh_integral(c, d);
      const double rhs = pi / (2 * d) * log_sinh_cosh_integral(c * pi / (2 * d), pi / 2);
      worst = std::max(worst, std::fabs(lhs - rhs));
    }
    r.add("scaling_identity_gap", worst);
    r.pass = m8.pass && m4.pass && worst <= 1e-10;
    finish(r);
  }

  if (wanted(7)) {
    CriterionResult r = detail::start(7);
    const double c = 1;
    const SampleBatch one = S.batch(7, S.n(1e5), "one-sided exit c=1",
                                    [c](RngStream& g) { return sample_exit_cone_one_sided(c, 1, 0.01, g, 1e6).value; });
    r.pass = true;
    for (double x : {0.0, 1.0, 4.0}) {
      auto f = [x](double t) { return std::exp(-x / (2 * t)) / std::sqrt(2 * pi * t); };
      const MomentReport a = moment_check(one, f, laplace_one_sided(x, c));
      const MomentReport b = moment_check(need_cone4(), f, laplace_two_sided(x, quarter));
      const std::string xs = std::to_string(int(x));
      detail::add_moment(r, "one_sided@x=" + xs, a);
      detail::add_moment(r, "two_sided@x=" + xs, b);
      r.pass = r.pass && a.pass && b.pass;
    }
    const MomentReport p = moment_check(one, [](double t) { return std::exp(-1 / (2 * t)); }, p_laplace_from_phi(1, c));
    detail::add_moment(r, "reconstruction@x=1", p);
    r.pass = r.pass && p.pass;
    finish(r);
  }

  if (wanted(8)) {
    CriterionResult r = detail::start(8);
    SpitzerOptions o;
    o.threads = cfg.threads;
    o.first_stream = std::uint64_t(8) << 48;
    const std::size_t n = S.n(1e4);
    const KsReport k = spitzer_limit_check(1e6, n, cfg.seed, o);
    const SpitzerTrendReport tr = spitzer_trend_check(1e3, 1e6, n, cfg.seed, 5, o);
    r.add("statistic@1e6", k.statistic);
    r.add("bar", k.threshold);
    r.add("mean_statistic@1e3", tr.mean_small);
    r.add("mean_statistic@1e6", tr.mean_large);
    r.pass = k.pass && tr.pass;
    finish(r);
  }

  if (wanted(9)) {
    CriterionResult r = detail::start(9);
    std::vector<double> grid;
    for (int i = 0; i <= 6; ++i) grid.push_back(std::pow(10.0, 3 + 0.5 * i));
    TailOptions o;
    o.threads = cfg.threads;
    o.first_stream = std::uint64_t(9) << 48;
    const TailTrendReport t = tail_trend_check(quarter.c, grid, S.n(1e5, 2000), cfg.seed, o);
    for (const TailPoint& p : t.points) r.add("estimate@" + std::to_string(int(std::round(std::log10(p.t) * 10))), p.estimate);
    r.add("limit", t.limit);
    r.add("final_rel_error", t.final_rel_error);
    r.add("eventually_decreasing", t.eventually_decreasing ? 1 : 0);
    r.pass = t.pass;
    finish(r);
  }

  if (wanted(10)) {
    CriterionResult r = detail::start(10);
    // pathwise identity at lambda = 0
    bool same = true;
    for (std::uint64_t i = 0; i < 1000; ++i) {
      RngStream a(cfg.seed, (std::uint64_t(10) << 48) + i), b(cfg.seed, (std::uint64_t(10) << 48) + i);
      same = same && sample_ou_exit(quarter, OuSpec(0), default_cone_dt(quarter.c), a) ==
                         sample_exit_cone(quarter, 1, default_cone_dt(quarter.c), b);
    }
    r.add("pathwise_identity", same ? 1 : 0);
    // derivative at 0 by common random numbers: T^(lambda) = alpha^{-1}(T^(0))
    const double c = 0.1, lam = 1e-2;
    const SampleBatch bm = S.batch(10, S.n(1e5), "exit-cone c=0.1",
                                   [c](RngStream& g) { return sample_exit_cone(ConeSpec(c), 1, default_cone_dt(c), g); });
    const OuSpec ou(lam);
    const MomentReport d = moment_check(bm, [&](double t) { return (ou_exit_from_bm_exit(t, ou) - t) / lam; },
                                        -sinh_moment4(c) / 3);
    detail::add_moment(r, "derivative", d);
    // large lambda, shared samples
    const double target = expected_log_exit(quarter);
    double prev = inf;
    bool decreasing = true;
    for (double L : {1e2, 1e3}) {
      const OuSpec big(L);
      double mean = 0;
      const SampleBatch& q = need_cone4();
      for (double t : q.values) mean += ou_exit_from_bm_exit(t, big) / static_cast<double>(q.n());
      const double gap = std::fabs(2 * L * mean - std::log(2 * L) - target);
      r.add("large_lambda_gap@" + std::to_string(int(L)), gap);
      decreasing = decreasing && gap < prev;
      prev = gap;
    }
    r.pass = same && d.pass && decreasing;
    finish(r);
  }
  return out;
}

}  // namespace winding
