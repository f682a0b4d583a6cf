#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace winding {

// Raised when a series or quadrature cannot reach the requested tolerance.
class convergence_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct SeriesTruncation {
  int K = 0;
  int N = 0;
  double tail_tol = 1e-12;
  bool adaptive = true;
  int max_terms = 10000;

  static SeriesTruncation fixed(int K, int N) { return {K, N, 1e-12, false}; }
  static SeriesTruncation adaptive_tol(double tol = 1e-12) { return {0, 0, tol, true}; }
};

struct SeriesResult {
  double value = 0;
  double last_term = 0;  // magnitude of the last summand kept
  int terms = 0;
};

struct QuadResult {
  double value = 0;
  double abs_err_estimate = 0;
  long evaluations = 0;
};

inline double log_gamma(double x) {
  if (!(x > 0) || !std::isfinite(x))
    throw std::domain_error("log_gamma: argument must be positive, got " + std::to_string(x));
  return boost::math::lgamma(x);
}

// a(x) = log(x + sqrt(1 + x^2)), written so that it stays accurate for
// large |x| and is exactly odd.
inline double arcsinh_a(double x) {
  return std::asinh(x);
}

namespace detail {

inline void check_truncation(const SeriesTruncation& tr) {
  if (tr.K < 0 || tr.N < 0 || !(tr.tail_tol > 0))
    throw std::domain_error("SeriesTruncation: need K >= 0, N >= 0, tail_tol > 0");
}

// Sum of 1F1(nu; 2nu+1; w) = sum_n (nu)_n/(2nu+1)_n w^n/n!, each summand
// scaled by exp(log_scale).  Terms come from the ratio
// (nu+n) w / ((2nu+1+n)(n+1)), so no gamma function is ever formed.
inline SeriesResult m_half_kummer(double nu, double w, double log_scale,
                                  const SeriesTruncation& tr) {
  SeriesResult r;
  double term = std::exp(log_scale);
  double sum = term;
  int n = 0;
  bool done = false;
  const int cap = tr.adaptive ? tr.max_terms : tr.N;
  while (n < cap) {
    const double ratio = (nu + n) * w / ((2 * nu + 1 + n) * (n + 1.0));
    term *= ratio;
    ++n;
    sum += term;
    // past the peak and below tolerance
    if ((ratio < 1 && std::fabs(term) <= tr.tail_tol) || term == 0) {
      done = true;
      if (tr.adaptive) break;
    }
  }
  if (tr.adaptive && !done)
    throw convergence_error("whittaker series: tail tolerance not reached within " +
                            std::to_string(cap) + " terms");
  r.value = sum;
  r.last_term = std::fabs(term);
  r.terms = n + 1;
  return r;
}

}  // namespace detail

// M_{1/2,nu}(w) = w^{nu+1/2} e^{-w/2} 1F1(nu; 2nu+1; w).  Accepts nu = 0,
// where the series collapses to its first term and M = sqrt(w) e^{-w/2}.
inline SeriesResult whittaker_m_half_series(double nu, double w,
                                            const SeriesTruncation& tr = SeriesTruncation::adaptive_tol()) {
  detail::check_truncation(tr);
  if (!(nu >= 0) || !(w > 0))
    throw std::domain_error("whittaker_m_half: need nu >= 0 and w > 0");
  const double log_pref = (nu + 0.5) * std::log(w) - 0.5 * w;
  return detail::m_half_kummer(nu, w, log_pref, tr);
}

inline double whittaker_m_half(double nu, double w,
                               const SeriesTruncation& tr = SeriesTruncation::adaptive_tol()) {
  if (!(nu > 0))
    throw std::domain_error("whittaker_m_half: nu must be positive (use whittaker_m_half_nonneg for nu = 0)");
  return whittaker_m_half_series(nu, w, tr).value;
}

inline double whittaker_m_half_nonneg(double nu, double w,
                                      const SeriesTruncation& tr = SeriesTruncation::adaptive_tol()) {
  return whittaker_m_half_series(nu, w, tr).value;
}

// Integral of f over (0, inf).  decay is a rate a with f(z) ~ exp(-a z);
// the integrand is rescaled to unit rate before the exp-sinh rule.
inline QuadResult quad_semi_infinite(const std::function<double(double)>& f,
                                     double decay = 1.0, double tol = 1e-10) {
  if (!(decay > 0) || !(tol > 0))
    throw std::domain_error("quad_semi_infinite: decay and tol must be positive");
  QuadResult q;
  long evals = 0;
  auto g = [&](double u) {
    ++evals;
    const double v = f(u / decay);
    return std::isfinite(v) ? v : 0.0;
  };
  boost::math::quadrature::exp_sinh<double> rule(12);
  double rel = std::max(tol, 1e-15);
  for (int attempt = 0; attempt < 2; ++attempt) {
    double err = 0, l1 = 0;
    std::size_t levels = 0;
    evals = 0;
    double v = 0;
    try {
      v = rule.integrate(g, rel, &err, &l1, &levels);
    } catch (const std::exception& e) {
      throw convergence_error(std::string("quad_semi_infinite: ") + e.what());
    }
    q.value = v / decay;
    q.abs_err_estimate = err / decay;
    q.evaluations = evals;
    if (q.abs_err_estimate <= tol) return q;
    // relative goal was too loose for a large L1 norm; tighten once
    const double l1s = l1 / decay;
    if (l1s <= 1) break;
    rel = std::max(tol / l1s, 1e-15);
  }
  throw convergence_error("quad_semi_infinite: error estimate " + std::to_string(q.abs_err_estimate) +
                          " above tolerance " + std::to_string(tol));
}

}  // namespace winding
