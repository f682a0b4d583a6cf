#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "numerics.hpp"

namespace winding {

inline constexpr double pi = std::numbers::pi;
inline constexpr double euler_gamma = std::numbers::egamma;

struct ConeSpec {
  double c = pi / 4;
  double d = pi / 4;

  ConeSpec() = default;
  explicit ConeSpec(double c_) : ConeSpec(c_, c_) {}
  ConeSpec(double c_, double d_) : c(c_), d(d_) {
    if (!(c > 0) || !(d > 0) || !std::isfinite(c) || !std::isfinite(d))
      throw std::domain_error("ConeSpec: angles must be positive and finite");
  }

  bool symmetric() const { return c == d; }
  double psi() const { return 2 * c; }
  double zeta() const { return pi / (2 * c); }
  double zeta_hat() const { return pi / c; }
  double nu(int k) const { return pi * (2 * k + 1) / (4 * c); }
};

struct OuSpec {
  double lambda = 0;
  double D = 0.5;
  double z0 = 1;

  OuSpec() = default;
  OuSpec(double lambda_, double D_ = 0.5, double z0_ = 1) : lambda(lambda_), D(D_), z0(z0_) {
    if (!(lambda >= 0) || !(D > 0) || !(z0 > 0))
      throw std::domain_error("OuSpec: need lambda >= 0, D > 0, z0 > 0");
  }

  // alpha(t) = D (e^{2 lambda t} - 1) / lambda, 2 D t at lambda = 0
  double alpha(double t) const {
    if (lambda == 0) return 2 * D * t;
    return D * std::expm1(2 * lambda * t) / lambda;
  }
  double alpha_inv(double a) const {
    if (lambda == 0) return a / (2 * D);
    return std::log1p(lambda * a / D) / (2 * lambda);
  }
};

namespace detail {

inline void require_symmetric(const ConeSpec& cone, const char* who) {
  if (!cone.symmetric())
    throw std::domain_error(std::string(who) + ": only the symmetric cone c = d is supported");
}

inline void require_positive(double v, const char* who) {
  if (!(v > 0)) throw std::domain_error(std::string(who) + ": parameter must be positive");
}

inline void require_nonneg_x(double x, const char* who) {
  if (!(x >= 0)) throw std::domain_error(std::string(who) + ": x must be >= 0");
}

// log(sqrt(x) + sqrt(1 + x))
inline double log_root_pair(double x) { return std::asinh(std::sqrt(x)); }

// log(sinh(y)) for y > 0 without overflow
inline double log_sinh(double y) {
  if (y > 20) return y - std::numbers::ln2 + std::log1p(-std::exp(-2 * y));
  return std::log(std::sinh(y));
}

// log(cosh(y)) for any y
inline double log_cosh(double y) {
  y = std::fabs(y);
  return y - std::numbers::ln2 + std::log1p(std::exp(-2 * y));
}

}  // namespace detail

inline double cauchy_density(double y, double scale) {
  detail::require_positive(scale, "cauchy_density");
  return scale / (pi * (scale * scale + y * y));
}

inline double cauchy_cdf(double y, double scale) {
  detail::require_positive(scale, "cauchy_cdf");
  return 0.5 + std::atan(y / scale) / pi;
}

inline double exit_density_symmetric(double x, const ConeSpec& cone) {
  detail::require_symmetric(cone, "exit_density_symmetric");
  const double u = std::fabs(pi * x / (2 * cone.c));
  return std::exp(-u) / (cone.c * (1 + std::exp(-2 * u)));
}

inline double exit_cdf_symmetric(double x, const ConeSpec& cone) {
  detail::require_symmetric(cone, "exit_cdf_symmetric");
  return 2 / pi * std::atan(std::exp(pi * x / (2 * cone.c)));
}

inline double exit_charfn(double lambda_, const ConeSpec& cone) {
  const double a = std::fabs(lambda_ * (cone.c - cone.d) / 2);
  const double b = std::fabs(lambda_ * (cone.c + cone.d) / 2);
  return std::exp(detail::log_cosh(a) - detail::log_cosh(b));
}

// Density of the Brownian value at the first time its range reaches c.
// Normalized: (2|y|/c^2) / sinh(pi|y|/c), value 2/(pi c) at y = 0.
inline double range_density(double y, const ConeSpec& cone) {
  const double c = cone.c;
  const double u = pi * std::fabs(y) / c;
  double u_over_sinh;
  if (u < 1e-4)
    u_over_sinh = 1 - u * u / 6;
  else if (u > 40)
    u_over_sinh = 2 * u * std::exp(-u);
  else
    u_over_sinh = u / std::sinh(u);
  return 2 / (pi * c) * u_over_sinh;
}

inline double range_cdf(double y, const ConeSpec& cone) {
  const double a = std::fabs(y);
  if (a == 0) return 0.5;
  double half = 0;
  if (a * pi / cone.c > 60) {
    half = 0.5;
  } else {
    half = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [&](double s) { return range_density(s, cone); }, 0.0, a, 4, 1e-12);
  }
  half = std::min(half, 0.5);
  return y > 0 ? 0.5 + half : 0.5 - half;
}

// E[(2 pi T)^{-1/2} exp(-x/(2T))] for the one-sided exit time of angle c
inline double laplace_one_sided(double x, double c) {
  detail::require_nonneg_x(x, "laplace_one_sided");
  detail::require_positive(c, "laplace_one_sided");
  const double l = detail::log_root_pair(x);
  return c / (pi * std::sqrt(1 + x) * (c * c + l * l));
}

inline double q_laplace(double x, double c) {
  detail::require_nonneg_x(x, "q_laplace");
  detail::require_positive(c, "q_laplace");
  const double l = detail::log_root_pair(x);
  return 1 / (std::sqrt(1 + x) * (1 + l * l / (c * c)));
}

// E[exp(-x/(2T))] for the one-sided exit time, rebuilt from the transform
// above.  With sinh^2(u) = w the inner integral becomes
//   (2c/pi) * int_{u_x}^inf du / (c^2 + u^2) * sinh(u) / sqrt(sinh^2 u - x)
// which has an integrable 1/sqrt endpoint and 1/u^2 decay.
inline double p_laplace_from_phi(double x, double c, double tol = 1e-9) {
  detail::require_nonneg_x(x, "p_laplace_from_phi");
  detail::require_positive(c, "p_laplace_from_phi");
  const double ux = detail::log_root_pair(x);
  auto f = [&](double r) {
    if (r <= 0) return 0.0;
    const double u = ux + r;
    double ratio;
    if (r > 40) {
      ratio = 1;
    } else {
      // sinh^2(u) - sinh^2(ux) = sinh(r) sinh(2ux + r)
      ratio = std::exp(detail::log_sinh(u) -
                       0.5 * (detail::log_sinh(r) + detail::log_sinh(2 * ux + r)));
      if (ux == 0) ratio = 1;
    }
    return 2 * c / pi / (c * c + u * u) * ratio;
  };
  return quad_semi_infinite(f, 1.0, tol).value;
}

inline double laplace_two_sided(double x, const ConeSpec& cone) {
  detail::require_symmetric(cone, "laplace_two_sided");
  detail::require_nonneg_x(x, "laplace_two_sided");
  const double zl = cone.zeta() * detail::log_root_pair(x);
  // 1 / (e^{zl} + e^{-zl})
  const double inv = std::exp(-zl) / (1 + std::exp(-2 * zl));
  return inv / (cone.c * std::sqrt(1 + x));
}

// Transform of the range exit time, consistent with range_density.
inline double laplace_range(double x, const ConeSpec& cone) {
  detail::require_nonneg_x(x, "laplace_range");
  const double c = cone.c;
  const double zh = cone.zeta_hat();
  const double l = detail::log_root_pair(x);
  const double s = zh * l;
  // l / (e^{s} - e^{-s}) = l / (2 sinh s), limit 1/(2 zh) at l = 0
  double ratio;
  if (s < 1e-6)
    ratio = 1 / (2 * zh) * (1 - s * s / 6);
  else if (s > 40)
    ratio = l * std::exp(-s);
  else
    ratio = l / (2 * std::sinh(s));
  return 4 / (c * c) * ratio / std::sqrt(1 + x);
}

struct DensityValue {
  double value = 0;
  bool negative = false;  // truncated series went below zero beyond rounding
  int K = 0;              // outer terms used (last index)
  int N = 0;              // largest inner index used
  double last_outer = 0;  // magnitude of the last outer term
  double abs_error = 0;   // last outer term plus rounding in the alternating sum
};

// Series for the density of the symmetric cone exit time,
//   f(t) = (sqrt2/c) sum_k (-1)^k t^{-1/2} e^{-w} w^{nu_k+1/2} nu_k
//          sum_n Gamma(nu_k+n)/Gamma(2nu_k+n+1) w^n/n!,  w = 1/(2t).
// Outer terms are combined in (k, k+1) pairs.
inline DensityValue exit_cone_density_detail(double t, const ConeSpec& cone,
                                             const SeriesTruncation& tr = SeriesTruncation::adaptive_tol()) {
  detail::require_symmetric(cone, "exit_cone_density");
  detail::check_truncation(tr);
  if (!(t > 0)) throw std::domain_error("exit_cone_density: t must be positive");
  const double c = cone.c;
  const double w = 1 / (2 * t);
  if (w > 1400) return {};  // far below double resolution of the density

  // rounding: exp of a log-magnitude L carries relative error ~ |L| eps,
  // and the inner sum of n terms ~ n eps
  double rounding = 0;
  auto outer = [&](int k, int& n_used) {
    const double nu = cone.nu(k);
    // log of (sqrt2/c) t^{-1/2} e^{-w} w^{nu+1/2} nu Gamma(nu)/Gamma(2nu+1)
    const double lp = std::log(std::numbers::sqrt2 / c) - 0.5 * std::log(t) - w +
                      (nu + 0.5) * std::log(w) + std::log(nu) + log_gamma(nu) -
                      log_gamma(2 * nu + 1);
    // scale the inner sum to keep its terms near unity for large w, and
    // express the inner tolerance in those scaled units
    const double shift = std::min(w, 600.0);
    SeriesTruncation inner = tr;
    if (tr.adaptive) inner.tail_tol = tr.tail_tol * 1e-3 * std::exp(-(lp + shift));
    const SeriesResult s = detail::m_half_kummer(nu, w, -shift, inner);
    n_used = s.terms - 1;
    const double mag = std::exp(lp + shift) * s.value;
    rounding += mag * (std::fabs(lp) + shift + s.terms + 8) * std::numeric_limits<double>::epsilon();
    return (k % 2 == 0) ? mag : -mag;
  };

  DensityValue out;
  double sum = 0;
  int k = 0;
  const int kcap = tr.adaptive ? tr.max_terms : tr.K;
  double prev_mag = INFINITY;
  while (k <= kcap) {
    int n0 = 0, n1 = 0;
    double pair = outer(k, n0);
    double mag = std::fabs(pair);
    out.N = std::max(out.N, n0);
    out.K = k;
    if (k + 1 <= kcap) {
      const double t1 = outer(k + 1, n1);
      pair += t1;
      mag = std::fabs(t1);
      out.N = std::max(out.N, n1);
      out.K = k + 1;
    }
    sum += pair;
    out.last_outer = mag;
    k += 2;
    if (tr.adaptive && mag <= tr.tail_tol && mag <= prev_mag) break;
    prev_mag = mag;
  }
  if (tr.adaptive && k > kcap && out.last_outer > tr.tail_tol)
    throw convergence_error("exit_cone_density: outer series did not converge");
  out.value = sum;
  out.abs_error = out.last_outer + rounding;
  // a fixed truncation is judged as it stands; an adaptive one only when
  // the sum is below zero by more than its error bound
  out.negative = sum < -(tr.adaptive ? out.abs_error : rounding);
  return out;
}

inline double exit_cone_density(double t, const ConeSpec& cone,
                                const SeriesTruncation& tr = SeriesTruncation::adaptive_tol()) {
  return exit_cone_density_detail(t, cone, tr).value;
}

// Tabulated CDF of the symmetric cone exit time, from the series density
// integrated on a log grid (Simpson per cell), with an exact power-law tail.
class ExitConeCdf {
public:
  explicit ExitConeCdf(const ConeSpec& cone, double t_lo = 1e-3, double t_hi = 1e6,
                       int cells = 6000)
      : log_lo_(std::log(t_lo)), log_hi_(std::log(t_hi)) {
    h_ = (log_hi_ - log_lo_) / cells;
    cdf_.assign(cells + 1, 0.0);
    auto g = [&](double u) {
      const double t = std::exp(u);
      return t * exit_cone_density(t, cone);
    };
    double acc = 0;
    double g0 = g(log_lo_);
    for (int i = 0; i < cells; ++i) {
      const double a = log_lo_ + i * h_;
      const double gm = g(a + h_ / 2), g1 = g(a + h_);
      acc += h_ / 6 * (g0 + 4 * gm + g1);
      cdf_[i + 1] = acc;
      g0 = g1;
    }
    total_ = acc;
  }

  // mass captured on [t_lo, t_hi]; the rest lies in the far tail
  double captured_mass() const { return total_; }

  double operator()(double t) const {
    if (!(t > 0)) return 0;
    const double u = std::log(t);
    if (u <= log_lo_) return 0;
    if (u >= log_hi_) return std::min(1.0, cdf_.back());
    const double pos = (u - log_lo_) / h_;
    const auto i = static_cast<std::size_t>(pos);
    const double fr = pos - static_cast<double>(i);
    return cdf_[i] + fr * (cdf_[i + 1] - cdf_[i]);
  }

private:
  double log_lo_, log_hi_, h_;
  double total_ = 0;
  std::vector<double> cdf_;
};

// F(c, delta) = int_0^inf ln(sinh(c z)) / cosh(delta z) dz
inline double log_sinh_cosh_integral(double c, double delta, double tol = 1e-12) {
  detail::require_positive(c, "log_sinh_cosh_integral");
  detail::require_positive(delta, "log_sinh_cosh_integral");
  auto f = [&](double z) {
    if (z <= 0) return 0.0;
    return detail::log_sinh(c * z) * std::exp(-detail::log_cosh(delta * z));
  };
  return quad_semi_infinite(f, delta, tol).value;
}

inline double expected_log_exit(const ConeSpec& cone, double tol = 1e-12) {
  detail::require_symmetric(cone, "expected_log_exit");
  return 2 * log_sinh_cosh_integral(cone.c, pi / 2, tol) + std::numbers::ln2 + euler_gamma;
}

// E[T] of the symmetric exit time from unit start, equal to E[sinh^2(B_T)]
inline double sinh_moment2(double c) {
  if (!(c > 0) || !(c < pi / 4))
    throw std::domain_error("sinh_moment2: need 0 < c < pi/4 (the mean is infinite otherwise)");
  return 0.5 * (1 / std::cos(2 * c) - 1);
}

inline double sinh_moment4(double c) {
  if (!(c > 0) || !(c < pi / 8))
    throw std::domain_error("sinh_moment4: need 0 < c < pi/8 (the moment is infinite otherwise)");
  return (1 / std::cos(4 * c) - 4 / std::cos(2 * c) + 3) / 8;
}

// int_0^inf sinh(cz)^p / cosh(pi z / 2) dz, p = 2 or 4
inline double sinh_moment_integral(double c, int p, double tol = 1e-13) {
  detail::require_positive(c, "sinh_moment_integral");
  if (!(c * p < pi / 2)) throw std::domain_error("sinh_moment_integral: integral diverges");
  auto f = [&](double z) {
    if (z <= 0) return 0.0;
    return std::exp(p * detail::log_sinh(c * z) - detail::log_cosh(pi * z / 2));
  };
  return quad_semi_infinite(f, pi / 2 - p * c, tol).value;
}

inline bool spitzer_moment_finite(double p, const ConeSpec& cone) {
  detail::require_positive(p, "spitzer_moment_finite");
  return p < pi / (2 * (cone.c + cone.d));
}

inline double tail_constant(double c) {
  detail::require_positive(c, "tail_constant");
  return 4 * c / pi;
}

// E[(ln T)_+^eta] for the one-sided exit time is finite iff eta < 1
inline bool tail_log_moment_finite(double eta) { return eta < 1; }

inline double ou_exit_from_bm_exit(double t_bm, const OuSpec& ou) {
  if (!(t_bm >= 0)) throw std::domain_error("ou_exit_from_bm_exit: t_bm must be >= 0");
  return ou.alpha_inv(t_bm);
}

enum class OuRegime { large_lambda, small_lambda };

inline double ou_mean_exit_asymptotics(const ConeSpec& cone, const OuSpec& ou, OuRegime regime) {
  detail::require_symmetric(cone, "ou_mean_exit_asymptotics");
  const double s = ou.z0 * ou.z0 / (2 * ou.D);
  if (regime == OuRegime::small_lambda) {
    if (!(cone.c < pi / 8))
      throw std::domain_error("ou_mean_exit_asymptotics: small-lambda expansion needs c < pi/8");
    return s * sinh_moment2(cone.c) - ou.lambda * s * s * sinh_moment4(cone.c) / 3;
  }
  detail::require_positive(ou.lambda, "ou_mean_exit_asymptotics");
  return (std::log(ou.lambda / ou.D) + 2 * std::log(ou.z0) + expected_log_exit(cone)) /
         (2 * ou.lambda);
}

}  // namespace winding
