#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "laws.hpp"
#include "rng.hpp"

namespace winding {

inline constexpr double inf = std::numeric_limits<double>::infinity();

struct SampleBatch {
  std::vector<double> values;
  std::uint64_t master_seed = 0;
  std::uint64_t first_stream = 0;
  std::string label;

  std::size_t n() const { return values.size(); }
};

class step_underflow_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline double nonzero_normal(RngStream& rng) {
  double z;
  do z = rng.normal();
  while (z == 0);
  return z;
}

// Maximum of a Brownian bridge from a to b with variance v over the
// interval, drawn by inversion.
inline double bridge_max(double a, double b, double v, RngStream& rng) {
  const double d = b - a;
  return 0.5 * (a + b + std::sqrt(d * d - 2 * v * std::log(rng.uniform())));
}

inline double bridge_min(double a, double b, double v, RngStream& rng) {
  return -bridge_max(-a, -b, v, rng);
}

// Probability that a Brownian bridge from a to b (both strictly inside)
// with variance v touches hi or lo.  The two one-barrier terms are added,
// which overstates the exact value by a term of order exp(-2 (hi-lo)^2 / v).
inline double bridge_exit_prob(double a, double b, double v, double lo, double hi) {
  double p = 0;
  if (hi < inf) p += std::exp(-2 * (hi - a) * (hi - b) / v);
  if (lo > -inf) p += std::exp(-2 * (a - lo) * (b - lo) / v);
  return p;
}

// First exit from (lo, hi) of a Brownian motion run on a clock s(t): the
// increment over [t, t'] is Gaussian with variance s(t') - s(t).  Coarse
// steps of length dt; a step whose bridge may touch a barrier is refined
// by Levy midpoint sampling down to dt / 2^levels.
template <class Clock>
class BarrierWalk {
public:
  BarrierWalk(double lo, double hi, double dt, int levels, Clock clock, RngStream& rng,
              double tol = 1e-10)
      : lo_(lo), hi_(hi), dt_(dt), levels_(levels), clock_(clock), rng_(rng), tol_(tol) {}

  // returns the exit time; x_exit receives the barrier that was hit
  double run(double x0, double* x_exit = nullptr) {
    double t = 0, s = clock_(0.0), x = x0;
    for (;;) {
      const double t1 = t + dt_, s1 = clock_(t1);
      const double x1 = x + std::sqrt(s1 - s) * rng_.normal();
      double hit;
      if (segment(t, s, x, t1, s1, x1, 0, hit)) {
        if (x_exit) *x_exit = last_barrier_;
        return hit;
      }
      t = t1;
      s = s1;
      x = x1;
    }
  }

private:
  bool segment(double ta, double sa, double xa, double tb, double sb, double xb, int level,
               double& hit) {
    const bool out = xb >= hi_ || xb <= lo_;
    const double p = out ? 1.0 : bridge_exit_prob(xa, xb, sb - sa, lo_, hi_);
    if (p <= tol_) return false;
    if (level < levels_) {
      const double tm = 0.5 * (ta + tb), sm = clock_(tm);
      const double w = (sm - sa) / (sb - sa);
      const double xm = xa + w * (xb - xa) + std::sqrt(w * (sb - sm)) * rng_.normal();
      if (segment(ta, sa, xa, tm, sm, xm, level + 1, hit)) return true;
      return segment(tm, sm, xm, tb, sb, xb, level + 1, hit);
    }
    if (out || rng_.uniform() < p) {
      hit = 0.5 * (ta + tb);
      if (out)
        last_barrier_ = xb >= hi_ ? hi_ : lo_;
      else
        last_barrier_ = (hi_ - xb < xb - lo_) ? hi_ : lo_;
      return true;
    }
    return false;
  }

  double lo_, hi_, dt_;
  int levels_;
  Clock clock_;
  RngStream& rng_;
  double tol_;
  double last_barrier_ = 0;
};

struct IdentityClock {
  double operator()(double t) const { return t; }
};

}  // namespace detail

// Exact in law: T_c = c^2 / N^2 for the first passage of level c.
inline double sample_one_sided_hit(double c, RngStream& rng) {
  if (!(c > 0)) throw std::domain_error("sample_one_sided_hit: c must be positive");
  const double z = detail::nonzero_normal(rng);
  return c * c / (z * z);
}

inline constexpr int refine_levels = 10;

inline double sample_two_sided_hit(double c, double dt, RngStream& rng) {
  if (!(c > 0) || !(dt > 0)) throw std::domain_error("sample_two_sided_hit: c and dt must be positive");
  detail::BarrierWalk<detail::IdentityClock> walk(-c, c, dt, refine_levels, {}, rng);
  return walk.run(0.0);
}

struct ExpFunctional {
  double A = 0;
  double beta_end = 0;
  bool capped = false;  // stopped early because A exceeded the cap
};

// A_stop = int_0^stop exp(2 beta_s) ds by the trapezoid rule on a uniform
// grid of step <= dt.  With a finite a_cap the walk stops once A > a_cap.
inline ExpFunctional exp_functional(double stop, double dt, RngStream& rng, double a_cap = inf) {
  if (!(stop > 0) || !(dt > 0)) throw std::domain_error("exp_functional: stop and dt must be positive");
  const double steps = std::ceil(stop / dt);
  const auto n = static_cast<std::uint64_t>(steps);
  const double h = stop / steps, sh = std::sqrt(h);
  double b = 0, e = 1, acc = 0;
  ExpFunctional out;
  for (std::uint64_t i = 0; i < n; ++i) {
    b += sh * rng.normal();
    const double e1 = std::exp(2 * b);
    acc += e + e1;
    e = e1;
    if (0.5 * h * acc > a_cap) {
      out.capped = true;
      break;
    }
  }
  out.A = 0.5 * h * acc;
  out.beta_end = b;
  return out;
}

inline double default_cone_dt(double c) { return c * c / 200; }

// Exit time of the winding angle from (-c, c) for planar BM started at z0:
// z0^2 A_tau with tau the exit time of an independent linear BM.
inline double sample_exit_cone(const ConeSpec& cone, double z0, double dt, RngStream& rng) {
  detail::require_symmetric(cone, "sample_exit_cone");
  if (!(z0 > 0)) throw std::domain_error("sample_exit_cone: z0 must be positive");
  const double tau = sample_two_sided_hit(cone.c, dt, rng);
  return z0 * z0 * exp_functional(tau, dt, rng).A;
}

struct CappedSample {
  double value = 0;
  bool capped = false;  // value is a lower bound, the true sample exceeds it
};

// One-sided variant, T_c = z0^2 A_{c^2/N^2}.  The clock has infinite mean,
// so the functional is stopped once it exceeds a_cap.
inline CappedSample sample_exit_cone_one_sided(double c, double z0, double dt, RngStream& rng,
                                               double a_cap = 1e8) {
  if (!(z0 > 0)) throw std::domain_error("sample_exit_cone_one_sided: z0 must be positive");
  const double tau = sample_one_sided_hit(c, rng);
  const ExpFunctional f = exp_functional(tau, dt, rng, a_cap);
  return {z0 * z0 * f.A, f.capped};
}

struct RangeExit {
  double T = 0;          // exit time of the angle range, A at the range time
  double tau = 0;        // time at which the range of gamma first reaches c
  double tau_half = 0;   // exit time of gamma from (-c/2, c/2) on the same path
  double beta_end = 0;   // independent BM beta at time tau
};

// Range time of linear BM followed by the exponential functional.
inline RangeExit sample_range_exit_detail(double c, double dt, RngStream& rng) {
  if (!(c > 0) || !(dt > 0)) throw std::domain_error("sample_range_exit: c and dt must be positive");
  const double tol = 1e-10;
  double M = 0, m = 0;  // running extremes
  double t = 0, x = 0;
  double half = -1;
  double hit = -1;
  const double leaf = dt / (1 << refine_levels);

  // recursive over a bridge from (ta, xa) to (tb, xb); returns true once the range reaches c
  auto seg = [&](auto&& self, double ta, double xa, double tb, double xb) -> bool {
    const double h = tb - ta;
    const double hi = m + c, lo = M - c;
    const bool out = xb >= hi || xb <= lo;
    const double p = out ? 1.0 : detail::bridge_exit_prob(xa, xb, h, lo, hi);
    if (p > tol && h > 1.5 * leaf) {
      const double tm = 0.5 * (ta + tb);
      const double xm = 0.5 * (xa + xb) + std::sqrt(h / 4) * rng.normal();
      if (self(self, ta, xa, tm, xm)) return true;
      return self(self, tm, xm, tb, xb);
    }
    if (out || (p > tol && rng.uniform() < p)) {
      hit = 0.5 * (ta + tb);
      if (half < 0) half = hit;
      return true;
    }
    M = std::max(M, detail::bridge_max(xa, xb, h, rng));
    m = std::min(m, detail::bridge_min(xa, xb, h, rng));
    if (half < 0 && (M >= c / 2 || m <= -c / 2)) half = tb;
    return false;
  };
  for (;;) {
    const double x1 = x + std::sqrt(dt) * rng.normal();
    if (seg(seg, t, x, t + dt, x1)) break;
    t += dt;
    x = x1;
  }
  RangeExit r;
  r.tau = hit;
  r.tau_half = std::min(half, hit);
  const ExpFunctional f = exp_functional(hit, dt, rng);
  r.T = f.A;
  r.beta_end = f.beta_end;
  return r;
}

inline double sample_range_exit(double c, double dt, RngStream& rng) {
  return sample_range_exit_detail(c, dt, rng).T;
}

// ---------------------------------------------------------------------------
// Direct simulation of planar BM / complex OU with winding tracking.

struct WindingOptions {
  double eps = 0.01;   // per-component step variance relative to |Z|^2
  double dt = inf;     // largest real-time step
  double lambda = 0;   // OU mean reversion, 0 for Brownian motion
  double D = 0.5;      // diffusion coefficient, 1/2 is standard planar BM
  bool dives = true;   // log-polar stepping deep inside the natural scale
  double dive_depth = 1e-3;
  double dive_kappa = 0.25;
  double cross_tol = 1e-10;
  double upper = inf;  // angular barriers; the walk stops on leaving (lower, upper)
  double lower = -inf;
  bool track_max = false;
  double step_floor = 1e-14;  // relative to the horizon, checked without dives
  int record_stride = 0;      // keep every k-th grid point in the path, 0 for none
  double noise_phase = 0;     // rotates each Gaussian pair driving the walk
};

struct WindingState {
  double t = 0;
  double log_r = 0;
  double theta = 0;
  double theta_max = 0;
  double clock = 0;  // int_0^t ds / |Z_s|^2
  bool exited = false;
  long steps = 0;
  long dive_steps = 0;
};

struct WindingPath {
  std::vector<double> times;
  std::vector<double> log_modulus;
  std::vector<double> angle;
  std::vector<double> clock;
  WindingState end;
};

namespace detail {

// State is kept in log-polar form (log|Z|, theta), so the modulus never
// under- or overflows.  Near the natural scale sqrt(z0^2 + 2Dt) the walk
// takes exact Gaussian steps of Z with per-step variance eps |Z|^2; the
// angle increment is the principal argument of Z_{k+1}/Z_k and the clock
// the exact integral of 1/|Z|^2 along the chord.  When |Z|^2 falls below
// dive_depth times the squared natural scale, (log|Z|, theta) is advanced
// as a planar BM in the clock H with steps growing like the squared
// distance to the exit level, bridge-refined near every event.
class PlanarWalker {
public:
  PlanarWalker(const WindingOptions& o, double z0, RngStream& rng) : o_(o), rng_(rng), z0_(z0) {
    if (!(z0 > 0)) throw std::domain_error("simulate_planar_winding: z0 must be positive");
    if (!(o.eps > 0) || !(o.dt > 0) || !(o.D > 0) || !(o.lambda >= 0))
      throw std::domain_error("simulate_planar_winding: invalid step options");
    s_.log_r = std::log(z0);
    two_d_ = 2 * o.D;
    cos_ph_ = std::cos(o.noise_phase);
    sin_ph_ = std::sin(o.noise_phase);
  }

  WindingState run(double horizon, WindingPath* path) {
    if (!(horizon > 0)) throw std::domain_error("simulate_planar_winding: horizon must be positive");
    T_ = horizon;
    path_ = path;
    record(true);
    update_entry_level();
    while (!done_) {
      if (o_.dives && s_.log_r < entry_level_) {
        dive();
        update_entry_level();
      } else {
        cartesian_step();
        if ((s_.steps & 31) == 0) update_entry_level();
      }
    }
    record(true);
    s_.clock = H2_ / two_d_;
    return s_;
  }

private:
  // squared natural scale: variance of the OU (or BM) position at time t plus z0^2 e^{-2 lambda t}
  double scale2(double t) const {
    if (o_.lambda == 0) return z0_ * z0_ + two_d_ * t;
    const double l = o_.lambda;
    return z0_ * z0_ * std::exp(-2 * l * t) - o_.D * std::expm1(-2 * l * t) / l;
  }

  void update_entry_level() { entry_level_ = 0.5 * std::log(o_.dive_depth * scale2(s_.t)); }

  void normal_pair(double& g1, double& g2) {
    const double a = rng_.normal(), b = rng_.normal();
    g1 = cos_ph_ * a - sin_ph_ * b;
    g2 = sin_ph_ * a + cos_ph_ * b;
  }

  void add_time(double h) {
    const double y = h - comp_;
    const double tt = s_.t + y;
    comp_ = (tt - s_.t) - y;
    s_.t = tt;
  }

  void record(bool force) {
    if (!path_ || o_.record_stride <= 0) return;
    if (!force && (s_.steps % o_.record_stride) != 0) return;
    if (!path_->times.empty() && path_->times.back() == s_.t) return;
    path_->times.push_back(s_.t);
    path_->log_modulus.push_back(s_.log_r);
    path_->angle.push_back(s_.theta);
    path_->clock.push_back(H2_ / two_d_);
  }

  // angular barrier test on a step with clock increment v
  bool crossed(double ta, double tb, double v) {
    if (tb >= o_.upper || tb <= o_.lower) return true;
    if (o_.upper == inf && o_.lower == -inf) return false;
    const double p = bridge_exit_prob(ta, tb, v, o_.lower, o_.upper);
    return p > o_.cross_tol && rng_.uniform() < p;
  }

  void cartesian_step() {
    const double r2 = std::exp(2 * s_.log_r);
    double h = std::min(o_.dt, o_.eps * r2 / two_d_);
    bool last = false;
    if (h >= T_ - s_.t) {
      h = T_ - s_.t;
      last = true;
    }
    if (!o_.dives && !last && T_ < inf && h < o_.step_floor * T_)
      throw step_underflow_error("simulate_planar_winding: adaptive step below floor");
    double a = 1, var = two_d_ * h;
    if (o_.lambda > 0) {
      a = std::exp(-o_.lambda * h);
      var = -o_.D * std::expm1(-2 * o_.lambda * h) / o_.lambda;
    }
    const double rho = std::sqrt(var / r2);
    double g1, g2;
    normal_pair(g1, g2);
    const double vx = a + rho * g1;
    const double vy = rho * g2;
    const double dth = std::atan2(vy, vx);
    const double dl = 0.5 * std::log(vx * vx + vy * vy);
    // exact clock along the chord from Z to Z v
    const double chord = std::fabs(vy) > 1e-12 ? dth / vy : 1 / vx;
    const double dH2 = two_d_ * h * chord / r2;

    const double th0 = s_.theta, th1 = th0 + dth;
    if (o_.track_max) s_.theta_max = std::max(s_.theta_max, bridge_max(th0, th1, dH2, rng_));
    H2_ += dH2;
    s_.log_r += dl;
    s_.theta = th1;
    ++s_.steps;
    if (last)
      s_.t = T_;
    else
      add_time(h);
    if (crossed(th0, th1, dH2)) {
      s_.exited = true;
      done_ = true;
    }
    if (last) done_ = true;
    record(done_);
  }

  // The dive advances xi = log|Z| + lambda (t - t_entry), a BM in H2, and
  // theta, a BM in H2; real time is the trapezoid of e^{2 log|Z|} / (2D).
  void dive() {
    const double exit_level = entry_level_ + 1;
    const double t_entry = s_.t;
    double xi = s_.log_r;
    const double leaf = o_.eps;
    for (;;) {
      const double offset = o_.lambda * (s_.t - t_entry);
      const double target = exit_level + offset;
      const double d = target - xi;
      const double v = std::max(leaf, o_.dive_kappa * o_.dive_kappa * d * d);
      const double sv = std::sqrt(v);
      double g1, g2;
      normal_pair(g1, g2);
      const double xb = xi + sv * g1;
      const double thb = s_.theta + sv * g2;
      const int st = dive_segment(xi, s_.theta, xb, thb, v, target, t_entry, leaf);
      if (st == 0) {
        xi = xb;
        continue;
      }
      s_.log_r = xi_end_ - o_.lambda * (s_.t - t_entry);
      return;
    }
  }

  // 0: continue, 1: back at the exit level, 2: walk finished
  int dive_segment(double xa, double tha, double xb, double thb, double v, double target,
                   double t_entry, double leaf) {
    const double off = o_.lambda * (s_.t - t_entry);
    const double dA = v / (2 * two_d_) * (std::exp(2 * (xa - off)) + std::exp(2 * (xb - off)));
    const bool surface_out = xb >= target;
    const double ps = surface_out ? 1.0 : std::exp(-2 * (target - xa) * (target - xb) / v);
    const bool ang_out = thb >= o_.upper || thb <= o_.lower;
    const double pa = ang_out ? 1.0 : bridge_exit_prob(tha, thb, v, o_.lower, o_.upper);
    const bool late = s_.t + dA >= T_;
    const bool event = ps > o_.cross_tol || pa > o_.cross_tol || late;
    if (event && v > 1.5 * leaf) {
      const double xm = 0.5 * (xa + xb) + std::sqrt(v / 4) * rng_.normal();
      const double thm = 0.5 * (tha + thb) + std::sqrt(v / 4) * rng_.normal();
      const int st = dive_segment(xa, tha, xm, thm, v / 2, target, t_entry, leaf);
      if (st != 0) return st;
      return dive_segment(xm, thm, xb, thb, v / 2, target, t_entry, leaf);
    }
    ++s_.dive_steps;
    ++s_.steps;
    if (o_.track_max) s_.theta_max = std::max(s_.theta_max, bridge_max(tha, thb, v, rng_));
    H2_ += v;
    s_.theta = thb;
    xi_end_ = xb;
    if (late) {
      s_.t = T_;
      s_.log_r = xb - off;
      done_ = true;
      record(true);
      return 2;
    }
    add_time(dA);
    if (ang_out || (pa > o_.cross_tol && rng_.uniform() < pa)) {
      s_.exited = true;
      s_.log_r = xb - o_.lambda * (s_.t - t_entry);
      done_ = true;
      record(true);
      return 2;
    }
    if (path_ && o_.record_stride > 0 && s_.steps % o_.record_stride == 0) {
      s_.log_r = xb - o_.lambda * (s_.t - t_entry);
      record(false);
    }
    if (surface_out || (ps > o_.cross_tol && rng_.uniform() < ps)) return 1;
    return 0;
  }

  WindingOptions o_;
  RngStream& rng_;
  double z0_;
  double two_d_;
  double cos_ph_ = 1, sin_ph_ = 0;
  WindingState s_;
  double H2_ = 0;  // 2D int ds/|Z|^2, the clock of (beta, gamma)
  double comp_ = 0;
  double T_ = 0;
  double entry_level_ = -inf;
  double xi_end_ = 0;
  bool done_ = false;
  WindingPath* path_ = nullptr;
};

}  // namespace detail

// End state only; the full grid is kept when opts.record_stride > 0.
inline WindingState simulate_winding_end(double horizon, double z0, const WindingOptions& opts,
                                         RngStream& rng) {
  detail::PlanarWalker w(opts, z0, rng);
  return w.run(horizon, nullptr);
}

inline WindingPath simulate_planar_winding(double horizon, double z0, double dt, RngStream& rng,
                                           WindingOptions opts = {}) {
  opts.dt = dt;
  if (opts.record_stride <= 0) opts.record_stride = 1;
  WindingPath path;
  detail::PlanarWalker w(opts, z0, rng);
  path.end = w.run(horizon, &path);
  return path;
}

enum class HitMode { exact, simulated };

// theta at the first time an independent linear BM delta hits b (or the
// running maximum of theta when supremum is set).
inline double sample_winding_at_indep_hit(double b, HitMode mode, RngStream& rng,
                                          bool supremum = false, WindingOptions opts = {}) {
  if (!(b > 0)) throw std::domain_error("sample_winding_at_indep_hit: b must be positive");
  if (mode == HitMode::exact) {
    const double v = arcsinh_a(b) * std::tan(pi * (rng.uniform() - 0.5));
    return supremum ? std::fabs(v) : v;
  }
  const double horizon = sample_one_sided_hit(b, rng);
  opts.track_max = supremum;
  const WindingState s = simulate_winding_end(horizon, 1.0, opts, rng);
  return supremum ? s.theta_max : s.theta;
}

// Clock H at the first time an independent linear BM hits b
inline double sample_clock_at_indep_hit(double b, RngStream& rng, WindingOptions opts = {}) {
  const double horizon = sample_one_sided_hit(b, rng);
  return simulate_winding_end(horizon, 1.0, opts, rng).clock;
}

enum class OuMode { time_change, direct };

inline double sample_ou_exit(const ConeSpec& cone, const OuSpec& ou, double dt, RngStream& rng,
                             OuMode mode = OuMode::time_change, WindingOptions opts = {}) {
  detail::require_symmetric(cone, "sample_ou_exit");
  if (mode == OuMode::time_change) {
    // exit time of the Brownian image B_alpha, which starts at z0 and runs on the clock alpha
    const double t_bm = sample_exit_cone(cone, ou.z0, dt, rng);
    return ou_exit_from_bm_exit(t_bm, ou);
  }
  opts.lambda = ou.lambda;
  opts.D = ou.D;
  opts.upper = cone.c;
  opts.lower = -cone.c;
  return simulate_winding_end(inf, ou.z0, opts, rng).t;
}

// First time e^{lambda t} U_t = b for a real OU process U started at 0,
// simulated with exact transitions on steps dt (bridge-refined near b).
inline double sample_ou_boundary_hit(double b, const OuSpec& ou, double dt, RngStream& rng) {
  if (!(b > 0) || !(dt > 0)) throw std::domain_error("sample_ou_boundary_hit: b and dt must be positive");
  // X_t = e^{lambda t} U_t has independent Gaussian increments of variance
  // alpha(t') - alpha(t), i.e. the exact OU transition rescaled
  auto clock = [ou](double t) { return ou.alpha(t); };
  detail::BarrierWalk<decltype(clock)> walk(-inf, b, dt, refine_levels, clock, rng);
  return walk.run(0.0);
}

// Winding of Z^lambda (from z0) at the hitting time above, for an independent U.
inline double sample_ou_winding_at_hit(double b, const OuSpec& ou, double dt, RngStream& rng,
                                       WindingOptions opts = {}) {
  const double horizon = sample_ou_boundary_hit(b, ou, dt, rng);
  opts.lambda = ou.lambda;
  opts.D = ou.D;
  return simulate_winding_end(horizon, ou.z0, opts, rng).theta;
}

}  // namespace winding
