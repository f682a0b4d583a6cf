#include <cmath>
#include <set>

#include <boost/math/special_functions/bessel.hpp>
#include <gtest/gtest.h>

#include <winding/verify.hpp>

using namespace winding;

namespace {

constexpr std::uint64_t kSeed = 20240611;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

template <class Fn>
SampleBatch draw(std::size_t n, std::uint64_t first_stream, Fn fn) {
  return generate_batch(n, kSeed, first_stream, "test", fn);
}

SampleBatch scaled(SampleBatch b, double k) {
  for (double& v : b.values) v *= k;
  return b;
}

// E[exp(i nu theta_t)] for planar BM started at 1
double theta_charfn(double nu, double t) {
  const double z = 1 / (4 * t);
  nu = std::fabs(nu);
  return std::sqrt(pi / (8 * t)) * std::exp(-z) *
         (boost::math::cyl_bessel_i((nu - 1) / 2, z) + boost::math::cyl_bessel_i((nu + 1) / 2, z));
}

}  // namespace

TEST(Rng, PhiloxKnownAnswer) {
  const auto out = philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0});
  EXPECT_EQ(out[0], 0xd16cfe09u);
  EXPECT_EQ(out[1], 0x94fdccebu);
  EXPECT_EQ(out[2], 0x5001e420u);
  EXPECT_EQ(out[3], 0x24126ea1u);
  const auto zero = philox4x32({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(zero[0], 0x6627e8d5u);
  EXPECT_EQ(zero[3], 0x9b00dbd8u);
}

TEST(Rng, StreamsReproducibleAndDistinct) {
  RngStream a(7, 3), b(7, 3), c(7, 4), d(8, 3);
  std::set<double> seen;
  for (int i = 0; i < 1000; ++i) {
    const double x = a.normal();
    EXPECT_EQ(x, b.normal());
    seen.insert(c.normal());
    seen.insert(d.normal());
    seen.insert(x);
  }
  EXPECT_EQ(seen.size(), 3000u);
  EXPECT_EQ(a.master_seed(), 7u);
  EXPECT_EQ(a.stream_id(), 3u);
}

TEST(Rng, UniformAndNormalMoments) {
  RngStream r(1, 0);
  double su = 0, sn = 0, sn2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GT(u, 0);
    ASSERT_LT(u, 1);
    su += u;
    const double z = r.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 3 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(sn / n, 0, 3 / std::sqrt(double(n)));
  EXPECT_NEAR(sn2 / n, 1, 3 * std::sqrt(2.0 / n));
}

TEST(Batch, IndependentOfThreadCount) {
  auto fn = [](RngStream& rng) { return sample_exit_cone(ConeSpec(0.5), 1, default_cone_dt(0.5), rng); };
  const SampleBatch a = generate_batch(3000, 99, 10, "x", fn, 1);
  const SampleBatch b = generate_batch(3000, 99, 10, "x", fn, 3);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.first_stream, 10u);
  RngStream r(99, 15);
  EXPECT_EQ(a.values[5], fn(r));
}

TEST(Batch, PropagatesErrors) {
  EXPECT_THROW(generate_batch(600, 1, 0, "x", [](RngStream& r) { return sample_one_sided_hit(-1, r); }, 2),
               std::domain_error);
}

TEST(OneSidedHit, MedianAndScaling) {
  const double c = 0.8;
  const SampleBatch b = draw(100000, 0, [&](RngStream& r) { return sample_one_sided_hit(c, r); });
  std::vector<double> v = b.values;
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  // c^2 / q^2 with q the 0.75 normal quantile
  const double q = 0.6744897501960817;
  const double med = c * c / (q * q);
  EXPECT_NEAR(v[v.size() / 2] / med, 1, 0.02);
  EXPECT_NEAR(c * c / 0.4549, med, 1e-3);

  const SampleBatch big = draw(100000, 200000, [&](RngStream& r) { return sample_one_sided_hit(2 * c, r); });
  EXPECT_TRUE(ks_two_sample(big, scaled(b, 4)).pass);
  EXPECT_FALSE(ks_two_sample(big, scaled(b, 2)).pass);
}

TEST(OneSidedHit, InverseRootMoment) {
  const double c = 0.6;
  const SampleBatch b = draw(100000, 0, [&](RngStream& r) { return sample_one_sided_hit(c, r); });
  const MomentReport m = moment_check(b, [](double t) { return 1 / std::sqrt(2 * pi * t); },
                                      laplace_one_sided(0, c) * pi * c / (pi * c));
  EXPECT_TRUE(m.pass) << m.z_score;
}

TEST(TwoSidedHit, Moments) {
  const SampleBatch b = draw(30000, 0, [](RngStream& r) { return sample_two_sided_hit(1, default_cone_dt(1), r); });
  EXPECT_TRUE(moment_check(b, [](double t) { return t; }, 1).pass);
  EXPECT_TRUE(moment_check(b, [](double t) { return t * t; }, 5.0 / 3).pass);
  const MomentReport m = moment_check(b, [](double t) { return std::exp(-t / 2); }, 1 / std::cosh(1.0));
  EXPECT_TRUE(m.pass) << m.z_score;
  EXPECT_NEAR(1 / std::cosh(1.0), 0.6481, 1e-4);
}

TEST(TwoSidedHit, ScaleAndStepInvariance) {
  const double c = 0.3;
  const SampleBatch b = draw(20000, 0, [&](RngStream& r) { return sample_two_sided_hit(c, c * c / 200, r); });
  EXPECT_TRUE(moment_check(b, [](double t) { return t; }, c * c).pass);
  const SampleBatch h = draw(20000, 50000, [&](RngStream& r) { return sample_two_sided_hit(c, c * c / 400, r); });
  EXPECT_TRUE(ks_two_sample(b, h).pass);
}

TEST(ExpFunctional, MeanAndSmallTime) {
  const SampleBatch b = draw(20000, 0, [](RngStream& r) { return exp_functional(1, 1e-3, r).A; });
  const MomentReport m = moment_check(b, [](double a) { return a; }, std::expm1(2.0) / 2);
  EXPECT_TRUE(m.pass) << m.z_score;
  const SampleBatch s = draw(2000, 0, [](RngStream& r) { return exp_functional(1e-4, 1e-5, r).A / 1e-4; });
  double mean = 0;
  for (double v : s.values) mean += v / s.n();
  EXPECT_NEAR(mean, 1, 1e-2);
}

TEST(ExpFunctional, PartialFinalStepAndCap) {
  RngStream r(3, 0);
  const ExpFunctional f = exp_functional(0.0105, 1e-3, r);
  EXPECT_GT(f.A, 0);
  EXPECT_FALSE(f.capped);
  RngStream q(3, 1);
  const ExpFunctional g = exp_functional(1e6, 0.01, q, 10.0);
  EXPECT_TRUE(g.capped);
  EXPECT_GT(g.A, 10);
  EXPECT_THROW(exp_functional(0, 1, r), std::domain_error);
}

TEST(ExpFunctional, Bougerol) {
  const std::size_t n = 20000;
  const SampleBatch lhs = draw(n, 0, [](RngStream& r) { return std::sinh(exp_functional(1, 1e-3, r).beta_end); });
  const SampleBatch rhs = draw(n, n, [](RngStream& r) {
    const double a = exp_functional(1, 1e-3, r).A;
    return std::sqrt(a) * r.normal();
  });
  EXPECT_TRUE(ks_two_sample(lhs, rhs).pass);
}

TEST(ExitCone, MeanAtEighth) {
  const double c = pi / 8;
  const SampleBatch b = draw(50000, 0, [&](RngStream& r) { return sample_exit_cone(ConeSpec(c), 1, default_cone_dt(c), r); });
  const MomentReport m = moment_check(b, [](double t) { return t; }, sinh_moment2(c));
  EXPECT_TRUE(m.pass) << m.z_score;
}

TEST(ExitCone, StartPointScaling) {
  const ConeSpec cone(pi / 4);
  const double dt = default_cone_dt(cone.c);
  const SampleBatch one = draw(20000, 0, [&](RngStream& r) { return sample_exit_cone(cone, 1, dt, r); });
  const SampleBatch two = draw(20000, 20000, [&](RngStream& r) { return sample_exit_cone(cone, 2, dt, r); });
  EXPECT_TRUE(ks_two_sample(two, scaled(one, 4)).pass);
  EXPECT_FALSE(ks_two_sample(two, one).pass);
  RngStream a(5, 5), b(5, 5);
  EXPECT_DOUBLE_EQ(sample_exit_cone(cone, 3, dt, a), 9 * sample_exit_cone(cone, 1, dt, b));
}

TEST(ExitCone, MatchesSeriesDensity) {
  const ConeSpec cone(pi / 4);
  const ExitConeCdf cdf(cone);
  const SampleBatch b = draw(20000, 0, [&](RngStream& r) { return sample_exit_cone(cone, 1, default_cone_dt(cone.c), r); });
  const KsReport k = ks_one_sample(b, cdf);
  EXPECT_TRUE(k.pass) << k.statistic;
}

TEST(ExitCone, OneSidedCapFlag) {
  RngStream r(11, 0);
  int capped = 0;
  for (int i = 0; i < 200; ++i) {
    const CappedSample s = sample_exit_cone_one_sided(0.5, 1, 0.01, r, 10.0);
    EXPECT_GT(s.value, 0);
    if (s.capped) {
      ++capped;
      EXPECT_GT(s.value, 10);
    }
  }
  EXPECT_GT(capped, 0);
  EXPECT_LT(capped, 200);
}

TEST(Winding, PathInvariants) {
  RngStream r(kSeed, 1);
  const WindingPath p = simulate_planar_winding(5, 1, 0.01, r);
  ASSERT_GT(p.times.size(), 100u);
  EXPECT_EQ(p.times.front(), 0);
  EXPECT_EQ(p.angle.front(), 0);
  EXPECT_EQ(p.clock.front(), 0);
  EXPECT_EQ(p.log_modulus.front(), 0);
  EXPECT_DOUBLE_EQ(p.times.back(), 5);
  for (std::size_t i = 1; i < p.times.size(); ++i) {
    EXPECT_GT(p.times[i], p.times[i - 1]);
    EXPECT_GE(p.clock[i], p.clock[i - 1]);
    EXPECT_LT(std::fabs(p.angle[i] - p.angle[i - 1]), pi);
    EXPECT_LE(p.times[i] - p.times[i - 1], 0.01 * (1 + 1e-12));
  }
  EXPECT_EQ(p.end.theta, p.angle.back());
  EXPECT_DOUBLE_EQ(p.end.clock, p.clock.back());
}

TEST(Winding, StepUnderflow) {
  WindingOptions o;
  o.dives = false;
  o.step_floor = 1e-2;
  RngStream r(1, 1);
  EXPECT_THROW(simulate_winding_end(10, 1, o, r), step_underflow_error);
}

TEST(Winding, SymmetricAngle) {
  const SampleBatch b = draw(20000, 0, [](RngStream& r) { return simulate_winding_end(1, 1, {}, r).theta; });
  EXPECT_TRUE(moment_check(b, [](double x) { return x; }, 0).pass);
}

TEST(Winding, AngleCharacteristicFunction) {
  const double t = 10;
  const SampleBatch b = draw(20000, 0, [&](RngStream& r) { return simulate_winding_end(t, 1, {}, r).theta; });
  for (double nu : {0.25, 0.5, 1.0, 2.0}) {
    const MomentReport m = moment_check(b, [nu](double x) { return std::cos(nu * x); }, theta_charfn(nu, t));
    EXPECT_TRUE(m.pass) << nu << " z=" << m.z_score;
  }
}

TEST(Winding, SkewProduct) {
  const std::size_t n = 10000;
  const SampleBatch theta = draw(n, 0, [](RngStream& r) { return simulate_winding_end(1, 1, {}, r).theta; });
  const SampleBatch sub = draw(n, n, [](RngStream& r) {
    const double h = simulate_winding_end(1, 1, {}, r).clock;
    return std::sqrt(h) * r.normal();
  });
  EXPECT_TRUE(ks_two_sample(theta, sub).pass);
}

TEST(Winding, RotationEquivariance) {
  const std::size_t n = 10000;
  WindingOptions rot;
  rot.noise_phase = 1.0;
  const SampleBatch a = draw(n, 0, [](RngStream& r) { return simulate_winding_end(2, 1, {}, r).theta; });
  const SampleBatch b = draw(n, n, [&](RngStream& r) { return simulate_winding_end(2, 1, rot, r).theta; });
  EXPECT_TRUE(ks_two_sample(a, b).pass);
}

TEST(Winding, ClockAsymptotics) {
  const double t = 1e6, L = std::log(t);
  const SampleBatch b = draw(4000, 0, [&](RngStream& r) { return L / (2 * std::sqrt(simulate_winding_end(t, 1, {}, r).clock)); });
  const double d = ks_statistic(b.values, [](double x) { return x <= 0 ? 0 : 2 * normal_cdf(x) - 1; });
  EXPECT_LE(d, 0.05);
}

TEST(IndepHit, ExactModeScale) {
  const double b = std::sinh(1.0);
  const SampleBatch s = draw(20000, 0, [&](RngStream& r) { return sample_winding_at_indep_hit(b, HitMode::exact, r); });
  // quantile coupling: the KS distance is at the ECDF granularity
  EXPECT_LE(ks_statistic(s.values, [](double x) { return cauchy_cdf(x, 1); }), 2.0 / std::sqrt(20000.0));
  const SampleBatch m = draw(20000, 0, [&](RngStream& r) { return sample_winding_at_indep_hit(b, HitMode::exact, r, true); });
  for (std::size_t i = 0; i < m.n(); ++i) EXPECT_EQ(m.values[i], std::fabs(s.values[i]));
}

TEST(IndepHit, SimulatedMatchesExact) {
  const std::size_t n = 10000;
  const SampleBatch sim = draw(n, 0, [](RngStream& r) { return sample_winding_at_indep_hit(1, HitMode::simulated, r); });
  const SampleBatch ex = draw(n, n, [](RngStream& r) { return sample_winding_at_indep_hit(1, HitMode::exact, r); });
  EXPECT_TRUE(ks_two_sample(sim, ex).pass);
  EXPECT_TRUE(ks_one_sample(sim, [](double x) { return cauchy_cdf(x, arcsinh_a(1)); }).pass);
}

TEST(IndepHit, SupremumAndClock) {
  const std::size_t n = 10000;
  const double a = arcsinh_a(1);
  const SampleBatch sup = draw(n, 0, [](RngStream& r) { return sample_winding_at_indep_hit(1, HitMode::simulated, r, true); });
  const KsReport k = ks_one_sample(sup, [a](double x) { return x <= 0 ? 0 : 2 * cauchy_cdf(x, a) - 1; });
  EXPECT_TRUE(k.pass) << k.statistic;
  const SampleBatch h = draw(n, n, [](RngStream& r) { return sample_clock_at_indep_hit(1, r); });
  const SampleBatch ref = draw(n, 2 * n, [a](RngStream& r) { return sample_one_sided_hit(a, r); });
  EXPECT_TRUE(ks_two_sample(h, ref).pass);
}

TEST(Range, HitTimeTransformAndOrdering) {
  const SampleBatch tau = draw(20000, 0, [](RngStream& r) {
    const RangeExit e = sample_range_exit_detail(1, default_cone_dt(1), r);
    EXPECT_GE(e.tau, e.tau_half);
    EXPECT_GT(e.T, 0);
    return e.tau;
  });
  const double ch = std::cosh(0.5);
  const MomentReport m = moment_check(tau, [](double t) { return std::exp(-t / 2); }, 1 / (ch * ch));
  EXPECT_TRUE(m.pass) << m.z_score;
  EXPECT_NEAR(1 / (ch * ch), 0.7864, 1e-4);
}

TEST(Range, BrownianValueLaw) {
  const ConeSpec cone(1);
  const SampleBatch b = draw(20000, 0, [](RngStream& r) { return sample_range_exit_detail(1, default_cone_dt(1), r).beta_end; });
  const KsReport k = ks_one_sample(b, [&](double y) { return range_cdf(y, cone); });
  EXPECT_TRUE(k.pass) << k.statistic;
}

TEST(Range, InverseRootMoment) {
  const double c = 1.3;
  const SampleBatch b = draw(20000, 0, [&](RngStream& r) { return sample_range_exit(c, default_cone_dt(c), r); });
  const MomentReport m = moment_check(b, [](double t) { return 1 / std::sqrt(2 * pi * t); }, laplace_range(0, ConeSpec(c)));
  EXPECT_TRUE(m.pass) << m.z_score;
  const MomentReport m1 = moment_check(b, [](double t) { return std::exp(-1 / (2 * t)) / std::sqrt(2 * pi * t); },
                                       laplace_range(1, ConeSpec(c)));
  EXPECT_TRUE(m1.pass) << m1.z_score;
}

TEST(Ou, ZeroLambdaIsPathwiseBrownian) {
  const ConeSpec cone(0.6);
  for (std::uint64_t i = 0; i < 200; ++i) {
    RngStream a(kSeed, i), b(kSeed, i);
    EXPECT_EQ(sample_ou_exit(cone, OuSpec(0), 0.002, a), sample_exit_cone(cone, 1, 0.002, b));
  }
}

TEST(Ou, TimeChangeMatchesDirect) {
  const ConeSpec cone(pi / 4);
  const OuSpec ou(1);
  const std::size_t n = 10000;
  const SampleBatch tc = draw(n, 0, [&](RngStream& r) { return sample_ou_exit(cone, ou, default_cone_dt(cone.c), r); });
  const SampleBatch di = draw(n, n, [&](RngStream& r) { return sample_ou_exit(cone, ou, 0, r, OuMode::direct); });
  EXPECT_TRUE(ks_two_sample(tc, di).pass);
}

TEST(Ou, DirectSimulationWithGeneralParameters) {
  const ConeSpec cone(0.5);
  const OuSpec ou(2, 1.5, 0.7);
  const std::size_t n = 10000;
  const SampleBatch tc = draw(n, 0, [&](RngStream& r) { return sample_ou_exit(cone, ou, default_cone_dt(cone.c), r); });
  const SampleBatch di = draw(n, n, [&](RngStream& r) { return sample_ou_exit(cone, ou, 0, r, OuMode::direct); });
  EXPECT_TRUE(ks_two_sample(tc, di).pass);
}

TEST(Ou, BoundaryHitIsTimeChangedPassage) {
  const OuSpec ou(1.5);
  const double b = 0.8;
  const std::size_t n = 20000;
  const SampleBatch hit = draw(n, 0, [&](RngStream& r) { return sample_ou_boundary_hit(b, ou, 0.01, r); });
  const SampleBatch ref = draw(n, n, [&](RngStream& r) { return ou.alpha_inv(sample_one_sided_hit(b, r)); });
  EXPECT_TRUE(ks_two_sample(hit, ref).pass);
}

TEST(Ou, BougerolForOu) {
  const OuSpec ou(1);
  const SampleBatch s = draw(5000, 0, [&](RngStream& r) { return sample_ou_winding_at_hit(1, ou, 0.01, r); });
  EXPECT_TRUE(ks_one_sample(s, [](double x) { return cauchy_cdf(x, arcsinh_a(1)); }).pass);
}

TEST(Paths, DomainErrors) {
  RngStream r(1, 1);
  EXPECT_THROW(sample_one_sided_hit(0, r), std::domain_error);
  EXPECT_THROW(sample_two_sided_hit(1, 0, r), std::domain_error);
  EXPECT_THROW(sample_exit_cone(ConeSpec(1, 2), 1, 0.01, r), std::domain_error);
  EXPECT_THROW(sample_exit_cone(ConeSpec(1), 0, 0.01, r), std::domain_error);
  EXPECT_THROW(simulate_planar_winding(1, -1, 0.01, r), std::domain_error);
  EXPECT_THROW(simulate_planar_winding(0, 1, 0.01, r), std::domain_error);
  EXPECT_THROW(sample_winding_at_indep_hit(0, HitMode::exact, r), std::domain_error);
  EXPECT_THROW(sample_range_exit(-1, 0.01, r), std::domain_error);
}
