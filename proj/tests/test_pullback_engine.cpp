#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cbflab/error.hpp"
#include "cbflab/pullback_engine.hpp"

using namespace cbflab;

namespace {

template <class F>
void expect_error(ErrorKind kind, F&& fn) {
  try {
    fn();
    FAIL() << "expected " << to_string(kind);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

double rel_err(const SpectralVelocityField& a, const SpectralVelocityField& b) {
  return std::sqrt(h_norm_sq(a - b) / h_norm_sq(b));
}

SpectralVelocityField unit_shear(const TorusDomain& dom) {
  auto u = field_from_function(dom, [](const Vec3& x) { return Vec3{std::sin(x[1]), 0.0, 0.0}; });
  u *= 1.0 / std::sqrt(h_norm_sq(u));
  return u;
}

SpectralVelocityField constant_field(const TorusDomain& dom, double a, double b) {
  return field_from_function(dom, [=](const Vec3&) { return Vec3{a, b, 0.0}; });
}

struct Fixture {
  TorusDomain dom = make_domain(2, M_PI, 16, 2.0 / 3.0);
  WienerPath omega = WienerPath::sample(21, -40.0, 10.0, 1e-3);
  ForcingProfile forcing;
  CocycleSetup setup;

  explicit Fixture(double eps, double scale = 1.0) : forcing(make_forcing(dom, scale)) {
    setup.params = {2, 1.0, 1.0, 1.0, 3.0, eps};
    setup.forcing = &forcing;
    setup.solver.dt = 1e-3;
    setup.omega = &omega;
  }
  static ForcingProfile make_forcing(const TorusDomain& dom, double scale) {
    std::mt19937_64 rng(22);
    ForcingSpec fs;
    fs.kind = ForcingKind::periodic;
    fs.delta = 0.5;
    return ForcingProfile(fs, scale * random_field(dom, rng));
  }
  SpectralVelocityField initial(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    return random_field(dom, rng);
  }
};

}  // namespace

TEST(Cocycle, ZeroTimeIsIdentity) {
  Fixture fx(0.3);
  const auto x = fx.initial(1);
  EXPECT_EQ(cocycle_eval(CocycleKind::stoch, 0.0, 0.4, x, fx.setup).coeffs(), x.coeffs());
  EXPECT_EQ(cocycle_eval(CocycleKind::det, 0.0, 0.4, x, fx.setup).coeffs(), x.coeffs());
  expect_error(ErrorKind::invalid_range, [&] { cocycle_eval(CocycleKind::det, -1.0, 0.0, x, fx.setup); });
}

TEST(Cocycle, DeterministicProcessLaw) {
  Fixture fx(0.0);
  const auto x = fx.initial(2);
  const double tau = 0.3, s = 0.1, t = 0.15;
  const auto whole = cocycle_eval(CocycleKind::det, t + s, tau, x, fx.setup);
  const auto split = cocycle_eval(CocycleKind::det, t, tau + s, cocycle_eval(CocycleKind::det, s, tau, x, fx.setup), fx.setup);
  // The multistep history restarts at the split point; the defect is O(dt^2).
  EXPECT_LE(rel_err(split, whole), 1e-6);
}

TEST(Cocycle, StochasticCocycleLaw) {
  Fixture fx(0.3);
  const auto x = fx.initial(3);
  const double tau = 0.3, s = 0.1, t = 0.15;
  const auto whole = cocycle_eval(CocycleKind::stoch, t + s, tau, x, fx.setup);
  const WienerPath shifted = fx.omega.shifted(s);
  const auto mid = cocycle_eval(CocycleKind::stoch, s, tau, x, fx.setup);
  const auto split = cocycle_eval(CocycleKind::stoch, t, tau + s, &shifted, mid, fx.setup);
  EXPECT_LE(rel_err(split, whole), 1e-4);
}

TEST(Cocycle, ZeroIntensityCollapsesBitwise) {
  Fixture fx(0.0);
  const auto x = fx.initial(4);
  EXPECT_EQ(cocycle_eval(CocycleKind::stoch, 0.2, -0.5, x, fx.setup).coeffs(),
            cocycle_eval(CocycleKind::det, 0.2, -0.5, x, fx.setup).coeffs());
  EXPECT_EQ(pullback_eval(CocycleKind::stoch, 0.2, 0.0, x, fx.setup).coeffs(),
            cocycle_eval(CocycleKind::det, 0.2, -0.2, x, fx.setup).coeffs());
}

TEST(Hausdorff, ConstantFieldOracles) {
  // L = 1/2 in 2D makes the box volume 1, so constant fields have norm |c|.
  const auto dom = make_domain(2, 0.5, 8, 1.0);
  const std::vector<SpectralVelocityField> A{constant_field(dom, 3.0, 0.0)}, B{constant_field(dom, 0.0, 4.0)};
  EXPECT_NEAR(hausdorff_distance(A, B), 5.0, 1e-12);
  const std::vector<SpectralVelocityField> zero{constant_field(dom, 0.0, 0.0)};
  const std::vector<SpectralVelocityField> both{constant_field(dom, 0.0, 0.0), constant_field(dom, 10.0, 0.0)};
  EXPECT_NEAR(hausdorff_semidistance(zero, both), 0.0, 1e-12);
  EXPECT_NEAR(hausdorff_semidistance(both, zero), 10.0, 1e-12);
  EXPECT_NEAR(hausdorff_distance(zero, both), 10.0, 1e-12);
  expect_error(ErrorKind::empty_set, [&] { hausdorff_semidistance({}, zero); });
}

TEST(Hausdorff, FarthestPointThinning) {
  const auto dom = make_domain(2, 0.5, 8, 1.0);
  std::vector<SpectralVelocityField> pts;
  for (double a : {0.0, 1.0, 2.0, 9.0, 3.0}) pts.push_back(constant_field(dom, a, 0.0));
  const auto thin = farthest_point_thin(pts, 3);
  ASSERT_EQ(thin.size(), 3u);
  EXPECT_EQ(thin[0].coeffs(), pts[0].coeffs());
  EXPECT_EQ(thin[1].coeffs(), pts[3].coeffs());
  // Distances to {0, 9} are 1, 2, 3 for the rest, so 3 comes next.
  EXPECT_EQ(thin[2].coeffs(), pts[4].coeffs());
  EXPECT_EQ(farthest_point_thin(pts, 10).size(), 5u);
}

TEST(Tails, CutoffProfile) {
  EXPECT_EQ(cutoff_xi(0.0), 0.0);
  EXPECT_EQ(cutoff_xi(1.0), 0.0);
  EXPECT_EQ(cutoff_xi(2.0), 1.0);
  EXPECT_EQ(cutoff_xi(7.0), 1.0);
  EXPECT_DOUBLE_EQ(cutoff_xi(1.5), 0.5);
  double prev = 0.0;
  for (double s = 1.0; s <= 2.0; s += 0.01) {
    EXPECT_GE(cutoff_xi(s), prev);
    prev = cutoff_xi(s);
  }
}

TEST(Tails, CompactSupportHasNoTail) {
  // Rotated gradient of exp(-1/(1-q)), q = |x|^2/R^2, supported in |x| < R.
  const auto dom = make_domain(2, M_PI, 64, 1.0);
  const double R = 1.5;
  const auto bump = field_from_function(dom, [&](const Vec3& x) {
    const double q = (x[0] * x[0] + x[1] * x[1]) / (R * R);
    if (q >= 1.0) return Vec3{0.0, 0.0, 0.0};
    const double dpsi = std::exp(-1.0 / (1.0 - q)) / ((1.0 - q) * (1.0 - q)) * 2.0 / (R * R);
    return Vec3{-dpsi * x[1], dpsi * x[0], 0.0};
  });
  EXPECT_LE(tail_mass(bump, 2.0), 1e-5 * h_norm_sq(bump));
  expect_error(ErrorKind::annulus_exceeds_box, [&] { tail_mass(bump, 2.3); });
  expect_error(ErrorKind::invalid_range, [&] { tail_mass(bump, 0.0); });
}

TEST(Tails, GaussianVortexTailDecreases) {
  const auto dom = make_domain(2, 12.0, 64, 1.0);
  const auto v = field_from_function(dom, [](const Vec3& x) {
    const double p = std::exp(-(x[0] * x[0] + x[1] * x[1]) / 8.0);
    return Vec3{x[1] * p, -x[0] * p, 0.0};
  });
  const double t2 = tail_mass(v, 2.0), t4 = tail_mass(v, 4.0), t8 = tail_mass(v, 8.0);
  EXPECT_GT(t2, t4);
  EXPECT_GT(t4, t8);
  EXPECT_GT(t8, 0.0);
  EXPECT_LT(t2, h_norm_sq(v));
}

TEST(Radius, DeterministicClosedForms) {
  const auto dom = make_domain(2, M_PI, 16, 1.0);
  EXPECT_EQ(absorbing_radius_det(0.0, {2, 1.0, 1.0, 1.0, 3.0, 0.0}, ForcingProfile(dom)).radius_sq, 1.0);
  ForcingSpec fs;
  fs.kind = ForcingKind::constant_field;
  fs.delta = 0.5;
  // ||shear||_{V'}^2 = ||shear||^2 / 2, so sqrt(6) * unit shear has V' norm^2 = 3.
  const ForcingProfile f(fs, std::sqrt(6.0) * unit_shear(dom));
  // 1 + c / (min(mu, alpha) alpha) with mu = 2, alpha = 1, c = 3.
  EXPECT_NEAR(absorbing_radius_det(0.0, {2, 2.0, 1.0, 1.0, 3.0, 0.0}, f).radius_sq, 4.0, 1e-9);
  // alpha = 2, mu = 1: 1 + 3 / (1 * 2).
  EXPECT_NEAR(absorbing_radius_det(5.0, {2, 1.0, 2.0, 1.0, 3.0, 0.0}, f).radius_sq, 2.5, 1e-9);
}

TEST(Radius, StochasticUnforcedIsPathExponential) {
  const auto dom = make_domain(2, M_PI, 16, 1.0);
  const auto w = WienerPath::sample(5, -10.0, 10.0, 1e-3);
  const PhysicalParameters p{2, 1.0, 1.0, 1.0, 3.0, 0.4};
  for (double tau : {-2.0, 0.0, 1.5}) {
    const auto est = absorbing_radius_stoch(tau, &w, 0.4, p, ForcingProfile(dom));
    // z(tau) on theta_{-tau} omega is exp(eps omega(-tau)).
    EXPECT_NEAR(est.radius_sq, std::exp(-0.8 * w(-tau)), 1e-12 * est.radius_sq);
    EXPECT_NEAR(est.companion_R, std::exp(2.0 * std::abs(w(-tau))), 1e-12 * est.companion_R);
    EXPECT_TRUE(est.within_companion);
  }
}

TEST(Radius, StochasticTendsToDeterministic) {
  Fixture fx(0.0);
  const auto& p = fx.setup.params;
  const double m0 = absorbing_radius_det(0.0, p, fx.forcing).radius_sq;
  EXPECT_EQ(absorbing_radius_stoch(0.0, &fx.omega, 0.0, p, fx.forcing).radius_sq, m0);
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {0.5, 0.1, 0.01, 1e-3}) {
    const auto est = absorbing_radius_stoch(0.0, &fx.omega, eps, p, fx.forcing);
    EXPECT_TRUE(est.within_companion) << eps;
    const double gap = std::abs(est.radius_sq - m0);
    EXPECT_LT(gap, prev);
    prev = gap;
  }
  EXPECT_LT(prev / m0, 1e-2);
}

TEST(Family, SamplesAreSolenoidalAndInsideBall) {
  const auto dom = make_domain(2, M_PI, 16, 2.0 / 3.0);
  const auto fam = TemperedFamily::ball(3.0, 1.0, 20, 7);
  const auto pts = fam.sample(dom, 2.0);
  ASSERT_EQ(pts.size(), 20u);
  double largest = 0.0;
  for (const auto& u : pts) {
    EXPECT_LE(std::sqrt(h_norm_sq(u)), 9.0 * (1.0 + 1e-12));
    EXPECT_LE(divergence_defect(u), 1e-12);
    EXPECT_LE(reality_defect(u), 1e-12);
    largest = std::max(largest, std::sqrt(h_norm_sq(u)));
  }
  EXPECT_GT(largest, 0.5 * 9.0);
  // Same seed, different age: same directions, radius scaled.
  const auto again = fam.sample(dom, 0.0);
  EXPECT_LE(rel_err(3.0 * again[0], pts[0]), 1e-12);
  EXPECT_TRUE(fam.check_tempered());
  EXPECT_FALSE(TemperedFamily([](double t) { return std::exp(t); }, 4, 1).check_tempered());
}

TEST(Absorption, ZeroFamilyIsAbsorbedImmediately) {
  Fixture fx(0.0, 0.0);
  const ForcingProfile zero(fx.dom);
  fx.setup.forcing = &zero;
  const auto rep = measure_absorption(CocycleKind::det, 0.0, TemperedFamily::ball(0.0, 0.0, 3, 1), fx.setup, {0.5, 1.0});
  EXPECT_TRUE(rep.absorbed);
  EXPECT_EQ(rep.estimate.entry_time, 0.5);
  EXPECT_EQ(rep.max_norm_sq[0], 0.0);
  expect_error(ErrorKind::invalid_range,
               [&] { measure_absorption(CocycleKind::det, 0.0, TemperedFamily::ball(0.0, 0.0, 3, 1), fx.setup, {1.0, 0.5}); });
}

TEST(Attractor, UnforcedCollapsesToZero) {
  Fixture fx(0.0);
  const ForcingProfile zero(fx.dom);
  fx.setup.forcing = &zero;
  fx.setup.solver.dt = 5e-3;
  const auto a = sample_attractor(CocycleKind::det, 0.0, fx.setup, {2.0, 4.0, 8.0}, TemperedFamily::ball(2.0, 0.0, 6, 3));
  ASSERT_EQ(a.clouds.size(), 3u);
  ASSERT_EQ(a.convergence_diag.size(), 2u);
  double worst = 0.0;
  for (const auto& u : a.points) worst = std::max(worst, h_norm_sq(u));
  // ||u(t)||^2 <= e^{-2 alpha t} ||u0||^2 = 4 e^{-16}.
  EXPECT_LE(worst, 4.0 * std::exp(-16.0));
  EXPECT_TRUE(a.diag_decreasing);
  EXPECT_TRUE(a.contained);
  EXPECT_EQ(a.radius.radius_sq, 1.0);
}

TEST(Attractor, WorkerCountDoesNotChangeResults) {
  Fixture fx(0.2, 0.3);
  fx.setup.solver.dt = 5e-3;
  const auto fam = TemperedFamily::ball(1.0, 0.0, 4, 9);
  const auto a = sample_attractor(CocycleKind::stoch, 0.0, fx.setup, {0.5, 1.0}, fam, 1);
  const auto b = sample_attractor(CocycleKind::stoch, 0.0, fx.setup, {0.5, 1.0}, fam, 3);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i].coeffs(), b.points[i].coeffs());
  EXPECT_EQ(a.convergence_diag, b.convergence_diag);
}

TEST(Sweep, LadderValidation) {
  Fixture fx(0.0);
  const auto fam = TemperedFamily::ball(1.0, 0.0, 2, 1);
  expect_error(ErrorKind::ladder_not_decreasing,
               [&] { semicontinuity_sweep(0.0, fx.setup, {0.5, 0.6}, {1.0}, fam); });
  expect_error(ErrorKind::invalid_range, [&] { semicontinuity_sweep(0.0, fx.setup, {1.5, 0.5}, {1.0}, fam); });
  expect_error(ErrorKind::invalid_range, [&] { semicontinuity_sweep(0.0, fx.setup, {0.5, 0.0}, {1.0}, fam); });
}

TEST(Perturbation, EnvelopeBoundsGap) {
  Fixture fx(0.2);
  const auto u0 = fx.initial(30);
  const auto rep = perturbation_envelope(0.0, 0.5, u0, fx.setup);
  EXPECT_TRUE(rep.holds);
  EXPECT_EQ(rep.times.size(), 501u);
  EXPECT_GT(rep.end_gap, 0.0);
  // Zero intensity: both solves coincide.
  Fixture zero(0.0);
  const auto r0 = perturbation_envelope(0.0, 0.1, u0, zero.setup);
  EXPECT_EQ(r0.end_gap, 0.0);
  EXPECT_TRUE(r0.holds);
}
