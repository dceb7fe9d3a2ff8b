#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cbflab/error.hpp"
#include "cbflab/integrators.hpp"

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

ForcingProfile periodic_forcing(const TorusDomain& dom, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ForcingSpec fs;
  fs.kind = ForcingKind::periodic;
  fs.delta = 0.5;
  return ForcingProfile(fs, scale * random_field(dom, rng));
}

}  // namespace

TEST(Solve, LinearModesDecayExactly) {
  // Only mu A + alpha: every coefficient decays as exp(-(mu |k|^2 + alpha) t).
  const auto dom = make_domain(2, M_PI, 16, 2.0 / 3.0);
  std::mt19937_64 rng(1);
  const auto u0 = random_field(dom, rng);
  PhysicalParameters p{2, 0.7, 0.3, 1.0, 3.0, 0.0};
  SolverConfig sc;
  sc.dt = 0.01;
  sc.t_end = 0.37;
  sc.mask.convection = sc.mask.damping = false;
  const ForcingProfile zero(dom);
  const auto tr = solve(SystemKind::deterministic, u0, sc, p, zero);
  std::vector<cplx> expected = u0.coeffs();
  const std::size_t M = dom.size();
  for (std::size_t i = 0; i < expected.size(); ++i) expected[i] *= std::exp(-(0.7 * dom.k_sq(i % M) + 0.3) * 0.37);
  EXPECT_LE(rel_err(tr.final_state(), SpectralVelocityField(dom, expected)), 1e-13);
  EXPECT_LE(energy_identity_residual(tr, p).max_residual, 1e-10);
}

TEST(Solve, StepCountCoversInterval) {
  const auto dom = make_domain(2, M_PI, 8, 1.0);
  PhysicalParameters p{2, 1.0, 1.0, 1.0, 3.0, 0.0};
  SolverConfig sc;
  sc.dt = 0.3;
  sc.t_end = 1.0;
  const auto tr = solve(SystemKind::deterministic, SpectralVelocityField(dom), sc, p, ForcingProfile(dom));
  EXPECT_DOUBLE_EQ(tr.dt, 0.25);
  EXPECT_EQ(tr.ledger.size(), 5u);
  EXPECT_EQ(tr.times.back(), 1.0);
  // The zero state stays zero and balances trivially.
  EXPECT_EQ(h_norm_sq(tr.final_state()), 0.0);
  EXPECT_EQ(energy_identity_residual(tr, p).max_residual, 0.0);
}

TEST(Solve, SecondOrderInTime) {
  const auto dom = make_domain(2, M_PI, 16, 2.0 / 3.0);
  std::mt19937_64 rng(2);
  const auto u0 = random_field(dom, rng);
  PhysicalParameters p{2, 0.5, 1.0, 1.0, 3.0, 0.0};
  const auto f = periodic_forcing(dom, 1.0, 3);
  auto run = [&](double dt) {
    SolverConfig sc;
    sc.dt = dt;
    sc.t_end = 0.5;
    sc.keep_ledger = false;
    return solve(SystemKind::deterministic, u0, sc, p, f).final_state();
  };
  const auto a = run(0.02), b = run(0.01), c = run(0.005), ref = run(0.00125);
  const double e1 = std::sqrt(h_norm_sq(a - ref)), e2 = std::sqrt(h_norm_sq(b - ref)),
               e3 = std::sqrt(h_norm_sq(c - ref));
  EXPECT_GE(std::log2(e1 / e2), 1.8);
  EXPECT_GE(std::log2(e2 / e3), 1.8);
}

TEST(Solve, EnergyIdentityFullSystem) {
  const auto dom = make_domain(2, M_PI, 16, 2.0 / 3.0);
  std::mt19937_64 rng(4);
  const auto u0 = random_field(dom, rng);
  PhysicalParameters p{2, 0.5, 1.0, 1.0, 3.0, 0.0};
  const auto f = periodic_forcing(dom, 1.0, 5);
  auto residual = [&](double dt) {
    SolverConfig sc;
    sc.dt = dt;
    sc.t_end = 0.5;
    return energy_identity_residual(solve(SystemKind::deterministic, u0, sc, p, f), p).max_residual;
  };
  const double r1 = residual(0.01), r2 = residual(0.005);
  EXPECT_LE(r1, 1e-3);
  EXPECT_GE(std::log2(r1 / r2), 1.8);
}

TEST(Solve, LedgerRequirements) {
  const auto dom = make_domain(2, M_PI, 8, 1.0);
  PhysicalParameters p{2, 1.0, 1.0, 1.0, 3.0, 0.0};
  SolverConfig sc;
  sc.keep_ledger = false;
  sc.t_end = 0.01;
  const auto tr = solve(SystemKind::deterministic, SpectralVelocityField(dom), sc, p, ForcingProfile(dom));
  expect_error(ErrorKind::missing_ledger, [&] { energy_identity_residual(tr, p); });
  SolverConfig sc2 = sc;
  sc2.dt = 2e-3;
  const auto tr2 = solve(SystemKind::deterministic, SpectralVelocityField(dom), sc2, p, ForcingProfile(dom));
  expect_error(ErrorKind::mismatched_trajectories, [&] { continuity_gap(tr, tr2, p); });
}

TEST(Solve, CflViolationIsReported) {
  const auto dom = make_domain(2, M_PI, 16, 2.0 / 3.0);
  std::mt19937_64 rng(6);
  const auto u0 = 1e4 * random_field(dom, rng);
  PhysicalParameters p{2, 1.0, 1.0, 1.0, 3.0, 0.0};
  SolverConfig sc;
  sc.dt = 0.01;
  sc.t_end = 0.1;
  try {
    solve(SystemKind::deterministic, u0, sc, p, ForcingProfile(dom));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::nan_blowup);
    EXPECT_NE(std::string(e.what()).find("t=0"), std::string::npos);
  }
}

TEST(Conjugated, ZeroIntensityMatchesDeterministicBitwise) {
  const auto dom = make_domain(2, M_PI, 16, 2.0 / 3.0);
  std::mt19937_64 rng(7);
  const auto u0 = random_field(dom, rng);
  PhysicalParameters p{2, 1.0, 1.0, 1.0, 3.0, 0.0};
  const auto f = periodic_forcing(dom, 1.0, 8);
  const auto w = WienerPath::sample(3, -1.0, 2.0, 1e-3);
  const ConjugationProcess proc(w, 0.0);
  SolverConfig sc;
  sc.t_end = 0.2;
  const auto a = solve(SystemKind::deterministic, u0, sc, p, f);
  const auto b = solve(SystemKind::conjugated, u0, sc, p, f, &proc);
  EXPECT_EQ(a.final_state().coeffs(), b.final_state().coeffs());
}

TEST(Conjugated, EnergyIdentityWithNoise) {
  const auto dom = make_domain(2, M_PI, 16, 2.0 / 3.0);
  std::mt19937_64 rng(9);
  const auto u0 = random_field(dom, rng);
  PhysicalParameters p{2, 1.0, 1.0, 1.0, 3.0, 0.3};
  const auto f = periodic_forcing(dom, 1.0, 10);
  const auto w = WienerPath::sample(11, -1.0, 2.0, 1e-4);
  const ConjugationProcess proc(w, 0.3);
  SolverConfig sc;
  sc.dt = 1e-3;
  sc.t_end = 0.5;
  const auto tr = solve(SystemKind::conjugated, u0, sc, p, f, &proc);
  EXPECT_LE(energy_identity_residual(tr, p).max_residual, 1e-4);
  // reconstruct_u divides by z at the snapshot.
  const auto u_end = tr.reconstruct_u(tr.states.size() - 1);
  EXPECT_LE(rel_err(u_end, (1.0 / proc.z(0.5)) * tr.final_state()), 1e-14);
}

TEST(Stratonovich, NoiseOnlyIsExponentialOfPath) {
  // du = eps u o dW alone gives u(t) = u0 exp(eps omega(t)).
  const auto dom = make_domain(2, M_PI, 8, 1.0);
  std::mt19937_64 rng(12);
  const auto u0 = random_field(dom, rng);
  PhysicalParameters p{2, 1.0, 1.0, 1.0, 3.0, 0.5};
  const auto w = WienerPath::sample(13, -1.0, 2.0, 1e-3);
  const ConjugationProcess proc(w, 0.5);
  SolverConfig sc;
  sc.dt = 1e-3;
  sc.t_end = 1.0;
  sc.scheme = Scheme::heun_stratonovich;
  sc.mask.linear = sc.mask.convection = sc.mask.damping = sc.mask.forcing = false;
  sc.keep_ledger = false;
  const auto tr = solve(SystemKind::stratonovich, u0, sc, p, ForcingProfile(dom), &proc);
  const double factor = std::sqrt(h_norm_sq(tr.final_state()) / h_norm_sq(u0));
  EXPECT_NEAR(factor, std::exp(0.5 * w(1.0)), 1e-5 * std::exp(0.5 * w(1.0)));
  expect_error(ErrorKind::invalid_config, [&] { Stepper(SystemKind::stratonovich, Scheme::imex_cn_ab2, p, ForcingProfile(dom), &proc); });
}

TEST(Continuity, Eta1ClosedForm) {
  EXPECT_DOUBLE_EQ(continuity_eta1({3, 1.0, 1.0, 1.0, 5.0, 0.0}), 0.125);
  EXPECT_EQ(continuity_eta1({3, 1.0, 1.0, 1.0, 3.0, 0.0}), 0.0);
}

TEST(Continuity, TwoDimensionalEnvelopeHolds) {
  const auto dom = make_domain(2, M_PI, 16, 2.0 / 3.0);
  std::mt19937_64 rng(14);
  const auto u0 = random_field(dom, rng);
  const auto du = 1e-3 * random_field(dom, rng);
  PhysicalParameters p{2, 1.0, 1.0, 1.0, 3.0, 0.2};
  const auto f = periodic_forcing(dom, 1.0, 15);
  const auto w = WienerPath::sample(16, -1.0, 2.0, 1e-3);
  const ConjugationProcess proc(w, 0.2);
  SolverConfig sc;
  sc.dt = 1e-3;
  sc.t_end = 1.0;
  sc.record_stride = 50;
  const auto a = solve(SystemKind::conjugated, u0 + du, sc, p, f, &proc);
  const auto b = solve(SystemKind::conjugated, u0, sc, p, f, &proc);
  const auto rep = continuity_gap(a, b, p);
  EXPECT_EQ(rep.which, ContinuityCase::two_dimensional);
  EXPECT_TRUE(rep.holds) << rep.max_ratio;
  EXPECT_LE(rep.max_ratio, 1.0);
  EXPECT_EQ(rep.times.size(), a.times.size());
}

TEST(Continuity, SupercriticalEnvelopeHolds3D) {
  const auto dom = make_domain(3, M_PI, 8, 2.0 / 3.0);
  std::mt19937_64 rng(17);
  const auto u0 = random_field(dom, rng);
  const auto du = 1e-3 * random_field(dom, rng);
  PhysicalParameters p{3, 1.0, 1.0, 1.0, 5.0, 0.0};
  const ForcingProfile zero(dom);
  SolverConfig sc;
  sc.dt = 2e-3;
  sc.t_end = 0.5;
  sc.record_stride = 25;
  const auto a = solve(SystemKind::deterministic, u0 + du, sc, p, zero);
  const auto b = solve(SystemKind::deterministic, u0, sc, p, zero);
  const auto rep = continuity_gap(a, b, p);
  EXPECT_EQ(rep.which, ContinuityCase::supercritical);
  EXPECT_TRUE(rep.holds) << rep.max_ratio;
  expect_error(ErrorKind::inadmissible_params, [&] { continuity_gap(a, b, {3, 0.4, 1.0, 1.0, 3.0, 0.0}); });
}
