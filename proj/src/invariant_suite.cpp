#include "cbflab/invariant_suite.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cbflab/integrators.hpp"
#include "cbflab/operators.hpp"
#include "cbflab/pullback_engine.hpp"
#include "cbflab/stochastic_env.hpp"

namespace cbflab {

namespace {

CheckResult at_most(std::string name, double value, double threshold) {
  return {std::move(name), value, threshold, std::isfinite(value) && value <= threshold};
}

double coeff_rel_diff(const SpectralVelocityField& a, const SpectralVelocityField& b) {
  const double den = std::sqrt(h_norm_sq(b));
  const double num = std::sqrt(h_norm_sq(a - b));
  return den > 0.0 ? num / den : num;
}

}  // namespace

std::vector<CheckResult> run_invariant_suite(std::uint64_t seed) {
  std::vector<CheckResult> out;
  const TorusDomain dom = make_domain(2, M_PI, 16, 2.0 / 3.0);
  std::mt19937_64 rng(seed);

  // Trilinear form: skew-symmetry in the last two slots.
  double skew = 0.0, anti = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto u = random_field(dom, rng), v = random_field(dom, rng), w = random_field(dom, rng);
    const double vv = h_norm_sq(v) + grad_norm_sq(v);
    skew = std::max(skew, std::abs(trilinear_b(u, v, v)) / (std::sqrt(h_norm_sq(u)) * vv));
    const double scale = std::sqrt(h_norm_sq(u) + grad_norm_sq(u)) * std::sqrt(vv) *
                         std::sqrt(h_norm_sq(w) + grad_norm_sq(w));
    anti = std::max(anti, std::abs(trilinear_b(u, v, w) + trilinear_b(u, w, v)) / scale);
  }
  out.push_back(at_most("b_uvv_vanishes", skew, 1e-10));
  out.push_back(at_most("b_antisymmetric", anti, 1e-10));

  // Monotonicity of the damping term.
  double worst = 0.0;
  for (double r : {1.0, 2.0, 3.0, 5.0})
    for (int i = 0; i < 5; ++i) {
      const auto u = random_field(dom, rng), v = random_field(dom, rng);
      const auto [lhs, rhs] = monotonicity_gap(u, v, r);
      worst = std::max(worst, rhs - lhs);
    }
  out.push_back(at_most("damping_monotone", worst, 1e-8));

  // Projection and transforms.
  const auto u = random_field(dom, rng);
  out.push_back(at_most("divergence_free", divergence_defect(u), 1e-12));
  out.push_back(at_most("real_valued", reality_defect(u), 1e-12));
  {
    const PhysicalField p = to_physical(u);
    const SpectralVelocityField back(dom, transform_forward(p));
    out.push_back(at_most("transform_round_trip", coeff_rel_diff(back, u), 1e-12));
  }

  // Linear-only energy balance is exact for the integrating factor.
  {
    PhysicalParameters p{2, 1.0, 1.0, 1.0, 3.0, 0.0};
    SolverConfig sc;
    sc.dt = 1e-2;
    sc.t_end = 0.5;
    sc.mask.convection = false;
    sc.mask.damping = false;
    const ForcingProfile zero(dom);
    const auto traj = solve(SystemKind::deterministic, u, sc, p, zero);
    out.push_back(at_most("linear_energy_residual", energy_identity_residual(traj, p).max_residual, 1e-10));
  }

  // Shift group law and the z == 1 collapse.
  const WienerPath w = WienerPath::sample(seed, -40.0, 10.0, 1e-2);
  {
    double gap = 0.0;
    const WienerPath a = w.shifted(1.5).shifted(-2.25), b = w.shifted(-0.75);
    for (double t = -5.0; t <= 5.0; t += 0.37) gap = std::max(gap, std::abs(a(t) - b(t)));
    out.push_back(at_most("shift_group_law", gap, 1e-12));
  }
  {
    PhysicalParameters p{2, 1.0, 1.0, 1.0, 3.0, 0.0};
    ForcingSpec fs;
    fs.kind = ForcingKind::periodic;
    fs.delta = 0.5;
    const ForcingProfile f(fs, 0.3 * random_field(dom, rng));
    CocycleSetup s;
    s.params = p;
    s.forcing = &f;
    s.solver.dt = 1e-2;
    s.omega = &w;
    const auto a = cocycle_eval(CocycleKind::stoch, 0.5, 0.25, u, s);
    const auto b = cocycle_eval(CocycleKind::det, 0.5, 0.25, u, s);
    out.push_back(at_most("epsilon_zero_collapse", a.coeffs() == b.coeffs() ? 0.0 : 1.0, 0.0));
    const double m0 = absorbing_radius_det(0.0, p, f).radius_sq;
    const double me = absorbing_radius_stoch(0.0, &w, 0.0, p, f).radius_sq;
    out.push_back(at_most("epsilon_zero_radius", std::abs(m0 - me), 0.0));
  }

  out.push_back(at_most("cutoff_endpoints", std::abs(cutoff_xi(0.5)) + std::abs(cutoff_xi(3.0) - 1.0), 0.0));
  return out;
}

}  // namespace cbflab
