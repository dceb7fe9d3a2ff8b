// Acceptance gate: one line per criterion, nonzero exit when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cbflab/integrators.hpp"
#include "cbflab/operators.hpp"
#include "cbflab/pullback_engine.hpp"
#include "cbflab/runner.hpp"
#include "cbflab/stochastic_env.hpp"

using namespace cbflab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double rel_err(const SpectralVelocityField& a, const SpectralVelocityField& b) {
  return std::sqrt(h_norm_sq(a - b) / h_norm_sq(b));
}

double vnorm(const SpectralVelocityField& u) { return std::sqrt(h_norm_sq(u) + grad_norm_sq(u)); }

ForcingProfile periodic(SpectralVelocityField amp) {
  ForcingSpec fs;
  fs.kind = ForcingKind::periodic;
  fs.period = 1.0;
  fs.delta = 0.5;
  return ForcingProfile(fs, std::move(amp));
}

Outcome operator_identities() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dom = make_domain(2, M_PI, 32, 2.0 / 3.0);
  std::mt19937_64 rng(101);
  double skew = 0.0, anti = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto u = random_field(dom, rng), v = random_field(dom, rng), w = random_field(dom, rng);
    const double nv = vnorm(v);
    skew = std::max(skew, std::abs(trilinear_b(u, v, v)) / (std::sqrt(h_norm_sq(u)) * nv * nv));
    anti = std::max(anti, std::abs(trilinear_b(u, v, w) + trilinear_b(u, w, v)) / (vnorm(u) * nv * vnorm(w)));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {skew <= 1e-10 && anti <= 1e-10 && secs < 30.0,
          "max|b(u,v,v)|/scale=" + fmt("%.2e", skew) + " max|b(u,v,w)+b(u,w,v)|/scale=" + fmt("%.2e", anti) +
              " (<=1e-10) runtime=" + fmt("%.1f", secs) + "s (<30s)"};
}

Outcome monotonicity() {
  const auto dom = make_domain(2, M_PI, 32, 2.0 / 3.0);
  std::mt19937_64 rng(202);
  double worst = std::numeric_limits<double>::infinity(), eq = 0.0;
  for (double r : {1.0, 2.0, 3.0, 5.0})
    for (int i = 0; i < 1000; ++i) {
      const double scale = std::exp(2.0 * std::uniform_real_distribution<double>(-1.0, 1.0)(rng));
      const auto u = scale * random_field(dom, rng), v = random_field(dom, rng);
      const auto [lhs, rhs] = monotonicity_gap(u, v, r);
      worst = std::min(worst, lhs - rhs);
      if (r == 1.0) eq = std::max(eq, std::abs(lhs - rhs) / std::max(1.0, rhs));
    }
  return {worst >= -1e-8 && eq <= 1e-10,
          "min(lhs-rhs)=" + fmt("%.2e", worst) + " (>=-1e-8) r=1 rel mismatch=" + fmt("%.2e", eq) + " (<=1e-10)"};
}

Outcome energy_identity() {
  const auto dom = make_domain(2, M_PI, 32, 2.0 / 3.0);
  std::mt19937_64 rng(7);
  const auto u0 = 2.0 * random_field(dom, rng);
  const PhysicalParameters p{2, 0.5, 1.0, 1.0, 3.0, 0.0};
  const auto f = periodic(random_field(dom, rng, 2.0));
  const ForcingProfile zero(dom);
  SolverConfig lin;
  lin.dt = 1e-3;
  lin.mask.convection = lin.mask.damping = false;
  const double linear_res = energy_identity_residual(solve(SystemKind::deterministic, u0, lin, p, zero), p).max_residual;
  std::vector<double> res;
  for (double dt : {1e-3, 5e-4, 2.5e-4}) {
    SolverConfig sc;
    sc.dt = dt;
    sc.t_end = 1.0;
    res.push_back(energy_identity_residual(solve(SystemKind::deterministic, u0, sc, p, f), p).max_residual);
  }
  const double o1 = std::log2(res[0] / res[1]), o2 = std::log2(res[1] / res[2]);
  return {linear_res <= 1e-10 && std::min(o1, o2) >= 1.8,
          "linear residual=" + fmt("%.2e", linear_res) + " (<=1e-10) full residuals " + fmt("%.2e", res[0]) + "," +
              fmt("%.2e", res[1]) + "," + fmt("%.2e", res[2]) + " orders " + fmt("%.2f", o1) + "," +
              fmt("%.2f", o2) + " (>=1.8)"};
}

Outcome exponential_absorption() {
  const auto dom = make_domain(2, M_PI, 32, 2.0 / 3.0);
  const ForcingProfile zero(dom);
  CocycleSetup s;
  s.params = {2, 1.0, 1.0, 1.0, 3.0, 0.0};
  s.forcing = &zero;
  s.solver.dt = 2e-3;
  std::vector<double> ladder;
  for (int i = 1; i <= 12; ++i) ladder.push_back(0.5 * i);
  const auto fam = TemperedFamily::ball(10.0, 0.0, 8, 303);
  const auto rep = measure_absorption(CocycleKind::det, 0.0, fam, s, ladder);
  bool below = true;
  double worst = 0.0;
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const double env = 100.0 * std::exp(-s.params.alpha * ladder[i]);
    worst = std::max(worst, rep.max_norm_sq[i] / env);
    if (rep.max_norm_sq[i] > env) below = false;
  }
  const double target = std::log(100.0) / s.params.alpha;
  const bool entered = rep.absorbed && rep.estimate.entry_time <= target + 0.5;
  return {below && entered && rep.estimate.radius_sq == 1.0,
          "max ||u||^2/(100 e^{-alpha t})=" + fmt("%.2e", worst) + " (<=1) entry t=" +
              fmt("%.2f", rep.estimate.entry_time) + " (<=" + fmt("%.2f", target) + "+0.5) M0=" +
              fmt("%.3g", rep.estimate.radius_sq)};
}

Outcome conjugation_equivalence() {
  const auto dom = make_domain(2, M_PI, 32, 2.0 / 3.0);
  std::mt19937_64 rng(11);
  const auto u0 = random_field(dom, rng);
  const PhysicalParameters p{2, 0.5, 1.0, 1.0, 3.0, 0.5};
  const auto f = periodic(random_field(dom, rng, 2.0));
  const std::vector<double> dts{4e-4, 2e-4, 1e-4};
  const int seeds = 4;
  std::vector<double> mean(dts.size(), 0.0);
  double finest_worst = 0.0;
  for (int seed = 1; seed <= seeds; ++seed) {
    const auto w = WienerPath::sample(seed, -1.0, 2.0, 1e-4);
    const ConjugationProcess proc(w, 0.5);
    for (std::size_t i = 0; i < dts.size(); ++i) {
      SolverConfig sc;
      sc.dt = dts[i];
      sc.keep_ledger = false;
      auto v = solve(SystemKind::conjugated, u0, sc, p, f, &proc).final_state();
      v *= 1.0 / proc.z(1.0);
      sc.scheme = Scheme::heun_stratonovich;
      const auto u = solve(SystemKind::stratonovich, u0, sc, p, f, &proc).final_state();
      const double e = rel_err(v, u);
      mean[i] += e / seeds;
      if (i + 1 == dts.size()) finest_worst = std::max(finest_worst, e);
    }
  }
  const double o1 = std::log2(mean[0] / mean[1]), o2 = std::log2(mean[1] / mean[2]);
  return {finest_worst <= 1e-2 && std::min(o1, o2) >= 0.5,
          "rel gap at dt=1e-4 (worst of " + std::to_string(seeds) + " paths)=" + fmt("%.2e", finest_worst) +
              " (<=1e-2) mean-error orders " + fmt("%.2f", o1) + "," + fmt("%.2f", o2) + " (>=0.5)"};
}

Outcome epsilon_zero_collapse() {
  const auto dom = make_domain(2, M_PI, 32, 2.0 / 3.0);
  std::mt19937_64 rng(12);
  const auto x = random_field(dom, rng);
  const auto f = periodic(0.3 * random_field(dom, rng, 2.0));
  const auto w = WienerPath::sample(13, -40.0, 10.0, 1e-3);
  CocycleSetup s;
  s.params = {2, 1.0, 1.0, 1.0, 3.0, 0.0};
  s.forcing = &f;
  s.omega = &w;
  const bool cocycle = cocycle_eval(CocycleKind::stoch, 1.0, 0.3, x, s).coeffs() ==
                       cocycle_eval(CocycleKind::det, 1.0, 0.3, x, s).coeffs();
  const bool radius = absorbing_radius_stoch(0.3, &w, 0.0, s.params, f).radius_sq ==
                      absorbing_radius_det(0.3, s.params, f).radius_sq;
  const auto fam = TemperedFamily::ball(2.0, 0.0, 4, 14);
  const auto a = sample_attractor(CocycleKind::stoch, 0.0, s, {0.5, 1.0}, fam);
  const auto b = sample_attractor(CocycleKind::det, 0.0, s, {0.5, 1.0}, fam);
  bool sampler = a.points.size() == b.points.size() && a.convergence_diag == b.convergence_diag &&
                 a.radius.radius_sq == b.radius.radius_sq;
  for (std::size_t i = 0; sampler && i < a.points.size(); ++i) sampler = a.points[i].coeffs() == b.points[i].coeffs();
  return {cocycle && radius && sampler, std::string("bitwise cocycle=") + (cocycle ? "yes" : "no") +
                                            " radius=" + (radius ? "yes" : "no") + " sampler=" + (sampler ? "yes" : "no")};
}

Outcome cocycle_law() {
  const auto dom = make_domain(2, M_PI, 16, 2.0 / 3.0);
  std::mt19937_64 rng(11);
  const auto x = random_field(dom, rng);
  const PhysicalParameters p{2, 0.5, 1.0, 1.0, 3.0, 0.5};
  const auto f = periodic(random_field(dom, rng, 2.0));
  const auto w = WienerPath::sample(42, -2.0, 5.0, 5e-5);
  CocycleSetup s;
  s.params = p;
  s.forcing = &f;
  s.solver.dt = 5e-5;
  s.omega = &w;
  const double tau = 0.3;
  std::string detail;
  bool pass = true;
  for (auto kind : {CocycleKind::det, CocycleKind::stoch}) {
    double worst = 0.0;
    for (double t : {0.25, 0.5, 1.0})
      for (double sh : {0.25, 0.5, 1.0}) {
        const auto whole = cocycle_eval(kind, t + sh, tau, x, s);
        const auto mid = cocycle_eval(kind, sh, tau, x, s);
        const WienerPath ws = w.shifted(sh);
        const auto split = cocycle_eval(kind, t, tau + sh, &ws, mid, s);
        worst = std::max(worst, rel_err(split, whole));
      }
    pass = pass && worst <= 1e-6;
    detail += std::string(kind == CocycleKind::det ? "det" : "stoch") + " defect=" + fmt("%.2e", worst) + " ";
  }
  return {pass, detail + "(<=1e-6, dt=5e-5, 16^2)"};
}

Outcome perturbation() {
  std::string detail;
  bool pass = true;
  for (int d : {2, 3}) {
    const auto dom = make_domain(d, M_PI, d == 2 ? 32 : 16, 2.0 / 3.0);
    std::mt19937_64 rng(5);
    const auto u0 = random_field(dom, rng, 2.0);
    const auto f = periodic(random_field(dom, rng, 2.0));
    const auto w = WienerPath::sample(3, -50.0, 50.0, 1e-3);
    std::vector<double> ends;
    double ratio = 0.0;
    bool holds = true;
    for (double eps : {0.5, 0.25, 0.125}) {
      CocycleSetup s;
      s.params = {d, 1.0, 1.0, 1.0, d == 2 ? 3.0 : 5.0, eps};
      s.forcing = &f;
      s.solver.dt = 1e-3;
      s.omega = &w;
      const auto rep = perturbation_envelope(0.0, 1.0, u0, s);
      holds = holds && rep.holds;
      for (std::size_t i = 1; i < rep.gap.size(); ++i) ratio = std::max(ratio, rep.gap[i] / rep.bound[i]);
      ends.push_back(rep.end_gap);
    }
    const bool decreasing = ends[0] > ends[1] && ends[1] > ends[2];
    pass = pass && holds && decreasing;
    detail += std::to_string(d) + "D: max gap/bound=" + fmt("%.3f", ratio) + " end gaps " + fmt("%.2e", ends[0]) +
              ">" + fmt("%.2e", ends[1]) + ">" + fmt("%.2e", ends[2]) + (decreasing ? "" : " (not decreasing)") + "; ";
  }
  return {pass, detail};
}

Outcome semicontinuity() {
  const auto dom = make_domain(2, M_PI, 16, 2.0 / 3.0);
  std::mt19937_64 rng(5);
  const auto f = periodic(0.3 * random_field(dom, rng, 2.0));
  const PhysicalParameters p{2, 1.0, 1.0, 1.0, 3.0, 0.0};
  const auto w = WienerPath::sample(9, -60.0, 10.0, 1e-3);
  CocycleSetup s;
  s.params = p;
  s.forcing = &f;
  s.solver.dt = 1e-3;
  s.omega = &w;
  const double m0 = absorbing_radius_det(0.0, p, f).radius_sq;
  const auto fam = TemperedFamily::ball(std::sqrt(m0), 0.0, 8, 77);
  const std::vector<double> ladder{0.5, 0.25, 0.125, 0.0625};
  const auto res = semicontinuity_sweep(0.0, s, ladder, {2.0, 4.0, 8.0}, fam);
  const double m_last = absorbing_radius_stoch(0.0, &w, ladder.back(), p, f).radius_sq;
  const double mrel = std::abs(m_last / m0 - 1.0);
  std::string dists;
  for (double d : res.final_dist) dists += fmt("%.2e", d) + " ";
  return {res.weakly_decreasing && res.last_is_min && mrel <= 1e-2,
          "dist_H per eps: " + dists + "weakly decreasing=" + (res.weakly_decreasing ? "yes" : "no") +
              " last is min=" + (res.last_is_min ? "yes" : "no") + " |M_eps/M_0-1| at 0.0625=" + fmt("%.2e", mrel) +
              " (<=1e-2)"};
}

Outcome tail_masses() {
  const double L = 2.0 * M_PI;
  const auto dom = make_domain(2, L, 32, 2.0 / 3.0);
  ForcingSpec fs;
  fs.kind = ForcingKind::constant_field;
  fs.delta = 0.5;
  const ForcingProfile f(fs, forcing_shape(dom, ForcingShape::compact_bump, 5.0));
  const auto w = WienerPath::sample(9, -60.0, 10.0, 1e-3);
  std::string detail;
  bool pass = true;
  for (double eps : {0.0, 0.25, 0.5}) {
    CocycleSetup s;
    s.params = {2, 1.0, 1.0, 1.0, 3.0, eps};
    s.forcing = &f;
    s.solver.dt = 1e-3;
    s.omega = &w;
    const auto v = pullback_eval(CocycleKind::stoch, 5.0, 0.0, SpectralVelocityField(dom), s);
    const double ratio = tail_mass(v, L / 8.0) / tail_mass(v, L / 4.0);
    pass = pass && ratio >= 2.0;
    detail += "eps=" + fmt("%g", eps) + " ratio=" + fmt("%.2f", ratio) + " ";
  }
  return {pass, detail + "(tail(L/8)/tail(L/4) >= 2)"};
}

Outcome periodicity() {
  const auto dom = make_domain(2, M_PI, 32, 2.0 / 3.0);
  std::mt19937_64 rng(11);
  const auto x = random_field(dom, rng);
  const auto f = periodic(random_field(dom, rng, 2.0));
  const auto w = WienerPath::sample(42, -10.0, 10.0, 1e-3);
  CocycleSetup s;
  s.params = {2, 0.5, 1.0, 1.0, 3.0, 0.5};
  s.forcing = &f;
  s.solver.dt = 1e-3;
  s.omega = &w;
  const double T = f.spec().period;
  double worst = 0.0;
  for (double t : {0.5, 1.3})
    for (double tau : {0.0, 0.7})
      for (int k : {1, 3}) {
        // Same omega: the noise over [tau, tau + t] depends on omega on [0, t]
        // only, so moving tau by whole periods changes the forcing index alone.
        const double shifted = tau + k * T;
        worst = std::max(worst, rel_err(cocycle_eval(CocycleKind::stoch, t, shifted, x, s),
                                        cocycle_eval(CocycleKind::stoch, t, tau, x, s)));
      }
  return {worst <= 1e-10, "max rel defect=" + fmt("%.2e", worst) + " (<=1e-10)"};
}

Outcome wiener_statistics() {
  const int n = 10000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = WienerPath::sample(static_cast<std::uint64_t>(i) + 1, -1.0, 1.0, 0.01)(1.0);
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n, var = sum_sq / n - mean * mean;
  const auto w = WienerPath::sample(7, -20.0, 20.0, 0.01);
  bool exact = true;
  for (double t = -5.0; t <= 5.0; t += 0.25) {
    exact = exact && w.shifted(0.75).shifted(1.5)(t) == w.shifted(2.25)(t);
    exact = exact && w.shifted(1.5)(t) == w(t + 1.5) - w(1.5);
  }
  return {std::abs(var - 1.0) <= 0.05 && exact,
          "Var omega(1)=" + fmt("%.4f", var) + " over 1e4 seeds (|.-1|<=0.05) shift law exact=" + (exact ? "yes" : "no")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"operator_identities", operator_identities},
      {"monotonicity", monotonicity},
      {"energy_identity", energy_identity},
      {"exponential_absorption", exponential_absorption},
      {"conjugation_equivalence", conjugation_equivalence},
      {"epsilon_zero_collapse", epsilon_zero_collapse},
      {"cocycle_law", cocycle_law},
      {"perturbation_envelope", perturbation},
      {"semicontinuity_trend", semicontinuity},
      {"tail_masses", tail_masses},
      {"periodicity", periodicity},
      {"wiener_statistics", wiener_statistics},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("[%s] %2zu %-24s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
