#include "cbflab/pullback_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

#include <boost/math/quadrature/gauss.hpp>

#include "cbflab/error.hpp"
#include "cbflab/snapshot_io.hpp"

namespace cbflab {

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t nthreads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (nthreads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first;
  std::mutex mu;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first) first = std::current_exception();
        failed.store(true);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (std::size_t k = 0; k < nthreads; ++k) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

// ---------------------------------------------------------------------------
// Cocycles

namespace {

const ForcingProfile& forcing_of(const CocycleSetup& s) {
  if (s.forcing == nullptr) throw Error(ErrorKind::invalid_config, "cocycle setup has no forcing profile");
  return *s.forcing;
}

bool noisy(const CocycleSetup& s) { return s.params.epsilon != 0.0; }

// Evolves x from t0 to t0 + t. `tilde` is theta_{-tau} omega for the
// cocycle anchored at tau; it drives z and dW in absolute time.
SpectralVelocityField evolve(CocycleKind kind, double t, double t0, const WienerPath* tilde,
                             const SpectralVelocityField& x, const CocycleSetup& setup) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw Error(ErrorKind::invalid_range, "cocycle time must be >= 0");
  if (t == 0.0) return x;
  const ForcingProfile& f = forcing_of(setup);
  SolverConfig cfg = setup.solver;
  cfg.t_start = t0;
  cfg.t_end = t0 + t;
  cfg.record_stride = 0;
  cfg.keep_ledger = false;

  if (kind == CocycleKind::det) {
    if (cfg.scheme == Scheme::heun_stratonovich) cfg.scheme = Scheme::imex_cn_ab2;
    return solve(SystemKind::deterministic, x, cfg, setup.params, f).final_state();
  }
  if (noisy(setup) && tilde == nullptr)
    throw Error(ErrorKind::invalid_config, "stochastic cocycle with epsilon != 0 needs a path");
  if (cfg.scheme == Scheme::heun_stratonovich) {
    if (!noisy(setup)) {
      cfg.scheme = Scheme::imex_cn_ab2;
      return solve(SystemKind::conjugated, x, cfg, setup.params, f).final_state();
    }
    ConjugationProcess proc(*tilde, setup.params.epsilon);
    return solve(SystemKind::stratonovich, x, cfg, setup.params, f, &proc).final_state();
  }
  if (!noisy(setup)) {
    // z == 1: the conjugated system runs through the same arithmetic as the
    // deterministic one.
    return solve(SystemKind::conjugated, x, cfg, setup.params, f).final_state();
  }
  ConjugationProcess proc(*tilde, setup.params.epsilon);
  SpectralVelocityField v0 = proc.z(t0) * x;
  SpectralVelocityField v = solve(SystemKind::conjugated, v0, cfg, setup.params, f, &proc).final_state();
  v *= 1.0 / proc.z(t0 + t);
  return v;
}

std::optional<WienerPath> tilde_path(const WienerPath* omega, double shift, const CocycleSetup& setup) {
  if (omega == nullptr || !noisy(setup)) return std::nullopt;
  return omega->shifted(shift);
}

}  // namespace

SpectralVelocityField cocycle_eval(CocycleKind kind, double t, double tau, const WienerPath* omega,
                                   const SpectralVelocityField& x, const CocycleSetup& setup) {
  const auto tilde = kind == CocycleKind::stoch ? tilde_path(omega, -tau, setup) : std::nullopt;
  return evolve(kind, t, tau, tilde ? &*tilde : nullptr, x, setup);
}

SpectralVelocityField cocycle_eval(CocycleKind kind, double t, double tau, const SpectralVelocityField& x,
                                   const CocycleSetup& setup) {
  return cocycle_eval(kind, t, tau, setup.omega, x, setup);
}

SpectralVelocityField pullback_eval(CocycleKind kind, double t, double tau, const SpectralVelocityField& x,
                                    const CocycleSetup& setup) {
  // theta_{-(tau - t)} theta_{-t} omega = theta_{-tau} omega.
  const auto tilde = kind == CocycleKind::stoch ? tilde_path(setup.omega, -tau, setup) : std::nullopt;
  return evolve(kind, t, tau - t, tilde ? &*tilde : nullptr, x, setup);
}

// ---------------------------------------------------------------------------
// Absorbing radii

AbsorbingEstimate absorbing_radius_det(double tau, const PhysicalParameters& p, const ForcingProfile& f) {
  AbsorbingEstimate out;
  const double m = std::min(p.mu, p.alpha);
  const double I = anchored_forcing_integral(f, tau, p.alpha, NormKind::vprime).value;
  out.constant_term = 1.0;
  out.integral_term = I / m;
  out.radius_sq = 1.0 + I / m;
  return out;
}

namespace {

// R(tau, omega) = e^{2|omega(-tau)|} + (1/m) int_{-inf}^0 e^{alpha s} e^{2|omega(s)|} ||f(tau+s)||_{V'}^2 ds.
double companion_radius(double tau, const WienerPath& omega, const PhysicalParameters& p, const ForcingProfile& f) {
  const double m = std::min(p.mu, p.alpha);
  double R = std::exp(2.0 * std::abs(omega(-tau)));
  if (f.is_zero()) return R;
  const double kappa = p.alpha + f.envelope_growth();
  if (!(kappa > 0.0)) throw Error(ErrorKind::divergent_integral, "companion radius integral diverges");
  const double T = std::ceil(std::log(1e12) / kappa);
  if (omega.t_min() > -T)
    throw Error(ErrorKind::out_of_window, "path window starts at " + format_double(omega.t_min()) +
                                              " but the companion radius needs " + format_double(-T));
  auto integrand = [&](double s) {
    return std::exp(p.alpha * s + 2.0 * std::abs(omega(s))) * f.norm_sq(tau + s, NormKind::vprime);
  };
  std::vector<double> cuts = omega.nodes_in(-T, 0.0);
  if (cuts.empty() || cuts.front() > -T) cuts.insert(cuts.begin(), -T);
  if (cuts.back() < 0.0) cuts.push_back(0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    sum += boost::math::quadrature::gauss<double, 7>::integrate(integrand, cuts[i], cuts[i + 1]);
  return R + sum / m;
}

}  // namespace

AbsorbingEstimate absorbing_radius_stoch(double tau, const WienerPath* omega, double epsilon,
                                         const PhysicalParameters& p, const ForcingProfile& f) {
  if (epsilon < 0.0 || epsilon > 1.0) throw Error(ErrorKind::invalid_range, "epsilon must lie in [0, 1]");
  if (epsilon == 0.0 || omega == nullptr) {
    if (epsilon != 0.0) throw Error(ErrorKind::invalid_config, "stochastic radius with epsilon != 0 needs a path");
    AbsorbingEstimate out = absorbing_radius_det(tau, p, f);
    if (omega != nullptr) {
      out.companion_R = companion_radius(tau, *omega, p, f);
      out.within_companion = out.radius_sq <= out.companion_R * (1.0 + 1e-12);
    }
    return out;
  }
  AbsorbingEstimate out;
  const double m = std::min(p.mu, p.alpha);
  const double z_tau = ConjugationProcess(omega->shifted(-tau), epsilon).z(tau);
  const double inv_z2 = 1.0 / (z_tau * z_tau);
  const double I = anchored_forcing_integral(f, tau, p.alpha, NormKind::vprime, omega, epsilon).value;
  out.constant_term = inv_z2;
  out.integral_term = inv_z2 * I / m;
  out.radius_sq = inv_z2 * (1.0 + I / m);
  out.companion_R = companion_radius(tau, *omega, p, f);
  out.within_companion = out.radius_sq <= out.companion_R * (1.0 + 1e-12);
  return out;
}

// ---------------------------------------------------------------------------
// Tempered families

TemperedFamily::TemperedFamily(std::function<double(double)> radius_fn, int sample_count, std::uint64_t seed,
                               int max_mode)
    : radius_fn_(std::move(radius_fn)), count_(sample_count), seed_(seed), max_mode_(max_mode) {
  if (!radius_fn_) throw Error(ErrorKind::invalid_config, "tempered family needs a radius function");
  if (sample_count < 1) throw Error(ErrorKind::invalid_range, "tempered family needs at least one sample");
  if (max_mode < 0) throw Error(ErrorKind::invalid_range, "max_mode must be >= 0");
}

TemperedFamily TemperedFamily::ball(double rho0, double power, int sample_count, std::uint64_t seed, int max_mode) {
  if (!(rho0 >= 0.0)) throw Error(ErrorKind::invalid_range, "ball radius must be >= 0");
  return TemperedFamily([rho0, power](double t) { return rho0 * std::pow(1.0 + std::max(t, 0.0), power); },
                        sample_count, seed, max_mode);
}

bool TemperedFamily::check_tempered() const {
  double prev = std::numeric_limits<double>::infinity();
  for (double t : {10.0, 20.0, 40.0, 80.0}) {
    const double rho = radius(t);
    const double v = std::exp(-t) * rho * rho;
    if (!std::isfinite(v) || !(v < prev)) return false;
    prev = v;
  }
  return true;
}

std::vector<SpectralVelocityField> TemperedFamily::sample(const TorusDomain& domain, double age) const {
  const int d = domain.dim();
  const std::size_t n = domain.size();
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& m = domain.mode(i);
    bool inside = domain.retained(i);
    for (int a = 0; a < d; ++a) inside = inside && std::abs(m[a]) <= max_mode_;
    if (inside) active.push_back(i);
  }
  // Real dimension of the divergence-free span: d for the mean mode and d-1
  // per nonzero wavevector.
  std::size_t nonzero = 0;
  bool has_mean = false;
  for (std::size_t i : active) {
    if (domain.k_sq(i) == 0.0)
      has_mean = true;
    else
      ++nonzero;
  }
  const double dim = (has_mean ? d : 0) + static_cast<double>((d - 1) * nonzero);

  const double rho = radius(age);
  std::mt19937_64 rng(seed_);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<SpectralVelocityField> out;
  out.reserve(count_);
  for (int s = 0; s < count_; ++s) {
    std::vector<cplx> raw(static_cast<std::size_t>(d) * n, cplx(0.0, 0.0));
    for (int c = 0; c < d; ++c)
      for (std::size_t i : active) {
        const double re = gauss(rng), im = gauss(rng);
        raw[c * n + i] = cplx(re, im);
      }
    std::vector<cplx> sym(raw.size());
    for (int c = 0; c < d; ++c)
      for (std::size_t i : active)
        sym[c * n + i] = 0.5 * (raw[c * n + i] + std::conj(raw[c * n + domain.conjugate_index(i)]));
    SpectralVelocityField u = leray_project(domain, std::move(sym));
    const double radial = unif(rng);
    const double nrm = std::sqrt(h_norm_sq(u));
    if (nrm > 0.0 && dim > 0.0) {
      u *= rho * std::pow(radial, 1.0 / dim) / nrm;
    } else {
      u *= 0.0;
    }
    out.push_back(std::move(u));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hausdorff distances

namespace {

double dist_sq(const SpectralVelocityField& a, const SpectralVelocityField& b) {
  require_same_domain(a.domain(), b.domain());
  const auto& x = a.coeffs();
  const auto& y = b.coeffs();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::norm(x[i] - y[i]);
  return a.domain().box_volume() * s;
}

}  // namespace

double hausdorff_semidistance(const std::vector<SpectralVelocityField>& A, const std::vector<SpectralVelocityField>& B) {
  if (A.empty() || B.empty()) throw Error(ErrorKind::empty_set, "Hausdorff semi-distance of an empty set");
  double sup = 0.0;
  for (const auto& a : A) {
    double inf = std::numeric_limits<double>::infinity();
    for (const auto& b : B) inf = std::min(inf, dist_sq(a, b));
    sup = std::max(sup, inf);
  }
  return std::sqrt(sup);
}

double hausdorff_distance(const std::vector<SpectralVelocityField>& A, const std::vector<SpectralVelocityField>& B) {
  return std::max(hausdorff_semidistance(A, B), hausdorff_semidistance(B, A));
}

std::vector<SpectralVelocityField> farthest_point_thin(const std::vector<SpectralVelocityField>& pts, std::size_t cap) {
  if (pts.size() <= cap) return pts;
  std::vector<SpectralVelocityField> out;
  if (cap == 0) return out;
  std::vector<double> best(pts.size(), std::numeric_limits<double>::infinity());
  std::vector<char> taken(pts.size(), 0);
  std::size_t cur = 0;
  for (std::size_t k = 0; k < cap; ++k) {
    taken[cur] = 1;
    out.push_back(pts[cur]);
    std::size_t arg = 0;
    double far = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (taken[i]) continue;
      best[i] = std::min(best[i], dist_sq(pts[i], pts[cur]));
      if (best[i] > far) far = best[i], arg = i;
    }
    cur = arg;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Absorption and attractor sampling

namespace {

void check_horizons(const std::vector<double>& h) {
  if (h.empty()) throw Error(ErrorKind::invalid_range, "horizon ladder is empty");
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!(h[i] >= 0.0) || !std::isfinite(h[i])) throw Error(ErrorKind::invalid_range, "horizons must be >= 0");
    if (i > 0 && !(h[i] > h[i - 1])) throw Error(ErrorKind::invalid_range, "horizons must increase");
  }
}

const TorusDomain& setup_domain(const CocycleSetup& s) { return forcing_of(s).amplitude().domain(); }

std::vector<std::vector<SpectralVelocityField>> endpoint_clouds(CocycleKind kind, double tau,
                                                                const CocycleSetup& setup,
                                                                const std::vector<double>& horizons,
                                                                const TemperedFamily& family, int workers) {
  const TorusDomain& dom = setup_domain(setup);
  std::vector<std::vector<SpectralVelocityField>> initial;
  initial.reserve(horizons.size());
  for (double h : horizons) initial.push_back(family.sample(dom, h));
  const std::size_t per = static_cast<std::size_t>(family.sample_count());
  std::vector<std::vector<SpectralVelocityField>> clouds(horizons.size(),
                                                         std::vector<SpectralVelocityField>(per, SpectralVelocityField(dom)));
  parallel_for(horizons.size() * per, workers, [&](std::size_t job) {
    const std::size_t i = job / per, j = job % per;
    clouds[i][j] = pullback_eval(kind, horizons[i], tau, initial[i][j], setup);
  });
  return clouds;
}

AbsorbingEstimate radius_for(CocycleKind kind, double tau, const CocycleSetup& setup) {
  if (kind == CocycleKind::det) return absorbing_radius_det(tau, setup.params, forcing_of(setup));
  return absorbing_radius_stoch(tau, setup.params.epsilon == 0.0 ? nullptr : setup.omega, setup.params.epsilon,
                                setup.params, forcing_of(setup));
}

// Index of the first rung from which every later rung stays inside the ball.
std::optional<std::size_t> entry_rung(const std::vector<double>& max_norm_sq, double radius_sq) {
  std::optional<std::size_t> entry;
  for (std::size_t i = max_norm_sq.size(); i-- > 0;) {
    if (max_norm_sq[i] <= radius_sq * (1.0 + 1e-6))
      entry = i;
    else
      break;
  }
  return entry;
}

std::vector<double> cloud_max_norms(const std::vector<std::vector<SpectralVelocityField>>& clouds) {
  std::vector<double> out;
  for (const auto& c : clouds) {
    double m = 0.0;
    for (const auto& u : c) m = std::max(m, h_norm_sq(u));
    out.push_back(m);
  }
  return out;
}

}  // namespace

AbsorptionReport measure_absorption(CocycleKind kind, double tau, const TemperedFamily& family,
                                    const CocycleSetup& setup, const std::vector<double>& ladder, int workers) {
  check_horizons(ladder);
  AbsorptionReport rep;
  rep.ladder = ladder;
  rep.estimate = radius_for(kind, tau, setup);
  rep.max_norm_sq = cloud_max_norms(endpoint_clouds(kind, tau, setup, ladder, family, workers));
  if (auto e = entry_rung(rep.max_norm_sq, rep.estimate.radius_sq)) {
    rep.absorbed = true;
    rep.estimate.entry_time = ladder[*e];
  }
  return rep;
}

AttractorSample sample_attractor(CocycleKind kind, double tau, const CocycleSetup& setup,
                                 const std::vector<double>& horizons, const TemperedFamily& family, int workers) {
  check_horizons(horizons);
  AttractorSample out;
  out.tau = tau;
  out.epsilon = kind == CocycleKind::det ? 0.0 : setup.params.epsilon;
  out.omega_seed = setup.omega ? setup.omega->seed() : 0;
  out.horizons = horizons;
  out.clouds = endpoint_clouds(kind, tau, setup, horizons, family, workers);
  for (auto& c : out.clouds) c = farthest_point_thin(c, kMaxCloud);
  for (std::size_t i = 0; i + 1 < out.clouds.size(); ++i)
    out.convergence_diag.push_back(hausdorff_distance(out.clouds[i + 1], out.clouds[i]));
  for (std::size_t i = 1; i < out.convergence_diag.size(); ++i)
    if (out.convergence_diag[i] > out.convergence_diag[i - 1]) out.diag_decreasing = false;
  out.points = out.clouds.back();
  out.radius = radius_for(kind, tau, setup);
  const auto norms = cloud_max_norms(out.clouds);
  if (auto e = entry_rung(norms, out.radius.radius_sq)) out.radius.entry_time = horizons[*e];
  out.contained = norms.back() <= out.radius.radius_sq * (1.0 + 1e-6);
  return out;
}

SweepResult semicontinuity_sweep(double tau, const CocycleSetup& setup, const std::vector<double>& eps_ladder,
                                 const std::vector<double>& horizons, const TemperedFamily& family, int workers) {
  if (eps_ladder.empty()) throw Error(ErrorKind::invalid_range, "epsilon ladder is empty");
  for (std::size_t i = 0; i < eps_ladder.size(); ++i) {
    if (!(eps_ladder[i] > 0.0 && eps_ladder[i] <= 1.0))
      throw Error(ErrorKind::invalid_range, "epsilon ladder entries must lie in (0, 1]");
    if (i > 0 && !(eps_ladder[i] < eps_ladder[i - 1]))
      throw Error(ErrorKind::ladder_not_decreasing, "epsilon ladder must strictly decrease");
  }
  SweepResult out;
  out.epsilons = eps_ladder;
  const AttractorSample base = sample_attractor(CocycleKind::det, tau, setup, horizons, family, workers);
  out.m0 = base.radius.radius_sq;
  for (double eps : eps_ladder) {
    CocycleSetup s = setup;
    s.params.epsilon = eps;
    const AttractorSample a = sample_attractor(CocycleKind::stoch, tau, s, horizons, family, workers);
    for (std::size_t i = 0; i < horizons.size(); ++i) {
      SweepRow row;
      row.epsilon = eps;
      row.horizon = horizons[i];
      row.dist_h = hausdorff_semidistance(a.clouds[i], base.clouds[i]);
      row.m_eps = a.radius.radius_sq;
      row.entry_time = a.radius.entry_time;
      out.rows.push_back(row);
    }
    out.final_dist.push_back(out.rows.back().dist_h);
  }
  out.weakly_decreasing = true;
  for (std::size_t i = 1; i < out.final_dist.size(); ++i)
    if (out.final_dist[i] > out.final_dist[i - 1]) out.weakly_decreasing = false;
  out.last_is_min = out.final_dist.back() <= *std::min_element(out.final_dist.begin(), out.final_dist.end());
  return out;
}

// ---------------------------------------------------------------------------
// Perturbation envelope

PerturbationReport perturbation_envelope(double tau, double T, const SpectralVelocityField& u0,
                                         const CocycleSetup& setup) {
  if (!(T > 0.0)) throw Error(ErrorKind::invalid_range, "perturbation horizon must be positive");
  const ForcingProfile& f = forcing_of(setup);
  const PhysicalParameters& p = setup.params;
  if (noisy(setup) && setup.omega == nullptr)
    throw Error(ErrorKind::invalid_config, "perturbation envelope with epsilon != 0 needs a path");
  const std::optional<WienerPath> tilde = tilde_path(setup.omega, -tau, setup);
  std::optional<ConjugationProcess> proc;
  if (tilde) proc.emplace(*tilde, p.epsilon);
  auto z_of = [&](double t) { return proc ? proc->z(t) : 1.0; };

  Scheme scheme = setup.solver.scheme == Scheme::heun_stratonovich ? Scheme::imex_cn_ab2 : setup.solver.scheme;
  Stepper su(SystemKind::deterministic, scheme, p, f);
  Stepper sv(SystemKind::conjugated, scheme, p, f, proc ? &*proc : nullptr);

  const long n = static_cast<long>(std::ceil(T / setup.solver.dt - 1e-9));
  const double h = T / static_cast<double>(n);
  const double vol = u0.domain().box_volume();
  auto coeff_norm = [vol](const std::vector<cplx>& c) {
    double s = 0.0;
    for (const auto& x : c) s += std::norm(x);
    return std::sqrt(vol * s);
  };

  struct NodeData {
    double M, G, Bn, Cn, Fn;
  };
  auto node_data = [&](const SpectralVelocityField& u, double t) {
    const NonlinearTerms nt = nonlinear_terms(u, p.r, true, true);
    return NodeData{nt.max_speed, nt.max_grad, coeff_norm(nt.B), coeff_norm(nt.C),
                    f.is_zero() ? 0.0 : std::sqrt(f.norm_sq(t, NormKind::h))};
  };
  // Worst-case rate and source over a step, scanning z at the path nodes.
  auto step_coeffs = [&](const NodeData& a, const NodeData& b, double t0, double t1) {
    std::vector<double> ts{t0, t1};
    if (tilde) {
      for (double s : tilde->nodes_in(t0, t1)) ts.push_back(s);
    }
    const double M = std::max(a.M, b.M), G = std::max(a.G, b.G);
    const double Bn = std::max(a.Bn, b.Bn), Cn = std::max(a.Cn, b.Cn), Fn = std::max(a.Fn, b.Fn);
    double rate = -std::numeric_limits<double>::infinity(), src = 0.0;
    for (double t : ts) {
      const double z = z_of(t), zeta = 1.0 / z;
      rate = std::max(rate, zeta * G + zeta * zeta * M * M / (8.0 * p.mu) - 2.0 * p.alpha + 1.0);
      const double a_t = std::abs(zeta - 1.0) * Bn + p.beta * std::abs(std::pow(zeta, p.r - 1.0) - 1.0) * Cn +
                         std::abs(z - 1.0) * Fn;
      src = std::max(src, a_t * a_t);
    }
    return std::pair{rate, src};
  };

  PerturbationReport rep;
  SpectralVelocityField u = u0;
  SpectralVelocityField v = z_of(tau) * u0;
  double t = tau;
  // The envelope tracks y = v - u in the conjugated variable; the reported
  // gap uses the same variable so that both sides refer to one quantity.
  auto gap_now = [&]() {
    SpectralVelocityField y = v;
    y -= u;
    return h_norm_sq(y);
  };
  double bound = gap_now();
  rep.times.push_back(t);
  rep.gap.push_back(bound);
  rep.bound.push_back(bound);
  NodeData prev = node_data(u, t);
  for (long k = 0; k < n; ++k) {
    const double t_next = tau + static_cast<double>(k + 1) * h;
    u = su.step(u, t, h);
    v = sv.step(v, t, h);
    const NodeData cur = node_data(u, t_next);
    const auto [rate, src] = step_coeffs(prev, cur, t, t_next);
    const double growth = std::exp(h * rate);
    bound = growth * bound + h * src * std::max(1.0, growth);
    t = t_next;
    rep.times.push_back(t);
    rep.gap.push_back(gap_now());
    rep.bound.push_back(bound);
    prev = cur;
  }
  rep.holds = true;
  for (std::size_t i = 0; i < rep.gap.size(); ++i) {
    const double scale = std::max(1.0, rep.bound[i]);
    if (rep.gap[i] > rep.bound[i] * (1.0 + 1e-9) + 1e-14 * scale) rep.holds = false;
  }
  rep.end_gap = rep.gap.back();
  return rep;
}

// ---------------------------------------------------------------------------
// Cutoff tails

double cutoff_xi(double s) {
  if (s <= 1.0) return 0.0;
  if (s >= 2.0) return 1.0;
  const double x = s - 1.0;
  return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

double tail_mass(const SpectralVelocityField& v, double k) {
  const TorusDomain& dom = v.domain();
  if (!(k > 0.0)) throw Error(ErrorKind::invalid_range, "cutoff radius must be positive");
  if (k * std::sqrt(2.0) >= dom.half_period())
    throw Error(ErrorKind::annulus_exceeds_box, "cutoff annulus k*sqrt(2) = " + format_double(k * std::sqrt(2.0)) +
                                                    " does not fit inside the box of half-width " +
                                                    format_double(dom.half_period()));
  const PhysicalField phys = to_physical(v);
  const int d = dom.dim();
  const std::size_t n = dom.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 x = dom.position(i);
    double r2 = 0.0, u2 = 0.0;
    for (int a = 0; a < d; ++a) {
      r2 += x[a] * x[a];
      const double c = phys.component(a)[i];
      u2 += c * c;
    }
    sum += cutoff_xi(r2 / (k * k)) * u2;
  }
  return sum * dom.cell_volume();
}

}  // namespace cbflab
