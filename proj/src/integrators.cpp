#include "cbflab/integrators.hpp"

#include <cmath>
#include <string>

#include "cbflab/error.hpp"
#include "cbflab/snapshot_io.hpp"

namespace cbflab {

std::string to_string(SystemKind k) {
  switch (k) {
    case SystemKind::deterministic: return "deterministic";
    case SystemKind::conjugated: return "conjugated";
    case SystemKind::stratonovich: return "stratonovich";
  }
  return "unknown";
}

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::imex_cn_ab2: return "imex_cn_ab2";
    case Scheme::imex_euler: return "imex_euler";
    case Scheme::heun_stratonovich: return "heun_stratonovich";
  }
  return "unknown";
}

SpectralVelocityField Trajectory::reconstruct_u(std::size_t i) const {
  SpectralVelocityField u = states.at(i);
  if (system == SystemKind::conjugated) u *= 1.0 / z_at_states.at(i);
  return u;
}

// ---------------------------------------------------------------------------
// Stepper

Stepper::Stepper(SystemKind system, Scheme scheme, const PhysicalParameters& params, const ForcingProfile& f,
                 const ConjugationProcess* proc, TermMask mask)
    : system_(system), scheme_(scheme), p_(params), f_(&f), proc_(proc), mask_(mask) {
  const bool heun = scheme == Scheme::heun_stratonovich;
  if (heun != (system == SystemKind::stratonovich))
    throw Error(ErrorKind::invalid_config, "heun_stratonovich is the only scheme for the Stratonovich system");
  if (system == SystemKind::stratonovich && proc == nullptr)
    throw Error(ErrorKind::invalid_config, "the Stratonovich system needs a Wiener path");
  if (p_.r < 1.0) throw Error(ErrorKind::negative_r, "absorption exponent must be >= 1");
}

void Stepper::reset() { have_prev_ = false; }

double Stepper::z_at(double t) const {
  if (system_ != SystemKind::conjugated || proc_ == nullptr) return 1.0;
  return proc_->z(t);
}

void Stepper::set_factors(const TorusDomain& dom, double dt) {
  E_.assign(dom.size(), 1.0);
  E2_.assign(dom.size(), 1.0);
  if (mask_.linear) {
    for (std::size_t i = 0; i < dom.size(); ++i) {
      E_[i] = std::exp(-(p_.mu * dom.k_sq(i) + p_.alpha) * dt);
      E2_[i] = E_[i] * E_[i];
    }
  }
  dt_cached_ = dt;
  have_prev_ = false;
}

// Explicit part -z^{-1} B(v) - beta z^{-(r-1)} C(v) + z f(t); z == 1 outside
// the conjugated system, so every system runs through the same arithmetic.
std::vector<cplx> Stepper::rhs(const SpectralVelocityField& u, double t, double dt, bool record) {
  const TorusDomain& dom = u.domain();
  const double z = z_at(t);
  const double wB = 1.0 / z;
  const double wC = std::pow(z, -(p_.r - 1.0));
  const double wF = z;
  NonlinearTerms nt = nonlinear_terms(u, p_.r, mask_.convection, mask_.damping);

  const double cfl = wB * nt.max_speed * dt * dom.modes_per_axis() / dom.half_period();
  if (!(cfl <= 0.5))
    throw Error(ErrorKind::nan_blowup, "advective CFL proxy " + format_double(cfl) + " exceeds 0.5 (max |u| = " +
                                           format_double(wB * nt.max_speed) + ")");
  if (record) {
    last_lp_ = nt.lp_power;
    last_speed_ = nt.max_speed;
    last_grad_ = nt.max_grad;
  }

  std::vector<cplx> N(u.coeffs().size(), 0.0);
  if (mask_.convection)
    for (std::size_t i = 0; i < N.size(); ++i) N[i] -= wB * nt.B[i];
  if (mask_.damping)
    for (std::size_t i = 0; i < N.size(); ++i) N[i] -= p_.beta * wC * nt.C[i];
  if (mask_.forcing && !f_->is_zero()) {
    require_same_domain(dom, f_->amplitude().domain());
    const double g = wF * f_->envelope(t);
    const auto& fa = f_->amplitude().coeffs();
    for (std::size_t i = 0; i < N.size(); ++i) N[i] += g * fa[i];
  }
  return N;
}

SpectralVelocityField Stepper::step(const SpectralVelocityField& u, double t, double dt) {
  const TorusDomain& dom = u.domain();
  if (dt != dt_cached_ || E_.size() != dom.size()) set_factors(dom, dt);
  const std::size_t M = dom.size();
  const std::size_t n = u.coeffs().size();
  const auto& a = u.coeffs();
  auto Ef = [&](std::size_t i) { return E_[i % M]; };

  std::vector<cplx> N = rhs(u, t, dt, true);
  std::vector<cplx> out(n);

  switch (scheme_) {
    case Scheme::imex_euler:
      for (std::size_t i = 0; i < n; ++i) out[i] = Ef(i) * (a[i] + dt * N[i]);
      break;
    case Scheme::imex_cn_ab2:
      if (!have_prev_) {
        // Integrating-factor Heun (RK2) startup keeps the step second order.
        std::vector<cplx> pred(n);
        for (std::size_t i = 0; i < n; ++i) pred[i] = Ef(i) * (a[i] + dt * N[i]);
        const std::vector<cplx> N2 = rhs(SpectralVelocityField(dom, std::move(pred)), t + dt, dt, false);
        for (std::size_t i = 0; i < n; ++i) out[i] = Ef(i) * a[i] + 0.5 * dt * (Ef(i) * N[i] + N2[i]);
      } else {
        for (std::size_t i = 0; i < n; ++i)
          out[i] = Ef(i) * a[i] + dt * (1.5 * Ef(i) * N[i] - 0.5 * E2_[i % M] * prev_N_[i]);
      }
      prev_N_ = std::move(N);
      have_prev_ = true;
      break;
    case Scheme::heun_stratonovich: {
      const double eps = mask_.noise ? proc_->epsilon() : 0.0;
      const double dW = eps == 0.0 ? 0.0 : proc_->path().increment(t, t + dt);
      const double s = eps * dW;
      std::vector<cplx> pred(n);
      for (std::size_t i = 0; i < n; ++i) pred[i] = Ef(i) * (a[i] + dt * N[i] + s * a[i]);
      const std::vector<cplx> N2 = rhs(SpectralVelocityField(dom, pred), t + dt, dt, false);
      for (std::size_t i = 0; i < n; ++i)
        out[i] = Ef(i) * a[i] + 0.5 * dt * (Ef(i) * N[i] + N2[i]) + 0.5 * s * (Ef(i) * a[i] + pred[i]);
      break;
    }
  }
  for (const cplx& c : out)
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
      throw Error(ErrorKind::nan_blowup, "non-finite coefficient after step");
  return SpectralVelocityField(dom, std::move(out));
}

SpectralVelocityField step_deterministic(const SpectralVelocityField& u, double t, double dt,
                                         const PhysicalParameters& p, const ForcingProfile& f, Scheme scheme) {
  Stepper s(SystemKind::deterministic, scheme, p, f);
  return s.step(u, t, dt);
}

SpectralVelocityField step_conjugated(const SpectralVelocityField& v, double t, double dt,
                                      const PhysicalParameters& p, const ForcingProfile& f,
                                      const ConjugationProcess& proc, Scheme scheme) {
  Stepper s(SystemKind::conjugated, scheme, p, f, &proc);
  return s.step(v, t, dt);
}

SpectralVelocityField step_stratonovich(const SpectralVelocityField& u, double t, double dt,
                                        const PhysicalParameters& p, const ForcingProfile& f,
                                        const ConjugationProcess& proc, TermMask mask) {
  Stepper s(SystemKind::stratonovich, Scheme::heun_stratonovich, p, f, &proc, mask);
  return s.step(u, t, dt);
}

// ---------------------------------------------------------------------------
// solve

namespace {

// phi_m(x) = int_0^1 t^m e^{-x t} dt, m = 0, 1, 2.
std::array<double, 3> phi012(double x) {
  std::array<double, 3> out{};
  if (std::abs(x) < 1.0) {
    double term = 1.0;  // (-x)^j / j!
    for (int j = 0; j < 30; ++j) {
      for (int m = 0; m < 3; ++m) out[m] += term / (m + j + 1);
      term *= -x / (j + 1);
    }
    return out;
  }
  const double e = std::exp(-x);
  out[0] = (1.0 - e) / x;
  out[1] = (1.0 - e * (1.0 + x)) / (x * x);
  out[2] = (2.0 - e * (x * x + 2.0 * x + 2.0)) / (x * x * x);
  return out;
}

// Exact integral of e^{2 alpha theta} ||grad v(theta)||^2 over one step when
// e^{lambda theta} v(theta) is linear in theta on each mode.
double step_grad_integral(const SpectralVelocityField& a, const SpectralVelocityField& b, const PhysicalParameters& p,
                          bool linear, double h) {
  const TorusDomain& dom = a.domain();
  const std::size_t M = dom.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    const double ks = dom.k_sq(i);
    if (ks == 0.0 || !dom.retained(i)) continue;
    const double lam = linear ? p.mu * ks + p.alpha : 0.0;
    const double x = 2.0 * (lam - p.alpha) * h;
    const auto ph = phi012(x);
    const double grow = std::exp(lam * h);
    double acc = 0.0;
    for (int c = 0; c < a.dim(); ++c) {
      const cplx an = a.component(c)[i];
      const cplx bn = grow * b.component(c)[i] - an;
      acc += std::norm(an) * ph[0] + 2.0 * (std::conj(an) * bn).real() * ph[1] + std::norm(bn) * ph[2];
    }
    sum += ks * acc;
  }
  return sum * dom.box_volume() * h;
}

}  // namespace

Trajectory solve(SystemKind system, const SpectralVelocityField& initial, const SolverConfig& cfg,
                 const PhysicalParameters& p, const ForcingProfile& f, const ConjugationProcess* proc) {
  if (!(cfg.dt > 0.0)) throw Error(ErrorKind::invalid_config, "dt must be positive");
  const double T = cfg.t_end - cfg.t_start;
  if (!(T > 0.0)) throw Error(ErrorKind::invalid_config, "t_end must exceed t_start");
  const long nsteps = std::max(1L, static_cast<long>(std::ceil(T / cfg.dt - 1e-9)));
  const double dt = T / static_cast<double>(nsteps);

  Stepper st(system, cfg.scheme, p, f, proc, cfg.mask);
  Trajectory tr;
  tr.system = system;
  tr.dt = dt;
  tr.mask = cfg.mask;

  const double s0 = cfg.t_start;
  auto time_of = [&](long n) { return n == nsteps ? cfg.t_end : s0 + static_cast<double>(n) * dt; };
  auto record_state = [&](const SpectralVelocityField& v, double t) {
    tr.times.push_back(t);
    tr.states.push_back(v);
    tr.z_at_states.push_back(st.z_at(t));
  };
  auto make_entry = [&](const SpectralVelocityField& v, double t, double lp, double speed, double grad_max) {
    LedgerEntry e;
    e.t = t;
    e.h = h_norm_sq(v);
    e.grad = grad_norm_sq(v);
    e.lp = lp;
    e.f_dot = (cfg.mask.forcing && !f.is_zero()) ? inner_product(f.at(t), v) : 0.0;
    e.z = st.z_at(t);
    e.max_speed = speed;
    e.max_grad = grad_max;
    return e;
  };
  auto accumulate = [&](LedgerEntry& b, const LedgerEntry& a, const SpectralVelocityField& va,
                        const SpectralVelocityField& vb) {
    const double h = b.t - a.t;
    const double ea = std::exp(2.0 * p.alpha * (a.t - s0)), eb = std::exp(2.0 * p.alpha * (b.t - s0));
    const double wa = std::pow(a.z, -(p.r - 1.0)), wb = std::pow(b.z, -(p.r - 1.0));
    b.w_grad = a.w_grad + ea * step_grad_integral(va, vb, p, cfg.mask.linear, h);
    b.w_damp = a.w_damp + 0.5 * h * (ea * wa * a.lp + eb * wb * b.lp);
    b.w_work = a.w_work + 0.5 * h * (ea * a.z * a.f_dot + eb * b.z * b.f_dot);
    b.diss_mu = a.diss_mu + 0.5 * h * p.mu * (a.grad + b.grad);
    b.diss_alpha = a.diss_alpha + 0.5 * h * p.alpha * (a.h + b.h);
    b.diss_beta = a.diss_beta + 0.5 * h * p.beta * (a.lp + b.lp);
    b.work = a.work + 0.5 * h * (a.f_dot + b.f_dot);
  };

  SpectralVelocityField v = initial;
  record_state(v, s0);
  std::optional<SpectralVelocityField> prev_v;
  auto push_entry = [&](LedgerEntry e, const SpectralVelocityField& state) {
    if (!tr.ledger.empty()) accumulate(e, tr.ledger.back(), *prev_v, state);
    tr.ledger.push_back(e);
    prev_v = state;
  };
  for (long n = 0; n < nsteps; ++n) {
    const double t = time_of(n);
    SpectralVelocityField next(v.domain());
    try {
      next = st.step(v, t, dt);
    } catch (const Error& e) {
      const std::string msg = e.what();
      const std::string prefix = std::string(to_string(e.kind())) + ": ";
      throw Error(e.kind(), "step from t=" + format_double(t) + " failed: " +
                                (msg.rfind(prefix, 0) == 0 ? msg.substr(prefix.size()) : msg));
    }
    if (cfg.keep_ledger) push_entry(make_entry(v, t, st.last_lp(), st.last_max_speed(), st.last_max_grad()), v);
    v = std::move(next);
    if (cfg.record_stride > 0 && (n + 1) % cfg.record_stride == 0 && n + 1 < nsteps) record_state(v, time_of(n + 1));
  }
  record_state(v, cfg.t_end);
  if (cfg.keep_ledger) {
    const NonlinearTerms nt = nonlinear_terms(v, p.r, cfg.mask.convection, false);
    push_entry(make_entry(v, cfg.t_end, nt.lp_power, nt.max_speed, nt.max_grad), v);
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Audits

ResidualSeries energy_identity_residual(const Trajectory& traj, const PhysicalParameters& p) {
  if (traj.ledger.empty()) throw Error(ErrorKind::missing_ledger, "trajectory was solved without a ledger");
  if (traj.system == SystemKind::stratonovich)
    throw Error(ErrorKind::invalid_config, "the energy identity is audited for the pathwise systems only");
  ResidualSeries out;
  const LedgerEntry& first = traj.ledger.front();
  const double damp = traj.mask.damping ? 2.0 * p.beta : 0.0;
  const double work = traj.mask.forcing ? 2.0 : 0.0;
  for (const LedgerEntry& e : traj.ledger) {
    const double decay = std::exp(-2.0 * p.alpha * (e.t - first.t));
    const double rhs = decay * (first.h - 2.0 * p.mu * e.w_grad - damp * e.w_damp + work * e.w_work);
    const double res = std::abs(e.h - rhs);
    out.times.push_back(e.t);
    out.residual.push_back(res);
    out.max_residual = std::max(out.max_residual, res);
  }
  return out;
}

double continuity_eta1(const PhysicalParameters& p) {
  if (!(p.r > 3.0)) return 0.0;
  const double r = p.r;
  return (r - 3.0) / (2.0 * p.mu * (r - 1.0)) * std::pow(2.0 / (p.beta * p.mu * (r - 1.0)), 2.0 / (r - 3.0));
}

GapReport continuity_gap(const Trajectory& a, const Trajectory& b, const PhysicalParameters& p, double rel_slack) {
  if (a.system != b.system || a.times.size() != b.times.size() || a.dt != b.dt || a.times.empty())
    throw Error(ErrorKind::mismatched_trajectories, "trajectories differ in system, step or snapshot count");
  for (std::size_t i = 0; i < a.times.size(); ++i)
    if (a.times[i] != b.times[i] || a.z_at_states[i] != b.z_at_states[i])
      throw Error(ErrorKind::mismatched_trajectories, "snapshot times or noise values differ");
  require_same_domain(a.states[0].domain(), b.states[0].domain());

  GapReport rep;
  if (p.d == 2) {
    rep.which = ContinuityCase::two_dimensional;
    if (b.ledger.empty()) throw Error(ErrorKind::missing_ledger, "2D envelope needs the second ledger");
  } else if (p.r > 3.0) {
    rep.which = ContinuityCase::supercritical;
    rep.eta1 = continuity_eta1(p);
  } else if (p.r == 3.0 && 2.0 * p.beta * p.mu >= 1.0) {
    rep.which = ContinuityCase::critical;
  } else {
    throw Error(ErrorKind::inadmissible_params, validate_params(p).reason);
  }

  const double g0 = h_norm_sq(a.states[0] - b.states[0]);
  const double t0 = a.times[0];
  double exponent = 0.0;
  std::size_t k = 0;  // ledger cursor
  auto rate = [&](const LedgerEntry& e) {
    return e.max_grad / e.z + e.max_speed * e.max_speed / (8.0 * p.mu * e.z * e.z) - 2.0 * p.alpha;
  };
  rep.holds = true;
  for (std::size_t i = 0; i < a.times.size(); ++i) {
    const double t = a.times[i];
    double env = g0;
    switch (rep.which) {
      case ContinuityCase::two_dimensional:
        // Upper step sum of the rate along the ledger up to t.
        while (k + 1 < b.ledger.size() && b.ledger[k + 1].t <= t) {
          exponent += (b.ledger[k + 1].t - b.ledger[k].t) * std::max(rate(b.ledger[k]), rate(b.ledger[k + 1]));
          ++k;
        }
        env = g0 * std::exp(exponent);
        break;
      case ContinuityCase::supercritical: env = g0 * std::exp(2.0 * rep.eta1 * (t - t0)); break;
      case ContinuityCase::critical: env = g0; break;
    }
    const double gap = h_norm_sq(a.states[i] - b.states[i]);
    rep.times.push_back(t);
    rep.gap.push_back(gap);
    rep.envelope.push_back(env);
    if (env > 0.0) rep.max_ratio = std::max(rep.max_ratio, gap / env);
    if (gap > env * (1.0 + rel_slack) + 1e-14 * g0 + 1e-300) rep.holds = false;
  }
  return rep;
}

}  // namespace cbflab
