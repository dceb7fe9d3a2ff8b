#pragma once

// Time integration of the deterministic, conjugated (pathwise) and direct
// Stratonovich systems, with an energy ledger for auditing balance laws.

#include <optional>
#include <string>
#include <vector>

#include "cbflab/operators.hpp"
#include "cbflab/spectral_domain.hpp"
#include "cbflab/stochastic_env.hpp"

namespace cbflab {

enum class SystemKind { deterministic, conjugated, stratonovich };
enum class Scheme { imex_cn_ab2, imex_euler, heun_stratonovich };

std::string to_string(SystemKind k);
std::string to_string(Scheme s);

/// Switches for isolating terms in tests; everything is on by default.
struct TermMask {
  bool linear = true;      // mu A + alpha
  bool convection = true;  // B
  bool damping = true;     // C
  bool forcing = true;
  bool noise = true;       // multiplicative noise of the Stratonovich system
};

struct SolverConfig {
  double dt = 1e-3;
  Scheme scheme = Scheme::imex_cn_ab2;
  double t_start = 0.0;
  double t_end = 1.0;
  int record_stride = 0;  // 0: only the endpoints are stored
  bool keep_ledger = true;
  TermMask mask;
};

/// Per-step record. Cumulative integrals run from t_start with weight
/// exp(2 alpha (xi - t_start)); the plain ones carry no weight.
struct LedgerEntry {
  double t = 0.0;
  double h = 0.0;          // ||v||^2
  double grad = 0.0;       // ||grad v||^2
  double lp = 0.0;         // ||v||_{L^{r+1}}^{r+1}
  double f_dot = 0.0;      // <f(t), v>
  double z = 1.0;
  double max_speed = 0.0;  // max_grid |v|
  double max_grad = 0.0;   // max_grid |grad v|
  double w_grad = 0.0;     // int e^{2a(xi-s)} ||grad v||^2
  double w_damp = 0.0;     // int e^{2a(xi-s)} z^{-(r-1)} ||v||^{r+1}
  double w_work = 0.0;     // int e^{2a(xi-s)} z <f, v>
  double diss_mu = 0.0;    // int mu ||grad v||^2
  double diss_alpha = 0.0; // int alpha ||v||^2
  double diss_beta = 0.0;  // int beta ||v||^{r+1}
  double work = 0.0;       // int <f, v>
};

struct Trajectory {
  SystemKind system = SystemKind::deterministic;
  double dt = 0.0;
  TermMask mask;
  std::vector<double> times;
  std::vector<SpectralVelocityField> states;
  std::vector<double> z_at_states;
  std::vector<LedgerEntry> ledger;  // one entry per time step node

  const SpectralVelocityField& final_state() const { return states.back(); }
  /// u = v / z at snapshot i (identity for the other systems).
  SpectralVelocityField reconstruct_u(std::size_t i) const;
};

/// One time stepper with multistep history. The conjugation process is
/// required for the conjugated and Stratonovich systems (z and dW come
/// from its path); nullptr means z == 1.
class Stepper {
 public:
  Stepper(SystemKind system, Scheme scheme, const PhysicalParameters& params, const ForcingProfile& f,
          const ConjugationProcess* proc = nullptr, TermMask mask = {});

  /// Advances u from t to t + dt. Throws nan-blowup on CFL violation or
  /// non-finite output.
  SpectralVelocityField step(const SpectralVelocityField& u, double t, double dt);
  /// Forget multistep history (next step is a startup step).
  void reset();

  /// Diagnostics evaluated at the input state of the last step.
  double last_lp() const noexcept { return last_lp_; }
  double last_max_speed() const noexcept { return last_speed_; }
  double last_max_grad() const noexcept { return last_grad_; }
  double z_at(double t) const;

 private:
  std::vector<cplx> rhs(const SpectralVelocityField& u, double t, double dt, bool record);
  void set_factors(const TorusDomain& dom, double dt);

  SystemKind system_;
  Scheme scheme_;
  PhysicalParameters p_;
  const ForcingProfile* f_;
  const ConjugationProcess* proc_;
  TermMask mask_;
  double dt_cached_ = -1.0;
  std::vector<double> E_, E2_;
  std::vector<cplx> prev_N_;
  bool have_prev_ = false;
  double last_lp_ = 0.0, last_speed_ = 0.0, last_grad_ = 0.0;
};

/// Single fresh steps (the multistep schemes take their startup step).
SpectralVelocityField step_deterministic(const SpectralVelocityField& u, double t, double dt,
                                         const PhysicalParameters& p, const ForcingProfile& f,
                                         Scheme scheme = Scheme::imex_cn_ab2);
SpectralVelocityField step_conjugated(const SpectralVelocityField& v, double t, double dt,
                                      const PhysicalParameters& p, const ForcingProfile& f,
                                      const ConjugationProcess& proc, Scheme scheme = Scheme::imex_cn_ab2);
SpectralVelocityField step_stratonovich(const SpectralVelocityField& u, double t, double dt,
                                        const PhysicalParameters& p, const ForcingProfile& f,
                                        const ConjugationProcess& proc, TermMask mask = {});

/// Integrates from config.t_start to config.t_end. Errors from steps are
/// rethrown with the failing time in the message.
Trajectory solve(SystemKind system, const SpectralVelocityField& initial, const SolverConfig& config,
                 const PhysicalParameters& p, const ForcingProfile& f, const ConjugationProcess* proc = nullptr);

struct ResidualSeries {
  std::vector<double> times;
  std::vector<double> residual;
  double max_residual = 0.0;
};

/// |‖v(t)‖^2 - e^{-2 a (t-s)}[‖v_s‖^2 - 2 mu G_grad - 2 beta G_damp + 2 G_work]|
/// at every ledger node. missing-ledger when the ledger is empty.
ResidualSeries energy_identity_residual(const Trajectory& traj, const PhysicalParameters& p);

enum class ContinuityCase { two_dimensional, supercritical, critical };

struct GapReport {
  ContinuityCase which = ContinuityCase::two_dimensional;
  double eta1 = 0.0;  // supercritical exponent
  std::vector<double> times;
  std::vector<double> gap;       // ||w(t)||^2
  std::vector<double> envelope;  // analytic bound
  double max_ratio = 0.0;        // max gap / envelope
  bool holds = false;
};

/// eta_1 = (r-3)/(2 mu (r-1)) [2/(beta mu (r-1))]^{2/(r-3)}.
double continuity_eta1(const PhysicalParameters& p);

/// Compares two trajectories driven by the same path and forcing. The 2D
/// envelope integrates (z^{-1} G + M^2/(8 mu z^2) - 2 alpha) along the
/// ledger of the second trajectory (M, G: grid maxima of |v2| and |grad v2|).
GapReport continuity_gap(const Trajectory& a, const Trajectory& b, const PhysicalParameters& p,
                         double rel_slack = 1e-6);

}  // namespace cbflab
