#pragma once

// Cocycles, absorbing radii, pullback attractor sampling, Hausdorff
// semi-distances, the epsilon -> 0 sweep and the cutoff tail diagnostic.

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "cbflab/integrators.hpp"
#include "cbflab/operators.hpp"
#include "cbflab/spectral_domain.hpp"
#include "cbflab/stochastic_env.hpp"

namespace cbflab {

enum class CocycleKind { det, stoch };

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Results must be
/// written to slot i so the outcome does not depend on scheduling. The
/// first exception thrown by any task is rethrown.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

/// Everything a cocycle evaluation needs besides (t, tau, omega, x).
struct CocycleSetup {
  PhysicalParameters params;  // params.epsilon is the noise intensity
  const ForcingProfile* forcing = nullptr;
  SolverConfig solver;        // dt and scheme; start/end are overwritten
  const WienerPath* omega = nullptr;  // may be null when epsilon == 0
};

/// Phi(t, tau, omega, x). For the stochastic kind the state is conjugated
/// with z(tau, theta_{-tau} omega), evolved by the pathwise system driven by
/// theta_{-tau} omega, and unwrapped with z(tau + t, theta_{-tau} omega).
SpectralVelocityField cocycle_eval(CocycleKind kind, double t, double tau, const SpectralVelocityField& x,
                                   const CocycleSetup& setup);
/// Same with an explicit path (used for theta_s omega in cocycle identities).
SpectralVelocityField cocycle_eval(CocycleKind kind, double t, double tau, const WienerPath* omega,
                                   const SpectralVelocityField& x, const CocycleSetup& setup);
/// Phi(t, tau - t, theta_{-t} omega, x): the state at tau reached from age t.
SpectralVelocityField pullback_eval(CocycleKind kind, double t, double tau, const SpectralVelocityField& x,
                                    const CocycleSetup& setup);

struct AbsorbingEstimate {
  double radius_sq = 1.0;
  double constant_term = 1.0;  // z^{-2} (1 for the deterministic radius)
  double integral_term = 0.0;  // the forcing part, after the z^{-2} factor
  double entry_time = std::numeric_limits<double>::quiet_NaN();
  double companion_R = std::numeric_limits<double>::quiet_NaN();
  bool within_companion = true;  // M_eps <= R
};

/// M_0(tau) = 1 + (1/min(mu, alpha)) int e^{alpha (xi - tau)} ||f(xi)||_{V'}^2.
AbsorbingEstimate absorbing_radius_det(double tau, const PhysicalParameters& p, const ForcingProfile& f);
/// M_eps(tau, omega) and the epsilon-uniform companion radius R(tau, omega).
AbsorbingEstimate absorbing_radius_stoch(double tau, const WienerPath* omega, double epsilon,
                                         const PhysicalParameters& p, const ForcingProfile& f);

/// Centered balls in the divergence-free subspace spanned by the modes with
/// |m_i| <= max_mode, sampled uniformly.
class TemperedFamily {
 public:
  TemperedFamily(std::function<double(double)> radius_fn, int sample_count, std::uint64_t seed, int max_mode = 2);
  /// rho(t) = rho0 (1 + t)^power.
  static TemperedFamily ball(double rho0, double power, int sample_count, std::uint64_t seed, int max_mode = 2);

  double radius(double age) const { return radius_fn_(age); }
  int sample_count() const noexcept { return count_; }
  std::uint64_t seed() const noexcept { return seed_; }
  /// Samples at pullback age t; the same seed gives the same directions and
  /// radial fractions at every age.
  std::vector<SpectralVelocityField> sample(const TorusDomain& domain, double age) const;
  /// e^{-t} rho(t)^2 on the ladder {10, 20, 40, 80} is decreasing.
  bool check_tempered() const;

 private:
  std::function<double(double)> radius_fn_;
  int count_;
  std::uint64_t seed_;
  int max_mode_;
};

struct AbsorptionReport {
  AbsorbingEstimate estimate;
  std::vector<double> ladder;
  std::vector<double> max_norm_sq;  // max over samples of ||Phi||^2 per rung
  bool absorbed = false;            // entry_time found inside the ladder
};

/// Evolves every family sample from tau - t to tau for each rung t and
/// records the first rung from which every endpoint stays inside the ball.
AbsorptionReport measure_absorption(CocycleKind kind, double tau, const TemperedFamily& family,
                                    const CocycleSetup& setup, const std::vector<double>& ladder, int workers = 1);

struct AttractorSample {
  double tau = 0.0;
  std::uint64_t omega_seed = 0;
  double epsilon = 0.0;
  std::vector<double> horizons;
  std::vector<std::vector<SpectralVelocityField>> clouds;  // one per horizon
  std::vector<SpectralVelocityField> points;               // final cloud
  std::vector<double> convergence_diag;                    // d_H(cloud[i+1], cloud[i])
  bool diag_decreasing = true;
  AbsorbingEstimate radius;
  bool contained = true;  // final points inside the absorbing ball (1e-6 slack)
};

constexpr std::size_t kMaxCloud = 256;

/// ladder-not-decreasing style check: horizons must increase (invalid-range).
AttractorSample sample_attractor(CocycleKind kind, double tau, const CocycleSetup& setup,
                                 const std::vector<double>& horizons, const TemperedFamily& family, int workers = 1);

/// sup_{a in A} inf_{b in B} ||a - b||_H; empty-set error on empty input.
double hausdorff_semidistance(const std::vector<SpectralVelocityField>& A, const std::vector<SpectralVelocityField>& B);
/// max of both semi-distances.
double hausdorff_distance(const std::vector<SpectralVelocityField>& A, const std::vector<SpectralVelocityField>& B);
/// Greedy farthest-point subset of at most `cap` points, seeded at index 0.
std::vector<SpectralVelocityField> farthest_point_thin(const std::vector<SpectralVelocityField>& pts, std::size_t cap);

struct SweepRow {
  double epsilon = 0.0;
  double horizon = 0.0;
  double dist_h = 0.0;  // dist(A_eps cloud, A_0 cloud) at this horizon
  double m_eps = 0.0;
  double entry_time = std::numeric_limits<double>::quiet_NaN();
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<double> epsilons;
  std::vector<double> final_dist;  // per epsilon at the largest horizon
  double m0 = 0.0;
  bool weakly_decreasing = false;
  bool last_is_min = false;
};

/// ladder-not-decreasing when the epsilons do not strictly decrease, and
/// invalid-range when they leave (0, 1].
SweepResult semicontinuity_sweep(double tau, const CocycleSetup& setup, const std::vector<double>& eps_ladder,
                                 const std::vector<double>& horizons, const TemperedFamily& family, int workers = 1);

struct PerturbationReport {
  std::vector<double> times;
  std::vector<double> gap;    // ||v_eps(t) - u(t)||^2
  std::vector<double> bound;  // Gronwall envelope
  bool holds = false;
  double end_gap = 0.0;
};

/// Solves the conjugated system (from z(tau) u0) and the deterministic one
/// (from u0) side by side on [tau, tau + T] and evaluates
///   d|y|^2 <= (zeta G + zeta^2 M^2/(8 mu) - 2 alpha + 1)|y|^2 + a^2,
///   a = |zeta-1| |B(u)| + beta |zeta^{r-1}-1| |C(u)| + |z-1| |f|,
/// with zeta = 1/z and M, G the grid maxima of |u| and |grad u|.
PerturbationReport perturbation_envelope(double tau, double T, const SpectralVelocityField& u0,
                                         const CocycleSetup& setup);

/// Quintic smoothstep: 0 on [0, 1], 1 on [2, inf).
double cutoff_xi(double s);
/// Grid quadrature of xi(|x|^2/k^2) |v(x)|^2; annulus-exceeds-box when k sqrt(2) >= L.
double tail_mass(const SpectralVelocityField& v, double k);

}  // namespace cbflab
