#pragma once

// Stokes operator A, convection B, Forchheimer damping C and the
// accompanying trilinear / monotonicity diagnostics.

#include <string>
#include <utility>
#include <vector>

#include "cbflab/spectral_domain.hpp"

namespace cbflab {

struct PhysicalParameters {
  int d = 2;
  double mu = 1.0;     // Brinkman (effective viscosity)
  double alpha = 1.0;  // Darcy
  double beta = 1.0;   // Forchheimer
  double r = 3.0;      // absorption exponent
  double epsilon = 0.0;
};

struct Admissibility {
  bool admissible = false;
  std::string reason;
};

/// Well-posed regimes: d=2 with r>=1, d=3 with r>3, or d=3, r=3 with 2*beta*mu >= 1.
Admissibility validate_params(const PhysicalParameters& p);

/// A u = |k|^2 u mode-wise.
SpectralVelocityField stokes_apply(const SpectralVelocityField& u);

/// Projected skew-symmetric convection 1/2 [(u.grad)v + div(u (x) v)].
SpectralVelocityField bilinear_B(const SpectralVelocityField& u, const SpectralVelocityField& v);
/// b(u, v, w) = <B(u, v), w>.
double trilinear_b(const SpectralVelocityField& u, const SpectralVelocityField& v, const SpectralVelocityField& w);
/// |b(u,v,w)| divided by the interpolation bound with unit constant
/// (exponents 1/2 in 2D, 1/4 and 3/4 in 3D). Zero when the bound vanishes.
double trilinear_ratio(const SpectralVelocityField& u, const SpectralVelocityField& v,
                       const SpectralVelocityField& w);

/// P(|u|^{r-1} u), evaluated pointwise on the grid; negative-r for r < 1.
SpectralVelocityField nonlinear_C(const SpectralVelocityField& u, double r);

/// lhs = <C(u)-C(v), u-v>, rhs = 1/2 || |u|^{(r-1)/2}(u-v) ||^2 + 1/2 || |v|^{(r-1)/2}(u-v) ||^2.
std::pair<double, double> monotonicity_gap(const SpectralVelocityField& u, const SpectralVelocityField& v, double r);

/// Both nonlinear terms from one set of transforms, as raw projected
/// coefficient arrays; used by the time steppers.
struct NonlinearTerms {
  std::vector<cplx> B;  // B(u, u); empty when not requested
  std::vector<cplx> C;  // C(u); empty when not requested
  double max_speed = 0.0;
  double max_grad = 0.0;  // max_grid |grad u| (Frobenius); only with B
  double lp_power = 0.0;  // ||u||_{L^{r+1}}^{r+1}
};
NonlinearTerms nonlinear_terms(const SpectralVelocityField& u, double r, bool want_B, bool want_C);

}  // namespace cbflab
