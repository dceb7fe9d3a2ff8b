#pragma once

// Periodic box [-L, L)^d standing in for R^d: wavevector tables, FFT
// transforms, Leray projection, dealiasing and the norms used by the
// energy estimates.

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace cbflab {

using cplx = std::complex<double>;
using Vec3 = std::array<double, 3>;

class TorusDomain {
 public:
  /// Throws invalid-dimension / invalid-resolution on bad input.
  TorusDomain(int d, double L, int N, double dealias_fraction);

  int dim() const noexcept;
  double half_period() const noexcept;
  int modes_per_axis() const noexcept;
  double dealias_fraction() const noexcept;
  /// floor(fraction * N / 2): modes with every |m_i| above it are truncated.
  int dealias_cutoff() const noexcept;
  /// True when the dealias cutoff removes any non-Nyquist mode.
  bool truncates() const noexcept;

  std::size_t size() const noexcept;  // N^d, grid points == stored modes
  double box_volume() const noexcept;   // (2L)^d
  double cell_volume() const noexcept;  // (2L/N)^d
  double spacing() const noexcept;      // 2L/N

  /// Integer mode index m (k = m * pi / L); unused axes are 0.
  const std::array<int, 3>& mode(std::size_t idx) const;
  const Vec3& wavevector(std::size_t idx) const;
  double k_sq(std::size_t idx) const;
  /// Inside the dealias cube and not a Nyquist mode.
  bool retained(std::size_t idx) const;
  /// Physical coordinates of grid point idx (x_j = -L + j*h per axis).
  Vec3 position(std::size_t idx) const;
  /// Storage index of integer mode m, or size() when m is not representable.
  std::size_t index_of(const std::array<int, 3>& m) const;
  /// Storage index of -m.
  std::size_t conjugate_index(std::size_t idx) const;

  /// Spectral coefficients are normalized so that u(x) = sum_m c_m e^{i k_m . x}.
  void forward(std::span<const double> phys, std::span<cplx> spec) const;
  void inverse(std::span<const cplx> spec, std::span<double> phys) const;

  bool same_as(const TorusDomain& other) const noexcept;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

TorusDomain make_domain(int d, double L, int N, double dealias_fraction);

/// Real vector field sampled on the grid, component-major.
struct PhysicalField {
  TorusDomain domain;
  int components;
  std::vector<double> data;

  PhysicalField(TorusDomain dom, int comps);
  std::span<double> component(int c);
  std::span<const double> component(int c) const;
};

/// Divergence-free velocity stored as one complex d-vector per wavevector.
class SpectralVelocityField {
 public:
  explicit SpectralVelocityField(TorusDomain domain);
  /// coeffs laid out component-major (d * N^d); shape-mismatch otherwise.
  SpectralVelocityField(TorusDomain domain, std::vector<cplx> coeffs);

  const TorusDomain& domain() const noexcept { return domain_; }
  int dim() const noexcept { return domain_.dim(); }
  std::span<cplx> component(int c);
  std::span<const cplx> component(int c) const;
  std::vector<cplx>& coeffs() noexcept { return coeffs_; }
  const std::vector<cplx>& coeffs() const noexcept { return coeffs_; }

  SpectralVelocityField& operator+=(const SpectralVelocityField& o);
  SpectralVelocityField& operator-=(const SpectralVelocityField& o);
  SpectralVelocityField& operator*=(double s);
  /// this += s * o
  void axpy(double s, const SpectralVelocityField& o);

 private:
  TorusDomain domain_;
  std::vector<cplx> coeffs_;
};

SpectralVelocityField operator+(SpectralVelocityField a, const SpectralVelocityField& b);
SpectralVelocityField operator-(SpectralVelocityField a, const SpectralVelocityField& b);
SpectralVelocityField operator*(double s, SpectralVelocityField a);

void require_same_domain(const TorusDomain& a, const TorusDomain& b);

struct NormReport {
  double h_norm_sq = 0.0;
  double grad_norm_sq = 0.0;
  double v_norm_sq = 0.0;
  std::vector<std::pair<double, double>> lp_norm;  // (p, ||u||_{L^p})
  double vprime_norm_sq = 0.0;
};

/// P u = u - k (k.u)/|k|^2 per mode; zeroes non-retained modes.
SpectralVelocityField leray_project(const TorusDomain& domain, std::vector<cplx> raw);
SpectralVelocityField leray_project(const SpectralVelocityField& field);
/// In-place projection of a raw component-major array.
void leray_project_inplace(const TorusDomain& domain, std::span<cplx> raw);
void dealias_inplace(const TorusDomain& domain, std::span<cplx> raw);

std::vector<cplx> transform_forward(const PhysicalField& phys);
PhysicalField transform_inverse(const TorusDomain& domain, std::span<const cplx> coeffs, int components);
PhysicalField to_physical(const SpectralVelocityField& field);

/// (a, b)_H via Parseval.
double inner_product(const SpectralVelocityField& a, const SpectralVelocityField& b);
double h_norm_sq(const SpectralVelocityField& u);
double grad_norm_sq(const SpectralVelocityField& u);
double vprime_norm_sq(const SpectralVelocityField& u);
/// ||u||_{L^p} by grid quadrature.
double lp_norm(const PhysicalField& u, double p);
double lp_norm(const SpectralVelocityField& u, double p);
/// sup over grid of |u(x)|.
double max_abs(const PhysicalField& u);
/// max_k |k.u(k)| / ||u||_coeff (0 for the zero field).
double divergence_defect(const SpectralVelocityField& u);
/// max_k |u(-k) - conj(u(k))| / ||u||_coeff.
double reality_defect(const SpectralVelocityField& u);

NormReport norms(const SpectralVelocityField& u, std::span<const double> p_list = {});

/// Both sides of ||u||_{L^s} <= ||u||_{L^s1}^l ||u||_{L^s2}^(1-l).
std::pair<double, double> check_interpolation(const SpectralVelocityField& u, double s1, double s,
                                              double s2);

/// Samples fn on the grid, transforms, dealiases and projects.
SpectralVelocityField field_from_function(const TorusDomain& domain,
                                          const std::function<Vec3(const Vec3&)>& fn,
                                          bool project = true);

/// Random divergence-free dealiased field with spectrum decaying like
/// exp(-|k|^2 / (2 kc^2)); mean mode zero when requested. Unit H-norm.
SpectralVelocityField random_field(const TorusDomain& domain, std::mt19937_64& rng,
                                   double kc = 3.0, bool zero_mean = false);

}  // namespace cbflab
