#include "cbflab/spectral_domain.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include "cbflab/error.hpp"

namespace cbflab {

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct TorusDomain::Impl {
  int d = 2;
  double L = 0.0;
  int N = 0;
  double fraction = 1.0;
  int cutoff = 0;
  std::size_t size = 0;

  std::vector<std::array<int, 3>> modes;
  std::vector<Vec3> kvec;
  std::vector<double> ksq;
  std::vector<char> keep;
  std::vector<double> phase;  // (-1)^{sum m}: grid origin sits at -L
  std::vector<std::size_t> conj;

  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
  }

  int wrap(int i) const { return i <= N / 2 ? i : i - N; }
  std::size_t unwrap(int m) const { return static_cast<std::size_t>(m >= 0 ? m : m + N); }
};

TorusDomain::TorusDomain(int d, double L, int N, double dealias_fraction) {
  if (d != 2 && d != 3) throw Error(ErrorKind::invalid_dimension, "d must be 2 or 3, got " + std::to_string(d));
  if (N < 4 || N % 2 != 0)
    throw Error(ErrorKind::invalid_resolution, "N must be even and >= 4, got " + std::to_string(N));
  if (!(L > 0.0) || !std::isfinite(L)) throw Error(ErrorKind::invalid_resolution, "L must be positive");
  if (!(dealias_fraction > 0.0 && dealias_fraction <= 1.0))
    throw Error(ErrorKind::invalid_resolution, "dealias fraction must lie in (0, 1]");

  auto impl = std::make_shared<Impl>();
  impl->d = d;
  impl->L = L;
  impl->N = N;
  impl->fraction = dealias_fraction;
  impl->cutoff = static_cast<int>(std::floor(dealias_fraction * (N / 2) + 1e-12));
  std::size_t size = 1;
  for (int a = 0; a < d; ++a) size *= static_cast<std::size_t>(N);
  impl->size = size;

  impl->modes.resize(size);
  impl->kvec.resize(size);
  impl->ksq.resize(size);
  impl->keep.resize(size);
  impl->phase.resize(size);
  impl->conj.resize(size);

  const double k0 = std::numbers::pi / L;
  for (std::size_t idx = 0; idx < size; ++idx) {
    std::array<int, 3> m{0, 0, 0};
    std::size_t rem = idx;
    for (int a = d - 1; a >= 0; --a) {
      m[a] = impl->wrap(static_cast<int>(rem % static_cast<std::size_t>(N)));
      rem /= static_cast<std::size_t>(N);
    }
    impl->modes[idx] = m;
    bool keep = true;
    int msum = 0;
    double ks = 0.0;
    for (int a = 0; a < d; ++a) {
      impl->kvec[idx][a] = k0 * m[a];
      ks += impl->kvec[idx][a] * impl->kvec[idx][a];
      if (std::abs(m[a]) > impl->cutoff || std::abs(m[a]) == N / 2) keep = false;
      msum += m[a];
    }
    impl->ksq[idx] = ks;
    impl->keep[idx] = keep ? 1 : 0;
    impl->phase[idx] = (msum % 2 == 0) ? 1.0 : -1.0;

    std::size_t cidx = 0;
    for (int a = 0; a < d; ++a) cidx = cidx * static_cast<std::size_t>(N) + impl->unwrap(-m[a] == N / 2 ? -N / 2 : -m[a]);
    impl->conj[idx] = cidx;
  }

  std::vector<int> n(static_cast<std::size_t>(d), N);
  std::vector<cplx> a(size), b(size);
  {
    std::lock_guard lock(planner_mutex());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    impl->fwd = fftw_plan_dft(d, n.data(), reinterpret_cast<fftw_complex*>(a.data()),
                              reinterpret_cast<fftw_complex*>(b.data()), FFTW_FORWARD, flags);
    impl->bwd = fftw_plan_dft(d, n.data(), reinterpret_cast<fftw_complex*>(a.data()),
                              reinterpret_cast<fftw_complex*>(b.data()), FFTW_BACKWARD, flags);
  }
  impl_ = std::move(impl);
}

TorusDomain make_domain(int d, double L, int N, double dealias_fraction) {
  return TorusDomain(d, L, N, dealias_fraction);
}

int TorusDomain::dim() const noexcept { return impl_->d; }
double TorusDomain::half_period() const noexcept { return impl_->L; }
int TorusDomain::modes_per_axis() const noexcept { return impl_->N; }
double TorusDomain::dealias_fraction() const noexcept { return impl_->fraction; }
int TorusDomain::dealias_cutoff() const noexcept { return impl_->cutoff; }
bool TorusDomain::truncates() const noexcept { return impl_->cutoff < impl_->N / 2 - 1; }
std::size_t TorusDomain::size() const noexcept { return impl_->size; }
double TorusDomain::box_volume() const noexcept { return std::pow(2.0 * impl_->L, impl_->d); }
double TorusDomain::cell_volume() const noexcept { return std::pow(spacing(), impl_->d); }
double TorusDomain::spacing() const noexcept { return 2.0 * impl_->L / impl_->N; }
const std::array<int, 3>& TorusDomain::mode(std::size_t idx) const { return impl_->modes[idx]; }
const Vec3& TorusDomain::wavevector(std::size_t idx) const { return impl_->kvec[idx]; }
double TorusDomain::k_sq(std::size_t idx) const { return impl_->ksq[idx]; }
bool TorusDomain::retained(std::size_t idx) const { return impl_->keep[idx] != 0; }
std::size_t TorusDomain::conjugate_index(std::size_t idx) const { return impl_->conj[idx]; }

Vec3 TorusDomain::position(std::size_t idx) const {
  Vec3 x{0.0, 0.0, 0.0};
  const std::size_t N = static_cast<std::size_t>(impl_->N);
  const double h = spacing();
  for (int a = impl_->d - 1; a >= 0; --a) {
    x[a] = -impl_->L + h * static_cast<double>(idx % N);
    idx /= N;
  }
  return x;
}

std::size_t TorusDomain::index_of(const std::array<int, 3>& m) const {
  std::size_t idx = 0;
  for (int a = 0; a < impl_->d; ++a) {
    if (m[a] <= -impl_->N / 2 || m[a] > impl_->N / 2) return impl_->size;
    idx = idx * static_cast<std::size_t>(impl_->N) + impl_->unwrap(m[a]);
  }
  return idx;
}

void TorusDomain::forward(std::span<const double> phys, std::span<cplx> spec) const {
  if (phys.size() != impl_->size || spec.size() != impl_->size)
    throw Error(ErrorKind::shape_mismatch, "forward transform size");
  std::vector<cplx> in(phys.begin(), phys.end());
  fftw_execute_dft(impl_->fwd, reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(spec.data()));
  const double scale = 1.0 / static_cast<double>(impl_->size);
  for (std::size_t i = 0; i < impl_->size; ++i) spec[i] *= impl_->phase[i] * scale;
}

void TorusDomain::inverse(std::span<const cplx> spec, std::span<double> phys) const {
  if (phys.size() != impl_->size || spec.size() != impl_->size)
    throw Error(ErrorKind::shape_mismatch, "inverse transform size");
  std::vector<cplx> in(impl_->size), out(impl_->size);
  for (std::size_t i = 0; i < impl_->size; ++i) in[i] = spec[i] * impl_->phase[i];
  fftw_execute_dft(impl_->bwd, reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  for (std::size_t i = 0; i < impl_->size; ++i) phys[i] = out[i].real();
}

bool TorusDomain::same_as(const TorusDomain& o) const noexcept {
  if (impl_ == o.impl_) return true;
  return impl_->d == o.impl_->d && impl_->N == o.impl_->N && impl_->L == o.impl_->L &&
         impl_->fraction == o.impl_->fraction;
}

void require_same_domain(const TorusDomain& a, const TorusDomain& b) {
  if (!a.same_as(b)) throw Error(ErrorKind::shape_mismatch, "fields live on different domains");
}

// ---------------------------------------------------------------------------

PhysicalField::PhysicalField(TorusDomain dom, int comps)
    : domain(std::move(dom)), components(comps), data(domain.size() * static_cast<std::size_t>(comps), 0.0) {}

std::span<double> PhysicalField::component(int c) {
  return {data.data() + domain.size() * static_cast<std::size_t>(c), domain.size()};
}
std::span<const double> PhysicalField::component(int c) const {
  return {data.data() + domain.size() * static_cast<std::size_t>(c), domain.size()};
}

SpectralVelocityField::SpectralVelocityField(TorusDomain domain)
    : domain_(std::move(domain)), coeffs_(domain_.size() * static_cast<std::size_t>(domain_.dim())) {}

SpectralVelocityField::SpectralVelocityField(TorusDomain domain, std::vector<cplx> coeffs)
    : domain_(std::move(domain)), coeffs_(std::move(coeffs)) {
  if (coeffs_.size() != domain_.size() * static_cast<std::size_t>(domain_.dim()))
    throw Error(ErrorKind::shape_mismatch, "coefficient array has " + std::to_string(coeffs_.size()) +
                                               " entries, expected " +
                                               std::to_string(domain_.size() * domain_.dim()));
}

std::span<cplx> SpectralVelocityField::component(int c) {
  return {coeffs_.data() + domain_.size() * static_cast<std::size_t>(c), domain_.size()};
}
std::span<const cplx> SpectralVelocityField::component(int c) const {
  return {coeffs_.data() + domain_.size() * static_cast<std::size_t>(c), domain_.size()};
}

SpectralVelocityField& SpectralVelocityField::operator+=(const SpectralVelocityField& o) {
  require_same_domain(domain_, o.domain_);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
  return *this;
}
SpectralVelocityField& SpectralVelocityField::operator-=(const SpectralVelocityField& o) {
  require_same_domain(domain_, o.domain_);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
  return *this;
}
SpectralVelocityField& SpectralVelocityField::operator*=(double s) {
  for (auto& c : coeffs_) c *= s;
  return *this;
}
void SpectralVelocityField::axpy(double s, const SpectralVelocityField& o) {
  require_same_domain(domain_, o.domain_);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += s * o.coeffs_[i];
}

SpectralVelocityField operator+(SpectralVelocityField a, const SpectralVelocityField& b) { return a += b; }
SpectralVelocityField operator-(SpectralVelocityField a, const SpectralVelocityField& b) { return a -= b; }
SpectralVelocityField operator*(double s, SpectralVelocityField a) { return a *= s; }

// ---------------------------------------------------------------------------

void dealias_inplace(const TorusDomain& domain, std::span<cplx> raw) {
  const std::size_t M = domain.size();
  if (raw.size() % M != 0) throw Error(ErrorKind::shape_mismatch, "dealias array size");
  const std::size_t comps = raw.size() / M;
  for (std::size_t i = 0; i < M; ++i) {
    if (domain.retained(i)) continue;
    for (std::size_t c = 0; c < comps; ++c) raw[c * M + i] = 0.0;
  }
}

void leray_project_inplace(const TorusDomain& domain, std::span<cplx> raw) {
  const std::size_t M = domain.size();
  const int d = domain.dim();
  if (raw.size() != M * static_cast<std::size_t>(d))
    throw Error(ErrorKind::shape_mismatch, "leray projection expects d * N^d coefficients");
  for (std::size_t i = 0; i < M; ++i) {
    if (!domain.retained(i)) {
      for (int c = 0; c < d; ++c) raw[c * M + i] = 0.0;
      continue;
    }
    const double ks = domain.k_sq(i);
    if (ks == 0.0) continue;
    const Vec3& k = domain.wavevector(i);
    cplx kdotu = 0.0;
    for (int c = 0; c < d; ++c) kdotu += k[c] * raw[c * M + i];
    const cplx s = kdotu / ks;
    for (int c = 0; c < d; ++c) raw[c * M + i] -= k[c] * s;
  }
}

SpectralVelocityField leray_project(const TorusDomain& domain, std::vector<cplx> raw) {
  leray_project_inplace(domain, raw);
  return SpectralVelocityField(domain, std::move(raw));
}

SpectralVelocityField leray_project(const SpectralVelocityField& field) {
  return leray_project(field.domain(), field.coeffs());
}

std::vector<cplx> transform_forward(const PhysicalField& phys) {
  const std::size_t M = phys.domain.size();
  std::vector<cplx> out(M * static_cast<std::size_t>(phys.components));
  for (int c = 0; c < phys.components; ++c)
    phys.domain.forward(phys.component(c), std::span<cplx>(out.data() + c * M, M));
  return out;
}

PhysicalField transform_inverse(const TorusDomain& domain, std::span<const cplx> coeffs, int components) {
  const std::size_t M = domain.size();
  if (coeffs.size() != M * static_cast<std::size_t>(components))
    throw Error(ErrorKind::shape_mismatch, "inverse transform array size");
  PhysicalField out(domain, components);
  for (int c = 0; c < components; ++c) domain.inverse(coeffs.subspan(c * M, M), out.component(c));
  return out;
}

PhysicalField to_physical(const SpectralVelocityField& field) {
  return transform_inverse(field.domain(), field.coeffs(), field.dim());
}

// ---------------------------------------------------------------------------

double inner_product(const SpectralVelocityField& a, const SpectralVelocityField& b) {
  require_same_domain(a.domain(), b.domain());
  double s = 0.0;
  for (std::size_t i = 0; i < a.coeffs().size(); ++i) s += (std::conj(a.coeffs()[i]) * b.coeffs()[i]).real();
  return s * a.domain().box_volume();
}

double h_norm_sq(const SpectralVelocityField& u) {
  double s = 0.0;
  for (const auto& c : u.coeffs()) s += std::norm(c);
  return s * u.domain().box_volume();
}

namespace {

template <class Weight>
double weighted_norm_sq(const SpectralVelocityField& u, Weight w) {
  const auto& dom = u.domain();
  const std::size_t M = dom.size();
  double s = 0.0;
  for (int c = 0; c < u.dim(); ++c) {
    auto comp = u.component(c);
    for (std::size_t i = 0; i < M; ++i) s += w(dom.k_sq(i)) * std::norm(comp[i]);
  }
  return s * dom.box_volume();
}

}  // namespace

double grad_norm_sq(const SpectralVelocityField& u) {
  return weighted_norm_sq(u, [](double ks) { return ks; });
}

double vprime_norm_sq(const SpectralVelocityField& u) {
  return weighted_norm_sq(u, [](double ks) { return 1.0 / (1.0 + ks); });
}

double lp_norm(const PhysicalField& u, double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw Error(ErrorKind::invalid_exponent, "p must lie in [1, inf)");
  const std::size_t M = u.domain.size();
  double s = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    double m2 = 0.0;
    for (int c = 0; c < u.components; ++c) m2 += u.data[c * M + i] * u.data[c * M + i];
    s += std::pow(m2, 0.5 * p);
  }
  return std::pow(s * u.domain.cell_volume(), 1.0 / p);
}

double lp_norm(const SpectralVelocityField& u, double p) { return lp_norm(to_physical(u), p); }

double max_abs(const PhysicalField& u) {
  const std::size_t M = u.domain.size();
  double best = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    double m2 = 0.0;
    for (int c = 0; c < u.components; ++c) m2 += u.data[c * M + i] * u.data[c * M + i];
    best = std::max(best, m2);
  }
  return std::sqrt(best);
}

namespace {
double coeff_norm(const SpectralVelocityField& u) {
  double s = 0.0;
  for (const auto& c : u.coeffs()) s += std::norm(c);
  return std::sqrt(s);
}
}  // namespace

double divergence_defect(const SpectralVelocityField& u) {
  const double nrm = coeff_norm(u);
  if (nrm == 0.0) return 0.0;
  const auto& dom = u.domain();
  const std::size_t M = dom.size();
  double worst = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    const Vec3& k = dom.wavevector(i);
    cplx kd = 0.0;
    for (int c = 0; c < u.dim(); ++c) kd += k[c] * u.component(c)[i];
    worst = std::max(worst, std::abs(kd));
  }
  return worst / nrm;
}

double reality_defect(const SpectralVelocityField& u) {
  const double nrm = coeff_norm(u);
  if (nrm == 0.0) return 0.0;
  const auto& dom = u.domain();
  const std::size_t M = dom.size();
  double worst = 0.0;
  for (int c = 0; c < u.dim(); ++c) {
    auto comp = u.component(c);
    for (std::size_t i = 0; i < M; ++i)
      worst = std::max(worst, std::abs(comp[dom.conjugate_index(i)] - std::conj(comp[i])));
  }
  return worst / nrm;
}

NormReport norms(const SpectralVelocityField& u, std::span<const double> p_list) {
  NormReport rep;
  rep.h_norm_sq = h_norm_sq(u);
  rep.grad_norm_sq = grad_norm_sq(u);
  rep.v_norm_sq = rep.h_norm_sq + rep.grad_norm_sq;
  rep.vprime_norm_sq = vprime_norm_sq(u);
  if (!p_list.empty()) {
    const PhysicalField phys = to_physical(u);
    for (double p : p_list) rep.lp_norm.emplace_back(p, lp_norm(phys, p));
  }
  return rep;
}

std::pair<double, double> check_interpolation(const SpectralVelocityField& u, double s1, double s, double s2) {
  if (!(1.0 <= s1 && s1 <= s && s <= s2 && std::isfinite(s2)))
    throw Error(ErrorKind::invalid_exponent, "need 1 <= s1 <= s <= s2 < inf");
  const PhysicalField phys = to_physical(u);
  const double lhs = lp_norm(phys, s);
  if (s1 == s2) return {lhs, lp_norm(phys, s1)};
  // 1/s = l/s1 + (1-l)/s2
  const double ell = (1.0 / s - 1.0 / s2) / (1.0 / s1 - 1.0 / s2);
  const double rhs = std::pow(lp_norm(phys, s1), ell) * std::pow(lp_norm(phys, s2), 1.0 - ell);
  return {lhs, rhs};
}

SpectralVelocityField field_from_function(const TorusDomain& domain, const std::function<Vec3(const Vec3&)>& fn,
                                          bool project) {
  const int d = domain.dim();
  PhysicalField phys(domain, d);
  const std::size_t M = domain.size();
  for (std::size_t i = 0; i < M; ++i) {
    const Vec3 v = fn(domain.position(i));
    for (int c = 0; c < d; ++c) phys.data[c * M + i] = v[c];
  }
  std::vector<cplx> raw = transform_forward(phys);
  if (project) return leray_project(domain, std::move(raw));
  dealias_inplace(domain, raw);
  return SpectralVelocityField(domain, std::move(raw));
}

SpectralVelocityField random_field(const TorusDomain& domain, std::mt19937_64& rng, double kc, bool zero_mean) {
  const int d = domain.dim();
  const std::size_t M = domain.size();
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<cplx> raw(M * static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < M; ++i) {
    if (!domain.retained(i)) continue;
    const double amp = std::exp(-domain.k_sq(i) / (4.0 * kc * kc));
    for (int c = 0; c < d; ++c) raw[c * M + i] = amp * cplx(g(rng), g(rng));
  }
  // Hermitian symmetry makes the physical field real.
  std::vector<cplx> sym(raw.size());
  for (int c = 0; c < d; ++c)
    for (std::size_t i = 0; i < M; ++i)
      sym[c * M + i] = 0.5 * (raw[c * M + i] + std::conj(raw[c * M + domain.conjugate_index(i)]));
  if (zero_mean)
    for (int c = 0; c < d; ++c) sym[c * M] = 0.0;
  SpectralVelocityField u = leray_project(domain, std::move(sym));
  const double n = std::sqrt(h_norm_sq(u));
  if (n > 0.0) u *= 1.0 / n;
  return u;
}

}  // namespace cbflab
