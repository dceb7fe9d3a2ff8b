#include "cbflab/stochastic_env.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "cbflab/error.hpp"
#include "cbflab/snapshot_io.hpp"

namespace cbflab {

// ---------------------------------------------------------------------------
// WienerPath

WienerPath WienerPath::sample(std::uint64_t seed, double t_min, double t_max, double dt_grid) {
  if (!(t_min < 0.0 && 0.0 < t_max) || !(dt_grid > 0.0) || !std::isfinite(t_min) || !std::isfinite(t_max))
    throw Error(ErrorKind::invalid_range, "need t_min < 0 < t_max and dt_grid > 0");
  const long n_neg = static_cast<long>(std::ceil(-t_min / dt_grid - 1e-9));
  const long n_pos = static_cast<long>(std::ceil(t_max / dt_grid - 1e-9));
  auto data = std::make_shared<Data>();
  data->seed = seed;
  data->dt = dt_grid;
  data->first = -n_neg;
  data->values.assign(static_cast<std::size_t>(n_neg + n_pos + 1), 0.0);

  const auto lo = static_cast<std::uint32_t>(seed & 0xffffffffu);
  const auto hi = static_cast<std::uint32_t>(seed >> 32);
  std::normal_distribution<double> g(0.0, std::sqrt(dt_grid));
  std::seed_seq fwd_seq{lo, hi, 1u}, bwd_seq{lo, hi, 2u};
  std::mt19937_64 fwd(fwd_seq), bwd(bwd_seq);
  auto& v = data->values;
  const std::size_t zero = static_cast<std::size_t>(n_neg);
  for (long j = 1; j <= n_pos; ++j) v[zero + j] = v[zero + j - 1] + g(fwd);
  for (long j = 1; j <= n_neg; ++j) v[zero - j] = v[zero - j + 1] + g(bwd);
  return WienerPath(std::move(data), 0.0);
}

WienerPath WienerPath::from_function(double t_min, double t_max, double dt_grid,
                                     const std::function<double(double)>& fn) {
  if (!(t_min < 0.0 && 0.0 < t_max) || !(dt_grid > 0.0))
    throw Error(ErrorKind::invalid_range, "need t_min < 0 < t_max and dt_grid > 0");
  const long n_neg = static_cast<long>(std::ceil(-t_min / dt_grid - 1e-9));
  const long n_pos = static_cast<long>(std::ceil(t_max / dt_grid - 1e-9));
  auto data = std::make_shared<Data>();
  data->dt = dt_grid;
  data->first = -n_neg;
  const double f0 = fn(0.0);
  for (long j = -n_neg; j <= n_pos; ++j) data->values.push_back(j == 0 ? 0.0 : fn(j * dt_grid) - f0);
  return WienerPath(std::move(data), 0.0);
}

double WienerPath::t_min() const noexcept { return data_->first * data_->dt - shift_; }
double WienerPath::t_max() const noexcept {
  return (data_->first + static_cast<long>(data_->values.size()) - 1) * data_->dt - shift_;
}

double WienerPath::raw(double t) const {
  const double x = t / data_->dt;
  const double lo = static_cast<double>(data_->first);
  const double hi = lo + static_cast<double>(data_->values.size() - 1);
  const double slack = 1e-9;
  if (!(x >= lo - slack && x <= hi + slack))
    throw Error(ErrorKind::out_of_window, "path queried at raw time " + format_double(t) + " outside [" +
                                              format_double(lo * data_->dt) + ", " + format_double(hi * data_->dt) +
                                              "]");
  double fl = std::floor(x);
  double frac = x - fl;
  if (fl < lo) {
    fl = lo;
    frac = 0.0;
  }
  if (fl >= hi) {
    fl = hi;
    frac = 0.0;
  }
  const std::size_t j = static_cast<std::size_t>(static_cast<long>(fl) - data_->first);
  const double a = data_->values[j];
  if (frac == 0.0) return a;
  return a + frac * (data_->values[j + 1] - a);
}

double WienerPath::operator()(double t) const {
  if (t == 0.0) return 0.0;
  if (shift_ == 0.0) return raw(t);
  return raw(t + shift_) - raw(shift_);
}

double WienerPath::increment(double a, double b) const { return raw(b + shift_) - raw(a + shift_); }

WienerPath WienerPath::shifted(double s) const {
  WienerPath out(data_, shift_ + s);
  out.raw(out.shift_);  // the new origin must itself be sampled
  return out;
}

std::vector<double> WienerPath::nodes_in(double a, double b) const {
  std::vector<double> out;
  const long j0 = static_cast<long>(std::ceil((a + shift_) / data_->dt));
  const long j1 = static_cast<long>(std::floor((b + shift_) / data_->dt));
  for (long j = j0; j <= j1; ++j) {
    const double t = j * data_->dt - shift_;
    if (t >= a && t <= b) out.push_back(t);
  }
  return out;
}

void WienerPath::export_csv(const std::filesystem::path& path) const {
  CsvTable t;
  t.header = {"t", "omega"};
  const long n = static_cast<long>(data_->values.size());
  for (long j = 0; j < n; ++j) {
    const double traw = (data_->first + j) * data_->dt;
    if (shift_ != 0.0 && (traw - shift_ < t_min() || traw - shift_ > t_max())) continue;
    t.rows.push_back({traw - shift_, (*this)(traw - shift_)});
  }
  write_csv(path, t);
}

SublinearReport verify_sublinear(const WienerPath& w, const std::vector<double>& thresholds) {
  if (w.t_max() - w.t_min() < 100.0)
    throw Error(ErrorKind::window_too_short, "sublinearity check needs a window of length >= 100");
  SublinearReport rep;
  const double reach = std::max(-w.t_min(), w.t_max());
  std::vector<double> ts = w.nodes_in(w.t_min(), w.t_max());
  for (double T0 : thresholds) {
    if (!(T0 > 0.0) || T0 >= reach) continue;
    double best = 0.0;
    for (double t : ts)
      if (std::abs(t) >= T0) best = std::max(best, std::abs(w(t) / t));
    rep.thresholds.push_back(T0);
    rep.max_ratio.push_back(best);
  }
  if (rep.max_ratio.size() >= 2) {
    const double first = rep.max_ratio.front(), last = rep.max_ratio.back();
    rep.sublinear = last == 0.0 || last < first * (1.0 - 1e-9);
  }
  return rep;
}

double ConjugationProcess::z(double t) const {
  if (eps_ == 0.0) return 1.0;
  return std::exp(-eps_ * path_(t));
}

// ---------------------------------------------------------------------------
// ForcingProfile

ForcingProfile::ForcingProfile(TorusDomain domain) : amp_(std::move(domain)) {}

ForcingProfile::ForcingProfile(const ForcingSpec& spec, SpectralVelocityField amplitude)
    : spec_(spec), amp_(std::move(amplitude)) {
  zero_ = spec_.kind == ForcingKind::zero;
  if (zero_) {
    amp_ = SpectralVelocityField(amp_.domain());
    return;
  }
  if (!(spec_.delta >= 0.0)) throw Error(ErrorKind::invalid_range, "forcing delta must be >= 0");
  if (spec_.kind == ForcingKind::periodic && !(spec_.period > 0.0))
    throw Error(ErrorKind::invalid_range, "forcing period must be positive");
  amp_vprime_ = vprime_norm_sq(amp_);
  amp_h_ = h_norm_sq(amp_);
  if (amp_h_ == 0.0) zero_ = true;
  if (!zero_ && !(spec_.delta + envelope_growth() > 0.0))
    throw Error(ErrorKind::divergent_integral,
                "int exp(delta xi) ||f(xi)||^2 diverges: delta plus envelope growth must be positive");
}

double ForcingProfile::envelope(double t) const {
  const double s = t + offset_;
  switch (spec_.kind) {
    case ForcingKind::zero: return 0.0;
    case ForcingKind::constant_field: return 1.0;
    case ForcingKind::periodic: return 1.0 + spec_.modulation * std::sin(2.0 * std::numbers::pi * s / spec_.period);
    case ForcingKind::decaying: return std::exp(spec_.growth * s);
  }
  return 0.0;
}

ForcingProfile ForcingProfile::time_shifted(double offset) const {
  ForcingProfile out = *this;
  out.offset_ += offset;
  return out;
}

SpectralVelocityField ForcingProfile::at(double t) const {
  if (zero_) return SpectralVelocityField(amp_.domain());
  SpectralVelocityField out = amp_;
  out *= envelope(t);
  return out;
}

double ForcingProfile::norm_sq(double t, NormKind kind) const {
  if (zero_) return 0.0;
  const double e = envelope(t);
  return e * e * (kind == NormKind::vprime ? amp_vprime_ : amp_h_);
}

double ForcingProfile::amplitude_norm_sq(NormKind kind) const noexcept {
  if (zero_) return 0.0;
  return kind == NormKind::vprime ? amp_vprime_ : amp_h_;
}

double ForcingProfile::envelope_growth() const noexcept {
  return spec_.kind == ForcingKind::decaying ? 2.0 * spec_.growth : 0.0;
}

// ---------------------------------------------------------------------------
// Weighted forcing integrals

namespace {

double envelope_sq_bound(const ForcingProfile& f, double tau) {
  const auto& s = f.spec();
  switch (s.kind) {
    case ForcingKind::periodic: return (1.0 + std::abs(s.modulation)) * (1.0 + std::abs(s.modulation));
    case ForcingKind::decaying: return std::exp(2.0 * s.growth * (tau + f.time_offset()));
    default: return 1.0;
  }
}

}  // namespace

WeightedIntegral anchored_forcing_integral(const ForcingProfile& f, double tau, double rate, NormKind norm,
                                           const WienerPath* path, double epsilon) {
  WeightedIntegral out;
  if (f.is_zero()) return out;
  const double kappa = rate + f.envelope_growth();
  if (!(kappa > 0.0))
    throw Error(ErrorKind::divergent_integral, "weight rate " + format_double(rate) +
                                                   " does not dominate the forcing growth; integral diverges");
  // Tail before s = -T is at most bound0 * exp(-kappa T); cut it at 1e-12 of bound0.
  const double bound0_factor = envelope_sq_bound(f, tau) / kappa;
  double T = std::ceil(std::log(1e12) / kappa);
  if (T > 1e4) throw Error(ErrorKind::divergent_integral, "forcing decays too slowly to truncate the integral");
  out.t_tail = T;

  auto base = [&](double s) { return std::exp(rate * s) * f.norm_sq(tau + s, norm); };
  const double det_tail = f.amplitude_norm_sq(norm) * bound0_factor * std::exp(-kappa * T);

  const bool noisy = path != nullptr && epsilon != 0.0;
  if (!noisy) {
    const double panel = f.kind() == ForcingKind::periodic ? std::min(1.0, f.spec().period / 4.0) : 1.0;
    const long n = static_cast<long>(std::ceil(T / panel));
    double sum = 0.0;
    for (long i = 0; i < n; ++i) {
      const double b = -T + (i + 1) * (T / n), a = -T + i * (T / n);
      sum += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(base, a, b, 5, 1e-13);
    }
    out.value = sum;
    out.tail_bound = det_tail;
    return out;
  }

  // z(tau + s, theta_{-tau} omega)^2 = exp(-2 eps (omega(s) - omega(-tau))).
  if (path->t_min() > -T)
    throw Error(ErrorKind::out_of_window, "path window starts at " + format_double(path->t_min()) +
                                              " but the forcing integral needs " + format_double(-T));
  const double w_tau = (*path)(-tau);
  auto weighted = [&](double s) { return base(s) * std::exp(-2.0 * epsilon * ((*path)(s) - w_tau)); };
  std::vector<double> cuts = path->nodes_in(-T, 0.0);
  if (cuts.empty() || cuts.front() > -T) cuts.insert(cuts.begin(), -T);
  if (cuts.back() < 0.0) cuts.push_back(0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    sum += boost::math::quadrature::gauss<double, 7>::integrate(weighted, cuts[i], cuts[i + 1]);
  out.value = sum;
  out.tail_bound = det_tail * std::exp(-2.0 * epsilon * ((*path)(-T) - w_tau));
  return out;
}

WeightedIntegral weighted_forcing_integral(const ForcingProfile& f, double tau, double rate, NormKind norm,
                                           const WienerPath* path, double epsilon) {
  WeightedIntegral out = anchored_forcing_integral(f, tau, rate, norm, path, epsilon);
  const double scale = std::exp(rate * tau);
  out.value *= scale;
  out.tail_bound *= scale;
  return out;
}

}  // namespace cbflab
