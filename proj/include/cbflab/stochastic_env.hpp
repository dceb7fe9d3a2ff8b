#pragma once

// Two-sided Wiener paths with the shift flow, the conjugation process
// z = exp(-eps * omega), and time-dependent forcing profiles.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cbflab/spectral_domain.hpp"

namespace cbflab {

class WienerPath {
 public:
  /// Nodes at integer multiples of dt_grid covering [t_min, t_max]; the
  /// positive and negative halves use independent streams so that widening
  /// the window never changes already-sampled values.
  static WienerPath sample(std::uint64_t seed, double t_min, double t_max, double dt_grid);
  /// Deterministic path through fn at the nodes (fn(0) is subtracted).
  static WienerPath from_function(double t_min, double t_max, double dt_grid, const std::function<double(double)>& fn);

  /// Evaluation window of this (possibly shifted) view.
  double t_min() const noexcept;
  double t_max() const noexcept;
  double dt_grid() const noexcept { return data_->dt; }
  std::uint64_t seed() const noexcept { return data_->seed; }
  double base_shift() const noexcept { return shift_; }

  /// omega(t) with linear interpolation; exactly 0 at t = 0.
  double operator()(double t) const;
  /// omega(b) - omega(a), computed from raw samples to avoid cancellation.
  double increment(double a, double b) const;
  /// theta_s omega = omega(. + s) - omega(s); shares the samples.
  WienerPath shifted(double s) const;
  /// Node times of this view inside [a, b], ascending.
  std::vector<double> nodes_in(double a, double b) const;

  void export_csv(const std::filesystem::path& path) const;

 private:
  struct Data {
    std::uint64_t seed = 0;
    double dt = 0.0;
    long first = 0;  // raw index of values[0] (negative)
    std::vector<double> values;
  };
  WienerPath(std::shared_ptr<const Data> d, double shift) : data_(std::move(d)), shift_(shift) {}
  double raw(double t) const;

  std::shared_ptr<const Data> data_;
  double shift_ = 0.0;
};

struct SublinearReport {
  std::vector<double> thresholds;  // T0 ladder
  std::vector<double> max_ratio;   // max |omega(t)/t| over |t| >= T0
  bool sublinear = false;          // ratio shrinks along the ladder (or is 0)
};

/// window-too-short when t_max - t_min < 100; ladder entries beyond the
/// window are dropped.
SublinearReport verify_sublinear(const WienerPath& w, const std::vector<double>& thresholds);

class ConjugationProcess {
 public:
  ConjugationProcess(WienerPath path, double epsilon) : path_(std::move(path)), eps_(epsilon) {}
  double z(double t) const;
  const WienerPath& path() const noexcept { return path_; }
  double epsilon() const noexcept { return eps_; }

 private:
  WienerPath path_;
  double eps_;
};

enum class ForcingKind { zero, constant_field, periodic, decaying };
enum class NormKind { vprime, h };

struct ForcingSpec {
  ForcingKind kind = ForcingKind::zero;
  double delta = 0.0;           // decay exponent in [0, alpha)
  double period = 1.0;          // periodic
  double modulation = 0.5;      // periodic: envelope 1 + modulation * sin(2 pi t / period)
  double growth = 1.0;          // decaying: envelope exp(growth * t), vanishing as t -> -inf
};

class ForcingProfile {
 public:
  /// Zero forcing on the given domain.
  explicit ForcingProfile(TorusDomain domain);
  /// Throws divergent-integral when the weighted (delta) integral is infinite
  /// and invalid-range for a non-positive period.
  ForcingProfile(const ForcingSpec& spec, SpectralVelocityField amplitude);

  const ForcingSpec& spec() const noexcept { return spec_; }
  ForcingKind kind() const noexcept { return spec_.kind; }
  bool is_zero() const noexcept { return zero_; }
  const SpectralVelocityField& amplitude() const noexcept { return amp_; }
  double envelope(double t) const;
  /// Same profile with time origin moved: g(t) = f(t + offset).
  ForcingProfile time_shifted(double offset) const;
  double time_offset() const noexcept { return offset_; }
  SpectralVelocityField at(double t) const;
  /// ||f(t)||^2 in the requested norm.
  double norm_sq(double t, NormKind kind) const;
  double amplitude_norm_sq(NormKind kind) const noexcept;
  /// Exponent kappa with envelope(t)^2 <= c * exp(kappa t) as t -> -inf.
  double envelope_growth() const noexcept;

 private:
  ForcingSpec spec_;
  SpectralVelocityField amp_;
  bool zero_ = true;
  double offset_ = 0.0;
  double amp_vprime_ = 0.0;
  double amp_h_ = 0.0;
};

struct WeightedIntegral {
  double value = 0.0;
  double tail_bound = 0.0;  // bound on the discarded part before tau - t_tail
  double t_tail = 0.0;
};

/// int_{-inf}^{tau} exp(rate (xi - tau)) ||f(xi)||^2 [z(xi, theta_{-tau} omega)]^2 d xi.
/// The noise weight is dropped when path is null or epsilon == 0, which
/// takes the purely deterministic quadrature route.
WeightedIntegral anchored_forcing_integral(const ForcingProfile& f, double tau, double rate, NormKind norm,
                                           const WienerPath* path = nullptr, double epsilon = 0.0);

/// Same integral with weight exp(rate xi) (not anchored at tau).
WeightedIntegral weighted_forcing_integral(const ForcingProfile& f, double tau, double rate, NormKind norm,
                                           const WienerPath* path = nullptr, double epsilon = 0.0);

}  // namespace cbflab
