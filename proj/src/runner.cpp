#include "cbflab/runner.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <boost/version.hpp>
#include <fftw3.h>
#include <openssl/evp.h>

#include "json.hpp"

#include "cbflab/error.hpp"
#include "cbflab/integrators.hpp"
#include "cbflab/invariant_suite.hpp"
#include "cbflab/pullback_engine.hpp"
#include "cbflab/snapshot_io.hpp"

namespace cbflab {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

SpectralVelocityField normalized(SpectralVelocityField u, double amplitude) {
  const double n = std::sqrt(h_norm_sq(u));
  if (n > 0.0) u *= amplitude / n;
  return u;
}

}  // namespace

SpectralVelocityField forcing_shape(const TorusDomain& domain, ForcingShape shape, double amplitude,
                                    std::uint64_t seed, double kc) {
  const double k = M_PI / domain.half_period();
  const int d = domain.dim();
  switch (shape) {
    case ForcingShape::random: {
      std::mt19937_64 rng(seed);
      return normalized(random_field(domain, rng, kc), amplitude);
    }
    case ForcingShape::shear:
      return normalized(field_from_function(domain, [k](const Vec3& x) { return Vec3{std::sin(k * x[1]), 0.0, 0.0}; }),
                        amplitude);
    case ForcingShape::taylor_green:
      return normalized(field_from_function(domain,
                                            [k, d](const Vec3& x) {
                                              const double cz = d == 3 ? std::cos(k * x[2]) : 1.0;
                                              return Vec3{std::sin(k * x[0]) * std::cos(k * x[1]) * cz,
                                                          -std::cos(k * x[0]) * std::sin(k * x[1]) * cz, 0.0};
                                            }),
                        amplitude);
    case ForcingShape::compact_bump: {
      const double R = domain.half_period() / 4.0;
      // psi = exp(-1/(1-q)), q = |x|^2/R^2; grad psi = psi * (-1/(1-q)^2) * 2x/R^2.
      auto fn = [R, d](const Vec3& x) {
        double q = 0.0;
        for (int a = 0; a < d; ++a) q += x[a] * x[a];
        q /= R * R;
        if (q >= 1.0) return Vec3{0.0, 0.0, 0.0};
        const double g = std::exp(-1.0 / (1.0 - q)) * (-1.0 / ((1.0 - q) * (1.0 - q))) * 2.0 / (R * R);
        return Vec3{g * x[1], -g * x[0], 0.0};
      };
      return normalized(field_from_function(domain, fn), amplitude);
    }
  }
  return SpectralVelocityField(domain);
}

ForcingProfile build_forcing(const RunConfig& cfg, const TorusDomain& domain) {
  if (cfg.forcing.spec.kind == ForcingKind::zero || cfg.forcing.amplitude == 0.0) return ForcingProfile(domain);
  return ForcingProfile(cfg.forcing.spec, forcing_shape(domain, cfg.forcing.shape, cfg.forcing.amplitude,
                                                        cfg.forcing.seed, cfg.forcing.kc));
}

SpectralVelocityField build_initial(const RunConfig& cfg, const TorusDomain& domain) {
  const auto& in = cfg.experiment.initial;
  if (in.kind == "zero") return SpectralVelocityField(domain);
  std::mt19937_64 rng(in.seed);
  return normalized(random_field(domain, rng, in.kc), in.amplitude);
}

WienerPath build_path(const RunConfig& cfg) {
  const auto& p = cfg.experiment.path;
  if (!p.seed) throw Error(ErrorKind::invalid_config, "experiment.path.seed is required for stochastic experiments");
  return WienerPath::sample(*p.seed, p.t_min.value_or(required_path_start(cfg)),
                            p.t_max.value_or(required_path_end(cfg)), p.dt);
}

std::string git_blob_sha1(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + std::string(1, '\0') + content;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, blob.data(), blob.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error(ErrorKind::io_error, "SHA-1 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::io_error, "cannot read '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Context {
  const RunConfig& cfg;
  fs::path dir;
  TorusDomain domain;
  ForcingProfile forcing;
  std::optional<WienerPath> path;
  RunResult result;

  CocycleSetup setup(double epsilon) const {
    CocycleSetup s;
    s.params = cfg.params;
    s.params.epsilon = epsilon;
    s.forcing = &forcing;
    s.solver.dt = cfg.solver.dt;
    s.solver.scheme = cfg.solver.scheme;
    s.omega = path ? &*path : nullptr;
    return s;
  }

  TemperedFamily family() const {
    const auto& f = cfg.experiment.family;
    TemperedFamily fam = TemperedFamily::ball(f.rho0, f.power, f.samples, f.seed, f.max_mode);
    if (!fam.check_tempered())
      throw Error(ErrorKind::invalid_config, "experiment.family radius is not tempered (e^{-t} rho(t)^2 must decrease)");
    return fam;
  }

  void table(const std::string& name, const CsvTable& t) {
    write_csv(dir / name, t);
    result.files.emplace_back(name);
  }
  void snapshot(const std::string& name, const SpectralVelocityField& u, double time) {
    fs::create_directories((dir / name).parent_path());
    write_snapshot(dir / name, u, time);
    result.files.emplace_back(name);
  }
  void note(const std::string& key, double v) { result.summary[key] = format_double(v); }
  void note(const std::string& key, bool v) { result.summary[key] = v ? "true" : "false"; }
  void note(const std::string& key, const std::string& v) { result.summary[key] = v; }
};

std::string indexed(const std::string& stem, std::size_t i) {
  std::string n = std::to_string(i);
  return stem + std::string(n.size() < 3 ? 3 - n.size() : 0, '0') + n + ".csv";
}

void run_verify(Context& ctx) {
  const auto checks = run_invariant_suite(ctx.cfg.experiment.path.seed.value_or(1));
  std::ofstream out(ctx.dir / "verify.csv");
  if (!out) throw Error(ErrorKind::io_error, "cannot write verify.csv");
  out << "check,value,threshold,pass\n";
  bool all = true;
  for (const auto& c : checks) {
    out << c.name << ',' << format_double(c.value) << ',' << format_double(c.threshold) << ',' << (c.passed ? 1 : 0)
        << '\n';
    ctx.note("check." + c.name, c.passed);
    all = all && c.passed;
  }
  out.close();
  ctx.result.files.emplace_back("verify.csv");
  ctx.result.passed = all;
  ctx.note("checks_passed", all);
}

void run_simulate(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const double eps = cfg.params.epsilon;
  const double tau = cfg.experiment.tau;
  SolverConfig sc;
  sc.dt = cfg.solver.dt;
  sc.scheme = cfg.solver.scheme;
  sc.t_start = tau;
  sc.t_end = tau + cfg.experiment.t_end;
  sc.record_stride = cfg.solver.stride;
  const SpectralVelocityField u0 = build_initial(cfg, ctx.domain);

  std::optional<ConjugationProcess> proc;
  if (ctx.path) proc.emplace(ctx.path->shifted(-tau), eps);
  SystemKind system = SystemKind::deterministic;
  SpectralVelocityField start = u0;
  if (sc.scheme == Scheme::heun_stratonovich) {
    system = SystemKind::stratonovich;
  } else if (eps != 0.0) {
    system = SystemKind::conjugated;
    start = proc->z(tau) * u0;
  }
  const Trajectory traj =
      solve(system, start, sc, cfg.params, ctx.forcing, proc && (eps != 0.0 || system == SystemKind::stratonovich) ? &*proc : nullptr);

  std::vector<double> residual(traj.ledger.size(), std::nan(""));
  if (system != SystemKind::stratonovich) residual = energy_identity_residual(traj, cfg.params).residual;

  CsvTable t{{"t", "energy", "grad_norm_sq", "lp_power", "z", "max_speed", "residual"}, {}};
  const std::size_t stride = static_cast<std::size_t>(std::max(1, cfg.solver.stride));
  for (std::size_t i = 0; i < traj.ledger.size(); ++i) {
    if (i % stride != 0 && i + 1 != traj.ledger.size()) continue;
    const LedgerEntry& e = traj.ledger[i];
    const double z = e.z, z2 = z * z;
    t.rows.push_back({e.t, e.h / z2, e.grad / z2, e.lp / std::pow(z, cfg.params.r + 1.0), z, e.max_speed / z,
                      residual[i]});
  }
  ctx.table("trajectory.csv", t);
  if (cfg.output.snapshots) ctx.snapshot("final_state.csv", traj.reconstruct_u(traj.states.size() - 1), traj.times.back());

  bool monotone = true;
  for (std::size_t i = 1; i < t.rows.size(); ++i)
    if (t.rows[i][1] > t.rows[i - 1][1]) monotone = false;
  ctx.note("system", to_string(system));
  ctx.note("final_energy", t.rows.back()[1]);
  ctx.note("energy_monotone", monotone);
  if (system != SystemKind::stratonovich) {
    double m = 0.0;
    for (double r : residual) m = std::max(m, r);
    ctx.note("max_energy_residual", m);
  }
}

CocycleKind kind_for(double eps) { return eps == 0.0 ? CocycleKind::det : CocycleKind::stoch; }

void run_pullback(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const double eps = cfg.params.epsilon;
  const auto rep = measure_absorption(kind_for(eps), cfg.experiment.tau, ctx.family(), ctx.setup(eps),
                                      cfg.experiment.horizons, cfg.workers);
  CsvTable t{{"horizon", "max_norm_sq", "radius_sq", "inside"}, {}};
  for (std::size_t i = 0; i < rep.ladder.size(); ++i)
    t.rows.push_back({rep.ladder[i], rep.max_norm_sq[i], rep.estimate.radius_sq,
                      rep.max_norm_sq[i] <= rep.estimate.radius_sq * (1.0 + 1e-6) ? 1.0 : 0.0});
  ctx.table("absorption.csv", t);
  ctx.note("radius_sq", rep.estimate.radius_sq);
  ctx.note("absorbed", rep.absorbed);
  ctx.note("entry_time", rep.estimate.entry_time);
  if (!std::isnan(rep.estimate.companion_R)) {
    ctx.note("companion_R", rep.estimate.companion_R);
    ctx.note("within_companion", rep.estimate.within_companion);
    ctx.result.passed = rep.estimate.within_companion;
  }
}

void run_attractor(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const double eps = cfg.params.epsilon;
  const auto a = sample_attractor(kind_for(eps), cfg.experiment.tau, ctx.setup(eps), cfg.experiment.horizons,
                                  ctx.family(), cfg.workers);
  CsvTable t{{"horizon", "points", "max_norm_sq", "dist_h_prev"}, {}};
  for (std::size_t i = 0; i < a.horizons.size(); ++i) {
    double m = 0.0;
    for (const auto& u : a.clouds[i]) m = std::max(m, h_norm_sq(u));
    t.rows.push_back({a.horizons[i], static_cast<double>(a.clouds[i].size()), m,
                      i == 0 ? std::nan("") : a.convergence_diag[i - 1]});
  }
  ctx.table("convergence.csv", t);
  if (cfg.output.snapshots)
    for (std::size_t j = 0; j < a.points.size(); ++j) ctx.snapshot("attractor/" + indexed("point_", j), a.points[j], cfg.experiment.tau);
  ctx.note("radius_sq", a.radius.radius_sq);
  ctx.note("entry_time", a.radius.entry_time);
  ctx.note("contained", a.contained);
  ctx.note("diag_decreasing", a.diag_decreasing);
  ctx.note("omega_seed", std::to_string(a.omega_seed));
  ctx.result.passed = a.contained;
}

void run_semicontinuity(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const auto res = semicontinuity_sweep(cfg.experiment.tau, ctx.setup(0.0), cfg.epsilon_ladder, cfg.experiment.horizons,
                                        ctx.family(), cfg.workers);
  CsvTable t{{"epsilon", "horizon", "dist_h", "m_eps", "entry_time"}, {}};
  for (const auto& r : res.rows) t.rows.push_back({r.epsilon, r.horizon, r.dist_h, r.m_eps, r.entry_time});
  ctx.table("sweep.csv", t);

  const SpectralVelocityField u0 = build_initial(cfg, ctx.domain);
  CsvTable p{{"epsilon", "t", "gap", "bound"}, {}};
  bool envelope = true;
  std::vector<double> end_gaps;
  for (double eps : cfg.epsilon_ladder) {
    const auto rep = perturbation_envelope(cfg.experiment.tau, cfg.experiment.t_end, u0, ctx.setup(eps));
    for (std::size_t i = 0; i < rep.times.size(); ++i) p.rows.push_back({eps, rep.times[i], rep.gap[i], rep.bound[i]});
    envelope = envelope && rep.holds;
    end_gaps.push_back(rep.end_gap);
  }
  ctx.table("perturbation.csv", p);
  bool gaps_decrease = true;
  for (std::size_t i = 1; i < end_gaps.size(); ++i)
    if (!(end_gaps[i] < end_gaps[i - 1])) gaps_decrease = false;
  ctx.note("m0", res.m0);
  ctx.note("dist_weakly_decreasing", res.weakly_decreasing);
  ctx.note("last_is_min", res.last_is_min);
  ctx.note("envelope_holds", envelope);
  ctx.note("end_gap_decreasing", gaps_decrease);
  if (!res.weakly_decreasing) ctx.note("warning", std::string("sampled distances are not monotone along the ladder"));
  ctx.result.passed = res.last_is_min && envelope;
}

void run_tails(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  std::vector<double> eps_list{0.0};
  eps_list.insert(eps_list.end(), cfg.epsilon_ladder.begin(), cfg.epsilon_ladder.end());
  const SpectralVelocityField u0 = build_initial(cfg, ctx.domain);
  std::vector<SpectralVelocityField> ends(eps_list.size(), SpectralVelocityField(ctx.domain));
  parallel_for(eps_list.size(), cfg.workers, [&](std::size_t i) {
    ends[i] = pullback_eval(kind_for(eps_list[i]), cfg.experiment.tail_horizon, cfg.experiment.tau, u0,
                            ctx.setup(eps_list[i]));
  });
  CsvTable t{{"epsilon", "k", "tail_mass", "h_norm_sq"}, {}};
  double worst_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    std::vector<double> masses;
    for (double k : cfg.experiment.k_ladder) {
      masses.push_back(tail_mass(ends[i], k));
      t.rows.push_back({eps_list[i], k, masses.back(), h_norm_sq(ends[i])});
    }
    for (std::size_t j = 1; j < masses.size(); ++j)
      worst_ratio = std::min(worst_ratio, masses[j] > 0.0 ? masses[j - 1] / masses[j] : std::numeric_limits<double>::infinity());
  }
  ctx.table("tails.csv", t);
  ctx.note("min_decay_ratio", worst_ratio);
}

}  // namespace

RunResult run_experiment(const RunConfig& cfg) {
  const auto started = std::chrono::steady_clock::now();
  const fs::path dir = cfg.output.directory;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io_error, "cannot create output directory '" + dir.string() + "'");

  const TorusDomain domain = make_domain(cfg.domain.d, cfg.domain.L, cfg.domain.N, cfg.domain.dealias);
  Context ctx{cfg, dir, domain, build_forcing(cfg, domain), std::nullopt, {}};
  const auto kind = cfg.experiment.kind;
  ctx.result.stage = to_string(kind);
  if (cfg.experiment.path.seed && kind != ExperimentKind::verify) ctx.path = build_path(cfg);

  try {
    switch (kind) {
      case ExperimentKind::verify: run_verify(ctx); break;
      case ExperimentKind::simulate: run_simulate(ctx); break;
      case ExperimentKind::pullback: run_pullback(ctx); break;
      case ExperimentKind::attractor: run_attractor(ctx); break;
      case ExperimentKind::semicontinuity: run_semicontinuity(ctx); break;
      case ExperimentKind::tails: run_tails(ctx); break;
    }
  } catch (const Error& e) {
    std::string msg = e.what();
    const std::string prefix = std::string(to_string(e.kind())) + ": ";
    if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
    throw Error(e.kind(), "stage '" + ctx.result.stage + "' failed: " + msg);
  }

  const std::string echo = config_to_json(cfg);
  json files = json::array();
  for (const auto& f : ctx.result.files)
    files.push_back({{"path", f.generic_string()}, {"sha1", git_blob_sha1(read_file(dir / f))}});
  json manifest;
  manifest["config"] = json::parse(echo);
  manifest["content_hash"] = git_blob_sha1(echo);
  manifest["versions"] = {{"cbflab", std::string(kVersion)}, {"fftw", std::string(fftw_version)}, {"boost", std::string(BOOST_LIB_VERSION)}};
  manifest["experiment"] = ctx.result.stage;
  manifest["passed"] = ctx.result.passed;
  manifest["files"] = files;
  manifest["summary"] = ctx.result.summary;
  manifest["horizons"] = cfg.experiment.horizons;
  json seeds = {{"family", cfg.experiment.family.seed}, {"initial", cfg.experiment.initial.seed},
                {"forcing", cfg.forcing.seed}};
  if (cfg.experiment.path.seed) seeds["path"] = *cfg.experiment.path.seed;
  manifest["seeds"] = seeds;
  manifest["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error(ErrorKind::io_error, "cannot write manifest in '" + dir.string() + "'");
  out << manifest.dump(2) << "\n";
  return ctx.result;
}

}  // namespace cbflab
