#pragma once

// Experiment orchestration: rate experiments, appendix fuzzing, condition
// diagnostics and manifest merging. Every random draw comes from a substream
// derived from the config seed, so reruns are bit-identical; only the
// stage wall times in a manifest differ between runs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <typeinfo>
#include <vector>

#include "meanclt/bounds.hpp"
#include "meanclt/coefficients.hpp"
#include "meanclt/distributions.hpp"
#include "meanclt/errors.hpp"
#include "meanclt/json_io.hpp"
#include "meanclt/numerics.hpp"
#include "meanclt/processes.hpp"
#include "meanclt/wasserstein.hpp"

namespace meanclt {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

/// Stable name of the most derived library error class.
inline std::string error_kind(const Error& e) {
  if (dynamic_cast<const ValidationError*>(&e)) return "validation";
  if (dynamic_cast<const DomainError*>(&e)) return "domain";
  if (dynamic_cast<const TypeError*>(&e)) return "type";
  if (dynamic_cast<const PreconditionError*>(&e)) return "precondition";
  if (dynamic_cast<const DegenerateVarianceError*>(&e)) return "degenerate_variance";
  if (dynamic_cast<const DivergenceError*>(&e)) return "divergence";
  if (dynamic_cast<const ResourceError*>(&e)) return "resource";
  if (dynamic_cast<const PrecisionError*>(&e)) return "precision";
  if (dynamic_cast<const AccuracyError*>(&e)) return "accuracy";
  return "error";
}

inline int exit_code_for_kind(const std::string& kind) {
  return kind == "resource" || kind == "precision" || kind == "accuracy" ? 3 : 2;
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& known_targets() {
  static const std::vector<std::string> t{"empirical_d1", "ks",       "thm21",    "thm22",
                                          "thm23_terms",  "rate_fit", "zolotarev"};
  return t;
}

struct ExperimentConfig {
  std::string name = "experiment";
  ProcessSpec process = DoublingMap{};
  FourierFn observable = FourierFn::cosine(1);
  std::vector<std::size_t> n_grid;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> targets;
  Tolerance tolerance;
  std::string output;              // path prefix; empty writes nothing
  std::string mode = "simulate";   // "exact": binomial law of Rademacher S_n, no Monte Carlo
  std::size_t bootstrap = 100;
  std::vector<std::string> notes;  // provenance of engineering choices

  bool wants(const std::string& t) const {
    return std::find(targets.begin(), targets.end(), t) != targets.end();
  }
  bool empirical() const { return wants("empirical_d1") || wants("ks") || wants("rate_fit"); }

  void validate() const {
    if (n_grid.empty()) throw ValidationError("n_grid must not be empty");
    if (n_grid.front() < 1) throw ValidationError("n_grid entries must be >= 1");
    for (std::size_t i = 1; i < n_grid.size(); ++i) {
      if (!(n_grid[i] > n_grid[i - 1])) throw ValidationError("n_grid must be strictly increasing");
    }
    if (targets.empty()) throw ValidationError("targets must not be empty");
    for (const auto& t : targets) {
      if (std::find(known_targets().begin(), known_targets().end(), t) == known_targets().end()) {
        throw ValidationError("unknown target '" + t + "'");
      }
    }
    meanclt::validate(process);
    tolerance.validate();
    if (mode == "exact") {
      const auto* l = std::get_if<IIDLaw>(&process);
      if (!l || !l->law || l->law->kind != MarginalLaw::Kind::rademacher) {
        throw ValidationError("exact mode supports only the i.i.d. Rademacher law");
      }
    } else if (mode == "simulate") {
      if (empirical() && reps < 100) throw ValidationError("reps must be >= 100 for empirical targets");
      if (empirical() && bootstrap < 2) throw ValidationError("bootstrap must be >= 2");
    } else {
      throw ValidationError("mode must be 'simulate' or 'exact'");
    }
  }
};

inline Json to_json(const ExperimentConfig& c) {
  Json j{{"name", c.name},
         {"process", to_json(c.process)},
         {"observable", to_json(c.observable)},
         {"n_grid", c.n_grid},
         {"reps", c.reps},
         {"seed", c.seed},
         {"targets", c.targets},
         {"tolerance", to_json(c.tolerance)},
         {"output", c.output},
         {"mode", c.mode},
         {"bootstrap", c.bootstrap}};
  if (!c.notes.empty()) j["notes"] = c.notes;
  return j;
}

inline ExperimentConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  static const std::set<std::string> allowed{"name", "process",   "observable", "n_grid",
                                             "reps", "seed",      "targets",    "tolerance",
                                             "output", "mode",    "bootstrap",  "notes"};
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ValidationError("config: unknown field '" + key + "'");
  }
  ExperimentConfig c;
  if (j.contains("name")) c.name = detail::get_as<std::string>(j.at("name"), "name");
  c.process = process_from_json(detail::require_field(j, "process", "config"));
  if (j.contains("observable")) c.observable = fourier_from_json(j.at("observable"));
  c.n_grid = detail::get_as<std::vector<std::size_t>>(detail::require_field(j, "n_grid", "config"), "n_grid");
  if (j.contains("reps")) c.reps = detail::get_as<std::size_t>(j.at("reps"), "reps");
  c.seed = detail::get_as<std::uint64_t>(detail::require_field(j, "seed", "config"), "seed");
  c.targets = detail::get_as<std::vector<std::string>>(detail::require_field(j, "targets", "config"), "targets");
  if (j.contains("tolerance")) c.tolerance = tolerance_from_json(j.at("tolerance"));
  if (j.contains("output")) c.output = detail::get_as<std::string>(j.at("output"), "output");
  if (j.contains("mode")) c.mode = detail::get_as<std::string>(j.at("mode"), "mode");
  if (j.contains("bootstrap")) c.bootstrap = detail::get_as<std::size_t>(j.at("bootstrap"), "bootstrap");
  if (j.contains("notes")) c.notes = detail::get_as<std::vector<std::string>>(j.at("notes"), "notes");
  c.validate();
  return c;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ResourceError("cannot write " + path);
  out << text;
  if (!out) throw ResourceError("write failed for " + path);
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

struct PresetOptions {
  std::optional<std::size_t> n_max = {};
  std::optional<std::size_t> reps = {};
  std::optional<std::uint64_t> seed = {};
  std::optional<std::string> output = {};
};

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> p{"mds-doubling", "circle-walk", "iid-rademacher-exact",
                                          "doubling-nonadapted"};
  return p;
}

inline ExperimentConfig preset(const std::string& name, const PresetOptions& opt = {}) {
  ExperimentConfig c;
  c.name = name;
  c.seed = 20240601;
  c.notes.push_back("grid and replicate counts are engineering choices, not derived values");
  const std::vector<std::size_t> quads{64, 256, 1024, 4096, 16384};
  if (name == "mds-doubling") {
    c.process = DoublingMap{};
    c.observable = FourierFn::cosine(1);
    c.n_grid = quads;
    c.reps = 20000;
    c.targets = {"empirical_d1", "ks", "thm21", "thm22", "thm23_terms", "rate_fit", "zolotarev"};
  } else if (name == "circle-walk") {
    c.process = CircleWalk{Rotation::sqrt2_minus_1()};
    c.observable = FourierFn::cosine(1);
    c.n_grid = quads;
    c.reps = 10000;
    c.targets = {"empirical_d1", "ks", "thm22", "thm23_terms", "rate_fit"};
  } else if (name == "iid-rademacher-exact") {
    c.process = IIDLaw{MarginalLaw{MarginalLaw::Kind::rademacher, 1.0, std::nullopt}};
    c.observable = FourierFn();
    c.mode = "exact";
    c.n_grid = {64, 128, 256, 512, 1024, 2048, 4096};
    c.targets = {"empirical_d1", "ks", "thm21", "rate_fit", "zolotarev"};
  } else if (name == "doubling-nonadapted") {
    c.process = DoublingMap{};
    c.observable = FourierFn::cosine(2);
    c.n_grid = quads;
    c.reps = 10000;
    c.targets = {"empirical_d1", "ks", "thm22", "thm23_terms", "rate_fit"};
  } else {
    std::string known;
    for (const auto& p : preset_names()) known += (known.empty() ? "" : ", ") + p;
    throw ValidationError("unknown preset '" + name + "' (known: " + known + ")");
  }
  if (opt.n_max) {
    std::erase_if(c.n_grid, [&](std::size_t n) { return n > *opt.n_max; });
    if (c.n_grid.empty()) throw ValidationError("--n-max leaves an empty n grid");
  }
  if (opt.reps) c.reps = *opt.reps;
  if (opt.seed) c.seed = *opt.seed;
  c.output = opt.output.value_or(name);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

struct RunRow {
  std::size_t n = 0;
  std::uint64_t stream_seed = 0;     // simulate() seed for this n
  std::uint64_t bootstrap_seed = 0;
  std::optional<double> d1_normalized;    // d1(S_n / sqrt n, sigma Y)
  std::optional<double> d1_unnormalized;  // d1(S_n, sigma sqrt(n) Y)
  std::optional<double> d1_se;            // bootstrap SE of d1_normalized; 0 in exact mode
  std::optional<double> ks;
  std::optional<double> var_ratio;        // Var(S_n) / n
  std::optional<double> var_ratio_se;
  std::optional<double> bound_t21;
  std::optional<double> bound_t22;
  std::optional<double> bound_t23_explicit;
  std::optional<double> t23_j_sum;
  Json bounds = Json::object();           // full term breakdowns
};

struct RunManifest {
  ExperimentConfig config;
  std::string status = "ok";
  std::string error_kind;
  std::string error_message;
  std::optional<MomentSummary> moments;
  double sigma = 0.0;
  std::vector<RunRow> rows;
  std::optional<RateFit> fit;
  std::optional<double> zolotarev;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, double>> stage_seconds;

  bool ok() const { return status == "ok"; }
  int exit_code() const { return ok() ? 0 : exit_code_for_kind(error_kind); }
};

namespace detail {

// Seed families: per-n simulation streams and per-n bootstrap streams.
constexpr std::uint64_t kBootstrapFamily = std::uint64_t{1} << 32;

inline std::uint64_t stream_seed(std::uint64_t seed, std::size_t g) {
  return substream(seed, g).next_u64();
}
inline std::uint64_t bootstrap_seed(std::uint64_t seed, std::size_t g) {
  return substream(seed, kBootstrapFamily + g).next_u64();
}

inline double sample_variance(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

inline double stddev(const std::vector<double>& v) { return std::sqrt(sample_variance(v)); }

struct BootstrapResult {
  double d1_se = 0.0;
  double var_ratio_se = 0.0;
};

// Replicate resampling with substream(seed, b) per bootstrap draw b.
inline BootstrapResult bootstrap(const std::vector<double>& sums, std::size_t n, double sigma,
                                 std::size_t B, std::uint64_t seed) {
  const double root = std::sqrt(static_cast<double>(n));
  std::vector<double> d1(B), vr(B);
  parallel_for(B, [&](std::size_t b) {
    RandomStream rng = substream(seed, b);
    std::vector<double> s(sums.size());
    for (double& x : s) x = sums[rng.below(sums.size())] / root;
    vr[b] = sample_variance(s);
    d1[b] = w1_sample_gauss(EmpiricalSample(std::move(s)), sigma);
  });
  return {stddev(d1), stddev(vr)};
}

class StageClock {
 public:
  explicit StageClock(std::vector<std::pair<std::string, double>>& out) : out_(out) {}
  template <class F>
  auto time(const std::string& stage, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    struct Record {
      StageClock* self;
      std::string stage;
      std::chrono::steady_clock::time_point t0;
      ~Record() {
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        self->add(stage, dt);
      }
    } rec{this, stage, t0};
    return f();
  }
  void add(const std::string& stage, double dt) {
    for (auto& [name, total] : out_) {
      if (name == stage) {
        total += dt;
        return;
      }
    }
    out_.emplace_back(stage, dt);
  }

 private:
  std::vector<std::pair<std::string, double>>& out_;
};

inline void fill_empirical(RunRow& row, const ExperimentConfig& cfg, std::size_t g, double sigma,
                           StageClock& clock) {
  const std::size_t n = cfg.n_grid[g];
  const double root = std::sqrt(static_cast<double>(n));
  if (cfg.mode == "exact") {
    const FinitePmf law = FinitePmf::rademacher_sum(static_cast<int>(n));
    clock.time("distance", [&] {
      row.d1_normalized = w1_pmf_gauss(law, sigma);
      row.d1_unnormalized = w1_pmf_gauss(law.scaled(root), sigma * root);
      row.ks = ks_pmf_gauss(law, sigma);
      row.var_ratio = law.variance();
      row.d1_se = 0.0;
      row.var_ratio_se = 0.0;
      return 0;
    });
    return;
  }
  row.stream_seed = stream_seed(cfg.seed, g);
  row.bootstrap_seed = bootstrap_seed(cfg.seed, g);
  const PathEnsemble e = clock.time("simulate", [&] {
    return simulate(cfg.process, cfg.observable, n, cfg.reps, {n}, row.stream_seed);
  });
  const std::vector<double> sums = e.column(0);
  clock.time("distance", [&] {
    const EmpiricalSample raw(sums);
    const EmpiricalSample normalized = raw.scaled(1.0 / root);
    row.d1_normalized = w1_sample_gauss(normalized, sigma);
    row.d1_unnormalized = w1_sample_gauss(raw, sigma * root);
    row.ks = ks_sample_gauss(normalized, sigma);
    row.var_ratio = sample_variance(sums) / static_cast<double>(n);
    return 0;
  });
  const auto bs = clock.time("bootstrap", [&] {
    return bootstrap(sums, n, sigma, cfg.bootstrap, row.bootstrap_seed);
  });
  row.d1_se = bs.d1_se;
  row.var_ratio_se = bs.var_ratio_se;
}

// Bound targets that do not apply to the process/observable are recorded as
// warnings; resource and accuracy failures propagate.
template <class F>
void optional_bound(RunManifest& m, const std::string& what, std::size_t n, F&& f) {
  try {
    f();
  } catch (const ResourceError&) {
    throw;
  } catch (const AccuracyError&) {
    throw;
  } catch (const PrecisionError&) {
    throw;
  } catch (const Error& e) {
    m.warnings.push_back(what + " at n = " + std::to_string(n) + " not applicable: " + e.what());
  }
}

}  // namespace detail

/// Runs the experiment. Library errors end the run with status "failed" and
/// the error recorded; rows finished before the failure are kept.
inline RunManifest run(const ExperimentConfig& cfg) {
  RunManifest m;
  m.config = cfg;
  detail::StageClock clock(m.stage_seconds);
  const auto t_start = std::chrono::steady_clock::now();
  try {
    cfg.validate();
    m.moments = clock.time("moments", [&] { return meanclt::moments(cfg.process, cfg.observable, cfg.tolerance); });
    m.sigma = std::sqrt(m.moments->sigma2);
    for (std::size_t g = 0; g < cfg.n_grid.size(); ++g) {
      const std::size_t n = cfg.n_grid[g];
      RunRow row;
      row.n = n;
      if (cfg.empirical()) detail::fill_empirical(row, cfg, g, m.sigma, clock);
      clock.time("bounds", [&] {
        if (cfg.wants("thm21")) {
          detail::optional_bound(m, "thm21", n, [&] {
            const auto r = thm21_bound(cfg.process, cfg.observable, n, cfg.tolerance);
            row.bound_t21 = r.total;
            row.bounds["thm21"] = to_json(r);
          });
        }
        if (cfg.wants("thm22")) {
          detail::optional_bound(m, "thm22", n, [&] {
            const auto r = thm22_bound(cfg.process, cfg.observable, n, cfg.tolerance);
            row.bound_t22 = r.total;
            row.bounds["thm22"] = to_json(r);
          });
        }
        if (cfg.wants("thm23_terms")) {
          detail::optional_bound(m, "thm23_terms", n, [&] {
            const auto r = thm23_bound(cfg.process, cfg.observable, n, cfg.tolerance);
            row.bound_t23_explicit = r.explicit_part.total;
            row.t23_j_sum = r.j_sum;
            row.bounds["thm23_terms"] = to_json(r);
          });
        }
        return 0;
      });
      m.rows.push_back(std::move(row));
    }
    clock.time("fit", [&] {
      if (cfg.wants("rate_fit")) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& r : m.rows) {
          if (r.d1_normalized) pts.emplace_back(static_cast<double>(r.n), *r.d1_normalized);
        }
        if (pts.size() >= 3) {
          m.fit = rate_fit(pts);
        } else {
          m.warnings.push_back("rate_fit needs at least 3 grid points");
        }
      }
      if (cfg.wants("zolotarev")) m.zolotarev = meanclt::zolotarev(m.moments->abs3, m.moments->sigma2);
      return 0;
    });
  } catch (const Error& e) {
    m.status = "failed";
    m.error_kind = error_kind(e);
    m.error_message = e.what();
  }
  m.stage_seconds.emplace_back(
      "total", std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count());
  return m;
}

namespace detail {

inline std::string csv_num(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

inline Json opt_json(const std::optional<double>& v) { return v ? number(*v) : Json(nullptr); }

}  // namespace detail

inline const std::vector<std::string>& run_csv_columns() {
  static const std::vector<std::string> c{
      "process",  "f",         "seed",         "n",         "reps",          "sigma",
      "d1_normalized", "d1_unnormalized", "d1_se", "ks", "var_ratio", "var_ratio_se",
      "bound_t21", "bound_t22", "bound_t23_explicit", "t23_j_sum", "slope", "zolotarev"};
  return c;
}

/// Per-n table; no timings, so reruns are byte-identical.
inline std::string to_csv(const RunManifest& m) {
  std::string out;
  for (std::size_t i = 0; i < run_csv_columns().size(); ++i) out += (i ? "," : "") + run_csv_columns()[i];
  out += "\n";
  const std::optional<double> slope = m.fit ? std::optional<double>(m.fit->slope) : std::nullopt;
  for (const auto& r : m.rows) {
    out += detail::csv_field(process_name(m.config.process)) + "," + detail::csv_field(m.config.observable.label()) +
           "," + std::to_string(m.config.seed) + "," + std::to_string(r.n) + "," +
           std::to_string(m.config.mode == "exact" ? 0 : m.config.reps) + "," + detail::csv_num(m.sigma) + "," +
           detail::csv_num(r.d1_normalized) + "," + detail::csv_num(r.d1_unnormalized) + "," +
           detail::csv_num(r.d1_se) + "," + detail::csv_num(r.ks) + "," + detail::csv_num(r.var_ratio) + "," +
           detail::csv_num(r.var_ratio_se) + "," + detail::csv_num(r.bound_t21) + "," +
           detail::csv_num(r.bound_t22) + "," + detail::csv_num(r.bound_t23_explicit) + "," +
           detail::csv_num(r.t23_j_sum) + "," + detail::csv_num(slope) + "," + detail::csv_num(m.zolotarev) + "\n";
  }
  return out;
}

inline Json to_json(const RunRow& r) {
  return Json{{"n", r.n},
              {"stream_seed", r.stream_seed},
              {"bootstrap_seed", r.bootstrap_seed},
              {"d1_normalized", detail::opt_json(r.d1_normalized)},
              {"d1_unnormalized", detail::opt_json(r.d1_unnormalized)},
              {"d1_se", detail::opt_json(r.d1_se)},
              {"ks", detail::opt_json(r.ks)},
              {"var_ratio", detail::opt_json(r.var_ratio)},
              {"var_ratio_se", detail::opt_json(r.var_ratio_se)},
              {"bound_t21", detail::opt_json(r.bound_t21)},
              {"bound_t22", detail::opt_json(r.bound_t22)},
              {"bound_t23_explicit", detail::opt_json(r.bound_t23_explicit)},
              {"t23_j_sum", detail::opt_json(r.t23_j_sum)},
              {"bounds", r.bounds}};
}

inline Json to_json(const RunManifest& m) {
  Json j{{"schema_version", kSchemaVersion},
         {"version", kVersion},
         {"status", m.status},
         {"error", m.ok() ? Json(nullptr) : Json{{"kind", m.error_kind}, {"message", m.error_message}}},
         {"process", process_name(m.config.process)},
         {"observable_label", m.config.observable.label()},
         {"config", to_json(m.config)},
         {"sigma", m.sigma},
         {"moments", m.moments ? to_json(*m.moments) : Json(nullptr)}};
  Json rows = Json::array();
  for (const auto& r : m.rows) rows.push_back(to_json(r));
  j["rows"] = rows;
  j["fit"] = m.fit ? to_json(*m.fit) : Json(nullptr);
  j["zolotarev"] = detail::opt_json(m.zolotarev);
  j["warnings"] = m.warnings;
  Json stages = Json::object();
  for (const auto& [name, sec] : m.stage_seconds) stages[name] = sec;
  j["stage_seconds"] = stages;
  j["seed_provenance"] = {
      {"seed", m.config.seed},
      {"stream_seed", "grid index g: first u64 of substream(seed, g); replicate r: substream(stream_seed, r)"},
      {"bootstrap_seed", "grid index g: first u64 of substream(seed, 2^32 + g); draw b: substream(bootstrap_seed, b)"},
      {"generator", "Philox4x32-10"}};
  return j;
}

/// Writes <prefix>.csv and <prefix>.manifest.json when the config has an
/// output prefix; returns the paths written.
inline std::vector<std::string> write_outputs(const RunManifest& m) {
  if (m.config.output.empty()) return {};
  const std::string csv = m.config.output + ".csv";
  const std::string manifest = m.config.output + ".manifest.json";
  write_text_file(csv, to_csv(m));
  write_text_file(manifest, to_json(m).dump(2) + "\n");
  return {csv, manifest};
}

// ---------------------------------------------------------------------------
// check_appendix
// ---------------------------------------------------------------------------

struct AppendixFailure {
  std::size_t instance = 0;
  std::string check;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct AppendixReport {
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::size_t covariance_pass = 0;
  std::size_t covariance_conditional_pass = 0;
  std::size_t ordering_pass = 0;
  std::size_t dispersion_pass = 0;
  std::size_t corollary_pass = 0;
  std::size_t passes = 0;  // instances passing every check
  CovarianceBoundReport equality_case;      // identical Rademacher coordinates
  CovarianceBoundReport independent_case;   // product law, lhs = 0
  std::vector<AppendixFailure> failures;

  bool all_pass() const {
    return passes == count && equality_case.holds && independent_case.holds &&
           equality_case.lhs == equality_case.rhs;
  }
};

namespace detail {

// Dimension 2 or 3, up to 4 atoms per coordinate on a quarter-integer
// lattice (so ties and shared atoms occur), up to 12 support points.
inline JointPmf random_joint(RandomStream& rng, std::size_t k) {
  std::vector<std::vector<double>> atoms(k);
  for (auto& a : atoms) {
    const std::size_t n = 1 + rng.below(4);
    for (std::size_t t = 0; t < n; ++t) a.push_back(std::round(8.0 * rng.normal()) / 4.0);
  }
  std::vector<std::vector<double>> points;
  std::vector<double> probs;
  const std::size_t support = 1 + rng.below(12);
  double total = 0.0;
  for (std::size_t s = 0; s < support; ++s) {
    std::vector<double> p(k);
    for (std::size_t i = 0; i < k; ++i) p[i] = atoms[i][rng.below(atoms[i].size())];
    points.push_back(p);
    probs.push_back(rng.uniform() + 1e-3);
    total += probs.back();
  }
  for (auto& p : probs) p /= total;
  double sum = 0.0;
  for (std::size_t s = 0; s + 1 < probs.size(); ++s) sum += probs[s];
  probs.back() = 1.0 - sum;
  return JointPmf(points, probs);
}

inline std::vector<MonotoneDifference> random_monotone(RandomStream& rng, const JointPmf& j) {
  std::vector<MonotoneDifference> fs(j.dim());
  for (std::size_t i = 0; i < j.dim(); ++i) {
    const std::size_t atoms = j.marginal(i).size();
    double up = rng.normal(), down = rng.normal();
    for (std::size_t t = 0; t < atoms; ++t) {
      up += rng.uniform();
      down += rng.uniform();
      fs[i].up.push_back(up);
      fs[i].down.push_back(down);
    }
  }
  return fs;
}

}  // namespace detail

/// Fuzzes the covariance inequality (plain and conditioned on coordinate 0),
/// the dispersion inequalities on every marginal and the monotone-difference
/// corollary. Instance i draws from substream(seed, i).
inline AppendixReport check_appendix(std::size_t count, std::uint64_t seed) {
  if (count < 1) throw ValidationError("check_appendix requires count >= 1");
  AppendixReport rep;
  rep.count = count;
  rep.seed = seed;
  struct Outcome {
    bool cov = false, cond = false, order = false, disp = false, cor = false;
    std::vector<AppendixFailure> failures;
  };
  std::vector<Outcome> out(count);
  parallel_for(count, [&](std::size_t i) {
    RandomStream rng = substream(seed, i);
    const std::size_t k = 2 + rng.below(2);
    const JointPmf j = detail::random_joint(rng, k);
    Outcome& o = out[i];
    const auto c = covariance_bound_check(j);
    o.cov = c.holds;
    if (!c.holds) o.failures.push_back({i, "covariance", c.lhs, c.rhs});
    const auto cc = covariance_bound_check(j, 0);
    o.cond = cc.holds;
    o.order = cc.ordering_holds;
    if (!cc.holds) o.failures.push_back({i, "covariance_conditional", cc.lhs, cc.rhs});
    if (!cc.ordering_holds) o.failures.push_back({i, "alpha_ordering", cc.alpha_unconditional, cc.alpha});
    o.disp = true;
    for (std::size_t d = 0; d < k; ++d) {
      const auto dr = dispersion_check(j.marginal(d));
      if (!dr.holds || (dr.zero_is_median && !dr.equality_holds)) {
        o.disp = false;
        o.failures.push_back({i, "dispersion", dr.worst_violation, 0.0});
      }
    }
    const auto fs = detail::random_monotone(rng, j);
    const auto cr = corollary_a1_check(j, fs);
    const auto crc = corollary_a1_check(j, fs, k - 1);
    o.cor = cr.holds && crc.holds;
    if (!cr.holds) o.failures.push_back({i, "corollary", cr.lhs, cr.rhs});
    if (!crc.holds) o.failures.push_back({i, "corollary_conditional", crc.lhs, crc.rhs});
  });
  for (const auto& o : out) {
    rep.covariance_pass += o.cov;
    rep.covariance_conditional_pass += o.cond;
    rep.ordering_pass += o.order;
    rep.dispersion_pass += o.disp;
    rep.corollary_pass += o.cor;
    rep.passes += o.cov && o.cond && o.order && o.disp && o.cor;
    rep.failures.insert(rep.failures.end(), o.failures.begin(), o.failures.end());
  }
  rep.equality_case = covariance_bound_check(JointPmf({{-1.0, -1.0}, {1.0, 1.0}}, {0.5, 0.5}));
  rep.independent_case = covariance_bound_check(
      JointPmf({{-1.0, -1.0}, {-1.0, 1.0}, {1.0, -1.0}, {1.0, 1.0}}, {0.25, 0.25, 0.25, 0.25}));
  return rep;
}

inline Json to_json(const AppendixReport& r) {
  Json fails = Json::array();
  for (std::size_t i = 0; i < r.failures.size() && i < 20; ++i) {
    const auto& f = r.failures[i];
    fails.push_back({{"instance", f.instance}, {"check", f.check}, {"lhs", f.lhs}, {"rhs", f.rhs}});
  }
  return Json{{"count", r.count},
              {"seed", r.seed},
              {"passes", r.passes},
              {"all_pass", r.all_pass()},
              {"covariance_pass", r.covariance_pass},
              {"covariance_conditional_pass", r.covariance_conditional_pass},
              {"ordering_pass", r.ordering_pass},
              {"dispersion_pass", r.dispersion_pass},
              {"corollary_pass", r.corollary_pass},
              {"equality_case", to_json(r.equality_case)},
              {"independent_case", to_json(r.independent_case)},
              {"failure_count", r.failures.size()},
              {"failures", fails}};
}

// ---------------------------------------------------------------------------
// diagnose_conditions
// ---------------------------------------------------------------------------

struct DiagnoseConfig {
  ProcessSpec process = DoublingMap{};
  FourierFn observable = FourierFn::cosine(1);
  std::size_t kmax = 30;
  std::size_t theta_kmax = 20;   // separate horizon; verdicts need >= 10 terms
  int theta_window = 2;
  std::optional<AlphaSeq> alpha; // user tabulation alpha(0), alpha(1), ...
  std::size_t quantile_grid = 4096;
  std::string output;
};

inline DiagnoseConfig diagnose_config_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("diagnose config must be a JSON object");
  static const std::set<std::string> allowed{"process", "observable", "kmax", "theta_kmax",
                                             "theta_window", "alpha", "quantile_grid", "output"};
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ValidationError("diagnose config: unknown field '" + key + "'");
  }
  DiagnoseConfig c;
  c.process = process_from_json(detail::require_field(j, "process", "diagnose config"));
  if (j.contains("observable")) c.observable = fourier_from_json(j.at("observable"));
  if (j.contains("kmax")) c.kmax = detail::get_as<std::size_t>(j.at("kmax"), "kmax");
  if (j.contains("theta_kmax")) c.theta_kmax = detail::get_as<std::size_t>(j.at("theta_kmax"), "theta_kmax");
  if (j.contains("theta_window")) c.theta_window = detail::get_as<int>(j.at("theta_window"), "theta_window");
  if (j.contains("alpha")) {
    c.alpha = AlphaSeq(detail::get_as<std::vector<double>>(j.at("alpha"), "alpha"));
  }
  if (j.contains("quantile_grid")) {
    c.quantile_grid = detail::get_as<std::size_t>(j.at("quantile_grid"), "quantile_grid");
  }
  if (j.contains("output")) c.output = detail::get_as<std::string>(j.at("output"), "output");
  if (c.kmax < 1 || c.kmax > 100000) throw ValidationError("kmax must be in [1, 100000]");
  if (c.theta_kmax > 64) throw ValidationError("theta_kmax must be <= 64");
  if (c.theta_window < 0 || c.theta_window > 6) throw ValidationError("theta_window must be in [0, 6]");
  if (c.quantile_grid < 16) throw ValidationError("quantile_grid must be >= 16");
  return c;
}

struct SeriesDiagnostic {
  std::string name;
  std::vector<double> terms;         // term(1), ..., term(K)
  std::vector<double> partial_sums;  // weighted partial sums
  TrendVerdict verdict;
};

struct MixingDiagnostic {
  std::string alpha_source;  // "user", "alpha_exact" or "chain"
  std::vector<double> alpha;
  std::vector<MixingIntegralReport> integrals;  // p = 3, b = 0 and b = 1
};

struct DiagnoseReport {
  std::vector<SeriesDiagnostic> theta;  // j * theta_{p,q}(j)
  std::optional<SeriesDiagnostic> jan;  // jan_norm(l)
  std::optional<MixingDiagnostic> mixing;
  std::vector<std::string> notes;
};

namespace detail {

inline SeriesDiagnostic weighted_series(std::string name, std::vector<double> terms) {
  SeriesDiagnostic s;
  s.name = std::move(name);
  s.terms = std::move(terms);
  double acc = 0.0;
  for (std::size_t j = 0; j < s.terms.size(); ++j) {
    acc += static_cast<double>(j + 1) * s.terms[j];
    s.partial_sums.push_back(acc);
  }
  s.verdict = last_decade_trend(s.partial_sums);
  return s;
}

// Q of |X_0| under the stationary law: grid midpoints for Fourier
// observables, exact for laws and chains.
inline QuantileSeq abs_quantile(const ProcessSpec& spec, const FourierFn& f, std::size_t grid) {
  if (const auto* c = std::get_if<FiniteChain>(&spec)) {
    std::vector<std::pair<double, double>> w;
    for (std::size_t s = 0; s < c->values.size(); ++s) w.emplace_back(std::abs(c->values[s]), c->pi[s]);
    return quantile_from_pmf(FinitePmf::from_weights(w));
  }
  if (const auto* l = std::get_if<IIDLaw>(&spec); l && l->law) {
    switch (l->law->kind) {
      case MarginalLaw::Kind::rademacher: return QuantileSeq::constant(1.0);
      case MarginalLaw::Kind::discrete:
        return quantile_from_pmf(pushforward(*l->law->pmf, [](double x) { return std::abs(x); }));
      case MarginalLaw::Kind::gaussian: {
        const double sd = l->law->sd;
        return QuantileSeq::closed_form([sd](double u) { return sd * gauss::quantile(1.0 - 0.5 * u); });
      }
    }
  }
  std::vector<double> v(grid);
  for (std::size_t i = 0; i < grid; ++i) v[i] = std::abs(f((static_cast<double>(i) + 0.5) / static_cast<double>(grid)));
  return quantile_from_sample(EmpiricalSample(std::move(v)));
}

}  // namespace detail

/// Partial weighted sums of theta_{p,q}(j), jan_norm(l) and the mixing
/// integrals sum k^b int_0^alpha(k) Q^3 with last-decade trend verdicts.
inline DiagnoseReport diagnose_conditions(const DiagnoseConfig& cfg) {
  validate(cfg.process);
  DiagnoseReport rep;
  static const std::vector<std::pair<int, int>> pairs{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3},
                                                      {1, 4}, {2, 3}, {2, 4}, {3, 4}};
  for (const auto& [p, q] : pairs) {
    std::vector<double> terms;
    for (std::size_t j = 1; j <= cfg.theta_kmax; ++j) {
      terms.push_back(theta_coeff(cfg.process, cfg.observable, p, q, static_cast<int>(j), cfg.theta_window).value);
    }
    rep.theta.push_back(detail::weighted_series(
        "theta_" + std::to_string(p) + std::to_string(q), std::move(terms)));
  }
  rep.notes.push_back("theta columns hold j * theta_{p,q}(j) partial sums over a window of " +
                      std::to_string(cfg.theta_window) + " (lower bounds of the suprema)");

  if (!std::holds_alternative<FiniteChain>(cfg.process) && is_martingale(cfg.process, cfg.observable)) {
    double acc = 0.0;
    SeriesDiagnostic s;
    s.name = "jan_norm";
    for (std::size_t l = 1; l <= cfg.kmax; ++l) {
      s.terms.push_back(jan_norm(cfg.process, cfg.observable, l));
      acc += s.terms.back();
      s.partial_sums.push_back(acc);
    }
    s.verdict = last_decade_trend(s.partial_sums);
    rep.jan = std::move(s);
  } else {
    rep.notes.push_back("jan_norm skipped: needs a martingale-difference Fourier observable");
  }

  std::optional<AlphaSeq> alpha = cfg.alpha;
  std::string source = "user";
  if (!alpha) {
    const std::size_t limit = std::holds_alternative<DoublingMap>(cfg.process) ? std::min<std::size_t>(cfg.kmax, 14)
                                                                              : std::min<std::size_t>(cfg.kmax, 200);
    if (std::holds_alternative<CircleWalk>(cfg.process)) {
      rep.notes.push_back("mixing integrals skipped: the circle walk is not strongly mixing; supply an alpha table");
    } else {
      // raw[0] = 0 is lifted to alpha(1) by the sup over later indices.
      std::vector<double> raw(limit + 1, 0.0);
      std::vector<double> vals(limit, 0.0);
      parallel_for(limit, [&](std::size_t i) {
        vals[i] = alpha_exact(cfg.process, {static_cast<unsigned>(i + 1)}, 10).value;
      });
      std::copy(vals.begin(), vals.end(), raw.begin() + 1);
      alpha = AlphaSeq::from_tabulation(std::move(raw));
      source = std::holds_alternative<FiniteChain>(cfg.process) ? "chain" : "alpha_exact";
      if (std::holds_alternative<DoublingMap>(cfg.process) && cfg.kmax > 14) {
        rep.notes.push_back("alpha_exact tabulated to n = 14 (resource limit); mixing sums stop there");
      }
    }
  }
  if (alpha) {
    MixingDiagnostic md;
    md.alpha_source = source;
    md.alpha = alpha->values();
    const QuantileSeq Q = detail::abs_quantile(cfg.process, cfg.observable, cfg.quantile_grid);
    for (int b : {0, 1}) md.integrals.push_back(mixing_integral(*alpha, Q, 3, b, cfg.kmax));
    rep.mixing = std::move(md);
  }
  return rep;
}

inline Json to_json(const SeriesDiagnostic& s) {
  return Json{{"name", s.name}, {"terms", s.terms}, {"partial_sums", s.partial_sums}, {"verdict", to_json(s.verdict)}};
}

inline Json to_json(const DiagnoseReport& r) {
  Json theta = Json::array();
  for (const auto& s : r.theta) theta.push_back(to_json(s));
  Json j{{"schema_version", kSchemaVersion}, {"version", kVersion}, {"theta", theta}};
  j["jan_norm"] = r.jan ? to_json(*r.jan) : Json(nullptr);
  if (r.mixing) {
    Json ints = Json::array();
    for (const auto& m : r.mixing->integrals) ints.push_back(to_json(m));
    j["mixing"] = {{"alpha_source", r.mixing->alpha_source}, {"alpha", r.mixing->alpha}, {"integrals", ints}};
  } else {
    j["mixing"] = nullptr;
  }
  j["notes"] = r.notes;
  return j;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct MergedReport {
  std::string csv;
  Json json;
};

inline const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> c{"process",       "f",               "seed", "n",
                                          "d1_normalized", "d1_unnormalized", "ks",   "bound_t21",
                                          "bound_t22",     "slope"};
  return c;
}

/// Merges per-n tables of several manifests into one table, one row per
/// (manifest, n), tagged by process, observable and seed.
inline MergedReport report(const std::vector<Json>& manifests, const std::vector<std::string>& names = {}) {
  if (manifests.empty()) throw ValidationError("report needs at least one manifest");
  auto name_of = [&](std::size_t i) { return i < names.size() ? names[i] : "manifest " + std::to_string(i); };
  std::vector<std::string> problems;
  const int expected = kSchemaVersion;
  for (std::size_t i = 0; i < manifests.size(); ++i) {
    const Json& m = manifests[i];
    auto need = [&](const Json& obj, const std::string& key, const std::string& where) {
      if (!obj.is_object() || !obj.contains(key)) problems.push_back(name_of(i) + ": missing " + where + key);
    };
    need(m, "schema_version", "");
    if (m.is_object() && m.contains("schema_version") && m.at("schema_version") != expected) {
      problems.push_back(name_of(i) + ": schema_version " + m.at("schema_version").dump() + " (expected " +
                         std::to_string(expected) + ")");
    }
    for (const char* key : {"process", "observable_label", "config", "rows", "fit"}) need(m, key, "");
    if (m.is_object() && m.contains("config")) need(m.at("config"), "seed", "config.");
    if (m.is_object() && m.contains("rows") && m.at("rows").is_array()) {
      for (const auto& row : m.at("rows")) {
        for (const char* key : {"n", "d1_normalized", "d1_unnormalized", "ks", "bound_t21", "bound_t22"}) {
          need(row, key, "rows[].");
        }
      }
    }
  }
  if (!problems.empty()) {
    std::sort(problems.begin(), problems.end());
    problems.erase(std::unique(problems.begin(), problems.end()), problems.end());
    std::string msg = "manifest schema mismatch:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg);
  }

  auto num = [](const Json& v) -> std::optional<double> {
    if (v.is_number()) return v.get<double>();
    return std::nullopt;
  };
  MergedReport out;
  for (std::size_t i = 0; i < report_columns().size(); ++i) out.csv += (i ? "," : "") + report_columns()[i];
  out.csv += "\n";
  Json rows = Json::array();
  Json sources = Json::array();
  for (std::size_t i = 0; i < manifests.size(); ++i) {
    const Json& m = manifests[i];
    const auto process = m.at("process").get<std::string>();
    const auto f = m.at("observable_label").get<std::string>();
    const auto seed = m.at("config").at("seed").get<std::uint64_t>();
    const std::optional<double> slope = m.at("fit").is_object() ? num(m.at("fit").at("slope")) : std::nullopt;
    sources.push_back({{"name", name_of(i)}, {"process", process}, {"f", f}, {"seed", seed},
                       {"status", m.value("status", "ok")}, {"fit", m.at("fit")}});
    for (const auto& r : m.at("rows")) {
      const auto n = r.at("n").get<std::size_t>();
      const auto d1n = num(r.at("d1_normalized")), d1u = num(r.at("d1_unnormalized")), ks = num(r.at("ks"));
      const auto t21 = num(r.at("bound_t21")), t22 = num(r.at("bound_t22"));
      out.csv += detail::csv_field(process) + "," + detail::csv_field(f) + "," + std::to_string(seed) + "," +
                 std::to_string(n) + "," + detail::csv_num(d1n) + "," + detail::csv_num(d1u) + "," +
                 detail::csv_num(ks) + "," + detail::csv_num(t21) + "," + detail::csv_num(t22) + "," +
                 detail::csv_num(slope) + "\n";
      rows.push_back({{"process", process},
                      {"f", f},
                      {"seed", seed},
                      {"n", n},
                      {"d1_normalized", detail::opt_json(d1n)},
                      {"d1_unnormalized", detail::opt_json(d1u)},
                      {"ks", detail::opt_json(ks)},
                      {"bound_t21", detail::opt_json(t21)},
                      {"bound_t22", detail::opt_json(t22)},
                      {"slope", detail::opt_json(slope)}});
    }
  }
  out.json = Json{{"schema_version", kSchemaVersion}, {"version", kVersion}, {"sources", sources}, {"rows", rows}};
  return out;
}

}  // namespace meanclt
