#include "kbo/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "kbo/diagnostics.hpp"
#include "kbo/estimators.hpp"

namespace kbo {

using json = nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string run_stem(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "run_%03zu", i);
  return buf;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

json kbo_json(const KboConfig& c) {
  return {{"lambda1", c.lambda1},
          {"lambda2", c.lambda2},
          {"sigma1", c.sigma1},
          {"sigma2", c.sigma2},
          {"alpha", c.alpha},
          {"beta", c.beta},
          {"epsilon", c.epsilon},
          {"diffusion", to_string(c.diffusion)},
          {"n_stall", c.n_stall},
          {"delta_stall", num(c.delta_stall)},
          {"max_iters", c.max_iters},
          {"rescale", c.rescale},
          {"pairing", to_string(c.pairing)},
          {"record_every", c.record_every},
          {"reduction", {{"mu", c.reduction.mu}, {"t_r", c.reduction.t_r}, {"n_min", c.reduction.n_min}}}};
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    if constexpr (std::is_same_v<T, double>) {
      // null stands for infinity so configs can round-trip delta_stall = inf.
      out = j.at(key).is_null() ? std::numeric_limits<double>::infinity() : j.at(key).get<double>();
    } else {
      out = j.at(key).get<T>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

void parse_kbo(const json& j, KboConfig& c) {
  reject_unknown(j,
                 {"lambda1", "lambda2", "sigma1", "sigma2", "alpha", "beta", "epsilon", "diffusion", "n_stall",
                  "delta_stall", "max_iters", "rescale", "pairing", "record_every", "reduction", "seed"},
                 "kbo");
  get_if(j, "lambda1", c.lambda1);
  get_if(j, "lambda2", c.lambda2);
  get_if(j, "sigma1", c.sigma1);
  get_if(j, "sigma2", c.sigma2);
  get_if(j, "alpha", c.alpha);
  get_if(j, "beta", c.beta);
  get_if(j, "epsilon", c.epsilon);
  get_if(j, "n_stall", c.n_stall);
  get_if(j, "delta_stall", c.delta_stall);
  get_if(j, "max_iters", c.max_iters);
  get_if(j, "rescale", c.rescale);
  get_if(j, "record_every", c.record_every);
  get_if(j, "seed", c.seed);
  if (j.contains("diffusion")) c.diffusion = parse_diffusion(j.at("diffusion").get<std::string>());
  if (j.contains("pairing")) c.pairing = parse_pairing(j.at("pairing").get<std::string>());
  if (j.contains("reduction")) {
    const auto& r = j.at("reduction");
    reject_unknown(r, {"mu", "t_r", "n_min"}, "kbo.reduction");
    get_if(r, "mu", c.reduction.mu);
    get_if(r, "t_r", c.reduction.t_r);
    get_if(r, "n_min", c.reduction.n_min);
  }
}

json parse_document(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

ExperimentSpec spec_from_json(const json& j, bool allow_sweep) {
  std::initializer_list<const char*> keys = {"objective", "driver", "particles", "runs", "seed", "output_dir",
                                             "write_traces", "init", "kbo", "sweep"};
  reject_unknown(j, keys, "config");
  if (!allow_sweep && j.contains("sweep")) throw ConfigError("'sweep' section is only valid for sweeps");
  ExperimentSpec s;
  if (j.contains("objective")) {
    const auto& o = j.at("objective");
    if (o.is_string()) {
      s.objective = o.get<std::string>();
    } else {
      reject_unknown(o, {"name", "dim", "shift_seed"}, "objective");
      get_if(o, "name", s.objective);
      get_if(o, "dim", s.dim);
      if (o.contains("shift_seed")) s.shift_seed = o.at("shift_seed").get<std::uint64_t>();
    }
  }
  if (j.contains("driver")) s.driver = parse_driver(j.at("driver").get<std::string>());
  get_if(j, "particles", s.particles);
  get_if(j, "runs", s.runs);
  if (j.contains("kbo")) parse_kbo(j.at("kbo"), s.kbo);
  get_if(j, "seed", s.kbo.seed);
  if (j.contains("output_dir")) s.output_dir = j.at("output_dir").get<std::string>();
  get_if(j, "write_traces", s.write_traces);
  if (j.contains("init")) {
    const auto& i = j.at("init");
    reject_unknown(i, {"law", "a", "b"}, "init");
    InitLaw law;
    const std::string kind = i.value("law", std::string("uniform"));
    if (kind == "uniform") {
      law.kind = InitLaw::Kind::uniform;
    } else if (kind == "gaussian") {
      law.kind = InitLaw::Kind::gaussian;
      law.a = 0.0;
    } else {
      throw ConfigError("unknown init law: " + kind);
    }
    get_if(i, "a", law.a);
    get_if(i, "b", law.b);
    s.init = law;
  }
  return s;
}

// Parsed contents of one trace CSV.
struct Trace {
  std::vector<std::size_t> steps;
  std::vector<double> counts;
  std::vector<double> last_valpha;
};

Trace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::size_t dim = 0;
  {
    std::stringstream hs(line);
    std::string col;
    while (std::getline(hs, col, ',')) {
      if (col.rfind("valpha_", 0) == 0) ++dim;
    }
  }
  Trace t;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() < 3 + dim) throw std::runtime_error("malformed trace row in " + path.string());
    t.steps.push_back(std::stoull(cells[0]));
    t.counts.push_back(std::stod(cells[2]));
    t.last_valpha.resize(dim);
    for (std::size_t k = 0; k < dim; ++k) t.last_valpha[k] = std::strtod(cells[3 + k].c_str(), nullptr);
  }
  if (t.steps.empty()) throw std::runtime_error("empty trace " + path.string());
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(Driver d) { return d == Driver::bird ? "bird" : "nanbu"; }

Driver parse_driver(const std::string& s) {
  if (s == "nanbu") return Driver::nanbu;
  if (s == "bird") return Driver::bird;
  throw ConfigError("unknown driver: " + s);
}

void ExperimentSpec::validate() const {
  kbo.validate();
  if (runs < 1) throw ConfigError("runs must be >= 1");
  if (particles < 2) throw ConfigError("particles must be >= 2");
  if (dim < 1) throw ConfigError("dim must be >= 1");
  if (objective == "sgdtest") {
    if (dim != 1) throw ConfigError("sgdtest is one-dimensional");
  } else if (!parse_benchmark(objective)) {
    throw ConfigError("unknown objective: " + objective);
  }
}

std::uint64_t run_seed(std::uint64_t master, std::size_t index) noexcept {
  return mix64(master + (static_cast<std::uint64_t>(index) + 1) * 0x9e3779b97f4a7c15ULL);
}

Objective make_objective(const ExperimentSpec& spec) {
  if (spec.objective == "sgdtest") return SampleObjective(10000, 0.1, spec.shift_seed.value_or(0)).as_objective();
  return benchmark(spec.objective, spec.dim, BenchmarkOptions{spec.shift_seed});
}

ParticleEnsemble initial_ensemble(const ExperimentSpec& spec, const Objective& objective, std::uint64_t seed) {
  if (spec.init) return ensemble_init(spec.particles, spec.dim, *spec.init, seed);
  auto ens = ensemble_init(spec.particles, spec.dim, InitLaw::uniform(-1.0, 1.0), seed);
  if (!spec.kbo.rescale) {
    const DomainMap map({objective.lower().begin(), objective.lower().end()},
                        {objective.upper().begin(), objective.upper().end()});
    std::vector<double> x(spec.dim);
    for (std::size_t i = 0; i < ens.count(); ++i) {
      map.to_domain(ens.position(i), x);
      std::copy(x.begin(), x.end(), ens.position(i).begin());
    }
  }
  return ens;
}

RunResult run_single(const ExperimentSpec& spec, const Objective& objective, std::uint64_t seed) {
  KboConfig cfg = spec.kbo;
  cfg.seed = seed;
  auto init = initial_ensemble(spec, objective, seed);
  return spec.driver == Driver::bird ? run_bird(cfg, objective, std::move(init))
                                     : run_nanbu(cfg, objective, std::move(init));
}

RunRecord make_record(const RunResult& run, const Objective& objective, std::uint64_t seed) {
  RunRecord r;
  r.seed = seed;
  r.iterations = run.iterations;
  r.avg_particles = run.avg_particles;
  r.termination = run.termination;
  r.final_estimate = run.final_estimate;
  r.final_fval = objective(run.final_estimate);
  if (objective.minimizer()) {
    const auto& xs = *objective.minimizer();
    r.success = check_success(run.final_estimate, xs);
    double s = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) s += (run.final_estimate[k] - xs[k]) * (run.final_estimate[k] - xs[k]);
    r.l2_error = std::sqrt(s);
  } else {
    r.l2_error = kNaN;
  }
  return r;
}

Summary summarize(std::vector<RunRecord> records) {
  Summary s;
  s.runs = records.size();
  if (s.runs == 0) throw ConfigError("cannot summarize zero runs");
  double iters = 0.0, iters_ok = 0.0, l2 = 0.0, fval = 0.0, avg = 0.0;
  for (const auto& r : records) {
    iters += r.iterations;
    fval += r.final_fval;
    avg += r.avg_particles;
    ++s.terminations[to_string(r.termination)];
    if (r.success) {
      ++s.successes;
      iters_ok += r.iterations;
      l2 += r.l2_error;
    }
  }
  const double n = static_cast<double>(s.runs);
  s.success_rate = static_cast<double>(s.successes) / n;
  s.mean_iters = iters / n;
  s.mean_final_fval = fval / n;
  s.mean_avg_particles = avg / n;
  s.mean_iters_successful = s.successes ? iters_ok / static_cast<double>(s.successes) : kNaN;
  s.mean_l2_error = s.successes ? l2 / static_cast<double>(s.successes) : kNaN;
  s.records = std::move(records);
  return s;
}

void write_trace_csv(const std::filesystem::path& path, const RunResult& run) {
  std::string out = "step,time,N_t";
  for (std::size_t k = 0; k < run.dim; ++k) out += ",valpha_" + std::to_string(k);
  out += ",mean_norm,variance,best_energy\n";
  for (const auto& row : run.trace) {
    out += std::to_string(row.step) + "," + fmt(row.time) + "," + std::to_string(row.count);
    for (double v : row.valpha) out += "," + fmt(v);
    double norm = 0.0;
    for (double m : row.mean) norm += m * m;
    out += "," + fmt(std::sqrt(norm)) + "," + fmt(row.variance) + "," + fmt(row.best_energy) + "\n";
  }
  write_text(path, out);
}

std::string summary_json(const Summary& s, const ExperimentSpec& spec) {
  json runs = json::array();
  for (const auto& r : s.records) {
    runs.push_back({{"seed", r.seed},
                    {"success", r.success},
                    {"iterations", r.iterations},
                    {"l2_error", num(r.l2_error)},
                    {"final_fval", num(r.final_fval)},
                    {"avg_particles", r.avg_particles},
                    {"termination", to_string(r.termination)}});
  }
  json j = {{"objective", spec.objective},
            {"dim", spec.dim},
            {"driver", to_string(spec.driver)},
            {"particles", spec.particles},
            {"seed", spec.kbo.seed},
            {"kbo", kbo_json(spec.kbo)},
            {"runs", s.runs},
            {"successes", s.successes},
            {"success_rate", s.success_rate},
            {"mean_iters", num(s.mean_iters)},
            {"mean_iters_successful", num(s.mean_iters_successful)},
            {"mean_l2_error", num(s.mean_l2_error)},
            {"mean_final_fval", num(s.mean_final_fval)},
            {"mean_avg_particles", num(s.mean_avg_particles)},
            {"terminations", s.terminations},
            {"run_details", runs}};
  if (s.terminations.size() == 1) j["termination"] = s.terminations.begin()->first;
  return j.dump(2) + "\n";
}

std::string diagnostics_json(const ExperimentSpec& spec, const Objective& objective, const RunResult* run,
                             std::uint64_t seed) {
  auto init = initial_ensemble(spec, objective, seed);
  if (spec.kbo.rescale) {
    const DomainMap map({objective.lower().begin(), objective.lower().end()},
                        {objective.upper().begin(), objective.upper().end()});
    std::vector<double> x(spec.dim);
    for (std::size_t i = 0; i < init.count(); ++i) {
      map.to_domain(init.position(i), x);
      std::copy(x.begin(), x.end(), init.position(i).begin());
    }
  }
  evaluate_energies(init, [&objective](std::span<const double> x) { return objective(x); });

  const EnergyRange range = sample_energy_range(objective, 1000, seed);
  const Smoothness smooth = objective.smoothness() ? *objective.smoothness() : estimate_smoothness(objective, 32, seed);
  TheoryInputs in;
  in.e_min = range.min;
  in.e_max = range.max;
  in.c1 = smooth.c1;
  in.c2 = smooth.c2;
  in.v0 = moments(init).variance;
  in.log_w0 = log_mean_weight(init.energies(), spec.kbo.beta);
  const TheoryParams t = theory_params(spec.kbo, spec.dim, in);

  json j = {{"seed", seed},
            {"objective", objective.name()},
            {"dim", spec.dim},
            {"driver", to_string(spec.driver)},
            {"inputs",
             {{"e_min", num(in.e_min)},
              {"e_max", num(in.e_max)},
              {"c1", num(in.c1)},
              {"c2", num(in.c2)},
              {"smoothness_estimated", smooth.estimated},
              {"v0", num(in.v0)},
              {"log_w0", num(in.log_w0)}}},
            {"theory",
             {{"C_beta", num(t.C_beta)},
              {"C_alpha", num(t.C_alpha)},
              {"kappa", t.kappa},
              {"mu", num(t.mu)},
              {"nu", t.nu ? num(*t.nu) : json(nullptr)},
              {"micro_rate", num(t.micro_rate)},
              {"macro_rate", num(t.macro_rate)},
              {"micro_condition", t.micro_condition},
              {"macro_condition", t.macro_condition},
              {"mu_positive", t.mu_positive},
              {"nu_below_half", t.nu_below_half},
              {"v0_at_most_one", t.v0_at_most_one}}},
            {"warnings", spec.kbo.warnings()}};
  if (run) {
    auto check = [run](double rate) {
      return std::isfinite(rate) && rate > 0.0 ? json(decay_check(*run, rate, 0.5)) : json(nullptr);
    };
    std::vector<double> finals;
    for (std::size_t i = 0; i * run->dim < run->final_positions.size(); ++i) {
      finals.push_back(objective(std::span<const double>(run->final_positions.data() + i * run->dim, run->dim)));
    }
    const double e_min = objective.min_value() ? *objective.min_value() : range.min;
    j["run"] = {{"termination", to_string(run->termination)},
                {"iterations", run->iterations},
                {"wall_steps", run->wall_steps},
                {"final_estimate", run->final_estimate},
                {"final_particles", finals.size()},
                {"final_variance", num(run->trace.back().variance)},
                {"decay_micro_rate_ok", check(t.micro_rate)},
                {"decay_macro_rate_ok", check(t.macro_rate)},
                {"laplace_gap_final", num(laplace_gap(finals, spec.kbo.beta, e_min))}};
    if (objective.minimizer()) j["run"]["success"] = check_success(run->final_estimate, *objective.minimizer());
  }
  return j.dump(2) + "\n";
}

Summary run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const Objective objective = make_objective(spec);
  const bool write = !spec.output_dir.empty();
  if (write) std::filesystem::create_directories(spec.output_dir);

  std::vector<RunRecord> records;
  for (std::size_t i = 0; i < spec.runs; ++i) {
    const std::uint64_t seed = run_seed(spec.kbo.seed, i);
    const RunResult run = run_single(spec, objective, seed);
    records.push_back(make_record(run, objective, seed));
    if (write && spec.write_traces) {
      write_trace_csv(spec.output_dir / (run_stem(i) + ".csv"), run);
      write_text(spec.output_dir / (run_stem(i) + ".diag.json"), diagnostics_json(spec, objective, &run, seed));
    }
  }
  Summary s = summarize(std::move(records));
  if (write) write_text(spec.output_dir / "summary.json", summary_json(s, spec));
  return s;
}

Summary summarize_from_traces(const std::filesystem::path& dir, const Objective& objective) {
  std::vector<std::filesystem::path> csvs;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("run_", 0) == 0 && entry.path().extension() == ".csv") csvs.push_back(entry.path());
  }
  if (csvs.empty()) throw ConfigError("no run traces in " + dir.string());
  std::sort(csvs.begin(), csvs.end());

  std::vector<RunRecord> records;
  for (const auto& path : csvs) {
    const Trace t = read_trace_csv(path);
    auto diag_path = path;
    diag_path.replace_extension(".diag.json");
    const json diag = parse_document(read_text_file(diag_path));

    RunResult run;
    run.dim = t.last_valpha.size();
    run.final_estimate = t.last_valpha;
    run.wall_steps = t.steps.back();
    const bool bird = diag.at("driver").get<std::string>() == "bird";
    const double half = std::max(1.0, std::floor(t.counts.front() / 2.0));
    run.iterations = bird ? static_cast<double>(run.wall_steps) / half : static_cast<double>(run.wall_steps);
    double total = 0.0;
    for (double c : t.counts) total += c;
    run.avg_particles = total / static_cast<double>(t.counts.size());
    run.termination = diag.at("run").at("termination").get<std::string>() == "stalled" ? Termination::stalled
                                                                                     : Termination::max_iters;
    records.push_back(make_record(run, objective, diag.at("seed").get<std::uint64_t>()));
  }
  return summarize(std::move(records));
}

// ---------------------------------------------------------------------------

void SweepSpec::validate() const {
  base.validate();
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  for (const auto& [name, values] : grid) {
    if (values.empty()) throw ConfigError("sweep axis '" + name + "' has no values");
    if (std::find(field_names().begin(), field_names().end(), name) == field_names().end()) {
      throw ConfigError("unknown sweep field: " + name);
    }
  }
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  spec.validate();
  std::size_t points = 1;
  for (const auto& axis : spec.grid) points *= axis.second.size();

  std::vector<SweepRow> rows;
  for (std::size_t p = 0; p < points; ++p) {
    ExperimentSpec point = spec.base;
    SweepRow row;
    std::size_t rem = p;
    std::vector<std::size_t> idx(spec.grid.size());
    for (std::size_t a = spec.grid.size(); a-- > 0;) {
      idx[a] = rem % spec.grid[a].second.size();
      rem /= spec.grid[a].second.size();
    }
    for (std::size_t a = 0; a < spec.grid.size(); ++a) {
      const double v = spec.grid[a].second[idx[a]];
      set_field(point, spec.grid[a].first, v);
      row.values.push_back(v);
    }
    if (!spec.base.output_dir.empty()) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "point_%03zu", p);
      point.output_dir = spec.base.output_dir / buf;
    }
    row.summary = run_experiment(point);
    rows.push_back(std::move(row));
  }

  if (!spec.base.output_dir.empty()) {
    std::string out;
    for (const auto& axis : spec.grid) out += axis.first + ",";
    out += "success_rate,mean_iters,mean_iters_successful,mean_l2_error,runs\n";
    for (const auto& row : rows) {
      for (double v : row.values) out += fmt(v) + ",";
      const auto& s = row.summary;
      out += fmt(s.success_rate) + "," + fmt(s.mean_iters) + "," + fmt(s.mean_iters_successful) + "," +
             fmt(s.mean_l2_error) + "," + std::to_string(s.runs) + "\n";
    }
    std::filesystem::create_directories(spec.base.output_dir);
    write_text(spec.base.output_dir / "sweep.csv", out);
  }
  return rows;
}

const std::vector<std::string>& field_names() {
  static const std::vector<std::string> names = {"lambda1",   "lambda2", "sigma1",    "sigma2",   "alpha",    "beta",
                                                 "epsilon",   "n_stall", "delta_stall", "max_iters", "mu",     "t_r",
                                                 "n_min",     "particles", "dim",     "runs",     "seed"};
  return names;
}

void set_field(ExperimentSpec& spec, const std::string& name, double v) {
  auto count = [&]() -> std::size_t {
    if (!(v >= 0.0) || v != std::floor(v)) throw ConfigError("field '" + name + "' needs a non-negative integer");
    return static_cast<std::size_t>(v);
  };
  KboConfig& c = spec.kbo;
  if (name == "lambda1") c.lambda1 = v;
  else if (name == "lambda2") c.lambda2 = v;
  else if (name == "sigma1") c.sigma1 = v;
  else if (name == "sigma2") c.sigma2 = v;
  else if (name == "alpha") c.alpha = v;
  else if (name == "beta") c.beta = v;
  else if (name == "epsilon") c.epsilon = v;
  else if (name == "n_stall") c.n_stall = count();
  else if (name == "delta_stall") c.delta_stall = v;
  else if (name == "max_iters") c.max_iters = count();
  else if (name == "mu") c.reduction.mu = v;
  else if (name == "t_r") c.reduction.t_r = count();
  else if (name == "n_min") c.reduction.n_min = count();
  else if (name == "particles") spec.particles = count();
  else if (name == "dim") spec.dim = count();
  else if (name == "runs") spec.runs = count();
  else if (name == "seed") c.seed = count();
  else throw ConfigError("unknown field: " + name);
}

ExperimentSpec parse_experiment(const std::string& text) { return spec_from_json(parse_document(text), false); }

SweepSpec parse_sweep(const std::string& text) {
  const json j = parse_document(text);
  SweepSpec s;
  s.base = spec_from_json(j, true);
  if (j.contains("sweep")) {
    const auto& g = j.at("sweep");
    if (!g.is_object()) throw ConfigError("sweep must be an object of field -> list");
    for (const auto& [name, values] : g.items()) {
      s.grid.emplace_back(name, values.get<std::vector<double>>());
    }
  }
  return s;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------

void MlTrainSpec::validate() const {
  if (method != "kbo" && method != "sgd") throw ConfigError("mltrain method must be kbo or sgd");
  if (dataset != "blobs" && dataset != "idx") throw ConfigError("mltrain dataset must be blobs or idx");
  if (dataset == "idx" && (train_images.empty() || train_labels.empty() || val_images.empty() || val_labels.empty())) {
    throw ConfigError("idx dataset needs train/validation image and label files");
  }
  if (method == "kbo") kbo.kbo.validate();
}

MlTrainReport run_mltrain(const MlTrainSpec& spec) {
  spec.validate();
  const DatasetPair data = spec.dataset == "blobs"
                               ? synth_blobs(spec.classes, spec.n_per_class, spec.features, spec.separation, spec.seed)
                               : dataset_from_idx(spec.train_images, spec.train_labels, spec.val_images,
                                                  spec.val_labels, spec.limit);
  MlTrainReport report{spec.method == "sgd" ? sgd_train(data.train, data.validation, spec.sgd, spec.seed)
                                            : [&] {
                                                KboTrainConfig cfg = spec.kbo;
                                                cfg.kbo.seed = spec.seed;
                                                return kbo_train(data.train, data.validation, cfg);
                                              }(),
                       data.train.size(), data.validation.size()};

  if (!spec.output_dir.empty()) {
    std::filesystem::create_directories(spec.output_dir);
    std::string csv = "epoch,val_accuracy,train_loss\n";
    const auto& r = report.result;
    for (std::size_t e = 0; e < r.accuracy.size(); ++e) {
      csv += std::to_string(e + 1) + "," + fmt(r.accuracy[e]) + "," + fmt(r.loss[e]) + "\n";
    }
    write_text(spec.output_dir / "mltrain.csv", csv);
    json j = {{"method", spec.method},
              {"dataset", spec.dataset},
              {"seed", spec.seed},
              {"train_size", report.train_size},
              {"validation_size", report.validation_size},
              {"epochs_run", r.accuracy.size()},
              {"final_accuracy", r.accuracy.empty() ? json(nullptr) : num(r.accuracy.back())},
              {"final_particles", r.final_particles},
              {"avg_particles", num(r.avg_particles)}};
    if (spec.method == "kbo") {
      j["particles"] = spec.kbo.particles;
      j["particle_batch"] = spec.kbo.particle_batch;
      j["data_batch"] = spec.kbo.data_batch;
      j["kbo"] = kbo_json(spec.kbo.kbo);
    } else {
      j["sgd"] = {{"gamma", spec.sgd.gamma}, {"batch", spec.sgd.batch}, {"epochs", spec.sgd.epochs}, {"tol", spec.sgd.tol}};
    }
    write_text(spec.output_dir / "mltrain.json", j.dump(2) + "\n");
  }
  return report;
}

}  // namespace kbo
