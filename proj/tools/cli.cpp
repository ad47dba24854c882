#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "perstd/coupled_als.hpp"
#include "perstd/datagen.hpp"
#include "perstd/experiments.hpp"
#include "perstd/io.hpp"
#include "perstd/semialg.hpp"
#include "perstd/uniqueness.hpp"

namespace perstd::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr const char* kVersion = "0.1.0";

// Anything wrong with the user's input; maps to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> runs;
  std::optional<int> restarts;
  std::optional<unsigned> threads;
};

// The parsed config plus the command-line overrides.
struct Context {
  std::string command;
  json cfg;
  fs::path base_dir;  // relative paths in the config resolve against this
  std::uint64_t seed = 0;
  fs::path out_dir;
  int runs = 20;
  SolverSettings solver;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
  // Output files for the manifest, relative to out_dir.
  std::vector<std::string> outputs;

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }
};

// ---------------------------------------------------------------- parsing

const json* section(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return nullptr;
  if (!it->is_object()) {
    throw ConfigError(std::string("'") + key + "' must be a table");
  }
  return &*it;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("'") + key + "' has the wrong type");
  }
}

// Numbers, or the strings "inf" / "infinity" for the noiseless case.
double parse_snr(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (s == "inf" || s == "infinity" || s == "+inf") {
      return std::numeric_limits<double>::infinity();
    }
  }
  throw ConfigError("SNR values must be numbers or \"inf\"");
}

Dims parse_dims(const json& v, const std::string& what) {
  if (!v.is_array() || v.size() != 3) {
    throw ConfigError(what + " must be a list of three sizes");
  }
  Dims d{};
  for (int j = 0; j < 3; ++j) {
    if (!v[j].is_number_integer() || v[j].get<long long>() < 1) {
      throw ConfigError(what + " entries must be positive integers");
    }
    d[j] = v[j].get<Index>();
  }
  return d;
}

// A scalar applies to every dataset.
std::vector<Index> parse_l(const json& v, std::size_t K) {
  if (v.is_number_integer()) return std::vector<Index>(K, v.get<Index>());
  if (!v.is_array() || v.size() != K) {
    throw ConfigError("'L' must be an integer or a list with one entry per "
                      "dataset");
  }
  std::vector<Index> l;
  for (const auto& x : v) {
    if (!x.is_number_integer()) throw ConfigError("'L' entries must be integers");
    l.push_back(x.get<Index>());
  }
  return l;
}

SynthConfig parse_synth(const json& root) {
  SynthConfig cfg = SynthConfig::example4();
  const json* s = section(root, "synth");
  if (s == nullptr) return cfg;
  if (s->contains("common")) cfg.common = parse_dims(s->at("common"), "'common'");
  if (s->contains("datasets")) {
    const json& d = s->at("datasets");
    if (!d.is_array() || d.empty()) {
      throw ConfigError("'datasets' must be a non-empty list");
    }
    cfg.datasets.clear();
    for (const auto& x : d) cfg.datasets.push_back(parse_dims(x, "dataset dims"));
  }
  cfg.R = get_or<Index>(*s, "R", cfg.R);
  if (s->contains("L")) {
    cfg.L = parse_l(s->at("L"), cfg.datasets.size());
  } else if (cfg.L.size() != cfg.datasets.size()) {
    cfg.L.assign(cfg.datasets.size(), 0);
  }
  if (s->contains("snr_db")) cfg.snr_db = parse_snr(s->at("snr_db"));
  const std::string pd = get_or<std::string>(*s, "p_dist", "uniform01");
  if (pd == "uniform01") {
    cfg.p_dist = PDist::uniform01;
  } else if (pd == "gaussian") {
    cfg.p_dist = PDist::gaussian;
  } else {
    throw ConfigError("'p_dist' must be \"uniform01\" or \"gaussian\"");
  }
  cfg.alpha = get_or<double>(*s, "alpha", cfg.alpha);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

SolverSettings parse_solver(const json& root) {
  SolverSettings s;
  const json* j = section(root, "solver");
  if (j == nullptr) return s;
  s.restarts = get_or<int>(*j, "restarts", s.restarts);
  s.max_iters = get_or<int>(*j, "max_iters", s.max_iters);
  s.tol = get_or<double>(*j, "tol", s.tol);
  s.line_search = get_or<bool>(*j, "line_search", s.line_search);
  s.cpd_max_iters = get_or<int>(*j, "cpd_max_iters", s.cpd_max_iters);
  s.cpd_tol = get_or<double>(*j, "cpd_tol", s.cpd_tol);
  s.cpd_polish_iters = get_or<int>(*j, "cpd_polish_iters", s.cpd_polish_iters);
  s.threads = get_or<unsigned>(*j, "threads", s.threads);
  return s;
}

template <class T>
std::vector<T> get_list(const json& j, const char* key, std::vector<T> fallback) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (!it->is_array()) throw ConfigError(std::string("'") + key + "' must be a list");
  std::vector<T> v;
  try {
    for (const auto& x : *it) v.push_back(x.get<T>());
  } catch (const json::exception&) {
    throw ConfigError(std::string("'") + key + "' has entries of the wrong type");
  }
  return v;
}

Context make_context(const std::string& command, const CommonArgs& a,
                     std::ostream& out, std::ostream& err) {
  Context c;
  c.command = command;
  c.out = &out;
  c.err = &err;
  std::ifstream in(a.config);
  if (!in) throw ConfigError("cannot open config '" + a.config + "'");
  try {
    c.cfg = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + a.config + "': " + e.what());
  }
  if (!c.cfg.is_object()) throw ConfigError("config must be a table");
  if (c.cfg.contains("mode") && c.cfg["mode"] != command) {
    throw ConfigError("config is for '" + c.cfg["mode"].dump() +
                      "', not '" + command + "'");
  }
  c.base_dir = fs::path(a.config).parent_path();
  c.seed = a.seed ? *a.seed : get_or<std::uint64_t>(c.cfg, "seed", 0);
  c.runs = a.runs ? *a.runs : get_or<int>(c.cfg, "runs", 20);
  if (c.runs < 1) throw ConfigError("runs must be >= 1");
  c.out_dir = a.out ? fs::path(*a.out)
                    : c.resolve(get_or<std::string>(c.cfg, "out", "perstd-out"));
  c.solver = parse_solver(c.cfg);
  if (a.restarts) c.solver.restarts = *a.restarts;
  if (a.threads) c.solver.threads = *a.threads;
  if (c.solver.restarts < 1) throw ConfigError("restarts must be >= 1");
  return c;
}

// ---------------------------------------------------------------- output

std::string fmt(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  std::ostringstream os;
  os << std::setprecision(10) << x;
  return os.str();
}

void ensure_out_dir(const Context& c) {
  std::error_code ec;
  fs::create_directories(c.out_dir, ec);
  if (ec) {
    throw ConfigError("cannot create output directory '" + c.out_dir.string() +
                      "': " + ec.message());
  }
}

std::ofstream open_output(Context& c, const std::string& name) {
  ensure_out_dir(c);
  std::ofstream os(c.out_dir / name);
  if (!os) throw ConfigError("cannot write '" + (c.out_dir / name).string() + "'");
  c.outputs.push_back(name);
  return os;
}

void write_text(Context& c, const std::string& name, const std::string& text) {
  std::ofstream os = open_output(c, name);
  os << text;
}

void save_tensor(Context& c, const std::string& name, const Tensor3& t) {
  ensure_out_dir(c);
  io::save_tensor(c.out_dir / name, t);
  c.outputs.push_back(name);
}

void save_matrix(Context& c, const std::string& name, const Matrix& m) {
  ensure_out_dir(c);
  io::save_matrix(c.out_dir / name, m);
  c.outputs.push_back(name);
}

std::string checksum(const fs::path& p) {
  // 64-bit FNV-1a: enough to tell runs apart, not a security measure.
  std::ifstream in(p, std::ios::binary);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char ch;
  while (in.get(ch)) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// Everything needed to rerun the command; no timestamps, so two runs with
// the same inputs produce identical manifests.
void write_manifest(Context& c, const json& extra = json::object()) {
  json m;
  m["tool"] = "perstd";
  m["version"] = kVersion;
  m["command"] = c.command;
  m["seed"] = c.seed;
  m["runs"] = c.runs;
  m["solver"] = {{"restarts", c.solver.restarts},
                 {"max_iters", c.solver.max_iters},
                 {"tol", c.solver.tol},
                 {"line_search", c.solver.line_search},
                 {"cpd_max_iters", c.solver.cpd_max_iters},
                 {"cpd_tol", c.solver.cpd_tol},
                 {"cpd_polish_iters", c.solver.cpd_polish_iters}};
  m["config"] = c.cfg;
  m["libraries"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                  std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)},
                    {"compiler", __VERSION__}};
  json files = json::object();
  for (const auto& f : c.outputs) files[f] = checksum(c.out_dir / f);
  m["outputs"] = files;
  for (const auto& [k, v] : extra.items()) m[k] = v;
  std::ofstream os(c.out_dir / "manifest.json");
  if (!os) throw ConfigError("cannot write manifest");
  os << m.dump(2) << '\n';
}

std::string dims_str(const Dims& d) {
  return std::to_string(d[0]) + "x" + std::to_string(d[1]) + "x" +
         std::to_string(d[2]);
}

// ---------------------------------------------------------------- commands

int cmd_synth_snr(Context& c) {
  const SynthConfig base = parse_synth(c.cfg);
  std::vector<double> snrs;
  if (c.cfg.contains("snr_list")) {
    for (const auto& v : c.cfg["snr_list"]) snrs.push_back(parse_snr(v));
  } else {
    snrs = {20, 30, 40, 50, 60};
  }
  std::vector<Method> methods;
  for (const auto& m : get_list<std::string>(
           c.cfg, "methods", {"semialg", "als_init1", "als_init2"})) {
    try {
      methods.push_back(parse_method(m));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  const auto rows = run_snr_sweep(base, snrs, methods, c.runs, c.seed, c.solver);

  std::ofstream csv = open_output(c, "snr.csv");
  std::ostringstream sum;
  csv << "snr_db,method,mean_nrmse,std_nrmse,runs,failures\n";
  sum << "NRMSE of the common tensor, " << c.runs << " runs per point, "
      << c.solver.restarts << " restarts\n\n";
  sum << std::left << std::setw(8) << "SNR" << std::setw(11) << "method"
      << std::setw(14) << "mean" << std::setw(14) << "std" << "failures\n";
  for (const auto& r : rows) {
    csv << fmt(r.snr_db) << ',' << method_name(r.method) << ','
        << fmt(r.summary.mean) << ',' << fmt(r.summary.stddev) << ','
        << r.summary.runs << ',' << r.summary.failures << '\n';
    sum << std::setw(8) << fmt(r.snr_db) << std::setw(11)
        << method_name(r.method) << std::setw(14) << fmt(r.summary.mean)
        << std::setw(14) << fmt(r.summary.stddev) << r.summary.failures << '\n';
  }
  csv.close();
  write_text(c, "summary.txt", sum.str());
  write_manifest(c);
  *c.out << sum.str();
  return kOk;
}

int cmd_ablate_alpha(Context& c) {
  const SynthConfig base = parse_synth(c.cfg);
  const auto alphas = get_list<double>(c.cfg, "alpha_list",
                                       {0.0, 0.2, 0.4, 0.6, 0.8, 1.0});
  for (double a : alphas) {
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("alpha values must lie in [0, 1]");
  }
  const auto rows = run_alpha_sweep(base, alphas, c.runs, c.seed, c.solver);

  std::ofstream csv = open_output(c, "alpha.csv");
  std::ostringstream sum;
  csv << "alpha,mean_nrmse,std_nrmse,runs,failures\n";
  sum << "Mean over datasets of |C_k(alpha) - C_hat| / |C_k(alpha)|, "
      << c.runs << " runs per point\n\n";
  for (const auto& r : rows) {
    csv << fmt(r.alpha) << ',' << fmt(r.summary.mean) << ','
        << fmt(r.summary.stddev) << ',' << r.summary.runs << ','
        << r.summary.failures << '\n';
    sum << "alpha " << std::left << std::setw(6) << fmt(r.alpha) << " mean "
        << std::setw(14) << fmt(r.summary.mean) << " std "
        << fmt(r.summary.stddev) << '\n';
  }
  csv.close();
  write_text(c, "summary.txt", sum.str());
  write_manifest(c);
  *c.out << sum.str();
  return kOk;
}

int cmd_ablate_rank(Context& c) {
  const SynthConfig base = parse_synth(c.cfg);
  std::vector<Index> rs{3, 4, 5, 6, 7}, ls{3, 4, 5, 6, 7};
  if (const json* g = section(c.cfg, "rank_grid")) {
    rs = get_list<Index>(*g, "R", rs);
    ls = get_list<Index>(*g, "L", ls);
  }
  for (Index r : rs) {
    if (r < 1) throw ConfigError("grid ranks R must be >= 1");
  }
  for (Index l : ls) {
    if (l < 0) throw ConfigError("grid ranks L must be >= 0");
  }
  const auto cells = run_rank_grid(base, rs, ls, c.runs, c.seed, c.solver);

  std::ofstream csv = open_output(c, "rank.csv");
  csv << "R,L,mean_nrmse,std_nrmse,runs,failures\n";
  const RankCell* best = nullptr;
  for (const auto& cell : cells) {
    csv << cell.R << ',' << cell.L << ',' << fmt(cell.summary.mean) << ','
        << fmt(cell.summary.stddev) << ',' << cell.summary.runs << ','
        << cell.summary.failures << '\n';
    if (std::isfinite(cell.summary.mean) &&
        (best == nullptr || cell.summary.mean < best->summary.mean)) {
      best = &cell;
    }
  }
  csv.close();

  std::ostringstream sum;
  sum << "Mean NRMSE by (R rows, L columns), data generated with R = "
      << base.R << "\n\n" << std::setw(4) << "";
  for (Index l : ls) sum << std::setw(12) << l;
  sum << '\n';
  for (std::size_t i = 0; i < rs.size(); ++i) {
    sum << std::setw(4) << rs[i];
    for (std::size_t j = 0; j < ls.size(); ++j) {
      sum << std::setw(12) << fmt(cells[i * ls.size() + j].summary.mean);
    }
    sum << '\n';
  }
  if (best != nullptr) {
    sum << "\nminimum at R = " << best->R << ", L = " << best->L << '\n';
  }
  write_text(c, "summary.txt", sum.str());
  write_manifest(c);
  *c.out << sum.str();
  return kOk;
}

int cmd_fuse(Context& c) {
  FusionConfig fc;
  std::vector<double> targets{fc.target_cc};
  if (const json* f = section(c.cfg, "fusion")) {
    fc.height = get_or<Index>(*f, "height", fc.height);
    fc.width = get_or<Index>(*f, "width", fc.width);
    fc.bands = get_or<Index>(*f, "bands", fc.bands);
    fc.image_rank = get_or<Index>(*f, "image_rank", fc.image_rank);
    fc.decimation = get_or<Index>(*f, "decimation", fc.decimation);
    fc.msi_bands = get_or<Index>(*f, "msi_bands", fc.msi_bands);
    if (f->contains("snr_db")) fc.snr_db = parse_snr(f->at("snr_db"));
    fc.R = get_or<Index>(*f, "R", fc.R);
    fc.L = get_or<Index>(*f, "L", fc.L);
    fc.als_iters = get_or<int>(*f, "als_iters", fc.als_iters);
    fc.cloud_reflectance = get_or<double>(*f, "cloud_reflectance",
                                          fc.cloud_reflectance);
    fc.cloud_radius = get_or<int>(*f, "cloud_radius", fc.cloud_radius);
    fc.cloud_softness = get_or<double>(*f, "cloud_softness", fc.cloud_softness);
    if (f->contains("target_cc")) {
      const json& t = f->at("target_cc");
      targets = t.is_array() ? get_list<double>(*f, "target_cc", {})
                             : std::vector<double>{get_or<double>(*f, "target_cc", 0)};
    }
    if (f->contains("image")) {
      fc.image = io::load_tensor(c.resolve(f->at("image").get<std::string>()));
    }
    if (f->contains("cloud_maps")) {
      const auto maps = get_list<std::string>(*f, "cloud_maps", {});
      if (maps.size() != 2) {
        throw ConfigError("'cloud_maps' needs two files (HSI, MSI)");
      }
      fc.cloud_maps = std::array<Matrix, 2>{io::load_matrix(c.resolve(maps[0])),
                                            io::load_matrix(c.resolve(maps[1]))};
      targets = {std::nan("")};
    }
  }
  for (double t : targets) {
    if (!std::isnan(t) && !(t >= 0.0 && t <= 1.0)) {
      throw ConfigError("target_cc must lie in [0, 1]");
    }
  }

  std::ofstream csv = open_output(c, "fusion.csv");
  csv << "target_cc,run,cc,cp,nrmse_personalized,nrmse_baseline\n";
  std::ostringstream sum;
  sum << "Personalized (R = " << fc.R << ", L = " << fc.L
      << ") versus baseline (L = 0), " << c.runs << " runs per cover level\n\n";
  for (double t : targets) {
    if (!std::isnan(t)) fc.target_cc = t;
    const auto rows = run_fusion(fc, c.runs, c.seed, c.solver);
    int wins = 0;
    double sp = 0.0, sb = 0.0, scc = 0.0;
    for (const auto& r : rows) {
      csv << fmt(t) << ',' << r.run << ',' << fmt(r.cc) << ',' << fmt(r.cp)
          << ',' << fmt(r.personalized.ok ? r.personalized.nrmse : std::nan(""))
          << ',' << fmt(r.baseline.ok ? r.baseline.nrmse : std::nan("")) << '\n';
      if (r.personalized.ok &&
          (!r.baseline.ok || r.personalized.nrmse < r.baseline.nrmse)) {
        ++wins;
      }
      sp += r.personalized.nrmse;
      sb += r.baseline.nrmse;
      scc += r.cc;
    }
    const double n = static_cast<double>(rows.size());
    sum << "target CC " << fmt(t) << ": mean CC " << fmt(scc / n)
        << ", mean NRMSE personalized " << fmt(sp / n) << ", baseline "
        << fmt(sb / n) << ", personalized better in " << wins << "/"
        << rows.size() << '\n';
  }
  csv.close();
  write_text(c, "summary.txt", sum.str());
  write_manifest(c);
  *c.out << sum.str();
  return kOk;
}

struct LoadedData {
  std::vector<Tensor3> y;
  MeasurementModel meas;
  std::optional<Tensor3> truth;
};

LoadedData load_datasets(const Context& c, const json& d) {
  LoadedData out;
  const auto it = d.find("datasets");
  if (it == d.end() || !it->is_array() || it->empty()) {
    throw ConfigError("'decompose.datasets' must be a non-empty list");
  }
  for (const auto& ds : *it) {
    if (!ds.contains("y") || !ds.contains("p") || !ds["p"].is_array() ||
        ds["p"].size() != 3) {
      throw ConfigError("each dataset needs 'y' and three 'p' files");
    }
    out.y.push_back(io::load_tensor(c.resolve(ds["y"].get<std::string>())));
    MeasurementOps p;
    for (int j = 0; j < 3; ++j) {
      p[j] = io::load_matrix(c.resolve(ds["p"][j].get<std::string>()));
    }
    out.meas.ops.push_back(std::move(p));
  }
  try {
    out.meas.validate();
    for (std::size_t k = 0; k < out.y.size(); ++k) {
      if (out.y[k].dims() != out.meas.dataset_dims(k)) {
        throw std::invalid_argument(
            "Y_" + std::to_string(k + 1) + " is " + dims_str(out.y[k].dims()) +
            " but its operators give " + dims_str(out.meas.dataset_dims(k)));
      }
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (d.contains("truth")) {
    out.truth = io::load_tensor(c.resolve(d["truth"].get<std::string>()));
  }
  return out;
}

std::string witness_str(const Witness& w) {
  return "eta = " + std::to_string(w.eta + 1) + ", xi = (" +
         std::to_string(w.xi[0] + 1) + ", " + std::to_string(w.xi[1] + 1) +
         ", " + std::to_string(w.xi[2] + 1) + ")";
}

json index_list(const std::vector<Index>& v) {
  json a = json::array();
  for (Index k : v) a.push_back(k + 1);
  return a;
}

int cmd_check_uniqueness(Context& c) {
  ProblemDims dims;
  if (const json* d = section(c.cfg, "decompose"); d && d->contains("datasets")) {
    const LoadedData data = load_datasets(c, *d);
    const Index R = get_or<Index>(*d, "R", 1);
    const auto L = d->contains("L") ? parse_l(d->at("L"), data.y.size())
                                    : std::vector<Index>(data.y.size(), 0);
    dims = ProblemDims::from_measurements(data.meas, R, L);
  } else {
    const SynthConfig s = parse_synth(c.cfg);
    dims = ProblemDims::full_rank(s.common, s.datasets, s.R, s.L);
  }
  try {
    dims.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const UniquenessReport rep = check_generic(dims);

  std::ostringstream os;
  os << "common tensor " << dims_str(dims.common) << ", R = " << dims.R << "\n\n";
  os << std::left << std::setw(9) << "dataset" << std::setw(12) << "dims"
     << std::setw(7) << "R+L" << std::setw(7) << "count" << std::setw(7)
     << "bound" << std::setw(7) << "full" << "mode-1/2/3 unique\n";
  const auto in = [](const std::vector<Index>& v, Index k) {
    return std::find(v.begin(), v.end(), k) != v.end();
  };
  json per = json::array();
  for (Index k = 0; k < dims.K(); ++k) {
    const bool full = in(rep.eta_candidates, k);
    std::array<bool, 3> uni{};
    for (int j = 0; j < 3; ++j) uni[j] = in(rep.unimode_candidates[j], k);
    os << std::setw(9) << ("Y" + std::to_string(k + 1)) << std::setw(12)
       << dims_str(dims.datasets[k]) << std::setw(7) << dims.R + dims.L[k]
       << std::setw(7) << full_uniqueness_count(dims, k) << std::setw(7)
       << uniqueness_bound(dims, k) << std::setw(7) << (full ? "yes" : "no")
       << (uni[0] ? "yes" : "no") << '/' << (uni[1] ? "yes" : "no") << '/'
       << (uni[2] ? "yes" : "no") << '\n';
    per.push_back({{"dataset", k + 1},
                   {"full_count", full_uniqueness_count(dims, k)},
                   {"bound", uniqueness_bound(dims, k)},
                   {"fully_unique", full},
                   {"unimode", {uni[0], uni[1], uni[2]}}});
  }
  os << "\nfully unique datasets:";
  for (Index k : rep.eta_candidates) os << " Y" << k + 1;
  if (rep.eta_candidates.empty()) os << " none";
  os << '\n';
  for (int j = 0; j < 3; ++j) {
    os << "mode-" << j + 1 << " unique with left-invertible operator:";
    for (Index k : rep.unimode_candidates[j]) os << " Y" << k + 1;
    if (rep.unimode_candidates[j].empty()) os << " none";
    os << '\n';
  }
  os << "some mode uses a dataset other than the fully unique one: "
     << (rep.a6_satisfied ? "yes" : "no") << '\n';
  if (rep.witness) os << "witness: " << witness_str(*rep.witness) << '\n';
  os << "overall: "
     << (rep.overall ? "recoverable for generic factors"
                     : "recoverability not guaranteed")
     << '\n';

  json j;
  j["overall"] = rep.overall;
  j["datasets"] = per;
  j["fully_unique"] = index_list(rep.eta_candidates);
  j["unimode"] = {index_list(rep.unimode_candidates[0]),
                  index_list(rep.unimode_candidates[1]),
                  index_list(rep.unimode_candidates[2])};
  if (rep.witness) {
    j["witness"] = {{"eta", rep.witness->eta + 1},
                    {"xi",
                     {rep.witness->xi[0] + 1, rep.witness->xi[1] + 1,
                      rep.witness->xi[2] + 1}}};
  }
  write_text(c, "uniqueness.json", j.dump(2) + "\n");
  write_text(c, "summary.txt", os.str());
  write_manifest(c);
  *c.out << os.str();
  return rep.overall ? kOk : kNotGuaranteed;
}

CouplingSpec parse_coupling(const json& d, Index K) {
  if (!d.contains("coupling")) return CouplingSpec::full(K);
  const json& g = d.at("coupling");
  if (!g.is_array() || g.size() != 3) {
    throw ConfigError("'coupling' must list the coupled datasets of each mode");
  }
  CouplingSpec spec;
  for (int j = 0; j < 3; ++j) {
    for (const auto& k : g[j]) {
      if (!k.is_number_integer()) throw ConfigError("coupling entries must be integers");
      spec.gamma[j].push_back(k.get<Index>() - 1);
    }
  }
  try {
    spec.validate(K);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("coupling: ") + e.what());
  }
  return spec;
}

int cmd_decompose(Context& c) {
  const json* d = section(c.cfg, "decompose");
  if (d == nullptr) throw ConfigError("missing 'decompose' table");
  const LoadedData data = load_datasets(c, *d);
  const auto K = static_cast<Index>(data.y.size());
  const Index R = get_or<Index>(*d, "R", 0);
  if (R < 1) throw ConfigError("'decompose.R' must be >= 1");
  const auto L = d->contains("L") ? parse_l(d->at("L"), data.y.size())
                                  : std::vector<Index>(data.y.size(), 0);
  Method method;
  try {
    method = parse_method(get_or<std::string>(*d, "method", "als_init2"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const CouplingSpec spec = parse_coupling(*d, K);

  CpdOptions cpd;
  cpd.max_iters = c.solver.cpd_max_iters;
  cpd.tol = c.solver.cpd_tol;
  cpd.restarts = c.solver.restarts;
  cpd.polish_iters = c.solver.cpd_polish_iters;
  cpd.seed = c.seed;

  std::optional<Witness> witness;
  if (method != Method::als_init2) {
    const UniquenessReport rep =
        check_generic(ProblemDims::from_measurements(data.meas, R, L));
    if (!rep.witness) {
      *c.err << "recoverability is not guaranteed for these ranks; the "
                "semi-algebraic method needs a witness\n";
      return kNotGuaranteed;
    }
    witness = rep.witness;
  }

  FactorTriple common;
  std::vector<Tensor3> distinct;
  std::vector<double> trace;
  bool converged = true;
  if (method == Method::semialg) {
    SemiAlgOptions so;
    so.cpd = cpd;
    so.distinct_cpd = true;
    const SemiAlgResult sa =
        semialg_decompose(data.y, data.meas, R, L, *witness, so);
    common = sa.common.factors;
    const Tensor3 ch = cp_reconstruct(sa.common);
    double f = 0.0;
    for (Index k = 0; k < K; ++k) {
      distinct.push_back(L[k] > 0 ? cp_reconstruct(sa.distinct_factors[k])
                                  : Tensor3(data.y[k].dims()));
      f += (data.y[k] - apply_measurement(ch, data.meas[k]) - distinct.back())
               .squared_norm();
    }
    trace.push_back(f);
    for (const auto& [k, r] : sa.cpds) converged &= r.converged;
    for (const auto& w : sa.warnings) *c.err << "warning: " << w << '\n';
  } else {
    MultistartOptions mo;
    mo.als.max_iters = c.solver.max_iters;
    mo.als.tol = c.solver.tol;
    mo.als.line_search = c.solver.line_search;
    mo.init = method == Method::als_init1 ? AlsInit::semialg : AlsInit::random;
    mo.restarts = c.solver.restarts;
    mo.seed = c.seed;
    mo.witness = witness;
    mo.cpd = cpd;
    const AlsResult res =
        coupled_als_multistart(data.y, data.meas, R, L, spec, mo);
    common = res.state.c;
    for (Index k = 0; k < K; ++k) {
      const FactorTriple& xd = res.state.xd[k];
      distinct.push_back(xd[0].cols() > 0 ? cp_reconstruct(xd[0], xd[1], xd[2])
                                          : Tensor3(data.y[k].dims()));
    }
    trace = res.state.objective_trace;
    converged = res.converged;
    if (res.damped_solves > 0) {
      *c.err << "warning: " << res.damped_solves
             << " common-factor solves needed damping\n";
    }
  }

  const Tensor3 c_hat = cp_reconstruct(common[0], common[1], common[2]);
  save_tensor(c, "common.t3", c_hat);
  for (int j = 0; j < 3; ++j) {
    save_matrix(c, "common_factor_" + std::to_string(j + 1) + ".mat", common[j]);
  }
  for (Index k = 0; k < K; ++k) {
    save_tensor(c, "distinct_" + std::to_string(k + 1) + ".t3", distinct[k]);
  }
  {
    std::ofstream os = open_output(c, "trace.csv");
    os << "iteration,objective\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
      os << i + 1 << ',' << fmt(trace[i]) << '\n';
    }
  }

  std::ostringstream sum;
  sum << "method " << method_name(method) << ", R = " << R << ", "
      << c.solver.restarts << " restarts\n";
  if (witness) sum << "witness: " << witness_str(*witness) << '\n';
  sum << "objective " << fmt(trace.empty() ? std::nan("") : trace.back())
      << " after " << trace.size()
      << (method == Method::semialg ? " evaluation" : " sweeps") << '\n';
  sum << "converged: " << (converged ? "yes" : "no") << '\n';
  json extra = json::object();
  if (data.truth) {
    const double e = nrmse(c_hat, *data.truth);
    sum << "NRMSE against truth: " << fmt(e) << '\n';
    extra["nrmse"] = e;
  }
  write_text(c, "summary.txt", sum.str());
  write_manifest(c, extra);
  *c.out << sum.str();
  return converged ? kOk : kNotConverged;
}

int cmd_generate(Context& c) {
  SynthConfig s = parse_synth(c.cfg);
  s.seed = c.seed;
  const SynthData data = generate_synthetic(s);
  json ds = json::array();
  for (Index k = 0; k < s.K(); ++k) {
    const std::string kk = std::to_string(k + 1);
    save_tensor(c, "y_" + kk + ".t3", data.y[k]);
    json p = json::array();
    for (int j = 0; j < 3; ++j) {
      const std::string name = "p_" + kk + "_" + std::to_string(j + 1) + ".mat";
      save_matrix(c, name, data.meas[k][j]);
      p.push_back(name);
    }
    save_tensor(c, "distinct_" + kk + ".t3", data.distinct[k]);
    ds.push_back({{"y", "y_" + kk + ".t3"}, {"p", p}});
  }
  save_tensor(c, "common.t3", data.common);
  for (int j = 0; j < 3; ++j) {
    save_matrix(c, "common_factor_" + std::to_string(j + 1) + ".mat",
                data.common_factors[j]);
  }

  // A ready-to-run config for decomposing what was just written.
  json dec;
  dec["mode"] = "decompose";
  dec["seed"] = c.seed;
  dec["out"] = "decomposed";
  dec["decompose"] = {{"datasets", ds},
                      {"R", s.R},
                      {"L", s.L},
                      {"method", "als_init2"},
                      {"truth", "common.t3"}};
  write_text(c, "decompose.json", dec.dump(2) + "\n");

  std::ostringstream sum;
  sum << "wrote " << s.K() << " datasets, common tensor "
      << dims_str(data.common.dims()) << ", SNR " << fmt(s.snr_db) << " dB\n";
  for (Index k = 0; k < s.K(); ++k) {
    sum << "Y" << k + 1 << ": " << dims_str(data.y[k].dims()) << ", L = "
        << s.L[k] << ", realized SNR "
        << fmt(realized_snr_db(data.clean[k], data.y[k])) << " dB\n";
  }
  write_text(c, "summary.txt", sum.str());
  write_manifest(c);
  *c.out << sum.str();
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Personalized coupled tensor decomposition"};
  app.name("perstd");
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  struct Entry {
    const char* name;
    const char* help;
    int (*fn)(Context&);
  };
  const std::vector<Entry> entries{
      {"synth-snr", "NRMSE against SNR for every method", cmd_synth_snr},
      {"ablate-alpha", "NRMSE against the blend of the common tensor",
       cmd_ablate_alpha},
      {"ablate-rank", "NRMSE over a grid of decomposition ranks",
       cmd_ablate_rank},
      {"fuse", "Cloudy image fusion, personalized versus L = 0", cmd_fuse},
      {"check-uniqueness", "Generic recoverability certificate",
       cmd_check_uniqueness},
      {"decompose", "Decompose datasets read from files", cmd_decompose},
      {"generate", "Write a synthetic problem to files", cmd_generate},
  };

  CommonArgs a;
  std::map<std::string, CLI::App*> subs;
  for (const auto& e : entries) {
    CLI::App* s = app.add_subcommand(e.name, e.help);
    s->add_option("--config", a.config, "Config file (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    s->add_option("--seed", a.seed, "Base seed");
    s->add_option("--out", a.out, "Output directory");
    s->add_option("--runs", a.runs, "Monte Carlo runs")->check(CLI::PositiveNumber);
    s->add_option("--restarts", a.restarts, "Restarts per fit")
        ->check(CLI::PositiveNumber);
    s->add_option("--threads", a.threads, "Worker threads, 0 for all cores");
    subs[e.name] = s;
  }

  std::vector<std::string> argv_store{"perstd"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  for (const auto& e : entries) {
    if (!subs[e.name]->parsed()) continue;
    try {
      Context ctx = make_context(e.name, a, out, err);
      return e.fn(ctx);
    } catch (const ConfigError& ex) {
      err << "error: " << ex.what() << '\n';
      return kConfigError;
    } catch (const std::exception& ex) {
      // File readers and shape checks throw std::runtime_error /
      // std::invalid_argument with the offending path or size.
      err << "error: " << ex.what() << '\n';
      return kConfigError;
    }
  }
  return kConfigError;
}

}  // namespace perstd::cli
