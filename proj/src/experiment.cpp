#include "agld/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "agld/iosim.hpp"
#include "agld/metrics.hpp"
#include "agld/model.hpp"
#include "agld/sampler.hpp"
#include "agld/version.hpp"
#include "text.hpp"

namespace agld {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- config

namespace {

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
void read_opt(const json& j, std::optional<T>& out) {
  if (j.is_null()) {
    out.reset();
  } else {
    out = j.get<T>();
  }
}

json to_json_obj(const ExperimentConfig& c) {
  return json{
      {"experiment", c.experiment},
      {"methods", c.methods},
      {"eta", opt(c.eta)},
      {"eta_scale", c.eta_scale},
      {"batch", opt(c.batch)},
      {"D", c.epoch_length},
      {"epochs", opt(c.epochs)},
      {"chains", opt(c.chains)},
      {"seed", c.seed},
      {"out", c.out_dir},
      {"N", opt(c.n_components)},
      {"d", opt(c.dim)},
      {"data", c.data},
      {"label_column", c.label_column},
      {"lambda", c.lambda},
      {"scale_by_n", c.scale_by_n},
      {"eig_min", c.eig_min},
      {"eig_max", c.eig_max},
      {"noise_sd", c.noise_sd},
      {"density", c.density},
      {"train_ratio", c.train_ratio},
      {"x0", c.x0},
      {"init_sd", c.init_sd},
      {"count_refresh", c.count_refresh},
      {"record_every", c.record_every},
      {"burn_in", c.burn_in},
      {"n_proj", c.n_proj},
      {"reference_samples", c.reference_samples},
      {"symmetrize", c.symmetrize},
      {"plane", c.plane},
      {"records_per_page", c.records_per_page},
      {"cache_pages", c.cache_pages},
      {"passes", c.passes},
      {"fault_cost", c.fault_cost},
      {"grad_cost", c.grad_cost},
      {"trajectory_chains", c.trajectory_chains},
  };
}

ExperimentConfig from_json_obj(const json& j) {
  if (!j.is_object()) throw InvalidArgument("config: expected a JSON object");
  ExperimentConfig c;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "experiment") c.experiment = v.get<std::string>();
      else if (key == "methods") c.methods = v.get<std::vector<std::string>>();
      else if (key == "eta") read_opt(v, c.eta);
      else if (key == "eta_scale") c.eta_scale = v.get<double>();
      else if (key == "batch") read_opt(v, c.batch);
      else if (key == "D") c.epoch_length = v.get<Index>();
      else if (key == "epochs") read_opt(v, c.epochs);
      else if (key == "chains") read_opt(v, c.chains);
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "out") c.out_dir = v.get<std::string>();
      else if (key == "N") read_opt(v, c.n_components);
      else if (key == "d") read_opt(v, c.dim);
      else if (key == "data") c.data = v.get<std::string>();
      else if (key == "label_column") c.label_column = v.get<std::string>();
      else if (key == "lambda") c.lambda = v.get<double>();
      else if (key == "scale_by_n") c.scale_by_n = v.get<bool>();
      else if (key == "eig_min") c.eig_min = v.get<double>();
      else if (key == "eig_max") c.eig_max = v.get<double>();
      else if (key == "noise_sd") c.noise_sd = v.get<double>();
      else if (key == "density") c.density = v.get<double>();
      else if (key == "train_ratio") c.train_ratio = v.get<double>();
      else if (key == "x0") c.x0 = v.is_number() ? std::vector<double>{v.get<double>()}
                                                 : v.get<std::vector<double>>();
      else if (key == "init_sd") c.init_sd = v.get<double>();
      else if (key == "count_refresh") c.count_refresh = v.get<bool>();
      else if (key == "record_every") c.record_every = v.get<Index>();
      else if (key == "burn_in") c.burn_in = v.get<double>();
      else if (key == "n_proj") c.n_proj = v.get<Index>();
      else if (key == "reference_samples") c.reference_samples = v.get<Index>();
      else if (key == "symmetrize") c.symmetrize = v.get<bool>();
      else if (key == "plane") c.plane = v.get<std::vector<Index>>();
      else if (key == "records_per_page") c.records_per_page = v.get<Index>();
      else if (key == "cache_pages") c.cache_pages = v.get<Index>();
      else if (key == "passes") c.passes = v.get<Index>();
      else if (key == "fault_cost") c.fault_cost = v.get<double>();
      else if (key == "grad_cost") c.grad_cost = v.get<double>();
      else if (key == "trajectory_chains") c.trajectory_chains = v.get<Index>();
      else throw InvalidArgument("config: unknown key '" + key + "'");
    } catch (const json::exception& e) {
      throw InvalidArgument("config: bad value for '" + key + "': " + e.what());
    }
  }
  return c;
}

}  // namespace

ExperimentConfig config_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(1, static_cast<Index>(e.byte), std::string("config: ") + e.what());
  }
  return from_json_obj(j);
}

std::string config_to_json(const ExperimentConfig& cfg) { return to_json_obj(cfg).dump(2); }

namespace {

struct Defaults {
  Index n;
  Index d;
  Index batch;
  double epochs;
  Index chains;
  std::vector<std::string> methods;
};

const std::vector<std::string> kSimGrid = {"TMU-RA", "SAGA-LD", "SVRG-LD", "SGLD", "LMC"};

Defaults defaults_for(const std::string& experiment) {
  if (experiment == "convex-sim") return {500, 10, 10, 40, 1000, kSimGrid};
  if (experiment == "gmm-sim") return {500, 10, 10, 60, 100, kSimGrid};
  if (experiment == "ridge") return {2000, 20, 10, 50, 20, kSimGrid};
  if (experiment == "logistic")
    return {10000, 50, 10, 20, 4,
            {"TMU-RA", "TMU-CA", "PPU-RA", "PPU-CA", "PTU-RA", "PTU-CA", "SGLD", "SGLD-CA"}};
  if (experiment == "iosim") return {1000, 1, 10, 5, 1, {}};
  throw InvalidArgument("unknown experiment '" + experiment +
                        "' (expected convex-sim, gmm-sim, ridge, logistic or iosim)");
}

}  // namespace

ExperimentConfig resolve(const ExperimentConfig& in) {
  ExperimentConfig c = in;
  const Defaults def = defaults_for(c.experiment);
  if (!c.n_components) c.n_components = def.n;
  if (!c.dim) c.dim = def.d;
  if (!c.batch) c.batch = def.batch;
  if (!c.epochs) c.epochs = def.epochs;
  if (!c.chains) c.chains = def.chains;
  if (c.methods.empty()) c.methods = def.methods;

  std::set<std::string> seen;
  for (auto& name : c.methods) {
    name = name_method(parse_method(name));
    if (!seen.insert(name).second) throw InvalidArgument("method '" + name + "' listed twice");
  }
  if (*c.n_components < 1) throw InvalidArgument("N must be positive");
  if (*c.dim < 1) throw InvalidArgument("d must be positive");
  if (*c.batch < 1) throw InvalidArgument("batch size must be positive");
  if (!(*c.epochs > 0.0)) throw InvalidArgument("epochs must be positive");
  if (*c.chains < 1) throw InvalidArgument("chains must be positive");
  if (c.epoch_length < 0) throw InvalidArgument("D must be positive");
  if (c.eta && !(*c.eta > 0.0)) throw InvalidArgument("eta must be positive");
  if (!(c.eta_scale > 0.0)) throw InvalidArgument("eta_scale must be positive");
  if (!(c.lambda > 0.0)) throw InvalidArgument("lambda must be positive");
  if (!(c.train_ratio > 0.0 && c.train_ratio < 1.0)) throw InvalidArgument("train_ratio must lie in (0, 1)");
  if (!(c.density > 0.0 && c.density <= 1.0)) throw InvalidArgument("density must lie in (0, 1]");
  if (!(c.burn_in >= 0.0 && c.burn_in < 1.0)) throw InvalidArgument("burn_in must lie in [0, 1)");
  if (c.record_every < 0) throw InvalidArgument("record_every must be non-negative");
  if (c.n_proj < 1) throw InvalidArgument("n_proj must be positive");
  if (c.reference_samples < 1) throw InvalidArgument("reference_samples must be positive");
  if (c.passes < 1) throw InvalidArgument("passes must be positive");
  if (c.trajectory_chains < 0) throw InvalidArgument("trajectory_chains must be non-negative");
  if (!c.x0.empty() && c.x0.size() != 1 && static_cast<Index>(c.x0.size()) != *c.dim)
    throw InvalidArgument("x0 must hold 1 or d values");
  if (c.experiment == "gmm-sim") {
    if (c.plane.size() > 2 || c.plane.empty()) throw InvalidArgument("plane must name 1 or 2 coordinates");
    if (static_cast<Index>(c.plane.size()) > *c.dim) c.plane.resize(static_cast<std::size_t>(*c.dim));
    for (Index p : c.plane)
      if (p < 0 || p >= *c.dim) throw InvalidArgument("plane coordinate out of range");
    if (c.plane.size() == 2 && c.plane[0] == c.plane[1]) throw InvalidArgument("plane coordinates must differ");
  }
  if (c.experiment == "iosim" || c.experiment == "logistic") {
    if (c.records_per_page < 1 || c.cache_pages < 1)
      throw InvalidArgument("records_per_page and cache_pages must be positive");
  }
  return c;
}

// -------------------------------------------------------- reference draws

Matrix grid_reference_samples(const GradientModel& model, Index count, std::uint64_t seed) {
  const Index d = model.dim();
  if (d < 1 || d > 2) throw InvalidArgument("grid reference sampler supports d = 1 or 2 only");
  if (!model.has_density()) throw InvalidArgument("grid reference sampler needs a density");
  if (count < 1) throw InvalidArgument("reference sample count must be positive");
  constexpr double kCut = 40.0;  // cells below max log density - kCut are dropped

  struct Grid {
    Vector lo, hi;
    Index cells;  // per axis
    std::vector<double> f;
    double width(Index a) const { return (hi[a] - lo[a]) / static_cast<double>(cells); }
    Index total(Index d) const { return d == 1 ? cells : cells * cells; }
  };
  Vector point(d);
  auto cell_center = [&](const Grid& g, Index flat) {
    for (Index a = 0; a < d; ++a) {
      const Index c = a == 0 ? flat % g.cells : flat / g.cells;
      point[a] = g.lo[a] + (static_cast<double>(c) + 0.5) * g.width(a);
    }
  };
  auto evaluate = [&](Grid& g) {
    g.f.resize(static_cast<std::size_t>(g.total(d)));
    for (Index k = 0; k < g.total(d); ++k) {
      cell_center(g, k);
      g.f[static_cast<std::size_t>(k)] = model.neg_log_density(point);
    }
  };

  // Coarse pass: grow a box around the origin until its rim is negligible.
  Grid coarse;
  coarse.cells = d == 1 ? 2000 : 200;
  double radius = 4.0;
  double fmin = 0.0;
  for (;;) {
    coarse.lo = Vector::Constant(d, -radius);
    coarse.hi = Vector::Constant(d, radius);
    evaluate(coarse);
    fmin = *std::min_element(coarse.f.begin(), coarse.f.end());
    double rim = std::numeric_limits<double>::infinity();
    for (Index k = 0; k < coarse.total(d); ++k) {
      bool edge = false;
      for (Index a = 0; a < d; ++a) {
        const Index c = a == 0 ? k % coarse.cells : k / coarse.cells;
        edge = edge || c == 0 || c == coarse.cells - 1;
      }
      if (edge) rim = std::min(rim, coarse.f[static_cast<std::size_t>(k)]);
    }
    if (rim - fmin > kCut) break;
    radius *= 2.0;
    if (radius > 1e4) throw InvalidArgument("grid reference sampler: target mass is not localized");
  }

  // Fine pass over the bounding box of the non-negligible coarse cells.
  Grid fine;
  fine.cells = d == 1 ? 200000 : 1000;
  fine.lo = Vector::Constant(d, std::numeric_limits<double>::infinity());
  fine.hi = Vector::Constant(d, -std::numeric_limits<double>::infinity());
  for (Index k = 0; k < coarse.total(d); ++k) {
    if (coarse.f[static_cast<std::size_t>(k)] - fmin > kCut) continue;
    cell_center(coarse, k);
    for (Index a = 0; a < d; ++a) {
      fine.lo[a] = std::min(fine.lo[a], point[a] - 1.5 * coarse.width(a));
      fine.hi[a] = std::max(fine.hi[a], point[a] + 1.5 * coarse.width(a));
    }
  }
  evaluate(fine);
  const double fine_min = *std::min_element(fine.f.begin(), fine.f.end());
  std::vector<double> cdf(fine.f.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < fine.f.size(); ++k) {
    acc += std::exp(fine_min - fine.f[k]);
    cdf[k] = acc;
  }

  RandomStream rng(seed);
  Matrix out(d, count);
  for (Index s = 0; s < count; ++s) {
    const double u = rng.next_uniform() * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    const auto k = static_cast<Index>(it - cdf.begin());
    for (Index a = 0; a < d; ++a) {
      const Index c = a == 0 ? k % fine.cells : k / fine.cells;
      out(a, s) = fine.lo[a] + (static_cast<double>(c) + rng.next_uniform()) * fine.width(a);
    }
  }
  return out;
}

// ------------------------------------------------------------ execution

namespace {

struct Output {
  fs::path dir;
  json files = json::array();
  std::vector<std::string> names;

  void write(const std::string& name, const std::string& content) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw IoError("cannot write " + (dir / name).string());
    f << content;
    if (!f) throw IoError("write failed: " + (dir / name).string());
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(text::fnv1a64(content)));
    files.push_back({{"name", name}, {"fnv1a64", hex}, {"bytes", content.size()}});
    names.push_back(name);
  }
};

struct Run {
  const ExperimentConfig& cfg;
  unsigned threads;
  Output out;
  json notes = json::object();
  double eta = 0.0;
  std::optional<double> smoothness;
};

double pick_eta(Run& run, const GradientModel& model) {
  run.smoothness = model.smoothness();
  if (run.cfg.eta) return *run.cfg.eta;
  if (!run.smoothness || !(*run.smoothness > 0.0))
    throw InvalidArgument("no stepsize given and the model has no smoothness bound; pass --eta");
  return run.cfg.eta_scale / *run.smoothness;
}

Index iterations_estimate(const ExperimentConfig& c, const Method& m, Index n_total) {
  if (m.kind == MethodKind::kLMC) return static_cast<Index>(std::ceil(*c.epochs));
  return static_cast<Index>(std::ceil(*c.epochs * static_cast<double>(n_total) /
                                      static_cast<double>(*c.batch)));
}

SamplerConfig sampler_config(const Run& run, const Method& m, Index n_total, Index d,
                             bool keep_samples) {
  const ExperimentConfig& c = run.cfg;
  SamplerConfig s;
  s.method = m;
  s.eta = run.eta;
  s.batch = m.kind == MethodKind::kLMC ? 1 : *c.batch;
  s.epoch_length = c.epoch_length;
  s.epochs = *c.epochs;
  s.seed = c.seed;
  s.record_epochs = true;
  s.count_refresh = c.count_refresh;
  s.init_sd = c.init_sd;
  if (!c.x0.empty()) {
    s.x0 = c.x0.size() == 1 ? Vector::Constant(d, c.x0[0])
                            : Eigen::Map<const Vector>(c.x0.data(), d).eval();
  }
  if (keep_samples) {
    s.record_every = c.record_every > 0
                         ? c.record_every
                         : std::max<Index>(1, iterations_estimate(c, m, n_total) / 400);
  }
  return s;
}

void fill_method(MetricRow& row, const Method& m, double eta) {
  row.method = name_method(m);
  row.access = m.kind == MethodKind::kLMC ? "-" : std::string(to_string(m.access));
  row.updater = m.kind == MethodKind::kAGLD ? std::string(to_string(m.updater)) : "NONE";
  row.eta = eta;
}

std::string csv_of(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  write_metric_csv(rows, os);
  return os.str();
}

std::vector<Trajectory> run_method(Run& run, const SamplerConfig& sc, const ModelPtr& model,
                                   const std::string& name, std::vector<MetricRow>& rows) {
  auto chains = run_ensemble(sc, model, *run.cfg.chains, run.threads);
  Index failed = 0;
  for (const auto& t : chains) failed += t.failure ? 1 : 0;
  if (failed == static_cast<Index>(chains.size()))
    throw DivergenceError(chains.front().failed_at,
                          name + ": all chains diverged (" + *chains.front().failure + ")");
  if (failed > 0) {
    MetricRow r;
    fill_method(r, sc.method, run.eta);
    r.epoch = *run.cfg.epochs;
    r.metric = "diverged_chains";
    r.value = static_cast<double>(failed);
    rows.push_back(r);
  }
  if (run.cfg.trajectory_chains > 0) {
    const auto keep = std::min<std::size_t>(chains.size(), static_cast<std::size_t>(run.cfg.trajectory_chains));
    std::vector<Trajectory> dump(chains.begin(), chains.begin() + static_cast<std::ptrdiff_t>(keep));
    std::ostringstream os;
    write_trajectory_csv(dump, os);
    run.out.write(name + "_traj.csv", os.str());
  }
  return chains;
}

/// Iterates of every chain at data pass e.
Matrix epoch_cloud(const std::vector<Trajectory>& chains, Index e, Index d) {
  Index count = 0;
  for (const auto& t : chains) count += t.epochs.size() > e ? 1 : 0;
  Matrix m(d, count);
  Index j = 0;
  for (const auto& t : chains)
    if (t.epochs.size() > e) m.col(j++) = t.epochs.x.col(e);
  return m;
}

/// Stride records with grad_evals in [lo, hi] from every chain, plus each
/// chain's iterate at pass `e` so the window is never empty.
Matrix window_cloud(const std::vector<Trajectory>& chains, Index lo, Index hi, Index e, Index d) {
  std::vector<const double*> cols;
  for (const auto& t : chains) {
    for (Index r = 0; r < t.samples.size(); ++r) {
      const Index g = t.samples.grad_evals[static_cast<std::size_t>(r)];
      if (g >= lo && g <= hi) cols.push_back(t.samples.x.col(r).data());
    }
    if (e >= 0 && t.epochs.size() > e) cols.push_back(t.epochs.x.col(e).data());
  }
  Matrix m(d, static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    m.col(static_cast<Index>(j)) = Eigen::Map<const Vector>(cols[j], d);
  return m;
}

std::string matrix_csv(const Matrix& m, const std::vector<Index>& coords) {
  std::string s;
  for (std::size_t a = 0; a < coords.size(); ++a) {
    if (a) s += ',';
    s += "x_";
    text::append_int(s, coords[a]);
  }
  s += '\n';
  for (Index j = 0; j < m.cols(); ++j) {
    for (std::size_t a = 0; a < coords.size(); ++a) {
      if (a) s += ',';
      text::append_double(s, m(static_cast<Index>(a), j));
    }
    s += '\n';
  }
  return s;
}

// ---- convex-sim

void run_convex(Run& run) {
  const ExperimentConfig& c = run.cfg;
  const auto spec = QuadraticSpec::generate(*c.n_components, *c.dim,
                                            derive_seed(c.seed, 0, Stream::kAnchors), c.eig_min,
                                            c.eig_max);
  const auto model = make_quadratic(spec);
  run.eta = pick_eta(run, *model);
  const GaussianSummary target{model->target_mean(), model->target_covariance()};
  const auto last = static_cast<Index>(std::floor(*c.epochs));
  for (const auto& name : c.methods) {
    const Method m = parse_method(name);
    std::vector<MetricRow> rows;
    const auto chains =
        run_method(run, sampler_config(run, m, model->size(), model->dim(), false), model, name, rows);
    for (Index e = 0; e <= last; ++e) {
      const Matrix cloud = epoch_cloud(chains, e, model->dim());
      if (cloud.cols() < 2) continue;
      MetricRow r;
      fill_method(r, m, run.eta);
      r.epoch = static_cast<double>(e);
      r.metric = "w2";
      r.value = gaussian_w2(empirical_moments(cloud), target);
      rows.push_back(r);
    }
    run.out.write(name + ".csv", csv_of(rows));
  }
  const Vector mu = model->target_mean();
  run.notes["target_mean"] = std::vector<double>(mu.data(), mu.data() + mu.size());
}

// ---- gmm-sim

Matrix project(const Matrix& x, const std::vector<Index>& plane, bool symmetrize) {
  const auto p = static_cast<Index>(plane.size());
  Matrix out(p, symmetrize ? 2 * x.cols() : x.cols());
  for (Index j = 0; j < x.cols(); ++j)
    for (Index a = 0; a < p; ++a) {
      out(a, j) = x(plane[static_cast<std::size_t>(a)], j);
      if (symmetrize) out(a, x.cols() + j) = -x(plane[static_cast<std::size_t>(a)], j);
    }
  return out;
}

void run_gmm(Run& run) {
  const ExperimentConfig& c = run.cfg;
  const auto spec = GmmSpec::generate(*c.n_components, *c.dim,
                                      derive_seed(c.seed, 0, Stream::kAnchors), 2.0, 1.0,
                                      c.scale_by_n);
  const auto model = make_gmm(spec);
  run.eta = pick_eta(run, *model);
  const Index n_total = model->size();
  const Index d = model->dim();

  std::vector<Index> all_coords(static_cast<std::size_t>(d));
  for (Index a = 0; a < d; ++a) all_coords[static_cast<std::size_t>(a)] = a;
  run.out.write("anchors.csv", matrix_csv(spec.anchors, all_coords));

  std::optional<Matrix> reference;
  if (d <= 2) {
    // The clouds are reflected through the origin, so the reference is too:
    // any mode imbalance in it would otherwise put a floor under every W2.
    const Index draws = c.symmetrize ? (c.reference_samples + 1) / 2 : c.reference_samples;
    reference = project(grid_reference_samples(*model, draws,
                                               derive_seed(c.seed, 0, Stream::kReference)),
                        c.plane, c.symmetrize);
    run.notes["reference"] = "grid inverse-CDF sampler, " + std::to_string(reference->cols()) +
                             (c.symmetrize ? " draws (half reflected)" : " draws");
  } else {
    run.notes["reference"] = "none (d > 2): sliced_w2 rows omitted";
  }

  const Index budget = static_cast<Index>(std::ceil(*c.epochs * static_cast<double>(n_total)));
  const Index from = static_cast<Index>(std::ceil(c.burn_in * static_cast<double>(budget)));
  for (const auto& name : c.methods) {
    const Method m = parse_method(name);
    std::vector<MetricRow> rows;
    const auto chains = run_method(run, sampler_config(run, m, n_total, d, true), model, name, rows);
    const Matrix raw = window_cloud(chains, from, budget, -1, d);
    if (raw.cols() == 0) throw InvalidArgument(name + ": no samples after burn-in");
    run.out.write(name + "_cloud.csv", matrix_csv(project(raw, c.plane, false), c.plane));
    if (reference) {
      MetricRow r;
      fill_method(r, m, run.eta);
      r.epoch = *c.epochs;
      r.metric = "sliced_w2";
      r.value = sliced_w2(project(raw, c.plane, c.symmetrize), *reference, c.n_proj, c.seed);
      rows.push_back(r);
    }
    run.out.write(name + ".csv", csv_of(rows));
  }
}

// ---- ridge / logistic

struct GlmData {
  Dataset train;
  Dataset test;
};

GlmData load_glm_data(Run& run, bool regression) {
  const ExperimentConfig& c = run.cfg;
  Dataset all;
  if (!c.data.empty()) {
    all = read_dataset_file(c.data, c.label_column);
    run.notes["data"] = c.data;
  } else if (regression) {
    all = synth_linear(*c.n_components, *c.dim, c.noise_sd, derive_seed(c.seed, 0, Stream::kData)).data;
  } else {
    all = synth_sparse(*c.n_components, *c.dim, c.density, derive_seed(c.seed, 0, Stream::kData)).data;
  }
  auto [train, test] = split(all, c.train_ratio, derive_seed(c.seed, 0, Stream::kSplit));
  run.notes["train_rows"] = train.size();
  run.notes["test_rows"] = test.size();
  run.notes["dim"] = train.dim();
  if (regression) {
    auto s = standardize(train, test, true);
    if (!s.transform.constant_features.empty()) run.notes["constant_features"] = s.transform.constant_features;
    return {std::move(s.train), std::move(s.test)};
  }
  return {std::move(train), std::move(test)};
}

void run_ridge(Run& run) {
  const ExperimentConfig& c = run.cfg;
  GlmData data = load_glm_data(run, true);
  const Matrix x = data.train.dense_features();
  const Vector y = data.train.label_vector();
  const auto model = make_ridge({data.train, data.test, c.lambda, GlmKind::kRidge});
  run.eta = pick_eta(run, *model);
  const Index n_total = model->size();
  const Index d = model->dim();

  // Conjugate posterior mean: (X'X + I)^-1 X'y (noise and prior variance both lambda).
  const Matrix gram = x.transpose() * x + Matrix::Identity(d, d);
  const Vector post_mean = gram.ldlt().solve(x.transpose() * y);
  const double oracle = test_mse(post_mean, data.test);
  run.notes["oracle_test_mse"] = oracle;

  const auto last = static_cast<Index>(std::floor(*c.epochs));
  for (const auto& name : c.methods) {
    const Method m = parse_method(name);
    std::vector<MetricRow> rows;
    const auto chains = run_method(run, sampler_config(run, m, n_total, d, true), model, name, rows);
    for (Index e = 1; e <= last; ++e) {
      const Matrix cloud = window_cloud(chains, e * n_total / 2, e * n_total, e, d);
      MetricRow r;
      fill_method(r, m, run.eta);
      r.epoch = static_cast<double>(e);
      r.metric = "test_mse";
      r.value = test_mse(cloud, data.test);
      rows.push_back(r);
    }
    MetricRow r;
    fill_method(r, m, run.eta);
    r.epoch = static_cast<double>(last);
    r.metric = "oracle_test_mse";
    r.value = oracle;
    rows.push_back(r);
    run.out.write(name + ".csv", csv_of(rows));
  }
}

/// Page faults accumulated after each iteration of chain 0 (entry 0: after
/// the snapshot initialization pass).
std::vector<Index> cumulative_faults(const Method& m, const SamplerConfig& sc, Index n_total,
                                     Index iterations, const PageCacheConfig& cache_cfg) {
  LruCache cache(cache_cfg.cache_pages);
  Index faults = 0;
  auto touch = [&](Index i) { faults += cache.touch(i / cache_cfg.records_per_page) ? 0 : 1; };
  auto pass = [&] {
    for (Index i = 0; i < n_total; ++i) touch(i);
  };
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(iterations) + 1);
  if (m.kind == MethodKind::kAGLD && m.updater != UpdaterKind::kNone) pass();
  out.push_back(faults);
  std::optional<Accessor> acc;
  if (m.kind != MethodKind::kLMC)
    acc.emplace(m.access, n_total, sc.batch, derive_seed(sc.seed, 0, Stream::kAccess));
  const Index period = sc.epoch_length > 0 ? sc.epoch_length : n_total;
  const bool refreshes = m.kind == MethodKind::kAGLD &&
                         (m.updater == UpdaterKind::kPTU || m.updater == UpdaterKind::kTMU);
  for (Index k = 0; k < iterations; ++k) {
    if (m.kind == MethodKind::kLMC) {
      pass();
    } else {
      for (Index i : acc->next_batch()) touch(i);
      if (refreshes && (k + 1) % period == 0) pass();
    }
    out.push_back(faults);
  }
  return out;
}

void run_logistic(Run& run) {
  const ExperimentConfig& c = run.cfg;
  GlmData data = load_glm_data(run, false);
  const auto model = make_logistic({data.train, data.test, c.lambda, GlmKind::kLogistic});
  run.eta = pick_eta(run, *model);
  const Index n_total = model->size();
  const Index d = model->dim();
  const PageCacheConfig cache_cfg{c.records_per_page, c.cache_pages, n_total, c.fault_cost};
  validate(cache_cfg);

  const auto last = static_cast<Index>(std::floor(*c.epochs));
  for (const auto& name : c.methods) {
    const Method m = parse_method(name);
    std::vector<MetricRow> rows;
    const SamplerConfig sc = sampler_config(run, m, n_total, d, true);
    const auto chains = run_method(run, sc, model, name, rows);
    const Trajectory& first = chains.front();
    const auto faults = cumulative_faults(m, sc, n_total, first.iterations, cache_cfg);
    for (Index e = 1; e <= last; ++e) {
      const Matrix cloud = window_cloud(chains, e * n_total / 2, e * n_total, e, d);
      MetricRow r;
      fill_method(r, m, run.eta);
      r.epoch = static_cast<double>(e);
      r.metric = "test_loglik";
      r.value = test_loglik(cloud, data.test);
      rows.push_back(r);
      if (first.epochs.size() > e) {
        const Index k = first.epochs.k[static_cast<std::size_t>(e)];
        const Index g = first.epochs.grad_evals[static_cast<std::size_t>(e)];
        r.metric = "sim_time";
        r.value = static_cast<double>(g) * c.grad_cost +
                  static_cast<double>(faults[static_cast<std::size_t>(k)]) * c.fault_cost;
        rows.push_back(r);
      }
    }
    run.out.write(name + ".csv", csv_of(rows));
  }
}

// ---- iosim

void run_iosim(Run& run) {
  const ExperimentConfig& c = run.cfg;
  const Index n_total = *c.n_components;
  const PageCacheConfig cfg{c.records_per_page, c.cache_pages, n_total, c.fault_cost};
  std::vector<StrategyReport> reports;
  if (c.methods.empty()) {
    reports = compare_strategies(n_total, *c.batch, cfg, c.passes, c.seed);
  } else {
    for (const auto& name : c.methods) {
      const Method m = parse_method(name);
      std::vector<Index> trace;
      if (m.kind == MethodKind::kLMC) {
        for (Index p = 0; p < c.passes; ++p)
          for (Index i = 0; i < n_total; ++i) trace.push_back(i);
      } else {
        const UpdaterKind u = m.kind == MethodKind::kAGLD ? m.updater : UpdaterKind::kNone;
        if (u != UpdaterKind::kNone)
          for (Index i = 0; i < n_total; ++i) trace.push_back(i);
        const auto rest = method_accesses(m.access, u, n_total, *c.batch, c.epoch_length,
                                          c.passes * n_total / *c.batch,
                                          derive_seed(c.seed, 0, Stream::kAccess));
        trace.insert(trace.end(), rest.begin(), rest.end());
      }
      reports.push_back({name, replay(trace, cfg)});
    }
  }
  std::ostringstream os;
  write_fault_csv(reports, os);
  run.out.write("iosim.csv", os.str());
  json totals = json::object();
  for (const auto& r : reports)
    totals[r.strategy] = {{"faults", r.report.faults},
                          {"accesses", r.report.total_accesses},
                          {"steady_hit_ratio", r.report.steady_hit_ratio},
                          {"cost", r.report.cost}};
  run.notes["totals"] = totals;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& in, unsigned threads) {
  const ExperimentConfig cfg = resolve(in);
  Run run{cfg, threads, {}, json::object(), 0.0, std::nullopt};
  run.out.dir = cfg.out_dir;
  std::error_code ec;
  fs::create_directories(run.out.dir, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.out_dir + ": " + ec.message());

  if (cfg.experiment == "convex-sim") run_convex(run);
  else if (cfg.experiment == "gmm-sim") run_gmm(run);
  else if (cfg.experiment == "ridge") run_ridge(run);
  else if (cfg.experiment == "logistic") run_logistic(run);
  else run_iosim(run);

  ExperimentConfig recorded = cfg;
  if (cfg.experiment != "iosim") {
    recorded.eta = run.eta;
    if (!in.eta) run.notes["eta_rule"] = "eta_scale / L";
  }
  json manifest{
      {"tool", "agld"},
      {"version", kVersionString},
      {"experiment", cfg.experiment},
      {"config", to_json_obj(recorded)},
      {"seeds",
       {{"master", cfg.seed},
        {"model", derive_seed(cfg.seed, 0, Stream::kAnchors)},
        {"data", derive_seed(cfg.seed, 0, Stream::kData)},
        {"split", derive_seed(cfg.seed, 0, Stream::kSplit)},
        {"chain_noise", "derive_seed(master, chain, 1)"},
        {"chain_access", "derive_seed(master, chain, 2)"}}},
      {"files", run.out.files},
      {"notes", run.notes},
  };
  if (run.smoothness) manifest["smoothness"] = *run.smoothness;
  if (cfg.experiment != "iosim") manifest["eta"] = run.eta;

  ExperimentResult result;
  result.files = run.out.names;
  result.manifest_json = manifest.dump(2);
  result.manifest_path = (run.out.dir / "manifest.json").string();
  std::ofstream f(result.manifest_path, std::ios::binary);
  if (!f) throw IoError("cannot write " + result.manifest_path);
  f << result.manifest_json << '\n';
  return result;
}

ReplayResult replay_manifest(const std::string& manifest_path, const std::string& out_dir,
                             unsigned threads) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + manifest_path);
  std::stringstream buf;
  buf << in.rdbuf();
  json manifest;
  try {
    manifest = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ParseError(1, static_cast<Index>(e.byte), std::string("manifest: ") + e.what());
  }
  if (!manifest.contains("config") || !manifest.contains("files"))
    throw ParseError(1, 1, "manifest: missing config or files");
  ExperimentConfig cfg = from_json_obj(manifest["config"]);
  cfg.out_dir = out_dir.empty() ? (fs::path(manifest_path).parent_path() / "replay").string() : out_dir;
  const ExperimentResult rerun = run_experiment(cfg, threads);

  json fresh = json::parse(rerun.manifest_json);
  std::map<std::string, std::string> now;
  for (const auto& f : fresh["files"]) now[f["name"].get<std::string>()] = f["fnv1a64"].get<std::string>();
  ReplayResult r;
  r.out_dir = cfg.out_dir;
  std::set<std::string> expected;
  for (const auto& f : manifest["files"]) {
    const auto name = f["name"].get<std::string>();
    expected.insert(name);
    auto it = now.find(name);
    if (it == now.end() || it->second != f["fnv1a64"].get<std::string>()) r.mismatched.push_back(name);
  }
  for (const auto& [name, hash] : now)
    if (!expected.count(name)) r.mismatched.push_back(name);
  r.match = r.mismatched.empty();
  return r;
}

}  // namespace agld
