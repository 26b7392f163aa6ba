#include "agld/sampler.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <ostream>
#include <thread>

#include "text.hpp"

namespace agld {

std::string name_method(UpdaterKind updater, AccessKind access) {
  if (updater == UpdaterKind::kNone) {
    if (access == AccessKind::kRA) return "SGLD";
    return "SGLD-" + std::string(to_string(access));
  }
  return std::string(to_string(updater)) + "-" + std::string(to_string(access));
}

std::string name_method(const Method& method) {
  switch (method.kind) {
    case MethodKind::kLMC: return "LMC";
    case MethodKind::kSGLD: return name_method(UpdaterKind::kNone, method.access);
    case MethodKind::kAGLD: return name_method(method.updater, method.access);
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "LMC") return {MethodKind::kLMC, AccessKind::kRA, UpdaterKind::kNone};
  if (name == "SAGA-LD") return {MethodKind::kAGLD, AccessKind::kRA, UpdaterKind::kPPU};
  if (name == "SVRG-LD") return {MethodKind::kAGLD, AccessKind::kRA, UpdaterKind::kPTU};
  if (name == "SGLD") return {MethodKind::kSGLD, AccessKind::kRA, UpdaterKind::kNone};
  const auto dash = name.find('-');
  if (dash != std::string_view::npos) {
    const auto head = name.substr(0, dash);
    const auto access = parse_access_kind(name.substr(dash + 1));
    if (access) {
      if (head == "SGLD") return {MethodKind::kSGLD, *access, UpdaterKind::kNone};
      const auto updater = parse_updater_kind(head);
      if (updater && *updater != UpdaterKind::kNone) return {MethodKind::kAGLD, *access, *updater};
    }
  }
  throw InvalidArgument("unknown method '" + std::string(name) +
                        "' (expected LMC, SGLD, SAGA-LD, SVRG-LD or <PPU|PTU|TMU>-<RA|RR|CA>)");
}

void validate(const SamplerConfig& config, const GradientModel& model) {
  if (!(config.eta > 0.0) || !std::isfinite(config.eta))
    throw InvalidArgument("eta must be a positive finite number");
  if (config.iterations < 0) throw InvalidArgument("iteration count must be non-negative");
  if (!(config.epochs >= 0.0)) throw InvalidArgument("epochs must be non-negative");
  if (config.iterations == 0 && config.epochs == 0.0)
    throw InvalidArgument("either an iteration count or a number of passes is required");
  if (config.record_every < 0) throw InvalidArgument("record_every must be non-negative");
  if (config.burn_in < 0) throw InvalidArgument("burn_in must be non-negative");
  if (config.epoch_length < 0) throw InvalidArgument("D must be positive");
  if (config.init_sd < 0.0) throw InvalidArgument("init_sd must be non-negative");
  if (config.x0) check_dim("x0", model.dim(), config.x0->size());
  if (config.method.kind != MethodKind::kLMC) {
    if (config.batch < 1 || config.batch > model.size())
      throw InvalidArgument("batch size must lie in [1, N]");
  }
}

ChainState init_chain(const SamplerConfig& config, const ModelPtr& model, Index chain) {
  if (!model) throw InvalidArgument("init_chain: null model");
  validate(config, *model);
  const Index d = model->dim();
  ChainState s;
  s.x = config.x0 ? *config.x0 : Vector::Zero(d);
  if (config.init_sd > 0.0) {
    RandomStream init(derive_seed(config.seed, static_cast<std::uint64_t>(chain), Stream::kInit));
    Vector z(d);
    init.fill_normal(z);
    s.x += config.init_sd * z;
  }
  s.noise = RandomStream(derive_seed(config.seed, static_cast<std::uint64_t>(chain), Stream::kNoise));
  s.count_refresh = config.count_refresh;
  s.g.resize(d);
  s.xi.setZero(d);
  s.x_next.resize(d);
  s.scratch.resize(d);
  const Method& m = config.method;
  if (m.kind != MethodKind::kLMC) {
    s.accessor.emplace(m.access, model->size(), config.batch,
                       derive_seed(config.seed, static_cast<std::uint64_t>(chain), Stream::kAccess));
    s.ws.reserve(d, config.batch);
  }
  if (m.kind == MethodKind::kAGLD) {
    if (m.updater == UpdaterKind::kNone) {
      s.snapshots.emplace(SnapshotSet::zeros(model));
    } else {
      s.snapshots.emplace(SnapshotSet::init(model, s.x, config.storage, m.updater));
      if (config.count_refresh) s.grad_evals += model->size();
    }
  }
  return s;
}

namespace {

constexpr double kDivergenceNorm = 1e8;

// x_next = x - eta g + sqrt(2 eta) xi, then the divergence guard.
void langevin_move(ChainState& s, double eta) {
  const double sigma = std::sqrt(2.0 * eta);
  if (!s.suppress_noise) s.noise.fill_normal(s.xi);
  for (Index j = 0; j < s.x.size(); ++j) {
    double v = s.x[j] - eta * s.g[j];
    if (!s.suppress_noise) v += sigma * s.xi[j];
    s.x_next[j] = v;
  }
  if (!s.x_next.allFinite())
    throw DivergenceError(s.k, "iterate became non-finite at iteration " + std::to_string(s.k));
  if (s.x_next.norm() > kDivergenceNorm)
    throw DivergenceError(s.k, "iterate norm exceeded 1e8 at iteration " + std::to_string(s.k));
}

}  // namespace

void lmc_step(ChainState& s, const GradientModel& model, double eta) {
  full_grad_into(model, s.x, s.g, s.scratch);
  langevin_move(s, eta);
  s.x.swap(s.x_next);
  ++s.k;
  s.grad_evals += model.size();
}

void sgld_step(ChainState& s, const GradientModel& model, double eta) {
  if (!s.accessor) throw InvalidArgument("sgld_step: chain has no accessor");
  const auto batch = s.accessor->next_batch();
  s.ws.correction.setZero(model.dim());
  for (Index i : batch) {
    model.component_grad(i, s.x, s.ws.grad);
    s.ws.correction += s.ws.grad;
  }
  const double scale = static_cast<double>(model.size()) / static_cast<double>(batch.size());
  s.g = scale * s.ws.correction;
  if (model.has_prior()) model.add_prior_grad(s.x, s.g);
  langevin_move(s, eta);
  s.x.swap(s.x_next);
  ++s.k;
  s.grad_evals += static_cast<Index>(batch.size());
}

void agld_step(ChainState& s, const GradientModel& /*model*/, const Updater& updater, double eta) {
  if (!s.accessor || !s.snapshots) throw InvalidArgument("agld_step: chain is not initialized for AGLD");
  const auto batch = s.accessor->next_batch();
  aggregated_gradient(*s.snapshots, s.x, batch, s.g, s.ws);
  langevin_move(s, eta);
  const Index refresh = apply_update(updater, *s.snapshots, s.x, s.x_next, s.k, batch, &s.ws.fresh);
  s.x.swap(s.x_next);
  ++s.k;
  s.grad_evals += static_cast<Index>(batch.size()) + (s.count_refresh ? refresh : 0);
}

namespace {

class RecordBuffer {
 public:
  explicit RecordBuffer(Index dim) : dim_(dim) {}
  void push(Index k, Index grad_evals, const Vector& x) {
    k_.push_back(k);
    evals_.push_back(grad_evals);
    values_.insert(values_.end(), x.data(), x.data() + dim_);
  }
  Records finish() {
    Records r;
    r.k = std::move(k_);
    r.grad_evals = std::move(evals_);
    r.x = Eigen::Map<const Matrix>(values_.data(), dim_, static_cast<Index>(r.k.size()));
    values_.clear();
    return r;
  }

 private:
  Index dim_;
  std::vector<Index> k_;
  std::vector<Index> evals_;
  std::vector<double> values_;
};

}  // namespace

Trajectory run_chain(const SamplerConfig& config, const ModelPtr& model, Index chain) {
  ChainState s = init_chain(config, model, chain);
  const Index n_total = model->size();
  const Updater updater{config.method.updater, config.epoch_length, config.periodic_rebuild};
  const Index eval_budget =
      config.epochs > 0.0 ? static_cast<Index>(std::ceil(config.epochs * static_cast<double>(n_total))) : 0;
  const Index last_epoch = config.epochs > 0.0 ? static_cast<Index>(std::floor(config.epochs)) : -1;

  Trajectory t;
  t.chain = chain;
  RecordBuffer samples(model->dim());
  RecordBuffer epochs(model->dim());
  Index next_epoch = 0;

  auto record = [&] {
    if (config.record_every > 0 && s.k >= config.burn_in && s.k % config.record_every == 0)
      samples.push(s.k, s.grad_evals, s.x);
    if (config.record_epochs) {
      while ((last_epoch < 0 || next_epoch <= last_epoch) && s.grad_evals >= next_epoch * n_total) {
        epochs.push(s.k, s.grad_evals, s.x);
        ++next_epoch;
      }
    }
  };
  auto done = [&] {
    return (config.iterations > 0 && s.k >= config.iterations) ||
           (eval_budget > 0 && s.grad_evals >= eval_budget);
  };

  record();
  try {
    while (!done()) {
      switch (config.method.kind) {
        case MethodKind::kLMC: lmc_step(s, *model, config.eta); break;
        case MethodKind::kSGLD: sgld_step(s, *model, config.eta); break;
        case MethodKind::kAGLD: agld_step(s, *model, updater, config.eta); break;
      }
      record();
    }
  } catch (const DivergenceError& e) {
    t.failure = e.what();
    t.failed_at = e.iteration();
  }
  t.samples = samples.finish();
  t.epochs = epochs.finish();
  t.final_x = s.x;
  t.iterations = s.k;
  t.grad_evals = s.grad_evals;
  return t;
}

unsigned default_threads() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("AGLD_THREADS")) {
    std::int64_t v = 0;
    if (text::parse_int(text::trim(env), v) && v >= 1) return static_cast<unsigned>(v);
  }
  return hw;
}

std::vector<Trajectory> run_ensemble(const SamplerConfig& config, const ModelPtr& model,
                                     Index chains, unsigned threads) {
  if (chains < 1) throw InvalidArgument("run_ensemble: chain count must be positive");
  if (!model) throw InvalidArgument("run_ensemble: null model");
  validate(config, *model);
  if (threads == 0) threads = default_threads();
  const auto workers = static_cast<unsigned>(std::min<Index>(threads, chains));

  std::vector<Trajectory> out(static_cast<std::size_t>(chains));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(chains));
  std::atomic<Index> next{0};
  auto work = [&] {
    for (Index c = next++; c < chains; c = next++) {
      try {
        out[static_cast<std::size_t>(c)] = run_chain(config, model, c);
      } catch (...) {
        errors[static_cast<std::size_t>(c)] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

void write_trajectory_csv(const std::vector<Trajectory>& chains, std::ostream& out) {
  const Index d = chains.empty() ? 0 : chains.front().final_x.size();
  std::string line = "chain,k,grad_evals";
  for (Index j = 0; j < d; ++j) {
    line += ",x_";
    text::append_int(line, j);
  }
  line += '\n';
  out << line;
  for (const auto& t : chains) {
    for (Index r = 0; r < t.samples.size(); ++r) {
      line.clear();
      text::append_int(line, t.chain);
      line += ',';
      text::append_int(line, t.samples.k[static_cast<std::size_t>(r)]);
      line += ',';
      text::append_int(line, t.samples.grad_evals[static_cast<std::size_t>(r)]);
      for (Index j = 0; j < d; ++j) {
        line += ',';
        text::append_double(line, t.samples.x(j, r));
      }
      line += '\n';
      out << line;
    }
  }
}

}  // namespace agld
