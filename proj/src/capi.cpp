#include "agld/agld.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include <json.hpp>

#include "agld/experiment.hpp"
#include "agld/metrics.hpp"
#include "agld/model.hpp"
#include "agld/sampler.hpp"
#include "agld/version.hpp"

struct agld_model {
  agld::ModelPtr model;
};

struct agld_chain {
  agld::ModelPtr model;
  agld::SamplerConfig config;
  agld::Updater updater;
  agld::ChainState state;
};

namespace {

thread_local std::string g_last_error;

agld_status fail(agld_status status, const char* what) {
  g_last_error = what;
  return status;
}

template <class F>
agld_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return AGLD_OK;
  } catch (const agld::Error& e) {
    return fail(static_cast<agld_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(AGLD_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(AGLD_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(AGLD_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* name) {
  if (p == nullptr) throw agld::InvalidArgument(std::string(name) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

agld::ConstVectorRef view(const double* p, int64_t n) {
  return Eigen::Map<const agld::Vector>(p, n);
}

}  // namespace

extern "C" {

const char* agld_version(void) { return agld::kVersionString; }

const char* agld_last_error(void) { return g_last_error.c_str(); }

const char* agld_status_name(agld_status status) {
  switch (status) {
    case AGLD_OK: return "ok";
    case AGLD_ERR_INVALID_ARGUMENT: return "invalid argument";
    case AGLD_ERR_OUT_OF_RANGE: return "out of range";
    case AGLD_ERR_DIMENSION: return "dimension mismatch";
    case AGLD_ERR_DIVERGED: return "diverged";
    case AGLD_ERR_PARSE: return "parse error";
    case AGLD_ERR_IO: return "i/o error";
    case AGLD_ERR_VERIFICATION: return "verification failed";
    case AGLD_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void agld_string_free(char* s) { std::free(s); }

agld_status agld_model_quadratic(int64_t n, int64_t dim, uint64_t seed, double eig_min,
                                 double eig_max, agld_model** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    const auto spec = agld::QuadraticSpec::generate(n, dim, seed, eig_min, eig_max);
    *out = new agld_model{agld::make_quadratic(spec)};
  });
}

agld_status agld_model_gmm(int64_t n, int64_t dim, uint64_t seed, int scale_by_n,
                           agld_model** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    const auto spec = agld::GmmSpec::generate(n, dim, seed, 2.0, 1.0, scale_by_n != 0);
    *out = new agld_model{agld::make_gmm(spec)};
  });
}

agld_status agld_model_glm_file(const char* kind, const char* path, const char* label_column,
                                double lambda, agld_model** out) {
  return guarded([&] {
    require(out, "out");
    require(kind, "kind");
    require(path, "path");
    *out = nullptr;
    const std::string k = kind;
    if (k != "ridge" && k != "logistic") throw agld::InvalidArgument("kind must be ridge or logistic");
    agld::GlmSpec spec;
    spec.train = agld::read_dataset_file(path, label_column ? label_column : "label");
    spec.lambda = lambda;
    if (k == "ridge") {
      *out = new agld_model{agld::make_ridge(std::move(spec))};
    } else {
      *out = new agld_model{agld::make_logistic(std::move(spec))};
    }
  });
}

agld_status agld_model_regularize(const agld_model* base, double lambda_reg, agld_model** out) {
  return guarded([&] {
    require(base, "base");
    require(out, "out");
    *out = nullptr;
    *out = new agld_model{agld::regularize(base->model, lambda_reg)};
  });
}

void agld_model_free(agld_model* model) { delete model; }

agld_status agld_model_size(const agld_model* model, int64_t* n, int64_t* dim) {
  return guarded([&] {
    require(model, "model");
    if (n) *n = model->model->size();
    if (dim) *dim = model->model->dim();
  });
}

agld_status agld_model_component_grad(const agld_model* model, int64_t i, const double* x,
                                      double* out) {
  return guarded([&] {
    require(model, "model");
    require(x, "x");
    require(out, "out");
    const auto& m = *model->model;
    if (i < 0 || i >= m.size())
      throw agld::OutOfRange("component index " + std::to_string(i) + " out of range");
    Eigen::Map<agld::Vector> o(out, m.dim());
    m.component_grad(i, view(x, m.dim()), o);
  });
}

agld_status agld_model_full_grad(const agld_model* model, const double* x, double* out) {
  return guarded([&] {
    require(model, "model");
    require(x, "x");
    require(out, "out");
    const auto& m = *model->model;
    Eigen::Map<agld::Vector> o(out, m.dim());
    agld::Vector scratch(m.dim());
    agld::full_grad_into(m, view(x, m.dim()), o, scratch);
  });
}

agld_status agld_model_neg_log_density(const agld_model* model, const double* x, double* out) {
  return guarded([&] {
    require(model, "model");
    require(x, "x");
    require(out, "out");
    const auto& m = *model->model;
    *out = m.neg_log_density(view(x, m.dim()));
  });
}

agld_status agld_chain_create(const agld_model* model, const char* method, double eta,
                              int64_t batch, int64_t epoch_length, uint64_t seed,
                              int64_t chain_index, const double* x0, agld_chain** out) {
  return guarded([&] {
    require(model, "model");
    require(method, "method");
    require(out, "out");
    *out = nullptr;
    agld::SamplerConfig cfg;
    cfg.method = agld::parse_method(method);
    cfg.eta = eta;
    cfg.batch = batch;
    cfg.epoch_length = epoch_length;
    cfg.seed = seed;
    cfg.iterations = 1;
    if (x0) cfg.x0 = view(x0, model->model->dim());
    auto c = std::make_unique<agld_chain>();
    c->model = model->model;
    c->config = cfg;
    c->updater = {cfg.method.updater, epoch_length, true};
    c->state = agld::init_chain(cfg, model->model, chain_index);
    *out = c.release();
  });
}

agld_status agld_chain_step(agld_chain* chain, int64_t steps) {
  return guarded([&] {
    require(chain, "chain");
    if (steps < 0) throw agld::InvalidArgument("steps must be non-negative");
    const auto& m = *chain->model;
    for (int64_t s = 0; s < steps; ++s) {
      switch (chain->config.method.kind) {
        case agld::MethodKind::kLMC: agld::lmc_step(chain->state, m, chain->config.eta); break;
        case agld::MethodKind::kSGLD: agld::sgld_step(chain->state, m, chain->config.eta); break;
        case agld::MethodKind::kAGLD:
          agld::agld_step(chain->state, m, chain->updater, chain->config.eta);
          break;
      }
    }
  });
}

agld_status agld_chain_state(const agld_chain* chain, double* x, int64_t* k, int64_t* grad_evals) {
  return guarded([&] {
    require(chain, "chain");
    if (x) std::memcpy(x, chain->state.x.data(), sizeof(double) * static_cast<std::size_t>(chain->state.x.size()));
    if (k) *k = chain->state.k;
    if (grad_evals) *grad_evals = chain->state.grad_evals;
  });
}

void agld_chain_free(agld_chain* chain) { delete chain; }

agld_status agld_gaussian_w2(int64_t dim, const double* mean_a, const double* cov_a,
                             const double* mean_b, const double* cov_b, double* out) {
  return guarded([&] {
    require(mean_a, "mean_a");
    require(cov_a, "cov_a");
    require(mean_b, "mean_b");
    require(cov_b, "cov_b");
    require(out, "out");
    if (dim < 1) throw agld::InvalidArgument("dim must be positive");
    agld::GaussianSummary a{view(mean_a, dim), Eigen::Map<const agld::Matrix>(cov_a, dim, dim)};
    agld::GaussianSummary b{view(mean_b, dim), Eigen::Map<const agld::Matrix>(cov_b, dim, dim)};
    *out = agld::gaussian_w2(a, b);
  });
}

agld_status agld_sliced_w2(int64_t dim, const double* a, int64_t count_a, const double* b,
                           int64_t count_b, int64_t n_proj, uint64_t seed, double* out) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(out, "out");
    if (dim < 1 || count_a < 0 || count_b < 0) throw agld::InvalidArgument("bad cloud shape");
    *out = agld::sliced_w2(Eigen::Map<const agld::Matrix>(a, dim, count_a),
                           Eigen::Map<const agld::Matrix>(b, dim, count_b), n_proj, seed);
  });
}

agld_status agld_lyapunov_stationary_cov(int64_t dim, const double* precision, double eta,
                                         double* out) {
  return guarded([&] {
    require(precision, "precision");
    require(out, "out");
    if (dim < 1) throw agld::InvalidArgument("dim must be positive");
    Eigen::Map<agld::Matrix>(out, dim, dim) =
        agld::lyapunov_stationary_cov(Eigen::Map<const agld::Matrix>(precision, dim, dim), eta);
  });
}

agld_status agld_experiment_run(const char* config_json, unsigned threads, char** result_json) {
  return guarded([&] {
    require(config_json, "config_json");
    if (result_json) *result_json = nullptr;
    const auto result = agld::run_experiment(agld::config_from_json(config_json), threads);
    if (result_json) *result_json = dup_string(result.manifest_json);
  });
}

agld_status agld_replay_manifest(const char* manifest_path, const char* out_dir, unsigned threads,
                                 int* match, char** report) {
  return guarded([&] {
    require(manifest_path, "manifest_path");
    if (report) *report = nullptr;
    const auto r = agld::replay_manifest(manifest_path, out_dir ? out_dir : "", threads);
    if (match) *match = r.match ? 1 : 0;
    if (report) {
      nlohmann::json j{{"match", r.match}, {"out", r.out_dir}, {"mismatched", r.mismatched}};
      *report = dup_string(j.dump(2));
    }
  });
}

agld_status agld_config_resolve(const char* config_json, char** resolved_json) {
  return guarded([&] {
    require(config_json, "config_json");
    require(resolved_json, "resolved_json");
    *resolved_json = nullptr;
    *resolved_json = dup_string(agld::config_to_json(agld::resolve(agld::config_from_json(config_json))));
  });
}

}  // extern "C"
