#ifndef AGLD_MODEL_HPP
#define AGLD_MODEL_HPP

#include <memory>
#include <optional>

#include "agld/ingest.hpp"
#include "agld/types.hpp"

namespace agld {

/// Declares that the likelihood gradient of component i factors as
/// s_i(x) * z_i for a scalar s_i and a fixed data row z_i. Snapshots of such
/// models can be stored as N scalars.
class CompactForm {
 public:
  virtual ~CompactForm() = default;
  virtual double scalar(Index i, ConstVectorRef x) const = 0;
  virtual SparseRow data_row(Index i) const = 0;
};

/// Target density p(x) ~ exp(-f(x)) with f(x) = sum_i f_i(x) + prior(x).
///
/// `component_grad` is the gradient of the i-th likelihood term only. The
/// prior, when present, is added exactly once per gradient evaluation through
/// `add_prior_grad`, so variance reduction only ever sees the data terms.
/// Implementations are immutable and safe to share between threads.
class GradientModel {
 public:
  virtual ~GradientModel() = default;

  virtual Index dim() const noexcept = 0;
  virtual Index size() const noexcept = 0;

  /// Unchecked: callers guarantee 0 <= i < size() and matching dimensions.
  virtual void component_grad(Index i, ConstVectorRef x, VectorRef out) const = 0;

  virtual bool has_prior() const noexcept { return false; }
  /// out += grad prior(x)
  virtual void add_prior_grad(ConstVectorRef /*x*/, VectorRef /*out*/) const {}

  virtual bool has_density() const noexcept { return false; }
  /// f(x) up to an additive constant.
  virtual double neg_log_density(ConstVectorRef x) const;

  virtual const CompactForm* compact() const noexcept { return nullptr; }

  /// Upper bound on the Lipschitz constant of grad f, when cheaply known.
  virtual std::optional<double> smoothness() const { return std::nullopt; }
};

using ModelPtr = std::shared_ptr<const GradientModel>;

/// Checked single-component gradient.
Vector component_grad(const GradientModel& model, Index i, const Vector& x);
/// sum_i component_grad(i, x) + prior_grad(x), accumulated in index order.
Vector full_grad(const GradientModel& model, const Vector& x);
void full_grad_into(const GradientModel& model, ConstVectorRef x, VectorRef out,
                    VectorRef scratch);

/// max_j |analytic_j - central_difference_j| / (1 + |analytic_j|)
double finite_diff_check(const GradientModel& model, const Vector& x, double h);

// ------------------------------------------------------------------ specs

struct QuadraticSpec {
  Matrix anchors;       // d x N, column i is a_i
  Vector sigma_eigs;    // eigenvalues of the per-component precision matrix
  std::uint64_t rotation_seed = 0;

  /// Anchors a_i ~ N(anchor_mean * 1, anchor_sd^2 I), eigenvalues evenly
  /// spaced on [eig_min, eig_max].
  static QuadraticSpec generate(Index n, Index dim, std::uint64_t seed,
                                double eig_min = 0.5, double eig_max = 40.0,
                                double anchor_mean = 2.0, double anchor_sd = 2.0);
};

struct GmmSpec {
  Matrix anchors;  // d x N
  bool scale_by_n = false;

  static GmmSpec generate(Index n, Index dim, std::uint64_t seed,
                          double anchor_mean = 2.0, double anchor_sd = 1.0,
                          bool scale_by_n = false);
};

enum class GlmKind { kRidge, kLogistic };

struct GlmSpec {
  Dataset train;
  std::optional<Dataset> test;
  double lambda = 1.0;
  GlmKind kind = GlmKind::kRidge;
};

/// f_i(x) = (x - a_i)' S (x - a_i) / 2. The target is Gaussian with precision
/// N * S and mean equal to the anchor average.
class QuadraticModel final : public GradientModel {
 public:
  explicit QuadraticModel(const QuadraticSpec& spec);

  Index dim() const noexcept override { return anchors_.rows(); }
  Index size() const noexcept override { return anchors_.cols(); }
  void component_grad(Index i, ConstVectorRef x, VectorRef out) const override;
  bool has_density() const noexcept override { return true; }
  double neg_log_density(ConstVectorRef x) const override;
  std::optional<double> smoothness() const override;

  const Matrix& sigma() const noexcept { return sigma_; }
  const Matrix& anchors() const noexcept { return anchors_; }
  Vector target_mean() const;
  Matrix target_precision() const;
  Matrix target_covariance() const;

 private:
  Matrix anchors_;
  Matrix sigma_;
  Matrix sigma_anchors_;  // column i is S a_i
  Vector eigs_;
};

/// exp(-f_i(x)) = exp(-|x - a_i|^2 / 2) + exp(-|x + a_i|^2 / 2), optionally
/// with every f_i divided by N.
class GmmModel final : public GradientModel {
 public:
  explicit GmmModel(const GmmSpec& spec);

  Index dim() const noexcept override { return anchors_.rows(); }
  Index size() const noexcept override { return anchors_.cols(); }
  void component_grad(Index i, ConstVectorRef x, VectorRef out) const override;
  bool has_density() const noexcept override { return true; }
  double neg_log_density(ConstVectorRef x) const override;
  std::optional<double> smoothness() const override;

  const Matrix& anchors() const noexcept { return anchors_; }
  bool scale_by_n() const noexcept { return scale_; }

 private:
  Matrix anchors_;
  Vector half_sq_norms_;
  bool scale_;
  double weight_;
};

/// Bayesian GLM with N(0, lambda I) prior. Ridge: y ~ N(w'x, lambda).
/// Logistic: p(y | x, w) = sigmoid(y w'x), y in {-1, +1}.
class GlmModel final : public GradientModel, public CompactForm {
 public:
  explicit GlmModel(GlmSpec spec);

  Index dim() const noexcept override { return train_.dim(); }
  Index size() const noexcept override { return train_.size(); }
  void component_grad(Index i, ConstVectorRef x, VectorRef out) const override;
  bool has_prior() const noexcept override { return true; }
  void add_prior_grad(ConstVectorRef x, VectorRef out) const override;
  bool has_density() const noexcept override { return true; }
  double neg_log_density(ConstVectorRef x) const override;
  const CompactForm* compact() const noexcept override { return this; }
  std::optional<double> smoothness() const override;

  double scalar(Index i, ConstVectorRef x) const override;
  SparseRow data_row(Index i) const override { return train_.row(i); }

  GlmKind kind() const noexcept { return kind_; }
  double lambda() const noexcept { return lambda_; }
  const Dataset& train() const noexcept { return train_; }
  const std::optional<Dataset>& test() const noexcept { return test_; }

 private:
  Dataset train_;
  std::optional<Dataset> test_;
  double lambda_;
  GlmKind kind_;
};

std::shared_ptr<const QuadraticModel> make_quadratic(const QuadraticSpec& spec);
std::shared_ptr<const GmmModel> make_gmm(const GmmSpec& spec);
std::shared_ptr<const GlmModel> make_ridge(GlmSpec spec);
std::shared_ptr<const GlmModel> make_logistic(GlmSpec spec);

/// f(x) + lambda |x|^2 / 2: the prior gradient gains lambda * x, the
/// component gradients are untouched.
ModelPtr regularize(ModelPtr model, double lambda_reg);

/// Folds the prior into every component as prior / N so that snapshot
/// entries are exactly grad f_i of the full per-component objective. Drops
/// the compact form.
ModelPtr fold_prior(ModelPtr model);

/// Numerically stable log(sigmoid(t)).
double log_sigmoid(double t) noexcept;
/// Numerically stable sigmoid.
double sigmoid(double t) noexcept;

}  // namespace agld

#endif  // AGLD_MODEL_HPP
