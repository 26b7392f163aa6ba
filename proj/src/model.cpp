#include "agld/model.hpp"

#include <cmath>
#include <utility>

#include "agld/random.hpp"

namespace agld {

double GradientModel::neg_log_density(ConstVectorRef /*x*/) const {
  throw InvalidArgument("model does not provide a negative log density");
}

double sigmoid(double t) noexcept {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double log_sigmoid(double t) noexcept {
  // log(sigmoid(t)) = -softplus(-t)
  if (t >= 0.0) return -std::log1p(std::exp(-t));
  return t - std::log1p(std::exp(t));
}

Vector component_grad(const GradientModel& model, Index i, const Vector& x) {
  if (i < 0 || i >= model.size())
    throw OutOfRange("component_grad: index " + std::to_string(i) + " outside [0, " +
                     std::to_string(model.size()) + ")");
  check_dim("component_grad", model.dim(), x.size());
  Vector out(model.dim());
  model.component_grad(i, x, out);
  return out;
}

void full_grad_into(const GradientModel& model, ConstVectorRef x, VectorRef out,
                    VectorRef scratch) {
  out.setZero();
  for (Index i = 0; i < model.size(); ++i) {
    model.component_grad(i, x, scratch);
    out += scratch;
  }
  if (model.has_prior()) model.add_prior_grad(x, out);
}

Vector full_grad(const GradientModel& model, const Vector& x) {
  check_dim("full_grad", model.dim(), x.size());
  Vector out(model.dim());
  Vector scratch(model.dim());
  full_grad_into(model, x, out, scratch);
  return out;
}

double finite_diff_check(const GradientModel& model, const Vector& x, double h) {
  if (!(h > 0.0) || !std::isfinite(h))
    throw InvalidArgument("finite_diff_check: step must be positive and finite");
  if (!model.has_density())
    throw InvalidArgument("finite_diff_check: model has no negative log density");
  check_dim("finite_diff_check", model.dim(), x.size());
  const Vector analytic = full_grad(model, x);
  Vector probe = x;
  double worst = 0.0;
  for (Index j = 0; j < x.size(); ++j) {
    probe[j] = x[j] + h;
    const double up = model.neg_log_density(probe);
    probe[j] = x[j] - h;
    const double down = model.neg_log_density(probe);
    probe[j] = x[j];
    const double numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic[j] - numeric) / (1.0 + std::abs(analytic[j])));
  }
  return worst;
}

// -------------------------------------------------------------- quadratic

QuadraticSpec QuadraticSpec::generate(Index n, Index dim, std::uint64_t seed,
                                      double eig_min, double eig_max,
                                      double anchor_mean, double anchor_sd) {
  if (n < 1 || dim < 1) throw InvalidArgument("QuadraticSpec: N and d must be positive");
  QuadraticSpec spec;
  RandomStream rng(derive_seed(seed, 0, Stream::kAnchors));
  spec.anchors.resize(dim, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < dim; ++j)
      spec.anchors(j, i) = anchor_mean + anchor_sd * rng.next_normal();
  spec.sigma_eigs.resize(dim);
  for (Index j = 0; j < dim; ++j)
    spec.sigma_eigs[j] = dim == 1 ? eig_max
                                  : eig_min + (eig_max - eig_min) * static_cast<double>(j) /
                                                  static_cast<double>(dim - 1);
  spec.rotation_seed = seed;
  return spec;
}

namespace {
Matrix random_rotation(Index dim, std::uint64_t seed) {
  RandomStream rng(derive_seed(seed, 0, Stream::kRotation));
  Matrix g(dim, dim);
  for (Index c = 0; c < dim; ++c)
    for (Index r = 0; r < dim; ++r) g(r, c) = rng.next_normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index c = 0; c < dim; ++c)
    if (r(c, c) < 0.0) q.col(c) = -q.col(c);
  return q;
}
}  // namespace

QuadraticModel::QuadraticModel(const QuadraticSpec& spec)
    : anchors_(spec.anchors), eigs_(spec.sigma_eigs) {
  if (anchors_.cols() < 1 || anchors_.rows() < 1)
    throw InvalidArgument("make_quadratic: empty anchor set");
  check_dim("make_quadratic eigenvalues", anchors_.rows(), eigs_.size());
  for (Index j = 0; j < eigs_.size(); ++j)
    if (!(eigs_[j] > 0.0) || !std::isfinite(eigs_[j]))
      throw InvalidArgument("make_quadratic: eigenvalues must be positive");
  const Matrix q = random_rotation(dim(), spec.rotation_seed);
  sigma_ = q * eigs_.asDiagonal() * q.transpose();
  sigma_ = (0.5 * (sigma_ + sigma_.transpose())).eval();
  sigma_anchors_ = sigma_ * anchors_;
}

void QuadraticModel::component_grad(Index i, ConstVectorRef x, VectorRef out) const {
  const Index d = dim();
  const double* a = anchors_.col(i).data();
  for (Index r = 0; r < d; ++r) {
    double acc = 0.0;
    for (Index c = 0; c < d; ++c) acc += sigma_(r, c) * (x[c] - a[c]);
    out[r] = acc;
  }
}

double QuadraticModel::neg_log_density(ConstVectorRef x) const {
  double f = 0.0;
  Vector diff(dim());
  for (Index i = 0; i < size(); ++i) {
    diff = x - anchors_.col(i);
    f += 0.5 * diff.dot(sigma_ * diff);
  }
  return f;
}

std::optional<double> QuadraticModel::smoothness() const {
  return static_cast<double>(size()) * eigs_.maxCoeff();
}

Vector QuadraticModel::target_mean() const { return anchors_.rowwise().mean(); }

Matrix QuadraticModel::target_precision() const {
  return static_cast<double>(size()) * sigma_;
}

Matrix QuadraticModel::target_covariance() const {
  Eigen::SelfAdjointEigenSolver<Matrix> es(target_precision());
  return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

std::shared_ptr<const QuadraticModel> make_quadratic(const QuadraticSpec& spec) {
  return std::make_shared<const QuadraticModel>(spec);
}

// -------------------------------------------------------------------- gmm

GmmSpec GmmSpec::generate(Index n, Index dim, std::uint64_t seed, double anchor_mean,
                          double anchor_sd, bool scale_by_n) {
  if (n < 1 || dim < 1) throw InvalidArgument("GmmSpec: N and d must be positive");
  GmmSpec spec;
  RandomStream rng(derive_seed(seed, 0, Stream::kAnchors));
  spec.anchors.resize(dim, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < dim; ++j)
      spec.anchors(j, i) = anchor_mean + anchor_sd * rng.next_normal();
  spec.scale_by_n = scale_by_n;
  return spec;
}

GmmModel::GmmModel(const GmmSpec& spec)
    : anchors_(spec.anchors), scale_(spec.scale_by_n) {
  if (anchors_.cols() < 1 || anchors_.rows() < 1)
    throw InvalidArgument("make_gmm: empty anchor set");
  if (!anchors_.allFinite()) throw InvalidArgument("make_gmm: non-finite anchor");
  half_sq_norms_ = 0.5 * anchors_.colwise().squaredNorm().transpose();
  weight_ = scale_ ? 1.0 / static_cast<double>(size()) : 1.0;
}

void GmmModel::component_grad(Index i, ConstVectorRef x, VectorRef out) const {
  // grad f_i = x - tanh(a'x) a
  const auto a = anchors_.col(i);
  const double t = std::tanh(a.dot(x));
  for (Index j = 0; j < x.size(); ++j) out[j] = weight_ * (x[j] - t * a[j]);
}

double GmmModel::neg_log_density(ConstVectorRef x) const {
  // f_i = (|x|^2 + |a|^2) / 2 - log(2 cosh(a'x))
  const double half_x = 0.5 * x.squaredNorm();
  double f = 0.0;
  for (Index i = 0; i < size(); ++i) {
    const double t = std::abs(anchors_.col(i).dot(x));
    f += half_x + half_sq_norms_[i] - t - std::log1p(std::exp(-2.0 * t));
  }
  return weight_ * f;
}

std::optional<double> GmmModel::smoothness() const {
  // Hessian term I - sech^2(a'x) a a' has eigenvalues in [1 - |a|^2, 1].
  double total = 0.0;
  for (Index i = 0; i < size(); ++i) total += std::max(1.0, 2.0 * half_sq_norms_[i] - 1.0);
  return weight_ * total;
}

std::shared_ptr<const GmmModel> make_gmm(const GmmSpec& spec) {
  return std::make_shared<const GmmModel>(spec);
}

// -------------------------------------------------------------------- glm

GlmModel::GlmModel(GlmSpec spec)
    : train_(std::move(spec.train)),
      test_(std::move(spec.test)),
      lambda_(spec.lambda),
      kind_(spec.kind) {
  if (train_.size() < 1) throw InvalidArgument("GLM: empty dataset");
  if (train_.dim() < 1) throw InvalidArgument("GLM: zero-dimensional dataset");
  if (!(lambda_ > 0.0) || !std::isfinite(lambda_))
    throw InvalidArgument("GLM: lambda must be positive");
  if (test_) {
    check_dim("GLM test set", train_.dim(), test_->dim());
    if (test_->size() < 1) throw InvalidArgument("GLM: empty test set");
  }
  if (kind_ == GlmKind::kLogistic) {
    auto check_labels = [](const Dataset& ds, const char* which) {
      for (double y : ds.labels())
        if (y != 1.0 && y != -1.0)
          throw InvalidArgument(std::string("logistic: ") + which +
                                " labels must be -1 or +1");
    };
    check_labels(train_, "training");
    if (test_) check_labels(*test_, "test");
  }
}

double GlmModel::scalar(Index i, ConstVectorRef x) const {
  const SparseRow row = train_.row(i);
  const double y = train_.label(i);
  const double margin = row.dot(x);
  if (kind_ == GlmKind::kRidge) return -(y - margin) / lambda_;
  // -y (1 - sigmoid(y w'x)) = -y sigmoid(-y w'x)
  return -y * sigmoid(-y * margin);
}

void GlmModel::component_grad(Index i, ConstVectorRef x, VectorRef out) const {
  out.setZero();
  const SparseRow row = train_.row(i);
  const double s = scalar(i, x);
  for (std::size_t k = 0; k < row.indices.size(); ++k) out[row.indices[k]] = s * row.values[k];
}

void GlmModel::add_prior_grad(ConstVectorRef x, VectorRef out) const {
  out += x / lambda_;
}

double GlmModel::neg_log_density(ConstVectorRef x) const {
  double f = 0.0;
  for (Index i = 0; i < size(); ++i) {
    const double margin = train_.row(i).dot(x);
    const double y = train_.label(i);
    if (kind_ == GlmKind::kRidge) {
      const double r = y - margin;
      f += r * r / (2.0 * lambda_);
    } else {
      f -= log_sigmoid(y * margin);
    }
  }
  return f + x.squaredNorm() / (2.0 * lambda_);
}

std::optional<double> GlmModel::smoothness() const {
  // Power iteration on X'X; 5% headroom covers the underestimate.
  const Index d = dim();
  Vector v = Vector::Ones(d) / std::sqrt(static_cast<double>(d));
  Vector w(d);
  double top = 0.0;
  for (int it = 0; it < 100; ++it) {
    w.setZero();
    for (Index i = 0; i < size(); ++i) {
      const SparseRow row = train_.row(i);
      row.axpy(row.dot(v), w);
    }
    const double norm = w.norm();
    if (norm == 0.0) break;
    const double next = v.dot(w);
    v = w / norm;
    if (std::abs(next - top) <= 1e-6 * std::abs(next)) {
      top = next;
      break;
    }
    top = next;
  }
  const double curvature = kind_ == GlmKind::kRidge ? 1.0 : 0.25;
  return 1.05 * curvature * top / (kind_ == GlmKind::kRidge ? lambda_ : 1.0) + 1.0 / lambda_;
}

std::shared_ptr<const GlmModel> make_ridge(GlmSpec spec) {
  spec.kind = GlmKind::kRidge;
  return std::make_shared<const GlmModel>(std::move(spec));
}

std::shared_ptr<const GlmModel> make_logistic(GlmSpec spec) {
  spec.kind = GlmKind::kLogistic;
  return std::make_shared<const GlmModel>(std::move(spec));
}

// --------------------------------------------------------------- wrappers

namespace {

class RegularizedModel final : public GradientModel {
 public:
  RegularizedModel(ModelPtr base, double lambda) : base_(std::move(base)), lambda_(lambda) {}

  Index dim() const noexcept override { return base_->dim(); }
  Index size() const noexcept override { return base_->size(); }
  void component_grad(Index i, ConstVectorRef x, VectorRef out) const override {
    base_->component_grad(i, x, out);
  }
  bool has_prior() const noexcept override { return true; }
  void add_prior_grad(ConstVectorRef x, VectorRef out) const override {
    if (base_->has_prior()) base_->add_prior_grad(x, out);
    out += lambda_ * x;
  }
  bool has_density() const noexcept override { return base_->has_density(); }
  double neg_log_density(ConstVectorRef x) const override {
    return base_->neg_log_density(x) + 0.5 * lambda_ * x.squaredNorm();
  }
  const CompactForm* compact() const noexcept override { return base_->compact(); }
  std::optional<double> smoothness() const override {
    const auto s = base_->smoothness();
    if (!s) return std::nullopt;
    return *s + lambda_;
  }

 private:
  ModelPtr base_;
  double lambda_;
};

class PriorFoldedModel final : public GradientModel {
 public:
  explicit PriorFoldedModel(ModelPtr base) : base_(std::move(base)) {}

  Index dim() const noexcept override { return base_->dim(); }
  Index size() const noexcept override { return base_->size(); }
  void component_grad(Index i, ConstVectorRef x, VectorRef out) const override {
    base_->component_grad(i, x, out);
    if (!base_->has_prior()) return;
    Vector prior = Vector::Zero(dim());
    base_->add_prior_grad(x, prior);
    out += prior / static_cast<double>(size());
  }
  bool has_density() const noexcept override { return base_->has_density(); }
  double neg_log_density(ConstVectorRef x) const override { return base_->neg_log_density(x); }
  std::optional<double> smoothness() const override { return base_->smoothness(); }

 private:
  ModelPtr base_;
};

}  // namespace

ModelPtr regularize(ModelPtr model, double lambda_reg) {
  if (!model) throw InvalidArgument("regularize: null model");
  if (!(lambda_reg > 0.0) || !std::isfinite(lambda_reg))
    throw InvalidArgument("regularize: lambda must be positive");
  return std::make_shared<const RegularizedModel>(std::move(model), lambda_reg);
}

ModelPtr fold_prior(ModelPtr model) {
  if (!model) throw InvalidArgument("fold_prior: null model");
  return std::make_shared<const PriorFoldedModel>(std::move(model));
}

}  // namespace agld
