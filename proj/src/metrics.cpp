#include "agld/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "agld/model.hpp"
#include "agld/random.hpp"
#include "text.hpp"

namespace agld {

namespace {
constexpr double kPsdTol = 1e-10;

void check_symmetric(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) throw DimensionMismatch(what, m.rows(), m.cols());
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InvalidArgument(std::string(what) + ": matrix is not symmetric");
}
}  // namespace

GaussianSummary empirical_moments(const Matrix& samples) {
  const Index m = samples.cols();
  if (m < 2) throw InvalidArgument("empirical_moments: need at least 2 samples");
  GaussianSummary s;
  s.mean = samples.rowwise().sum() / static_cast<double>(m);
  const Matrix centered = samples.colwise() - s.mean;
  s.cov = (centered * centered.transpose()) / static_cast<double>(m - 1);
  // The product is symmetric up to rounding; make it exactly so.
  s.cov = (0.5 * (s.cov + s.cov.transpose())).eval();
  return s;
}

Matrix psd_sqrt(const Matrix& m) {
  check_symmetric(m, "psd_sqrt");
  if (m.size() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  if (es.info() != Eigen::Success) throw InvalidArgument("psd_sqrt: eigendecomposition failed");
  Vector ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Index j = 0; j < ev.size(); ++j) {
    if (ev[j] < -kPsdTol * scale)
      throw InvalidArgument("psd_sqrt: matrix is not positive semidefinite (eigenvalue " +
                            text::format_double(ev[j]) + ")");
    ev[j] = ev[j] > 0.0 ? std::sqrt(ev[j]) : 0.0;
  }
  const Matrix& v = es.eigenvectors();
  return v * ev.asDiagonal() * v.transpose();
}

namespace {

bool summary_less(const GaussianSummary& a, const GaussianSummary& b) {
  const auto* ma = a.mean.data();
  const auto* mb = b.mean.data();
  if (std::lexicographical_compare(ma, ma + a.mean.size(), mb, mb + b.mean.size())) return true;
  if (std::lexicographical_compare(mb, mb + b.mean.size(), ma, ma + a.mean.size())) return false;
  return std::lexicographical_compare(a.cov.data(), a.cov.data() + a.cov.size(), b.cov.data(),
                                      b.cov.data() + b.cov.size());
}

}  // namespace

double gaussian_w2(const GaussianSummary& a, const GaussianSummary& b) {
  check_dim("gaussian_w2", a.mean.size(), b.mean.size());
  check_dim("gaussian_w2", a.mean.size(), a.cov.rows());
  check_dim("gaussian_w2", b.mean.size(), b.cov.rows());
  // Evaluate in a canonical argument order so the result is symmetric bitwise.
  const GaussianSummary& p = summary_less(b, a) ? b : a;
  const GaussianSummary& q = &p == &a ? b : a;
  const Matrix root_q = psd_sqrt(q.cov);
  Matrix inner = root_q * p.cov * root_q;
  inner = (0.5 * (inner + inner.transpose())).eval();
  const Matrix cross = psd_sqrt(inner);
  const double trace = p.cov.trace() + q.cov.trace() - 2.0 * cross.trace();
  const double d2 = (p.mean - q.mean).squaredNorm() + std::max(0.0, trace);
  return std::sqrt(d2);
}

double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("wasserstein_1d: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  // Quantile coupling. Breakpoints i/m and j/n are tracked in units of
  // 1/(m n) so the interval weights are exact.
  const auto m = static_cast<std::int64_t>(a.size());
  const auto n = static_cast<std::int64_t>(b.size());
  const double unit = 1.0 / (static_cast<double>(m) * static_cast<double>(n));
  std::int64_t i = 0, j = 0, pos = 0;
  double acc = 0.0;
  while (i < m && j < n) {
    const std::int64_t end_a = (i + 1) * n;
    const std::int64_t end_b = (j + 1) * m;
    const std::int64_t next = std::min(end_a, end_b);
    const double diff = a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(j)];
    acc += static_cast<double>(next - pos) * unit * diff * diff;
    pos = next;
    if (end_a == next) ++i;
    if (end_b == next) ++j;
  }
  return std::sqrt(acc);
}

double sliced_w2(const Matrix& a, const Matrix& b, Index n_proj, std::uint64_t seed) {
  if (a.cols() == 0 || b.cols() == 0) throw InvalidArgument("sliced_w2: empty cloud");
  check_dim("sliced_w2", a.rows(), b.rows());
  if (n_proj < 1) throw InvalidArgument("sliced_w2: n_proj must be positive");
  const Index d = a.rows();
  RandomStream rng(derive_seed(seed, 0, Stream::kProjection));
  Vector dir(d);
  std::vector<double> pa(static_cast<std::size_t>(a.cols()));
  std::vector<double> pb(static_cast<std::size_t>(b.cols()));
  double total = 0.0;
  for (Index p = 0; p < n_proj; ++p) {
    double norm = 0.0;
    do {
      rng.fill_normal(dir);
      norm = dir.norm();
    } while (norm == 0.0);
    dir /= norm;
    Eigen::Map<Vector>(pa.data(), a.cols()) = a.transpose() * dir;
    Eigen::Map<Vector>(pb.data(), b.cols()) = b.transpose() * dir;
    total += wasserstein_1d(pa, pb);
  }
  return total / static_cast<double>(n_proj);
}

namespace {
void check_eval_inputs(const Matrix& samples, const Dataset& test, const char* what) {
  if (samples.cols() == 0) throw InvalidArgument(std::string(what) + ": no samples");
  if (test.size() == 0) throw InvalidArgument(std::string(what) + ": empty test set");
  check_dim(what, test.dim(), samples.rows());
}
}  // namespace

double test_mse(const Matrix& samples, const Dataset& test) {
  check_eval_inputs(samples, test, "test_mse");
  // Predictions are linear in w, so averaging predictions equals predicting
  // with the averaged sample.
  const Vector w = samples.rowwise().mean();
  double acc = 0.0;
  for (Index i = 0; i < test.size(); ++i) {
    const double r = test.label(i) - test.row(i).dot(w);
    acc += r * r;
  }
  return acc / static_cast<double>(test.size());
}

double test_loglik(const Matrix& samples, const Dataset& test) {
  check_eval_inputs(samples, test, "test_loglik");
  for (double y : test.labels())
    if (y != 1.0 && y != -1.0) throw InvalidArgument("test_loglik: labels must be -1 or +1");
  double acc = 0.0;
  for (Index s = 0; s < samples.cols(); ++s) {
    const auto w = samples.col(s);
    double per = 0.0;
    for (Index i = 0; i < test.size(); ++i) per += log_sigmoid(test.label(i) * test.row(i).dot(w));
    acc += per / static_cast<double>(test.size());
  }
  return acc / static_cast<double>(samples.cols());
}

Matrix lyapunov_stationary_cov(const Matrix& precision, double eta) {
  check_symmetric(precision, "lyapunov_stationary_cov");
  if (!(eta > 0.0)) throw InvalidArgument("lyapunov_stationary_cov: eta must be positive");
  Eigen::SelfAdjointEigenSolver<Matrix> es(precision);
  if (es.info() != Eigen::Success)
    throw InvalidArgument("lyapunov_stationary_cov: eigendecomposition failed");
  const Vector& lam = es.eigenvalues();
  Vector c(lam.size());
  for (Index j = 0; j < lam.size(); ++j) {
    const double rho = 1.0 - eta * lam[j];
    if (std::abs(rho) >= 1.0)
      throw InvalidArgument("lyapunov_stationary_cov: stepsize too large (spectral radius " +
                            text::format_double(std::abs(rho)) + " >= 1)");
    c[j] = 2.0 * eta / (1.0 - rho * rho);
  }
  const Matrix& v = es.eigenvectors();
  Matrix out = v * c.asDiagonal() * v.transpose();
  return 0.5 * (out + out.transpose());
}

void write_metric_csv(const std::vector<MetricRow>& rows, std::ostream& out) {
  std::string line = "method,access,updater,eta,epoch,metric,value\n";
  out << line;
  for (const auto& r : rows) {
    line.clear();
    line += r.method;
    line += ',';
    line += r.access;
    line += ',';
    line += r.updater;
    line += ',';
    text::append_double(line, r.eta);
    line += ',';
    text::append_double(line, r.epoch);
    line += ',';
    line += r.metric;
    line += ',';
    text::append_double(line, r.value);
    line += '\n';
    out << line;
  }
}

std::vector<MetricRow> read_metric_csv(std::istream& in) {
  std::vector<MetricRow> rows;
  std::string line;
  Index lineno = 0;
  if (!std::getline(in, line)) throw ParseError(1, 1, "missing header");
  ++lineno;
  if (text::trim(line) != "method,access,updater,eta,epoch,metric,value")
    throw ParseError(1, 1, "unexpected metric CSV header");
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view s = text::trim(line);
    if (s.empty()) continue;
    std::vector<std::string_view> f;
    std::size_t start = 0;
    while (true) {
      const auto c = s.find(',', start);
      f.push_back(s.substr(start, c == std::string_view::npos ? std::string_view::npos : c - start));
      if (c == std::string_view::npos) break;
      start = c + 1;
    }
    if (f.size() != 7)
      throw ParseError(lineno, 1, "expected 7 fields, got " + std::to_string(f.size()));
    MetricRow r;
    r.method = f[0];
    r.access = f[1];
    r.updater = f[2];
    r.metric = f[5];
    if (!text::parse_double(f[3], r.eta) || !text::parse_double(f[4], r.epoch) ||
        !text::parse_double(f[6], r.value))
      throw ParseError(lineno, 1, "non-numeric field");
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace agld
