#ifndef AGLD_METRICS_HPP
#define AGLD_METRICS_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "agld/ingest.hpp"
#include "agld/types.hpp"

namespace agld {

struct GaussianSummary {
  Vector mean;
  Matrix cov;
};

/// Sample mean and unbiased covariance of the columns of `samples` (d x m).
GaussianSummary empirical_moments(const Matrix& samples);

/// Symmetric PSD square root through an eigendecomposition. Eigenvalues down
/// to -1e-10 (relative to the largest magnitude) are clipped to 0; anything
/// more negative is rejected.
Matrix psd_sqrt(const Matrix& m);

/// Bures closed form of W2 between two Gaussians. Exactly symmetric.
double gaussian_w2(const GaussianSummary& a, const GaussianSummary& b);

/// W2 between two empirical measures on the line (sizes may differ).
double wasserstein_1d(std::vector<double> a, std::vector<double> b);

/// Average over `n_proj` random unit directions of the 1-D W2 between the
/// projected clouds. Clouds are d x m column matrices; sizes may differ.
double sliced_w2(const Matrix& a, const Matrix& b, Index n_proj, std::uint64_t seed);

/// Columns of `samples` are posterior draws of w.
/// Mean squared error of the posterior-mean prediction on `test`.
double test_mse(const Matrix& samples, const Dataset& test);
/// Mean over samples and points of log sigmoid(y w'x).
double test_loglik(const Matrix& samples, const Dataset& test);

/// Unique C with C = (I - eta A) C (I - eta A)' + 2 eta I, the stationary
/// covariance of LMC on a Gaussian with precision A.
Matrix lyapunov_stationary_cov(const Matrix& precision, double eta);

struct MetricRow {
  std::string method;
  std::string access;
  std::string updater;
  double eta = 0.0;
  double epoch = 0.0;
  std::string metric;
  double value = 0.0;
};

/// CSV `method,access,updater,eta,epoch,metric,value`.
void write_metric_csv(const std::vector<MetricRow>& rows, std::ostream& out);
std::vector<MetricRow> read_metric_csv(std::istream& in);

}  // namespace agld

#endif  // AGLD_METRICS_HPP
