#ifndef AGLD_INGEST_HPP
#define AGLD_INGEST_HPP

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "agld/types.hpp"

namespace agld {

/// One row of a dataset, viewed in compressed form. Indices are 0-based and
/// strictly increasing.
struct SparseRow {
  std::span<const Index> indices;
  std::span<const double> values;

  double dot(ConstVectorRef w) const noexcept {
    double acc = 0.0;
    for (std::size_t k = 0; k < indices.size(); ++k)
      acc += values[k] * w[indices[k]];
    return acc;
  }
  /// out += scale * row
  void axpy(double scale, VectorRef out) const noexcept {
    for (std::size_t k = 0; k < indices.size(); ++k)
      out[indices[k]] += scale * values[k];
  }
};

/// Immutable-after-load collection of (features, label) records stored in
/// CSR form. Dense inputs keep every value, including zeros.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Index dim, bool sparse) : dim_(dim), sparse_(sparse) {}

  void add_row(std::span<const Index> indices, std::span<const double> values,
               double label);
  void add_dense_row(ConstVectorRef features, double label);

  Index size() const noexcept { return static_cast<Index>(labels_.size()); }
  Index dim() const noexcept { return dim_; }
  bool sparse() const noexcept { return sparse_; }
  Index nonzeros() const noexcept { return static_cast<Index>(values_.size()); }

  SparseRow row(Index i) const noexcept {
    const auto b = static_cast<std::size_t>(row_ptr_[static_cast<std::size_t>(i)]);
    const auto e = static_cast<std::size_t>(row_ptr_[static_cast<std::size_t>(i) + 1]);
    return {std::span<const Index>(cols_).subspan(b, e - b),
            std::span<const double>(values_).subspan(b, e - b)};
  }
  double label(Index i) const noexcept {
    return labels_[static_cast<std::size_t>(i)];
  }
  std::span<const double> labels() const noexcept { return labels_; }

  /// N x d dense copy of the features.
  Matrix dense_features() const;
  Vector label_vector() const;
  Dataset subset(std::span<const Index> rows) const;

  void set_dim(Index dim);
  void set_names(std::vector<std::string> feature_names, std::string label_name);
  const std::vector<std::string>& feature_names() const noexcept {
    return feature_names_;
  }
  const std::string& label_name() const noexcept { return label_name_; }

  /// Data equality: dimension, storage flag, structure, values and labels
  /// compared bitwise. Column names are metadata and not compared.
  bool operator==(const Dataset& other) const;

 private:
  Index dim_ = 0;
  bool sparse_ = true;
  std::vector<Index> row_ptr_{0};
  std::vector<Index> cols_;
  std::vector<double> values_;
  std::vector<double> labels_;
  std::vector<std::string> feature_names_;
  std::string label_name_;
};

/// Line-at-a-time byte source. Transparently inflates gzip input.
class LineSource {
 public:
  explicit LineSource(std::istream& in);
  ~LineSource();
  LineSource(const LineSource&) = delete;
  LineSource& operator=(const LineSource&) = delete;

  /// Reads the next line (without the terminator) into `line`, reusing its
  /// storage. Returns false at end of input.
  bool next(std::string& line);
  Index line_number() const noexcept { return line_number_; }

 private:
  struct Inflater;
  bool fill();

  std::istream& in_;
  std::unique_ptr<Inflater> inflater_;
  std::string pending_;
  std::size_t pending_pos_ = 0;
  bool eof_ = false;
  Index line_number_ = 0;
};

/// A parsed libsvm record. The buffers are reused between rows.
struct LibsvmRecord {
  double label = 0.0;
  std::vector<Index> indices;  // 0-based
  std::vector<double> values;
  Index line = 0;
};

/// Streaming libsvm reader: memory use is bounded by the longest row.
class LibsvmReader {
 public:
  explicit LibsvmReader(LineSource& source) : source_(source) {}
  bool next(LibsvmRecord& record);

 private:
  LineSource& source_;
  std::string line_;
};

Dataset parse_libsvm(std::istream& in, std::optional<Index> dim = std::nullopt);
Dataset read_libsvm_file(const std::string& path,
                         std::optional<Index> dim = std::nullopt);
void write_libsvm(const Dataset& ds, std::ostream& out);

/// CSV with a header row. `label_column` names the response column.
Dataset parse_csv(std::istream& in, const std::string& label_column);
Dataset read_csv_file(const std::string& path, const std::string& label_column);
/// Writes features then a trailing label column named after the dataset's
/// label (or "label").
void write_csv(const Dataset& ds, std::ostream& out);

/// Loads by extension: .csv / .csv.gz as CSV, anything else as libsvm.
Dataset read_dataset_file(const std::string& path,
                          const std::string& label_column = "label");

/// Seeded permutation partition; the first round(ratio * N) permuted rows
/// form the training set.
std::pair<Dataset, Dataset> split(const Dataset& ds, double ratio,
                                  std::uint64_t seed);

struct Standardizer {
  Vector mean;
  Vector scale;
  std::vector<Index> constant_features;
  double label_mean = 0.0;
  double label_scale = 1.0;

  Dataset apply(const Dataset& ds) const;
};

/// Fits per-feature mean/scale on `train` only and applies the same map to
/// both sets. Constant features keep scale 1 and are listed in the result.
struct Standardized {
  Dataset train;
  Dataset test;
  Standardizer transform;
};
Standardized standardize(const Dataset& train, const Dataset& test,
                         bool standardize_labels = false);

struct SyntheticData {
  Dataset data;
  Vector planted;
};

/// Sparse logistic data: each feature is present with probability `density`
/// (N(0,1) value); labels are drawn from the logistic model with a planted
/// weight vector whose margin has standard deviation about `margin_scale`.
SyntheticData synth_sparse(Index n, Index dim, double density,
                           std::uint64_t seed, double margin_scale = 5.0);

/// Dense linear-Gaussian regression data y = w'x + noise_sd * e.
SyntheticData synth_linear(Index n, Index dim, double noise_sd,
                           std::uint64_t seed);

}  // namespace agld

#endif  // AGLD_INGEST_HPP
