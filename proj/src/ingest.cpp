#include "agld/ingest.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

#include "agld/random.hpp"
#include "text.hpp"

namespace agld {

// ---------------------------------------------------------------- Dataset

void Dataset::add_row(std::span<const Index> indices,
                      std::span<const double> values, double label) {
  if (indices.size() != values.size())
    throw InvalidArgument("add_row: indices and values differ in length");
  if (!std::isfinite(label)) throw InvalidArgument("add_row: non-finite label");
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] < 0 || indices[k] >= dim_)
      throw OutOfRange("add_row: feature index " + std::to_string(indices[k]) +
                       " outside [0, " + std::to_string(dim_) + ")");
    if (k > 0 && indices[k] <= indices[k - 1])
      throw InvalidArgument("add_row: feature indices must be strictly increasing");
  }
  cols_.insert(cols_.end(), indices.begin(), indices.end());
  values_.insert(values_.end(), values.begin(), values.end());
  row_ptr_.push_back(static_cast<Index>(cols_.size()));
  labels_.push_back(label);
}

void Dataset::add_dense_row(ConstVectorRef features, double label) {
  check_dim("add_dense_row", dim_, features.size());
  if (!std::isfinite(label)) throw InvalidArgument("add_dense_row: non-finite label");
  for (Index j = 0; j < dim_; ++j) {
    cols_.push_back(j);
    values_.push_back(features[j]);
  }
  row_ptr_.push_back(static_cast<Index>(cols_.size()));
  labels_.push_back(label);
}

Matrix Dataset::dense_features() const {
  Matrix x = Matrix::Zero(size(), dim_);
  for (Index i = 0; i < size(); ++i) {
    const SparseRow r = row(i);
    for (std::size_t k = 0; k < r.indices.size(); ++k) x(i, r.indices[k]) = r.values[k];
  }
  return x;
}

Vector Dataset::label_vector() const {
  return Eigen::Map<const Vector>(labels_.data(), size());
}

Dataset Dataset::subset(std::span<const Index> rows) const {
  Dataset out(dim_, sparse_);
  out.feature_names_ = feature_names_;
  out.label_name_ = label_name_;
  for (Index i : rows) {
    if (i < 0 || i >= size()) throw OutOfRange("subset: row index out of range");
    const SparseRow r = row(i);
    out.cols_.insert(out.cols_.end(), r.indices.begin(), r.indices.end());
    out.values_.insert(out.values_.end(), r.values.begin(), r.values.end());
    out.row_ptr_.push_back(static_cast<Index>(out.cols_.size()));
    out.labels_.push_back(label(i));
  }
  return out;
}

void Dataset::set_dim(Index dim) {
  if (!cols_.empty() && *std::max_element(cols_.begin(), cols_.end()) >= dim)
    throw InvalidArgument("set_dim: dimension smaller than a stored feature index");
  dim_ = dim;
}

void Dataset::set_names(std::vector<std::string> feature_names,
                        std::string label_name) {
  if (!feature_names.empty() && static_cast<Index>(feature_names.size()) != dim_)
    throw DimensionMismatch("set_names", dim_, static_cast<Index>(feature_names.size()));
  feature_names_ = std::move(feature_names);
  label_name_ = std::move(label_name);
}

namespace {
bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i]))
      return false;
  return true;
}
}  // namespace

bool Dataset::operator==(const Dataset& other) const {
  return dim_ == other.dim_ && sparse_ == other.sparse_ &&
         row_ptr_ == other.row_ptr_ && cols_ == other.cols_ &&
         bitwise_equal(values_, other.values_) &&
         bitwise_equal(labels_, other.labels_);
}

// ------------------------------------------------------------- LineSource

struct LineSource::Inflater {
  z_stream zs{};
  std::vector<unsigned char> input;
  bool finished = false;

  Inflater() {
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
      throw IoError("gzip: cannot initialise decompressor");
  }
  ~Inflater() { inflateEnd(&zs); }
};

namespace {
constexpr std::size_t kChunk = 1 << 16;
}

LineSource::LineSource(std::istream& in) : in_(in) {
  std::string first(kChunk, '\0');
  in_.read(first.data(), static_cast<std::streamsize>(first.size()));
  first.resize(static_cast<std::size_t>(in_.gcount()));
  if (first.size() < kChunk) eof_ = true;
  if (first.size() >= 2 && static_cast<unsigned char>(first[0]) == 0x1f &&
      static_cast<unsigned char>(first[1]) == 0x8b) {
    inflater_ = std::make_unique<Inflater>();
    inflater_->input.assign(first.begin(), first.end());
    inflater_->zs.next_in = inflater_->input.data();
    inflater_->zs.avail_in = static_cast<uInt>(inflater_->input.size());
  } else {
    pending_ = std::move(first);
  }
}

LineSource::~LineSource() = default;

bool LineSource::fill() {
  pending_.erase(0, pending_pos_);
  pending_pos_ = 0;
  if (!inflater_) {
    if (eof_) return false;
    const std::size_t old = pending_.size();
    pending_.resize(old + kChunk);
    in_.read(pending_.data() + old, static_cast<std::streamsize>(kChunk));
    const auto got = static_cast<std::size_t>(in_.gcount());
    pending_.resize(old + got);
    if (got < kChunk) eof_ = true;
    return got > 0;
  }

  Inflater& z = *inflater_;
  unsigned char out[kChunk];
  while (true) {
    if (z.zs.avail_in == 0) {
      if (eof_) return false;
      z.input.resize(kChunk);
      in_.read(reinterpret_cast<char*>(z.input.data()), static_cast<std::streamsize>(kChunk));
      const auto got = static_cast<std::size_t>(in_.gcount());
      if (got < kChunk) eof_ = true;
      if (got == 0) return false;
      z.zs.next_in = z.input.data();
      z.zs.avail_in = static_cast<uInt>(got);
    }
    if (z.finished) {
      // Concatenated gzip members.
      if (inflateReset(&z.zs) != Z_OK) throw IoError("gzip: reset failed");
      z.finished = false;
    }
    z.zs.next_out = out;
    z.zs.avail_out = sizeof out;
    const int rc = inflate(&z.zs, Z_NO_FLUSH);
    if (rc == Z_STREAM_END) {
      z.finished = true;
    } else if (rc != Z_OK && rc != Z_BUF_ERROR) {
      throw IoError(std::string("gzip: corrupt stream (") +
                    (z.zs.msg ? z.zs.msg : "inflate error") + ")");
    }
    const std::size_t produced = sizeof out - z.zs.avail_out;
    if (produced > 0) {
      pending_.append(reinterpret_cast<const char*>(out), produced);
      return true;
    }
    if (z.finished && z.zs.avail_in == 0 && eof_) return false;
  }
}

bool LineSource::next(std::string& line) {
  while (true) {
    const std::size_t nl = pending_.find('\n', pending_pos_);
    if (nl != std::string::npos) {
      line.assign(pending_, pending_pos_, nl - pending_pos_);
      pending_pos_ = nl + 1;
      break;
    }
    if (!fill()) {
      if (pending_pos_ >= pending_.size()) return false;
      line.assign(pending_, pending_pos_, std::string::npos);
      pending_pos_ = pending_.size();
      break;
    }
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  ++line_number_;
  return true;
}

// ----------------------------------------------------------------- libsvm

bool LibsvmReader::next(LibsvmRecord& rec) {
  while (source_.next(line_)) {
    const Index lineno = source_.line_number();
    std::string_view s(line_);
    std::size_t pos = 0;
    auto skip_ws = [&] {
      while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    };
    skip_ws();
    if (pos == s.size()) continue;  // blank line

    std::size_t end = pos;
    while (end < s.size() && s[end] != ' ' && s[end] != '\t') ++end;
    if (!text::parse_double(s.substr(pos, end - pos), rec.label) ||
        !std::isfinite(rec.label))
      throw ParseError(lineno, static_cast<Index>(pos) + 1, "invalid label '" +
                       std::string(s.substr(pos, end - pos)) + "'");
    rec.indices.clear();
    rec.values.clear();
    rec.line = lineno;
    pos = end;

    while (true) {
      skip_ws();
      if (pos == s.size()) break;
      const std::size_t start = pos;
      end = pos;
      while (end < s.size() && s[end] != ' ' && s[end] != '\t') ++end;
      const std::string_view token = s.substr(start, end - start);
      const auto column = static_cast<Index>(start) + 1;
      const std::size_t colon = token.find(':');
      if (colon == std::string_view::npos)
        throw ParseError(lineno, column, "malformed token '" + std::string(token) +
                                             "' (expected index:value)");
      std::int64_t idx = 0;
      if (!text::parse_int(token.substr(0, colon), idx) || idx < 1)
        throw ParseError(lineno, column, "invalid feature index '" +
                                             std::string(token.substr(0, colon)) + "'");
      double value = 0.0;
      if (!text::parse_double(token.substr(colon + 1), value) || !std::isfinite(value))
        throw ParseError(lineno, column + static_cast<Index>(colon) + 1,
                         "non-numeric value '" + std::string(token.substr(colon + 1)) + "'");
      const Index zero_based = idx - 1;
      if (!rec.indices.empty()) {
        if (zero_based == rec.indices.back())
          throw ParseError(lineno, column, "duplicate feature index " + std::to_string(idx));
        if (zero_based < rec.indices.back())
          throw ParseError(lineno, column, "feature indices not increasing at " +
                                               std::to_string(idx));
      }
      rec.indices.push_back(zero_based);
      rec.values.push_back(value);
      pos = end;
    }
    return true;
  }
  return false;
}

namespace {
Dataset read_libsvm_stream(std::istream& in, std::optional<Index> dim) {
  LineSource source(in);
  LibsvmReader reader(source);
  LibsvmRecord rec;
  // Rows are collected with a provisional dimension and widened at the end.
  std::vector<Index> row_ptr{0};
  std::vector<Index> cols;
  std::vector<double> vals;
  std::vector<double> labels;
  Index max_index = -1;
  while (reader.next(rec)) {
    if (!rec.indices.empty()) max_index = std::max(max_index, rec.indices.back());
    if (dim && max_index >= *dim)
      throw ParseError(rec.line, 1, "feature index " + std::to_string(max_index + 1) +
                                        " exceeds declared dimension " + std::to_string(*dim));
    cols.insert(cols.end(), rec.indices.begin(), rec.indices.end());
    vals.insert(vals.end(), rec.values.begin(), rec.values.end());
    row_ptr.push_back(static_cast<Index>(cols.size()));
    labels.push_back(rec.label);
  }
  if (labels.empty()) throw ParseError(source.line_number(), 1, "no records");
  Dataset ds(dim.value_or(max_index + 1), true);
  for (std::size_t i = 0; i + 1 < row_ptr.size(); ++i) {
    const auto b = static_cast<std::size_t>(row_ptr[i]);
    const auto e = static_cast<std::size_t>(row_ptr[i + 1]);
    ds.add_row(std::span<const Index>(cols).subspan(b, e - b),
               std::span<const double>(vals).subspan(b, e - b), labels[i]);
  }
  return ds;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}
}  // namespace

Dataset parse_libsvm(std::istream& in, std::optional<Index> dim) {
  return read_libsvm_stream(in, dim);
}

Dataset read_libsvm_file(const std::string& path, std::optional<Index> dim) {
  auto in = open_input(path);
  return read_libsvm_stream(in, dim);
}

void write_libsvm(const Dataset& ds, std::ostream& out) {
  std::string line;
  for (Index i = 0; i < ds.size(); ++i) {
    line.clear();
    text::append_double(line, ds.label(i));
    const SparseRow r = ds.row(i);
    for (std::size_t k = 0; k < r.indices.size(); ++k) {
      line.push_back(' ');
      text::append_int(line, r.indices[k] + 1);
      line.push_back(':');
      text::append_double(line, r.values[k]);
    }
    line.push_back('\n');
    out << line;
  }
}

// -------------------------------------------------------------------- CSV

namespace {
void split_fields(std::string_view line, std::vector<std::string_view>& fields) {
  fields.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(text::trim(line.substr(start)));
      return;
    }
    fields.push_back(text::trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}
}  // namespace

Dataset parse_csv(std::istream& in, const std::string& label_column) {
  LineSource source(in);
  std::string line;
  std::vector<std::string_view> fields;
  if (!source.next(line)) throw ParseError(1, 1, "missing header row");
  split_fields(line, fields);
  std::vector<std::string> header(fields.begin(), fields.end());
  const auto it = std::find(header.begin(), header.end(), label_column);
  if (it == header.end())
    throw ParseError(1, 1, "label column '" + label_column + "' not in header");
  const auto label_pos = static_cast<std::size_t>(it - header.begin());
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != label_pos) names.push_back(header[c]);

  const auto dim = static_cast<Index>(names.size());
  Dataset ds(dim, false);
  Vector row(dim);
  while (source.next(line)) {
    const Index lineno = source.line_number();
    if (text::trim(line).empty()) continue;
    split_fields(line, fields);
    if (fields.size() != header.size())
      throw ParseError(lineno, 1, "ragged row: " + std::to_string(fields.size()) +
                                      " fields, header has " + std::to_string(header.size()));
    double label = 0.0;
    Index j = 0;
    std::size_t column = 1;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      double v = 0.0;
      if (!text::parse_double(fields[c], v) || !std::isfinite(v))
        throw ParseError(lineno, static_cast<Index>(column),
                         "non-numeric field '" + std::string(fields[c]) + "'");
      if (c == label_pos)
        label = v;
      else
        row[j++] = v;
      column += fields[c].size() + 1;
    }
    ds.add_dense_row(row, label);
  }
  if (ds.size() == 0) throw ParseError(source.line_number(), 1, "no records");
  ds.set_names(std::move(names), label_column);
  return ds;
}

Dataset read_csv_file(const std::string& path, const std::string& label_column) {
  auto in = open_input(path);
  return parse_csv(in, label_column);
}

void write_csv(const Dataset& ds, std::ostream& out) {
  std::string line;
  for (Index j = 0; j < ds.dim(); ++j) {
    if (j > 0) line.push_back(',');
    if (ds.feature_names().empty()) {
      line.push_back('f');
      text::append_int(line, j + 1);
    } else {
      line += ds.feature_names()[static_cast<std::size_t>(j)];
    }
  }
  line.push_back(',');
  line += ds.label_name().empty() ? "label" : ds.label_name();
  line.push_back('\n');
  out << line;
  Vector dense(ds.dim());
  for (Index i = 0; i < ds.size(); ++i) {
    dense.setZero();
    const SparseRow r = ds.row(i);
    for (std::size_t k = 0; k < r.indices.size(); ++k) dense[r.indices[k]] = r.values[k];
    line.clear();
    for (Index j = 0; j < ds.dim(); ++j) {
      text::append_double(line, dense[j]);
      line.push_back(',');
    }
    text::append_double(line, ds.label(i));
    line.push_back('\n');
    out << line;
  }
}

Dataset read_dataset_file(const std::string& path, const std::string& label_column) {
  const auto ends_with = [&](std::string_view suffix) {
    return path.size() >= suffix.size() &&
           path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(".csv") || ends_with(".csv.gz")) return read_csv_file(path, label_column);
  return read_libsvm_file(path);
}

// ------------------------------------------------------- split/standardize

std::pair<Dataset, Dataset> split(const Dataset& ds, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidArgument("split: ratio must lie in (0, 1)");
  const Index n = ds.size();
  const auto n_train = static_cast<Index>(std::llround(ratio * static_cast<double>(n)));
  if (n_train < 1 || n_train >= n)
    throw InvalidArgument("split: ratio leaves an empty partition for N=" + std::to_string(n));
  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  RandomStream rng(derive_seed(seed, 0, Stream::kSplit));
  rng.shuffle(perm);
  const std::span<const Index> all(perm);
  return {ds.subset(all.first(static_cast<std::size_t>(n_train))),
          ds.subset(all.subspan(static_cast<std::size_t>(n_train)))};
}

Dataset Standardizer::apply(const Dataset& ds) const {
  check_dim("Standardizer::apply", mean.size(), ds.dim());
  Dataset out(ds.dim(), false);
  out.set_names(ds.feature_names(), ds.label_name());
  Vector row(ds.dim());
  for (Index i = 0; i < ds.size(); ++i) {
    row.setZero();
    const SparseRow r = ds.row(i);
    for (std::size_t k = 0; k < r.indices.size(); ++k) row[r.indices[k]] = r.values[k];
    row = ((row - mean).array() / scale.array()).matrix();
    out.add_dense_row(row, (ds.label(i) - label_mean) / label_scale);
  }
  return out;
}

Standardized standardize(const Dataset& train, const Dataset& test, bool standardize_labels) {
  check_dim("standardize", train.dim(), test.dim());
  if (train.size() < 2) throw InvalidArgument("standardize: need at least two training rows");
  const Matrix x = train.dense_features();
  Standardizer t;
  t.mean = x.colwise().mean().transpose();
  t.scale.resize(train.dim());
  for (Index j = 0; j < train.dim(); ++j) {
    const double var = (x.col(j).array() - t.mean[j]).square().mean();
    if (var > 0.0) {
      t.scale[j] = std::sqrt(var);
    } else {
      t.scale[j] = 1.0;
      t.constant_features.push_back(j);
    }
  }
  if (standardize_labels) {
    const Vector y = train.label_vector();
    t.label_mean = y.mean();
    const double var = (y.array() - t.label_mean).square().mean();
    t.label_scale = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return {t.apply(train), t.apply(test), t};
}

// --------------------------------------------------------------- synthetic

SyntheticData synth_sparse(Index n, Index dim, double density, std::uint64_t seed,
                           double margin_scale) {
  if (n < 1 || dim < 1) throw InvalidArgument("synth_sparse: N and d must be positive");
  if (!(density > 0.0 && density <= 1.0))
    throw InvalidArgument("synth_sparse: density must lie in (0, 1]");
  RandomStream rng(derive_seed(seed, 0, Stream::kData));
  SyntheticData out{Dataset(dim, true), Vector(dim)};
  const double w_scale = margin_scale / std::sqrt(static_cast<double>(dim) * density);
  for (Index j = 0; j < dim; ++j) out.planted[j] = w_scale * rng.next_normal();
  std::vector<Index> idx;
  std::vector<double> val;
  for (Index i = 0; i < n; ++i) {
    idx.clear();
    val.clear();
    for (Index j = 0; j < dim; ++j) {
      if (density < 1.0 && rng.next_uniform() >= density) continue;
      idx.push_back(j);
      val.push_back(rng.next_normal());
    }
    double margin = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) margin += val[k] * out.planted[idx[k]];
    const double p = 1.0 / (1.0 + std::exp(-margin));
    out.data.add_row(idx, val, rng.next_uniform() < p ? 1.0 : -1.0);
  }
  return out;
}

SyntheticData synth_linear(Index n, Index dim, double noise_sd, std::uint64_t seed) {
  if (n < 1 || dim < 1) throw InvalidArgument("synth_linear: N and d must be positive");
  if (!(noise_sd >= 0.0)) throw InvalidArgument("synth_linear: noise_sd must be >= 0");
  RandomStream rng(derive_seed(seed, 0, Stream::kData));
  SyntheticData out{Dataset(dim, false), Vector(dim)};
  rng.fill_normal(out.planted);
  Vector x(dim);
  for (Index i = 0; i < n; ++i) {
    rng.fill_normal(x);
    out.data.add_dense_row(x, x.dot(out.planted) + noise_sd * rng.next_normal());
  }
  return out;
}

}  // namespace agld
