#include "scalesgd/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "scalesgd/errors.hpp"
#include "scalesgd/rng.hpp"

namespace scalesgd {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

double normalize_label(double raw, std::size_t line_no) {
  if (raw == 1.0) return 1.0;
  if (raw == 0.0 || raw == -1.0) return -1.0;
  throw ParseError(line_no, "label must be one of {-1, 0, 1}");
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

Sample::Sample(std::vector<Feature> features, double label, std::uint32_t dim)
    : features_(std::move(features)), label_(label), dim_(dim) {
  if (dim_ == 0) throw DataError("sample dim must be positive");
  if (label_ != 1.0 && label_ != -1.0) throw DataError("sample label must be -1 or +1");
  std::sort(features_.begin(), features_.end(),
            [](const Feature& a, const Feature& b) { return a.index < b.index; });
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const auto& f = features_[i];
    if (f.index >= dim_) throw DataError("feature index " + std::to_string(f.index) + " >= dim");
    if (!std::isfinite(f.value)) throw DataError("non-finite feature value");
    if (i > 0 && features_[i - 1].index == f.index)
      throw DataError("duplicate feature index " + std::to_string(f.index));
  }
  std::erase_if(features_, [](const Feature& f) { return f.value == 0.0; });
}

double Sample::value_at(std::uint32_t index) const {
  auto it = std::lower_bound(features_.begin(), features_.end(), index,
                             [](const Feature& f, std::uint32_t i) { return f.index < i; });
  return (it != features_.end() && it->index == index) ? it->value : 0.0;
}

Sample Sample::with_label(double label) const {
  Sample out = *this;
  if (label != 1.0 && label != -1.0) throw DataError("sample label must be -1 or +1");
  out.label_ = label;
  return out;
}

Sample Sample::with_dim(std::uint32_t dim) const {
  if (!features_.empty() && features_.back().index >= dim)
    throw DataError("cannot shrink sample below its largest index");
  Sample out = *this;
  out.dim_ = dim;
  return out;
}

Dataset::Dataset(std::string name, std::uint32_t dim, std::vector<Sample> samples,
                 std::size_t discarded)
    : name_(std::move(name)), dim_(dim), samples_(std::move(samples)), discarded_(discarded) {
  if (dim_ == 0) throw DataError("dataset dim must be positive");
  for (const auto& s : samples_)
    if (s.dim() != dim_) throw DataError("sample dim does not match dataset dim");
}

Sample parse_svmlight(std::string_view line, std::uint32_t dim_hint, std::size_t line_no) {
  line = trim(line);
  if (line.empty()) throw ParseError(line_no, "empty line");

  std::vector<std::string_view> tokens;
  while (!line.empty()) {
    std::size_t end = 0;
    while (end < line.size() && !is_space(line[end])) ++end;
    tokens.push_back(line.substr(0, end));
    line = trim(line.substr(end));
  }

  double raw_label = 0.0;
  if (!parse_number(tokens.front(), raw_label))
    throw ParseError(line_no, "malformed label '" + std::string(tokens.front()) + "'");
  const double label = normalize_label(raw_label, line_no);

  std::vector<Feature> features;
  features.reserve(tokens.size() - 1);
  std::uint32_t dim = std::max<std::uint32_t>(dim_hint, 1);
  for (std::size_t t = 1; t < tokens.size(); ++t) {
    const auto tok = tokens[t];
    const auto colon = tok.find(':');
    if (colon == std::string_view::npos)
      throw ParseError(line_no, "malformed token '" + std::string(tok) + "'");
    std::uint32_t index = 0;
    double value = 0.0;
    if (!parse_number(tok.substr(0, colon), index) || index == 0)
      throw ParseError(line_no, "malformed index in '" + std::string(tok) + "'");
    if (!parse_number(tok.substr(colon + 1), value))
      throw ParseError(line_no, "malformed value in '" + std::string(tok) + "'");
    if (!std::isfinite(value)) throw ParseError(line_no, "non-finite value");
    features.push_back({index - 1, value});
    dim = std::max(dim, index);
  }

  std::sort(features.begin(), features.end(),
            [](const Feature& a, const Feature& b) { return a.index < b.index; });
  for (std::size_t i = 1; i < features.size(); ++i)
    if (features[i].index == features[i - 1].index)
      throw ParseError(line_no, "duplicate index " + std::to_string(features[i].index + 1));

  return Sample(std::move(features), label, dim);
}

std::string serialize_svmlight(const Sample& s) {
  std::string out = s.label() > 0 ? "+1" : "-1";
  for (const auto& f : s.features()) {
    out += ' ';
    out += std::to_string(f.index + 1);
    out += ':';
    out += format_double(f.value);
  }
  return out;
}

Dataset read_svmlight(std::istream& in, std::string name, std::uint32_t dim_hint) {
  std::vector<Sample> samples;
  std::uint32_t dim = std::max<std::uint32_t>(dim_hint, 1);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    samples.push_back(parse_svmlight(line, dim_hint, line_no));
    dim = std::max(dim, samples.back().dim());
  }
  for (auto& s : samples)
    if (s.dim() != dim) s = s.with_dim(dim);
  return Dataset(std::move(name), dim, std::move(samples));
}

Dataset load_svmlight(const std::string& path, std::uint32_t dim_hint) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_svmlight(in, path, dim_hint);
}

void write_svmlight(std::ostream& out, const Dataset& ds) {
  for (const auto& s : ds) out << serialize_svmlight(s) << '\n';
}

void save_svmlight(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  write_svmlight(out, ds);
  if (!out) throw DataError("write failed for " + path);
}

Sample parse_dense_csv(std::string_view line, std::size_t label_column,
                       std::size_t expected_columns, std::size_t line_no) {
  line = trim(line);
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (cells.size() < 2) throw ParseError(line_no, "need a label and at least one feature");
  if (expected_columns != 0 && cells.size() != expected_columns)
    throw ParseError(line_no, "expected " + std::to_string(expected_columns) + " columns, got " +
                                  std::to_string(cells.size()));
  if (label_column >= cells.size()) throw ParseError(line_no, "label column out of range");

  double label = 0.0;
  std::vector<Feature> features;
  std::uint32_t k = 0;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    double v = 0.0;
    if (!parse_number(cells[c], v))
      throw ParseError(line_no, "non-numeric cell '" + std::string(cells[c]) + "'");
    if (!std::isfinite(v)) throw ParseError(line_no, "non-finite value");
    if (c == label_column) {
      label = normalize_label(v, line_no);
      continue;
    }
    if (v != 0.0) features.push_back({k, v});
    ++k;
  }
  return Sample(std::move(features), label, k);
}

Dataset read_dense_csv(std::istream& in, std::string name, std::size_t label_column) {
  std::vector<Sample> samples;
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (columns == 0) columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    samples.push_back(parse_dense_csv(line, label_column, columns, line_no));
  }
  if (samples.empty()) throw DataError("no rows in " + name);
  const auto dim = samples.front().dim();
  return Dataset(std::move(name), dim, std::move(samples));
}

Dataset load_dense_csv(const std::string& path, std::size_t label_column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_dense_csv(in, path, label_column);
}

SplitResult split(const Dataset& ds, const SplitSpec& spec) {
  if (ds.empty()) throw ConfigError("cannot split an empty dataset");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0))
    throw ConfigError("train_fraction must be in (0, 1]");
  if (!(spec.test_fraction >= 0.0 && spec.test_fraction <= 1.0))
    throw ConfigError("test_fraction must be in [0, 1]");
  if (spec.train_fraction + spec.test_fraction > 1.0 + 1e-12)
    throw ConfigError("train_fraction + test_fraction must not exceed 1");

  const std::size_t n = ds.size();
  const auto n_train = std::min<std::size_t>(n, std::llround(spec.train_fraction * n));
  const auto n_test = std::min<std::size_t>(n - n_train, std::llround(spec.test_fraction * n));

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng({spec.seed, 0x5b11});
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

  std::vector<std::size_t> train_idx(perm.begin(), perm.begin() + n_train);
  std::vector<std::size_t> test_idx(perm.begin() + n_train, perm.begin() + n_train + n_test);
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  auto gather = [&](const std::vector<std::size_t>& idx) {
    std::vector<Sample> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(ds[i]);
    return out;
  };
  const std::size_t discarded = n - n_train - n_test;
  return {Dataset(ds.name() + ":train", ds.dim(), gather(train_idx), discarded),
          Dataset(ds.name() + ":test", ds.dim(), gather(test_idx), discarded)};
}

Dataset concat(const Dataset& a, const Dataset& b, std::string name) {
  if (a.dim() != b.dim()) throw DataError("cannot concatenate datasets of different dim");
  std::vector<Sample> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return Dataset(std::move(name), a.dim(), std::move(out));
}

}  // namespace scalesgd
