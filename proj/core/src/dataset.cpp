#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "sml/data.hpp"
#include "sml/errors.hpp"

namespace sml::data {

namespace {

constexpr std::array<char, 8> kMagic{'S', 'M', 'L', 'D', 'S', 'E', 'T', '\0'};

template <typename T>
void write_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T read_le(std::istream& in) {
  std::array<char, sizeof(T)> bytes{};
  in.read(bytes.data(), bytes.size());
  if (!in) throw std::runtime_error("dataset cache: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

EncodedDataset EncodedDataset::subset(std::span<const std::size_t> rows) const {
  EncodedDataset out;
  out.fields = fields;
  out.continuous_count = continuous_count;
  out.vocab_sizes = vocab_sizes;
  out.categorical = categorical_rows(rows);
  out.continuous.reserve(rows.size() * continuous_count);
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) {
    for (std::size_t c = 0; c < continuous_count; ++c) out.continuous.push_back(continuous[r * continuous_count + c]);
    out.labels.push_back(labels[r]);
  }
  return out;
}

Matrix EncodedDataset::continuous_matrix(std::span<const std::size_t> rows) const {
  Matrix m(rows.size(), continuous_count);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < continuous_count; ++c) m(i, c) = continuous[rows[i] * continuous_count + c];
  return m;
}

std::vector<std::uint32_t> EncodedDataset::categorical_rows(std::span<const std::size_t> rows) const {
  std::vector<std::uint32_t> out;
  out.reserve(rows.size() * fields);
  for (std::size_t r : rows)
    for (std::size_t f = 0; f < fields; ++f) out.push_back(categorical[r * fields + f]);
  return out;
}

void EncodedDataset::validate() const {
  require(vocab_sizes.size() == fields, "dataset: vocab_sizes must have one entry per field");
  require(categorical.size() == rows() * fields, "dataset: categorical block is not rows x fields");
  require(continuous.size() == rows() * continuous_count, "dataset: continuous block is not rows x count");
  for (std::size_t i = 0; i < categorical.size(); ++i) {
    require(categorical[i] < vocab_sizes[i % fields], "dataset: categorical index out of range");
  }
  for (double v : continuous) require(std::isfinite(v), "dataset: non-finite continuous value");
  for (auto l : labels) require(l <= 1, "dataset: labels must be 0 or 1");
}

EncodedDataset empty_dataset(const DatasetSchema& schema) {
  EncodedDataset d;
  d.fields = schema.categorical_count;
  d.continuous_count = schema.continuous_count;
  d.vocab_sizes = schema.hash_buckets;
  return d;
}

void append_encoded(EncodedDataset& out, const RawRecord& record, const DatasetSchema& schema) {
  require(record.integers.size() == schema.continuous_count && record.tokens.size() == schema.categorical_count,
          "append_encoded: record does not match schema");
  for (std::size_t f = 0; f < schema.categorical_count; ++f) {
    const std::string_view token = record.tokens[f].empty() ? kMissingToken : std::string_view(record.tokens[f]);
    out.categorical.push_back(hash_feature(f, token, schema.hash_buckets[f]));
  }
  for (const auto& v : record.integers) {
    out.continuous.push_back(transform_continuous(v ? std::optional<double>(static_cast<double>(*v)) : std::nullopt));
  }
  out.labels.push_back(static_cast<std::uint8_t>(record.label));
}

SplitIndices split_811(std::size_t n, std::uint64_t seed) {
  require(n >= 10, "split_811: need at least 10 records");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = Rng(seed).split("split_811");
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(perm[i], perm[rng.uniform_below(i + 1)]);
  }
  const std::size_t n_train = n * 8 / 10;
  const std::size_t n_val = n / 10;
  SplitIndices s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                      perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

void to_json(nlohmann::json& j, const DatasetSchema& s) {
  j = nlohmann::json{{"continuous_count", s.continuous_count},
                     {"categorical_count", s.categorical_count},
                     {"hash_buckets", s.hash_buckets},
                     {"missing", "sentinel_token"}};
}

void from_json(const nlohmann::json& j, DatasetSchema& s) {
  require(j.is_object(), "schema must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "continuous_count") s.continuous_count = value.get<std::size_t>();
    else if (key == "categorical_count") s.categorical_count = value.get<std::size_t>();
    else if (key == "hash_buckets") {
      if (value.is_number()) s.hash_buckets.assign(s.categorical_count, value.get<std::size_t>());
      else s.hash_buckets = value.get<std::vector<std::size_t>>();
    } else if (key == "missing") {
      require(value == "sentinel_token", "schema: missing policy must be 'sentinel_token'");
    } else {
      throw ContractViolation("schema: unknown key '" + key + "'");
    }
  }
  if (s.hash_buckets.size() == 1 && s.categorical_count > 1) s.hash_buckets.assign(s.categorical_count, s.hash_buckets[0]);
}

void write_dataset_cache(const std::filesystem::path& path, const EncodedDataset& data, const nlohmann::json& meta) {
  data.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  const nlohmann::json header{{"format", "sml-dataset"},
                              {"version", kCacheVersion},
                              {"rows", data.rows()},
                              {"fields", data.fields},
                              {"continuous_count", data.continuous_count},
                              {"vocab_sizes", data.vocab_sizes},
                              {"meta", meta}};
  const std::string text = header.dump();
  out.write(kMagic.data(), kMagic.size());
  write_le<std::uint32_t>(out, kCacheVersion);
  write_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(data.labels.data()), static_cast<std::streamsize>(data.labels.size()));
  for (std::uint32_t v : data.categorical) write_le(out, v);
  for (double v : data.continuous) write_le(out, v);
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

CacheContents read_dataset_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error("'" + path.string() + "' is not an sml dataset cache");
  const auto version = read_le<std::uint32_t>(in);
  if (version != kCacheVersion) {
    throw std::runtime_error("dataset cache version " + std::to_string(version) + " is not supported");
  }
  const auto header_len = read_le<std::uint64_t>(in);
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error("dataset cache: truncated header");
  const nlohmann::json header = nlohmann::json::parse(text);

  CacheContents c;
  EncodedDataset& d = c.data;
  const auto rows = header.at("rows").get<std::size_t>();
  d.fields = header.at("fields").get<std::size_t>();
  d.continuous_count = header.at("continuous_count").get<std::size_t>();
  d.vocab_sizes = header.at("vocab_sizes").get<std::vector<std::size_t>>();
  d.labels.resize(rows);
  in.read(reinterpret_cast<char*>(d.labels.data()), static_cast<std::streamsize>(rows));
  if (!in) throw std::runtime_error("dataset cache: truncated labels");
  d.categorical.resize(rows * d.fields);
  for (auto& v : d.categorical) v = read_le<std::uint32_t>(in);
  d.continuous.resize(rows * d.continuous_count);
  for (auto& v : d.continuous) v = read_le<double>(in);
  d.validate();
  c.meta = header.value("meta", nlohmann::json::object());
  return c;
}

}  // namespace sml::data
