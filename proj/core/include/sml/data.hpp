#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "sml/matrix.hpp"
#include "sml/rng.hpp"

namespace sml::data {

enum class MissingPolicy {
  // Missing integers transform to 0; missing tokens hash the sentinel text.
  SentinelToken,
};

inline constexpr std::string_view kMissingToken = "<missing>";

struct DatasetSchema {
  std::size_t continuous_count = 13;
  std::size_t categorical_count = 26;
  std::vector<std::size_t> hash_buckets;  // one per categorical field
  MissingPolicy missing = MissingPolicy::SentinelToken;

  static DatasetSchema criteo(std::size_t buckets_per_field);
  std::size_t column_count() const noexcept { return 1 + continuous_count + categorical_count; }
  void validate() const;

  friend bool operator==(const DatasetSchema&, const DatasetSchema&) = default;
};

struct RawRecord {
  int label = 0;
  std::vector<std::optional<std::int64_t>> integers;  // nullopt = missing
  std::vector<std::string> tokens;                    // empty = missing
};

/// Parses one tab-separated Criteo line: label, continuous ints, categorical tokens.
/// Throws ParseError carrying `line_number`.
RawRecord parse_criteo_tsv(std::string_view line, const DatasetSchema& schema, std::size_t line_number = 0);
/// Inverse of parse_criteo_tsv (missing fields become empty columns).
std::string format_criteo_tsv(const RawRecord& record);

/// missing -> 0; x <= 2 -> x; x > 2 -> (ln x)^2.
double transform_continuous(std::optional<double> x) noexcept;

/// FNV-1a 64 over [field_id as 4 little-endian bytes][token bytes], finalized
/// with the splitmix64 mixer, reduced mod buckets.
std::uint32_t hash_feature(std::size_t field_id, std::string_view token, std::size_t buckets);

/// Encoded rows ready for the embedding layer. Row-major: categorical is
/// rows x fields, continuous is rows x continuous_count.
struct EncodedDataset {
  std::size_t fields = 0;
  std::size_t continuous_count = 0;
  std::vector<std::size_t> vocab_sizes;
  std::vector<std::uint32_t> categorical;
  std::vector<double> continuous;
  std::vector<std::uint8_t> labels;

  std::size_t rows() const noexcept { return labels.size(); }
  // Rows gathered in the given order.
  EncodedDataset subset(std::span<const std::size_t> rows) const;
  Matrix continuous_matrix(std::span<const std::size_t> rows) const;
  std::vector<std::uint32_t> categorical_rows(std::span<const std::size_t> rows) const;
  void validate() const;

  friend bool operator==(const EncodedDataset&, const EncodedDataset&) = default;
};

/// EncodedBatch is a gathered slice of an EncodedDataset.
using EncodedBatch = EncodedDataset;

void append_encoded(EncodedDataset& out, const RawRecord& record, const DatasetSchema& schema);
EncodedDataset empty_dataset(const DatasetSchema& schema);

enum class ErrorPolicy { Skip, Fail };

struct CriteoReadResult {
  EncodedDataset data;
  std::size_t lines = 0;
  std::size_t skipped = 0;
  std::vector<std::string> errors;  // first few messages, for reporting
};

CriteoReadResult read_criteo_file(const std::filesystem::path& path, const DatasetSchema& schema,
                                  ErrorPolicy policy);

struct SplitIndices {
  std::vector<std::size_t> train, validation, test;
};

/// Seeded permutation, then an 80/10/10 contiguous cut (train gets
/// floor(0.8 n), validation floor(0.1 n), test the rest). Each part is then
/// returned in original order. n >= 10.
SplitIndices split_811(std::size_t n, std::uint64_t seed);

template <typename T>
std::tuple<std::vector<T>, std::vector<T>, std::vector<T>> split_811(const std::vector<T>& records,
                                                                     std::uint64_t seed) {
  const SplitIndices s = split_811(records.size(), seed);
  auto gather = [&](const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(records[i]);
    return out;
  };
  return {gather(s.train), gather(s.validation), gather(s.test)};
}

/// Synthetic CTR generator with known ground truth.
///
/// Each field f has a Zipf(zipf_exponent) category distribution over
/// vocab_size categories and latent vectors e_{f,c} ~ N(0, I_k / k) (k =
/// latent_dim). The Bayes score is
///   bias + linear_scale * sum_f <u_f, e_{f,c_f}>
///        + interaction_scale * sum_{(f,g) in P} e_{f,c_f}^T M_fg e_{g,c_g}
///        + sum_j beta_j z_j                          (continuous z ~ N(0, 1))
/// with u_f ~ N(0, I_k), M_fg ~ N(0, 1) entrywise and P a sample of
/// interaction_pairs distinct field pairs. Labels are Bernoulli(sigmoid(score
/// + noise * eps)), eps ~ N(0, 1), or 1[score > 0] in deterministic mode.
struct SyntheticSpec {
  std::size_t fields = 20;
  std::size_t vocab_size = 1000;
  std::size_t continuous_count = 0;
  std::size_t latent_dim = 4;
  std::size_t interaction_order = 2;
  std::size_t interaction_pairs = 20;
  double linear_scale = 2.0;
  double interaction_scale = 0.3;
  double continuous_scale = 0.5;
  double bias = -1.0;
  double noise = 0.5;
  double zipf_exponent = 2.5;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  bool deterministic_labels = false;

  void validate() const;
  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

struct SyntheticData {
  EncodedDataset data;
  std::vector<double> bayes_scores;
};

SyntheticData synthesize(const SyntheticSpec& spec);

void to_json(nlohmann::json& j, const SyntheticSpec& s);
void from_json(const nlohmann::json& j, SyntheticSpec& s);
void to_json(nlohmann::json& j, const DatasetSchema& s);
void from_json(const nlohmann::json& j, DatasetSchema& s);

/// Columnar cache file, little-endian:
///   magic "SMLDSET\0" | u32 version (=1) | u64 header_len | header JSON
///   | labels u8[rows] | categorical u32[rows * fields] | continuous f64[rows * cont]
/// The header records rows, fields, continuous_count, vocab_sizes and a
/// caller-supplied "meta" object.
inline constexpr std::uint32_t kCacheVersion = 1;
void write_dataset_cache(const std::filesystem::path& path, const EncodedDataset& data,
                         const nlohmann::json& meta = nlohmann::json::object());
struct CacheContents {
  EncodedDataset data;
  nlohmann::json meta;
};
CacheContents read_dataset_cache(const std::filesystem::path& path);

}  // namespace sml::data
