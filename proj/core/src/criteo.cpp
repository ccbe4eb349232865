#include <charconv>
#include <cmath>
#include <fstream>

#include "sml/data.hpp"
#include "sml/errors.hpp"

namespace sml::data {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      cols.push_back(line.substr(start));
      break;
    }
    cols.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return cols;
}

}  // namespace

DatasetSchema DatasetSchema::criteo(std::size_t buckets_per_field) {
  DatasetSchema s;
  s.hash_buckets.assign(s.categorical_count, buckets_per_field);
  return s;
}

void DatasetSchema::validate() const {
  require(hash_buckets.size() == categorical_count,
          "schema: hash_buckets must have one entry per categorical field");
  for (std::size_t b : hash_buckets) require(b >= 1, "schema: hash bucket counts must be >= 1");
}

RawRecord parse_criteo_tsv(std::string_view line, const DatasetSchema& schema, std::size_t line_number) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto cols = split_tabs(line);
  if (cols.size() != schema.column_count()) {
    throw ParseError(line_number, "expected " + std::to_string(schema.column_count()) + " fields, found " +
                                      std::to_string(cols.size()));
  }
  RawRecord rec;
  if (cols[0] == "0") rec.label = 0;
  else if (cols[0] == "1") rec.label = 1;
  else throw ParseError(line_number, "unparsable label '" + std::string(cols[0]) + "'");

  rec.integers.reserve(schema.continuous_count);
  for (std::size_t i = 0; i < schema.continuous_count; ++i) {
    const std::string_view c = cols[1 + i];
    if (c.empty()) {
      rec.integers.emplace_back(std::nullopt);
      continue;
    }
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
    if (ec != std::errc() || ptr != c.data() + c.size()) {
      throw ParseError(line_number, "unparsable integer '" + std::string(c) + "' in column " +
                                        std::to_string(1 + i));
    }
    rec.integers.emplace_back(v);
  }
  rec.tokens.reserve(schema.categorical_count);
  for (std::size_t i = 0; i < schema.categorical_count; ++i) {
    rec.tokens.emplace_back(cols[1 + schema.continuous_count + i]);
  }
  return rec;
}

std::string format_criteo_tsv(const RawRecord& record) {
  std::string out = std::to_string(record.label);
  for (const auto& v : record.integers) {
    out += '\t';
    if (v) out += std::to_string(*v);
  }
  for (const auto& t : record.tokens) {
    out += '\t';
    out += t;
  }
  return out;
}

double transform_continuous(std::optional<double> x) noexcept {
  if (!x) return 0.0;
  if (*x <= 2.0) return *x;
  const double l = std::log(*x);
  return l * l;
}

std::uint32_t hash_feature(std::size_t field_id, std::string_view token, std::size_t buckets) {
  require(buckets >= 1, "hash_feature: buckets must be >= 1");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto field = static_cast<std::uint32_t>(field_id);
  for (int b = 0; b < 4; ++b) {
    h ^= (field >> (8 * b)) & 0xffu;
    h *= 0x100000001b3ULL;
  }
  for (unsigned char c : token) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::uint32_t>(splitmix64_mix(h) % buckets);
}

CriteoReadResult read_criteo_file(const std::filesystem::path& path, const DatasetSchema& schema,
                                  ErrorPolicy policy) {
  schema.validate();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  CriteoReadResult result;
  result.data = empty_dataset(schema);
  std::string line;
  while (std::getline(in, line)) {
    ++result.lines;
    if (line.empty()) continue;
    try {
      append_encoded(result.data, parse_criteo_tsv(line, schema, result.lines), schema);
    } catch (const ParseError& e) {
      if (policy == ErrorPolicy::Fail) throw;
      ++result.skipped;
      if (result.errors.size() < 10) result.errors.emplace_back(e.what());
    }
  }
  return result;
}

}  // namespace sml::data
