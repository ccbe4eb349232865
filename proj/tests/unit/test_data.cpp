#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "sml/data.hpp"
#include "sml/diagnostics.hpp"
#include "sml/errors.hpp"

namespace sml::data {
namespace {

namespace fs = std::filesystem;

std::string criteo_line(int label, const std::string& last_token = "A1B2C3") {
  std::string s = std::to_string(label);
  for (int i = 0; i < 13; ++i) s += "\t" + std::to_string(i * 3);
  for (int i = 0; i < 25; ++i) s += "\tt" + std::to_string(i);
  return s + "\t" + last_token;
}

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sml_test_data";
  fs::create_directories(dir);
  return dir / name;
}

TEST(Criteo, ParsesFortyFields) {
  const auto schema = DatasetSchema::criteo(100);
  const auto rec = parse_criteo_tsv(criteo_line(1), schema, 1);
  EXPECT_EQ(rec.label, 1);
  ASSERT_EQ(rec.integers.size(), 13u);
  EXPECT_EQ(*rec.integers[2], 6);
  ASSERT_EQ(rec.tokens.size(), 26u);
  EXPECT_EQ(rec.tokens.back(), "A1B2C3");
  EXPECT_EQ(format_criteo_tsv(rec), criteo_line(1));
}

TEST(Criteo, EmptyIntegerIsMissing) {
  std::string line = criteo_line(0);
  line.replace(line.find("\t0\t"), 3, "\t\t");
  const auto rec = parse_criteo_tsv(line, DatasetSchema::criteo(10), 1);
  EXPECT_FALSE(rec.integers[0].has_value());
  EXPECT_EQ(transform_continuous(rec.integers[0]), 0.0);
}

TEST(Criteo, WrongFieldCountNamesExpected) {
  std::string line = criteo_line(0);
  line.erase(line.rfind('\t'));
  try {
    parse_criteo_tsv(line, DatasetSchema::criteo(10), 7);
    FAIL() << "no error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 7u);
    EXPECT_NE(std::string(e.what()).find("expected 40"), std::string::npos) << e.what();
  }
}

TEST(Criteo, BadLabelAndIntegerAreErrors) {
  std::string bad_label = criteo_line(1);
  bad_label[0] = 'x';
  EXPECT_THROW(parse_criteo_tsv(bad_label, DatasetSchema::criteo(10)), ParseError);
  std::string bad_int = criteo_line(1);
  bad_int.replace(bad_int.find("\t3\t"), 3, "\t3z\t");
  EXPECT_THROW(parse_criteo_tsv(bad_int, DatasetSchema::criteo(10)), ParseError);
}

TEST(Criteo, FileReadPolicies) {
  const fs::path p = temp_path("mixed.tsv");
  {
    std::ofstream out(p);
    out << criteo_line(1) << "\n" << "garbage\n" << criteo_line(0, "") << "\n";
  }
  const auto schema = DatasetSchema::criteo(50);
  const auto r = read_criteo_file(p, schema, ErrorPolicy::Skip);
  EXPECT_EQ(r.data.rows(), 2u);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_EQ(r.lines, 3u);
  // A missing token hashes the sentinel.
  EXPECT_EQ(r.data.categorical[1 * 26 + 25], hash_feature(25, kMissingToken, 50));
  EXPECT_THROW(read_criteo_file(p, schema, ErrorPolicy::Fail), ParseError);
}

TEST(Transform, Rule) {
  EXPECT_EQ(transform_continuous(std::nullopt), 0.0);
  EXPECT_EQ(transform_continuous(2.0), 2.0);
  EXPECT_EQ(transform_continuous(-5.0), -5.0);
  EXPECT_NEAR(transform_continuous(4.0), 1.921812, 1e-6);
  EXPECT_DOUBLE_EQ(transform_continuous(4.0), std::log(4.0) * std::log(4.0));
}

std::uint32_t reference_hash(std::uint32_t field, const std::string& token, std::uint64_t buckets) {
  std::vector<unsigned char> bytes{static_cast<unsigned char>(field), static_cast<unsigned char>(field >> 8),
                                   static_cast<unsigned char>(field >> 16), static_cast<unsigned char>(field >> 24)};
  bytes.insert(bytes.end(), token.begin(), token.end());
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return static_cast<std::uint32_t>(h % buckets);
}

TEST(Hash, MatchesReferenceImplementation) {
  EXPECT_EQ(hash_feature(3, "a1b2", 1u << 20), reference_hash(3, "a1b2", 1u << 20));
  for (std::uint32_t f : {0u, 1u, 25u, 300u})
    for (const char* t : {"", "x", "68fd1e64", "<missing>"}) EXPECT_EQ(hash_feature(f, t, 1000003), reference_hash(f, t, 1000003));
}

TEST(Hash, StableAndBounded) {
  EXPECT_EQ(hash_feature(2, "tok", 97), hash_feature(2, "tok", 97));
  EXPECT_NE(hash_feature(2, "tok", 1u << 30), hash_feature(3, "tok", 1u << 30));
  for (int i = 0; i < 1000; ++i) EXPECT_LT(hash_feature(i % 26, std::to_string(i), 13), 13u);
  EXPECT_THROW(hash_feature(0, "a", 0), ContractViolation);
}

TEST(Split, TenRecords) {
  const auto s = split_811(10, 4);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.validation.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);
}

TEST(Split, PartitionAndDeterminism) {
  const auto a = split_811(1003, 9);
  const auto b = split_811(1003, 9);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_EQ(a.train.size(), 802u);
  EXPECT_EQ(a.validation.size(), 100u);
  std::vector<std::size_t> all = a.train;
  all.insert(all.end(), a.validation.begin(), a.validation.end());
  all.insert(all.end(), a.test.begin(), a.test.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expect(1003);
  std::iota(expect.begin(), expect.end(), 0);
  EXPECT_EQ(all, expect);
  EXPECT_TRUE(std::is_sorted(a.train.begin(), a.train.end()));
  EXPECT_NE(split_811(1003, 10).test, a.test);
  EXPECT_THROW(split_811(9, 0), ContractViolation);
}

TEST(Split, RecordTemplateKeepsMultiset) {
  std::vector<int> recs(50);
  std::iota(recs.begin(), recs.end(), 100);
  auto [tr, va, te] = split_811(recs, 3);
  EXPECT_EQ(tr.size() + va.size() + te.size(), 50u);
  tr.insert(tr.end(), va.begin(), va.end());
  tr.insert(tr.end(), te.begin(), te.end());
  std::sort(tr.begin(), tr.end());
  EXPECT_EQ(tr, recs);
}

TEST(Dataset, SubsetAndMatrices) {
  SyntheticSpec spec;
  spec.samples = 20;
  spec.fields = 3;
  spec.continuous_count = 2;
  const auto d = synthesize(spec).data;
  const std::vector<std::size_t> rows{5, 1};
  const auto s = d.subset(rows);
  EXPECT_EQ(s.rows(), 2u);
  EXPECT_EQ(s.labels[0], d.labels[5]);
  EXPECT_EQ(s.categorical_rows(std::vector<std::size_t>{1})[2], d.categorical[1 * 3 + 2]);
  EXPECT_EQ(d.continuous_matrix(rows)(0, 1), d.continuous[5 * 2 + 1]);
}

TEST(Cache, RoundTripIsExact) {
  SyntheticSpec spec;
  spec.samples = 500;
  spec.continuous_count = 3;
  spec.seed = 8;
  const auto d = synthesize(spec).data;
  const fs::path p = temp_path("roundtrip.smld");
  write_dataset_cache(p, d, {{"note", "x"}});
  const auto c = read_dataset_cache(p);
  EXPECT_EQ(c.data, d);
  EXPECT_EQ(c.meta["note"], "x");
}

TEST(Cache, CorruptFileIsRejected) {
  const fs::path p = temp_path("corrupt.smld");
  {
    std::ofstream out(p, std::ios::binary);
    out << "SMLDSET";
  }
  EXPECT_ANY_THROW(read_dataset_cache(p));
}

TEST(Synthetic, DeterministicAndSized) {
  SyntheticSpec spec;
  spec.samples = 1000;
  spec.seed = 5;
  const auto a = synthesize(spec);
  const auto b = synthesize(spec);
  EXPECT_EQ(a.data, b.data);
  EXPECT_EQ(a.bayes_scores, b.bayes_scores);
  EXPECT_EQ(a.data.rows(), 1000u);
  EXPECT_EQ(a.data.fields, spec.fields);
  spec.seed = 6;
  EXPECT_NE(synthesize(spec).bayes_scores, a.bayes_scores);
}

TEST(Synthetic, DeterministicLabelsGivePerfectOracle) {
  SyntheticSpec spec;
  spec.samples = 2000;
  spec.noise = 0.0;
  spec.deterministic_labels = true;
  const auto s = synthesize(spec);
  EXPECT_EQ(diagnostics::auc(s.bayes_scores, s.data.labels), 1.0);
}

TEST(Synthetic, DefaultOracleAucIsInformative) {
  const auto s = synthesize(SyntheticSpec{});
  EXPECT_EQ(s.data.rows(), 100000u);
  const double a = diagnostics::auc(s.bayes_scores, s.data.labels);
  EXPECT_GT(a, 0.5);
  EXPECT_LT(a, 1.0);
}

TEST(Synthetic, ValidationAndJson) {
  SyntheticSpec spec;
  spec.vocab_size = 0;
  EXPECT_THROW(spec.validate(), ContractViolation);
  SyntheticSpec ok;
  ok.noise = 0.25;
  const nlohmann::json j = ok;
  EXPECT_EQ(j.get<SyntheticSpec>(), ok);
  EXPECT_THROW((nlohmann::json{{"nope", 1}}.get<SyntheticSpec>()), ContractViolation);
}

TEST(Schema, JsonAndValidation) {
  const auto s = DatasetSchema::criteo(64);
  const nlohmann::json j = s;
  EXPECT_EQ(j.get<DatasetSchema>(), s);
  DatasetSchema bad = s;
  bad.hash_buckets.pop_back();
  EXPECT_THROW(bad.validate(), ContractViolation);
}

}  // namespace
}  // namespace sml::data
