#include <gtest/gtest.h>

#include "fhirdx/label_codec.hpp"
#include "test_util.hpp"

using namespace fhirdx;
using namespace fhirdx::labels;
using fhirdx::testing::TempDir;
using fhirdx::testing::write_text;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::UsageError;
}

CcsCrosswalk small_xwalk() {
  std::vector<std::pair<std::string, std::int64_t>> pairs{{"C1", 10}, {"C2", 15}, {"C3", 10}, {"C4", 20},
                                                          {"C5", 11}, {"C6", 12}};
  return CcsCrosswalk::from_pairs(pairs);
}

}  // namespace

TEST(Crosswalk, AhrqExcerpt) {
  auto x = load_crosswalk(std::string(FHIRDX_SOURCE_DIR) + "/tests/data/ccs_dxref_excerpt.csv");
  EXPECT_EQ(x.code_count(), 8u);
  EXPECT_EQ(x.category_count(), 6u);
  auto idx = x.index_of_code("4019");
  ASSERT_TRUE(idx);
  EXPECT_EQ(x.categories()[*idx], 98);
  EXPECT_EQ(x.categories()[*x.index_of_code(normalize_icd("'486      '"))], 122);
  EXPECT_EQ(*x.index_of_code("4010"), *x.index_of_code("4011"));
}

TEST(Crosswalk, CountsDistinctCategories) {
  TempDir d;
  auto p = write_text(d.file("x.csv"), "'ICD','CCS'\n'A1 ','1 '\n'A2 ','1 '\n'B1 ','2 '\n");
  auto x = load_crosswalk(p);
  EXPECT_EQ(x.category_count(), 2u);
  EXPECT_EQ(x.code_count(), 3u);
}

TEST(Crosswalk, ConflictingDuplicate) {
  TempDir d;
  auto p = write_text(d.file("x.csv"), "'A1','1'\n'A1','2'\n");
  EXPECT_EQ(code_of([&] { load_crosswalk(p); }), ErrorCode::DuplicateIcdCode);
  auto same = write_text(d.file("y.csv"), "'A1','1'\n'A1','1'\n");
  EXPECT_EQ(load_crosswalk(same).code_count(), 1u);
}

TEST(Crosswalk, MalformedRows) {
  TempDir d;
  auto p = write_text(d.file("x.csv"), "'A1','1'\n'A2','one'\n");
  EXPECT_EQ(code_of([&] { load_crosswalk(p); }), ErrorCode::MalformedCrosswalk);
  auto empty = write_text(d.file("e.csv"), "'ICD','CCS'\n");
  EXPECT_EQ(code_of([&] { load_crosswalk(empty); }), ErrorCode::MalformedCrosswalk);
}

TEST(Encode, DocumentedExamples) {
  // c1 -> category index 0, c2 -> category index 5
  std::vector<std::pair<std::string, std::int64_t>> pairs{{"c1", 1}, {"x2", 2}, {"x3", 3},
                                                          {"x4", 4}, {"x5", 5}, {"c2", 6}};
  auto x = CcsCrosswalk::from_pairs(pairs);
  std::vector<AdmissionDiagnoses> diag{{1, {"c1"}}, {2, {"c1", "c2"}}, {3, {}}};
  auto enc = encode_labels(diag, x);
  ASSERT_EQ(enc.vectors.size(), 3u);
  EXPECT_EQ(enc.vectors[0].bits, (std::vector<std::uint8_t>{1, 0, 0, 0, 0, 0}));
  EXPECT_EQ(enc.vectors[1].bits, (std::vector<std::uint8_t>{1, 0, 0, 0, 0, 1}));
  EXPECT_EQ(enc.vectors[2].positives(), 0u);
}

TEST(Encode, SameCategoryTwiceSetsOneBit) {
  auto x = small_xwalk();
  std::vector<AdmissionDiagnoses> diag{{1, {"C1", "C3"}}};
  auto enc = encode_labels(diag, x);
  EXPECT_EQ(enc.vectors[0].positives(), 1u);
}

TEST(Encode, UnknownCodesCounted) {
  auto x = small_xwalk();
  std::vector<AdmissionDiagnoses> diag{{1, {"C1", "ZZ", "ZZ"}}, {2, {"Q"}}};
  auto enc = encode_labels(diag, x);
  EXPECT_EQ(enc.unknown_total(), 3u);
  EXPECT_EQ(enc.unknown_codes.at("ZZ"), 2u);
}

TEST(Encode, OrderIndependentAndMatchesBruteForce) {
  auto x = small_xwalk();
  const std::vector<std::string> codes{"C1", "C2", "C3", "C4", "C5", "C6", "NOPE"};
  Rng rng(5);
  std::vector<AdmissionDiagnoses> diag;
  for (int a = 0; a < 100; ++a) {
    AdmissionDiagnoses d{a, {}};
    for (int k = 0; k < static_cast<int>(rng.below(5)); ++k) d.icd_codes.push_back(codes[rng.below(codes.size())]);
    diag.push_back(d);
  }
  auto enc = encode_labels(diag, x);
  auto shuffled = diag;
  for (auto& d : shuffled) rng.shuffle(d.icd_codes);
  auto enc2 = encode_labels(shuffled, x);
  EXPECT_EQ(enc.vectors, enc2.vectors);

  // brute force: category id of each code written out by hand
  const std::map<std::string, std::int64_t> cat{{"C1", 10}, {"C2", 15}, {"C3", 10},
                                                {"C4", 20}, {"C5", 11}, {"C6", 12}};
  for (std::size_t c = 0; c < x.category_count(); ++c) {
    std::size_t expected = 0;
    for (const auto& d : diag) {
      bool has = false;
      for (const auto& code : d.icd_codes)
        if (cat.count(code) && cat.at(code) == x.categories()[c]) has = true;
      expected += has;
    }
    std::size_t got = 0;
    for (const auto& v : enc.vectors) got += v[c];
    EXPECT_EQ(got, expected) << c;
  }
}

TEST(Binary, ProjectionAndRange) {
  std::vector<LabelVector> v{{1, {1, 0, 0}}, {2, {0, 0, 1}}, {3, {1, 0, 1}}};
  auto col0 = binary_labels(v, 0);
  EXPECT_EQ(col0, (std::vector<std::pair<AdmissionId, bool>>{{1, true}, {2, false}, {3, true}}));
  for (const auto& [id, b] : binary_labels(v, 1)) EXPECT_FALSE(b) << id;
  for (std::size_t c = 0; c < 3; ++c) {
    auto col = binary_labels(v, c);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(col[i].second, v[i][c]);
  }
  EXPECT_EQ(code_of([&] { binary_labels(v, 3); }), ErrorCode::CategoryOutOfRange);
}

TEST(Undersample, BalancesAndKeepsMinority) {
  std::vector<std::pair<AdmissionId, bool>> s;
  for (int i = 0; i < 100; ++i) s.emplace_back(i, i % 10 == 0);
  auto out = undersample(s, 17);
  ASSERT_EQ(out.size(), 20u);
  std::size_t pos = 0;
  for (const auto& [id, y] : out) pos += y;
  EXPECT_EQ(pos, 10u);
  for (int i = 0; i < 100; i += 10)
    EXPECT_NE(std::find(out.begin(), out.end(), std::make_pair(AdmissionId{i}, true)), out.end());
  EXPECT_EQ(undersample(s, 17), out);
  EXPECT_NE(undersample(s, 18), out);
}

TEST(Undersample, BalancedIsIdentityAndDegenerate) {
  std::vector<std::pair<AdmissionId, bool>> s{{1, true}, {2, false}, {3, false}, {4, true}};
  EXPECT_EQ(undersample(s, 1), s);
  std::vector<std::pair<AdmissionId, bool>> all_pos{{1, true}, {2, true}};
  EXPECT_EQ(code_of([&] { undersample(all_pos, 1); }), ErrorCode::DegenerateClassBalance);
}

TEST(LabelFile, RoundTripAndDiagnosesCsv) {
  TempDir d;
  auto p = write_text(d.file("dx.csv"),
                      "row_id,subject_id,hadm_id,seq_num,icd9_code\n1,1,100,1,C1\n2,1,100,2,C2\n3,2,101,1,ZZ\n");
  std::vector<AdmissionId> adm{100, 101, 102};
  auto diag = load_diagnoses(p, adm);
  ASSERT_EQ(diag.size(), 3u);
  EXPECT_TRUE(diag[2].icd_codes.empty());
  auto x = small_xwalk();
  auto enc = encode_labels(diag, x);
  write_label_file(d.file("l.json"), x, enc);
  auto lf = read_label_file(d.file("l.json"));
  EXPECT_EQ(lf.categories, x.categories());
  EXPECT_EQ(lf.vectors, enc.vectors);
}
