#include <gtest/gtest.h>

#include "fhirdx/note_pipeline.hpp"
#include "test_util.hpp"

using namespace fhirdx;
using namespace fhirdx::notes;
using fhirdx::testing::TempDir;

namespace {

const Timestamp kAdmit = *parse_timestamp("2150-01-01 00:00:00");

std::unordered_map<AdmissionId, AdmissionTimes> times() {
  return {{1, {kAdmit, kAdmit + 200 * kHour}}, {2, {kAdmit, kAdmit + 100 * kHour}}};
}

NoteEvent note(AdmissionId id, const std::string& cat, double hours, const std::string& text) {
  return {id, cat, kAdmit + static_cast<Timestamp>(hours * 3600), text};
}

std::string words(std::size_t n, const std::string& prefix = "w") {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + prefix + std::to_string(i);
  return s;
}

ChunkScoreMatrix column(std::initializer_list<double> probs) {
  ChunkScoreMatrix m{7, Matrix(static_cast<Eigen::Index>(probs.size()), 1)};
  Eigen::Index i = 0;
  for (double p : probs) m.probabilities(i++, 0) = p;
  return m;
}

}  // namespace

TEST(Clean, DocumentedExample) {
  EXPECT_EQ(clean_text("Dr. Smith\nfailure"), "doctor smith failure");
  EXPECT_EQ(clean_text(""), "");
  EXPECT_EQ(clean_text("  A\r\n\n  b\tc  "), "a b c");
  EXPECT_EQ(clean_text("Addr. 5"), "addr. 5");
}

TEST(Clean, CustomReplacementsInOrder) {
  Replacements r{{"pt", "patient"}, {"patient", "person"}};
  EXPECT_EQ(clean_text("Pt stable", r), "person stable");
}

TEST(Clean, Idempotent) {
  Rng rng(1);
  const char* pieces[] = {"Dr.", " ", "\n", "dr.dr.", "HELLO", "x", "\t", "Dr", ".", "doctor"};
  for (int i = 0; i < 500; ++i) {
    std::string s;
    for (int k = 0; k < 12; ++k) s += pieces[rng.below(std::size(pieces))];
    auto once = clean_text(s);
    EXPECT_EQ(clean_text(once), once) << s;
  }
}

TEST(Subset, WindowBoundaries) {
  std::vector<NoteEvent> notes{note(1, "Nursing", 49, "late"), note(1, "Nursing", 1, "early"),
                               note(1, "Nursing", 72, "edge")};
  auto d3 = build_subset(notes, times(), SubsetKind::days3);
  auto d2 = build_subset(notes, times(), SubsetKind::days2);
  EXPECT_EQ(d3.at(1), "early late");
  EXPECT_EQ(d2.at(1), "early");
}

TEST(Subset, DischargeSummariesOnlyInDisch) {
  std::vector<NoteEvent> notes{note(1, "Discharge summary", 10, "summary text"), note(1, "Radiology", 5, "xray")};
  auto disch = build_subset(notes, times(), SubsetKind::disch);
  auto d3 = build_subset(notes, times(), SubsetKind::days3);
  auto d2 = build_subset(notes, times(), SubsetKind::days2);
  EXPECT_EQ(disch.at(1), "summary text");
  EXPECT_EQ(d3.at(1), "xray");
  EXPECT_EQ(d2.at(1), "xray");
}

TEST(Subset, AdmissionWithoutQualifyingNotesIsAbsent) {
  std::vector<NoteEvent> notes{note(1, "Nursing", 1, "a"), note(2, "Nursing", 80, "b")};
  auto d3 = build_subset(notes, times(), SubsetKind::days3);
  EXPECT_EQ(d3.count(1), 1u);
  EXPECT_EQ(d3.count(2), 0u);
  EXPECT_TRUE(build_subset(notes, times(), SubsetKind::disch).empty());
}

TEST(Subset, UnknownAdmission) {
  std::vector<NoteEvent> notes{note(3, "Nursing", 1, "a")};
  try {
    build_subset(notes, times(), SubsetKind::days3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownAdmission);
  }
}

TEST(Subset, DaysTwoNestedInDaysThree) {
  Rng rng(2);
  std::vector<NoteEvent> notes;
  for (int i = 0; i < 200; ++i)
    notes.push_back(note(1 + static_cast<AdmissionId>(rng.below(2)), rng.bernoulli(0.1) ? "Discharge summary" : "Nursing",
                         rng.uniform(0, 100), "t" + std::to_string(i)));
  auto d3 = build_subset(notes, times(), SubsetKind::days3);
  auto d2 = build_subset(notes, times(), SubsetKind::days2);
  for (const auto& [id, text] : d2) {
    ASSERT_TRUE(d3.count(id));
    EXPECT_EQ(d3.at(id).rfind(text, 0), 0u) << "days2 text is a time-prefix of days3";
  }
}

TEST(Chunk, DocumentedCounts) {
  auto c = chunk(words(1030), 512);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0].tokens.size(), 512u);
  EXPECT_EQ(c[1].tokens.size(), 512u);
  EXPECT_EQ(c[2].tokens.size(), 9u);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(c[i].chunk_index, i);
    EXPECT_EQ(c[i].tokens[0], kClassificationMarker);
  }
  auto small = chunk(words(5), 512);
  ASSERT_EQ(small.size(), 1u);
  EXPECT_EQ(small[0].tokens.size(), 6u);
  EXPECT_TRUE(chunk("", 512).empty());
  EXPECT_TRUE(chunk("   ", 512).empty());
}

TEST(Chunk, ReassemblyAndCeilingCount) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = rng.below(300), max_len = 2 + rng.below(40);
    const std::string text = words(n);
    auto c = chunk(text, max_len, 9);
    EXPECT_EQ(c.size(), (n + max_len - 2) / (max_len - 1));
    std::vector<std::string> back;
    for (const auto& ch : c) {
      EXPECT_LE(ch.tokens.size(), max_len);
      EXPECT_EQ(ch.admission_id, 9);
      back.insert(back.end(), ch.tokens.begin() + 1, ch.tokens.end());
    }
    EXPECT_EQ(back, whitespace_tokens(text));
  }
  EXPECT_THROW(chunk("a b", 1), Error);
}

TEST(Score, ZeroWeightsGiveOneHalf) {
  LinearClassifierParams p(4, HasherConfig{64});
  auto c = chunk(words(20), 8);
  auto m = score_chunks(c, p);
  EXPECT_EQ(m.probabilities, Matrix::Constant(static_cast<Eigen::Index>(c.size()), 4, 0.5));
}

TEST(Score, DuplicateChunksDuplicateRows) {
  LinearClassifierParams p(3, HasherConfig{128});
  Rng rng(1);
  for (Eigen::Index i = 0; i < p.weights.value.size(); ++i) p.weights.value.data()[i] = rng.normal();
  auto one = chunk("alpha beta gamma", 10);
  std::vector<ChunkTokenSequence> two{one[0], one[0]};
  BagOfWordsScorer scorer(p);
  auto m = scorer.score(5, two);
  EXPECT_EQ(m.admission_id, 5);
  EXPECT_EQ(m.probabilities.row(0), m.probabilities.row(1));
  EXPECT_GT(m.probabilities.minCoeff(), 0.0);
  EXPECT_LT(m.probabilities.maxCoeff(), 1.0);
}

TEST(Score, MarkerLearnedByTraining) {
  // category 0 positive iff the admission's text carries "marker"
  std::vector<ChunkTokenSequence> chunks;
  std::vector<labels::LabelVector> lv;
  Rng rng(4);
  for (AdmissionId a = 0; a < 200; ++a) {
    const bool pos = a % 4 == 0;
    std::string text = words(20, "v") + (pos ? " marker" : "");
    for (auto& c : chunk(text, 32, a)) chunks.push_back(c);
    lv.push_back({a, {static_cast<std::uint8_t>(pos), static_cast<std::uint8_t>(rng.bernoulli(0.5))}});
  }
  ScorerTrainingConfig cfg;
  cfg.seed = 3;
  cfg.epochs = 40;
  cfg.lr = 0.05;
  cfg.hasher.dim = 1024;
  auto r = train_scorer(chunks, lv, 2, cfg);
  EXPECT_EQ(r.epoch_loss.size(), 40u);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
  auto marked = score_chunks(chunk("marker " + words(20, "v"), 64), r.params);
  auto plain = score_chunks(chunk(words(20, "v"), 64), r.params);
  EXPECT_GT(marked.probabilities(0, 0), 0.5);
  EXPECT_LT(plain.probabilities(0, 0), 0.5);
}

TEST(Train, ZeroEpochsAndDeterminism) {
  std::vector<ChunkTokenSequence> chunks = chunk(words(50), 8, 1);
  std::vector<labels::LabelVector> lv{{1, {1, 0}}};
  ScorerTrainingConfig cfg;
  cfg.hasher.dim = 256;
  cfg.epochs = 0;
  auto z = train_scorer(chunks, lv, 2, cfg);
  EXPECT_TRUE(z.params.weights.value.isZero(0.0));
  EXPECT_TRUE(z.params.bias.value.isZero(0.0));
  cfg.epochs = 3;
  cfg.batch_size = 2;
  auto a = train_scorer(chunks, lv, 2, cfg);
  auto b = train_scorer(chunks, lv, 2, cfg);
  EXPECT_EQ(a.params.weights.value, b.params.weights.value);
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
}

TEST(Train, Errors) {
  std::vector<labels::LabelVector> lv{{1, {1, 0}}};
  ScorerTrainingConfig cfg;
  cfg.hasher.dim = 16;
  try {
    train_scorer({}, lv, 2, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyPartition);
  }
  auto chunks = chunk("a b", 4, 2);
  try {
    train_scorer(chunks, lv, 2, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownAdmission);
  }
}

TEST(Aggregate, DocumentedExamples) {
  EXPECT_EQ(aggregate(column({0.7}), {2.0})[0], 0.7);
  EXPECT_DOUBLE_EQ(aggregate(column({0.2, 0.8}), {2.0})[0], 0.65);
}

TEST(Aggregate, Limits) {
  auto m = column({0.1, 0.4, 0.9});
  EXPECT_NEAR(aggregate(m, {1e12})[0], 0.9, 1e-9);
  ChunkScoreMatrix big{1, Matrix(100000, 1)};
  for (Eigen::Index i = 0; i < big.probabilities.rows(); ++i) big.probabilities(i, 0) = i % 2 ? 0.9 : 0.1;
  big.probabilities(0, 0) = 1.0;
  EXPECT_NEAR(aggregate(big, {2.0})[0], big.probabilities.col(0).mean(), 1e-4);
}

TEST(Aggregate, PerCategoryColumns) {
  ChunkScoreMatrix m{1, Matrix(2, 2)};
  m.probabilities << 0.2, 0.5, 0.8, 0.5;
  auto a = aggregate(m);
  EXPECT_DOUBLE_EQ(a[0], 0.65);
  EXPECT_DOUBLE_EQ(a[1], 0.5);
}

TEST(Aggregate, Errors) {
  ChunkScoreMatrix empty{1, Matrix(0, 3)};
  try {
    aggregate(empty);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyChunkSet);
  }
  EXPECT_THROW(aggregate(column({0.5}), {0.0}), Error);
}

TEST(Files, NotesCsvLoader) {
  TempDir d;
  auto p = fhirdx::testing::write_text(
      d.file("n.csv"),
      "row_id,subject_id,hadm_id,chartdate,charttime,storetime,category,description,cgid,iserror,text\n"
      "1,5,1,2150-01-01,2150-01-01 03:00:00,,Nursing,,,,\"Dr. Who\nok\"\n"
      "2,5,1,2150-01-09,,,Discharge summary,,,,summary\n"
      "3,5,1,2150-01-01,2150-01-01 04:00:00,,Nursing,,,1,bad note\n"
      "4,5,,2150-01-01,2150-01-01 04:00:00,,Nursing,,,,orphan\n");
  auto notes = load_notes(p);
  ASSERT_EQ(notes.size(), 2u);
  EXPECT_EQ(notes[0].text, "Dr. Who\nok");
  EXPECT_EQ(*notes[0].charttime, *parse_timestamp("2150-01-01 03:00:00"));
  EXPECT_EQ(*notes[1].charttime, *parse_timestamp("2150-01-09"));
  EXPECT_TRUE(is_discharge_summary(notes[1]));
}

TEST(Files, ChunkScorerAndScoreRoundTrips) {
  TempDir d;
  ChunkFile cf;
  cf.subset = SubsetKind::days3;
  cf.max_len = 8;
  cf.admissions[4] = chunk(words(20), 8, 4);
  cf.admissions[9] = chunk("x y", 8, 9);
  write_chunk_file(d.file("c.json.gz"), cf);
  auto back = read_chunk_file(d.file("c.json.gz"));
  EXPECT_EQ(back.subset, SubsetKind::days3);
  EXPECT_EQ(back.max_len, 8u);
  EXPECT_EQ(back.admissions, cf.admissions);

  std::vector<labels::LabelVector> lv{{4, {1, 0}}, {9, {0, 1}}};
  ScorerTrainingConfig cfg;
  cfg.hasher.dim = 64;
  auto r = train_scorer(cf.all_chunks(), lv, 2, cfg);
  std::vector<std::int64_t> cats{98, 108};
  save_scorer(d.file("s.json"), r.params, cats, r.epoch_loss);
  auto sf = load_scorer(d.file("s.json"));
  EXPECT_EQ(sf.categories, cats);
  EXPECT_EQ(sf.params.weights.value, r.params.weights.value);
  EXPECT_EQ(sf.params.bias.value, r.params.bias.value);

  std::vector<ChunkScoreMatrix> scores;
  for (const auto& [id, cs] : cf.admissions) scores.push_back(BagOfWordsScorer(r.params).score(id, cs));
  write_chunk_scores(d.file("cs.json"), cats, scores);
  auto csf = read_chunk_scores(d.file("cs.json"));
  EXPECT_EQ(csf.categories, cats);
  ASSERT_EQ(csf.admissions.size(), 2u);
  EXPECT_EQ(csf.admissions[0].probabilities, scores[0].probabilities);
}
