// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "evsel/error.hpp"
#include "evsel/io.hpp"
#include "test_util.hpp"

namespace evsel::io {
namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kIo;
}

// Floats spanning the awkward corners of the format.
float special_float(Prng& rng) {
  static const float kSpecial[] = {0.0f,
                                   -0.0f,
                                   std::numeric_limits<float>::denorm_min(),
                                   -std::numeric_limits<float>::denorm_min(),
                                   std::numeric_limits<float>::min() / 3.0f,
                                   std::numeric_limits<float>::max(),
                                   -std::numeric_limits<float>::max(),
                                   std::numeric_limits<float>::min(),
                                   1e-30f,
                                   -3.5e37f};
  if (rng.uniform() < 0.4) return kSpecial[rng.below(std::size(kSpecial))];
  return static_cast<float>(rng.normal() * std::pow(10.0, rng.uniform(-20.0, 20.0)));
}

bool bitwise_equal(const EmbeddingTable& a, const EmbeddingTable& b) {
  return a.n == b.n && a.d == b.d && a.values.size() == b.values.size() &&
         std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(float)) == 0;
}

// --- embeddings ------------------------------------------------------------

TEST(Embeddings, HeaderLayout) {
  EmbeddingTable t{1, 2, {1.0f, -2.0f}};
  const auto bytes = encode_embeddings(t);
  ASSERT_EQ(bytes.size(), 4u + 12 + 8 + 8);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "EVSB");
  EXPECT_EQ(bytes[4], 1);   // version, little-endian
  EXPECT_EQ(bytes[8], 1);   // n
  EXPECT_EQ(bytes[12], 2);  // d
  // 1.0f = 00 00 80 3f, -2.0f = 00 00 00 c0
  const std::uint8_t payload[] = {0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0};
  EXPECT_EQ(std::memcmp(bytes.data() + 16, payload, 8), 0);
  // Checksum 0x80 + 0x3f + 0xc0 = 0x17f, little-endian.
  EXPECT_EQ(bytes[24], 0x7f);
  EXPECT_EQ(bytes[25], 0x01);
}

TEST(Embeddings, RandomRoundTripIsBitwise) {
  Prng rng(1);
  const auto dir = testing::scratch_dir("emb_roundtrip");
  for (int trial = 0; trial < 50; ++trial) {
    EmbeddingTable t;
    t.n = static_cast<std::uint32_t>(rng.below(6));
    t.d = static_cast<std::uint32_t>(1 + rng.below(9));
    for (std::size_t i = 0; i < std::size_t{t.n} * t.d; ++i) t.values.push_back(special_float(rng));
    EXPECT_TRUE(bitwise_equal(decode_embeddings(encode_embeddings(t)), t));
    save_embeddings(dir / "t.evsb", t);
    EXPECT_TRUE(bitwise_equal(load_embeddings(dir / "t.evsb"), t));
  }
}

TEST(Embeddings, DenseRoundTrip3x4) {
  Prng rng(2);
  const DenseMatrix m = testing::random_matrix(3, 4, rng);
  const EmbeddingTable t = EmbeddingTable::from_dense(m);
  const DenseMatrix back = decode_embeddings(encode_embeddings(t)).to_dense();
  ASSERT_TRUE(back.same_shape(m));
  for (std::size_t i = 0; i < m.size(); ++i)
    EXPECT_EQ(back.values()[i], static_cast<double>(static_cast<float>(m.values()[i])));
}

TEST(Embeddings, EmptyTable) {
  const EmbeddingTable t{0, 5, {}};
  const auto back = decode_embeddings(encode_embeddings(t));
  EXPECT_EQ(back.n, 0u);
  EXPECT_EQ(back.d, 5u);
  EXPECT_EQ(back.to_dense().rows(), 0u);
}

TEST(Embeddings, CorruptionClassesAreDistinct) {
  const EmbeddingTable t{2, 3, {1, 2, 3, 4, 5, 6}};
  const auto good = encode_embeddings(t);

  auto flipped = good;
  flipped[20] ^= 0x10;
  EXPECT_EQ(kind_of([&] { decode_embeddings(flipped); }), ErrorKind::kChecksumMismatch);

  auto magic = good;
  magic[0] = 'X';
  EXPECT_EQ(kind_of([&] { decode_embeddings(magic); }), ErrorKind::kBadMagic);

  auto version = good;
  version[4] = 2;
  EXPECT_EQ(kind_of([&] { decode_embeddings(version); }), ErrorKind::kBadVersion);

  for (std::size_t cut : {std::size_t{2}, std::size_t{10}, std::size_t{20}, good.size() - 1}) {
    const std::vector<std::uint8_t> shorter(good.begin(), good.begin() + cut);
    EXPECT_EQ(kind_of([&] { decode_embeddings(shorter); }), ErrorKind::kTruncated) << cut;
  }

  auto longer = good;
  longer.push_back(0);
  EXPECT_EQ(kind_of([&] { decode_embeddings(longer); }), ErrorKind::kValidation);
}

TEST(Embeddings, MissingFileIsIoError) {
  EXPECT_EQ(kind_of([] { load_embeddings("/nonexistent/x.evsb"); }), ErrorKind::kIo);
}

TEST(Embeddings, LoadErrorsNameThePathOnce) {
  const auto dir = testing::scratch_dir("emb_path");
  auto bytes = encode_embeddings({1, 1, {1.0f}});
  bytes[17] ^= 1;
  write_file_atomic(dir / "bad.evsb", bytes);
  try {
    load_embeddings(dir / "bad.evsb");
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("bad.evsb"), std::string::npos);
    EXPECT_EQ(msg.find(std::string(error_kind_name(e.kind()))),
              msg.rfind(std::string(error_kind_name(e.kind()))));
  }
}

// --- annotations -----------------------------------------------------------

TEST(Annotations, SingleRecord) {
  const auto recs = parse_annotations(
      R"({"query_id":"q1","video_id":"v9","fps":2.0,"n_frames":40,"segments":[[1.5,3.0],[7,8]]})"
      "\n");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].query_id, "q1");
  EXPECT_EQ(recs[0].video_id, "v9");
  EXPECT_EQ(recs[0].fps, 2.0);
  EXPECT_EQ(recs[0].n_frames, 40u);
  EXPECT_EQ(recs[0].segments, (std::vector<EvidenceSegment>{{1.5, 3.0}, {7, 8}}));
}

TEST(Annotations, EmptyTextIsEmptyList) {
  EXPECT_TRUE(parse_annotations("").empty());
  EXPECT_TRUE(parse_annotations("\n  \n").empty());
}

TEST(Annotations, ErrorsCarryRecordIndex) {
  const std::string ok =
      R"({"query_id":"a","video_id":"b","fps":1,"n_frames":3,"segments":[]})"
      "\n";
  const auto expect_error = [&](const std::string& bad, ErrorKind want) {
    try {
      parse_annotations(ok + "\n" + bad + "\n");
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), want) << bad;
      EXPECT_NE(std::string(e.what()).find("record 1"), std::string::npos) << e.what();
    }
  };
  expect_error(R"({"query_id":"a","video_id":"b","fps":1,"n_frames":3,"segments":[[5,2]]})",
               ErrorKind::kValidation);
  expect_error(R"({"query_id":"a","video_id":"b","fps":0,"n_frames":3,"segments":[]})",
               ErrorKind::kValidation);
  expect_error(R"({"query_id":"a","video_id":"b","fps":1,"n_frames":3,"segments":[[-1,2]]})",
               ErrorKind::kValidation);
  expect_error(R"({"query_id":"a","video_id":"b","fps":1,"n_frames":3})",
               ErrorKind::kMalformedRecord);
  expect_error(R"({"query_id":"a","video_id":"b","fps":1,"n_frames":3,"segments":[],"x":1})",
               ErrorKind::kMalformedRecord);
  expect_error(R"({"query_id":"a",)", ErrorKind::kMalformedRecord);
  expect_error(R"({"query_id":"a","video_id":"b","fps":1,"n_frames":3,"segments":[[1,2,3]]})",
               ErrorKind::kMalformedRecord);
}

TEST(Annotations, FileRoundTrip) {
  const std::vector<AnnotationRecord> recs{
      {"q0", "v0", 1.0, 10, {{2, 4}}},
      {"q1", "v1", 29.97, 1000, {{0.1, 0.30000000000000004}, {10, 10}}},
      {"q2", "v1", 0.5, 3, {}},
  };
  const auto dir = testing::scratch_dir("ann");
  save_annotations(dir / "a.jsonl", recs);
  EXPECT_EQ(load_annotations(dir / "a.jsonl"), recs);
  EXPECT_EQ(parse_annotations(format_annotations(recs)), recs);
}

// --- checkpoints -----------------------------------------------------------

Checkpoint sample_checkpoint(std::uint64_t seed) {
  Checkpoint ck;
  ck.config = {.dim = 8, .subspaces = 2, .window = 3, .lambda_init = 0.25, .seed = seed};
  ck.params = init_scorer(ck.config);
  Prng rng(seed + 100);
  ck.params.gate_b.value(3, 0) = -0.0;
  ck.params.attn_k.value(0, 1) = std::numeric_limits<double>::denorm_min();
  ck.params.attn_k.value(0, 2) = -1e300;
  ck.params.gamma_log.value(1, 0) = rng.normal();
  ck.train_seed = 77;
  return ck;
}

bool params_bitwise_equal(const ScorerParams& a, const ScorerParams& b) {
  std::vector<std::uint64_t> x, y;
  a.visit([&](const std::string&, const ParamTensor& t) {
    for (double v : t.value.values()) x.push_back(std::bit_cast<std::uint64_t>(v));
  });
  b.visit([&](const std::string&, const ParamTensor& t) {
    for (double v : t.value.values()) y.push_back(std::bit_cast<std::uint64_t>(v));
  });
  return x == y;
}

TEST(Checkpoint, RoundTripIsBitwise) {
  const auto dir = testing::scratch_dir("ckpt");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Checkpoint ck = sample_checkpoint(seed);
    save_checkpoint(dir / "c.evck", ck);
    const Checkpoint back = load_checkpoint(dir / "c.evck");
    EXPECT_EQ(back.config, ck.config);
    EXPECT_EQ(back.train_seed, 77u);
    EXPECT_TRUE(params_bitwise_equal(back.params, ck.params));
    EXPECT_EQ(encode_checkpoint(back), encode_checkpoint(ck));
  }
}

TEST(Checkpoint, ConfigExpectationMismatch) {
  Checkpoint ck;
  ck.config = {.dim = 768, .subspaces = 8, .window = 8};
  ck.params = zero_scorer(ck.config);
  const auto bytes = encode_checkpoint(ck);
  EXPECT_EQ(kind_of([&] { decode_checkpoint(bytes, {.dim = 512, .subspaces = {}, .window = {}}); }), ErrorKind::kConfigMismatch);
  EXPECT_EQ(kind_of([&] { decode_checkpoint(bytes, {.dim = {}, .subspaces = {}, .window = 4}); }), ErrorKind::kConfigMismatch);
  EXPECT_NO_THROW(decode_checkpoint(bytes, {.dim = 768, .subspaces = 8, .window = 8}));
}

// Replaces the first occurrence of `from` with an equal-length `to`.
std::vector<std::uint8_t> patch(std::vector<std::uint8_t> bytes, const std::string& from,
                                const std::string& to) {
  const std::string s(bytes.begin(), bytes.end());
  const auto at = s.find(from);
  EXPECT_NE(at, std::string::npos);
  std::copy(to.begin(), to.end(), bytes.begin() + static_cast<std::ptrdiff_t>(at));
  return bytes;
}

TEST(Checkpoint, StructuralErrorsAreDistinct) {
  const auto good = encode_checkpoint(sample_checkpoint(1));
  EXPECT_EQ(kind_of([&] { decode_checkpoint(patch(good, "gate.wq", "gate.wz")); }),
            ErrorKind::kMissingTensor);
  EXPECT_EQ(kind_of([&] { decode_checkpoint(patch(good, "gate.wq", "gate.wh")); }),
            ErrorKind::kDuplicateTensor);
  EXPECT_EQ(kind_of([&] { decode_checkpoint(patch(good, "EVCK", "EVCX")); }),
            ErrorKind::kBadMagic);
  auto version = good;
  version[4] = 9;
  EXPECT_EQ(kind_of([&] { decode_checkpoint(version); }), ErrorKind::kBadVersion);
  const std::vector<std::uint8_t> cut(good.begin(), good.end() - 5);
  EXPECT_EQ(kind_of([&] { decode_checkpoint(cut); }), ErrorKind::kTruncated);
  auto extra = good;
  extra.push_back(1);
  EXPECT_EQ(kind_of([&] { decode_checkpoint(extra); }), ErrorKind::kMalformedRecord);
}

TEST(Checkpoint, ShapeMismatch) {
  auto bytes = encode_checkpoint(sample_checkpoint(2));
  // gate.b is stored as 8 x 1; relabel it 1 x 8 (same payload size).
  const std::string s(bytes.begin(), bytes.end());
  const auto at = s.find("gate.b") + 6;
  bytes[at] = 1;
  bytes[at + 4] = 8;
  EXPECT_EQ(kind_of([&] { decode_checkpoint(bytes); }), ErrorKind::kShapeMismatch);
}

TEST(Files, AtomicWriteReplacesAndLeavesNoTemporary) {
  const auto dir = testing::scratch_dir("atomic");
  write_text_atomic(dir / "f.txt", "one");
  write_text_atomic(dir / "f.txt", "two");
  const auto bytes = read_file(dir / "f.txt");
  EXPECT_EQ(std::string(bytes.begin(), bytes.end()), "two");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++entries;
  EXPECT_EQ(entries, 1u);
}

}  // namespace
}  // namespace evsel::io
