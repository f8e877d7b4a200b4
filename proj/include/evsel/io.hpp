// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

// On-disk formats. All integers and floats are little-endian.
//
// Embedding file (.evsb)
//   "EVSB" | u32 version = 1 | u32 n | u32 d | n*d f32, frame-major |
//   u64 checksum = sum of the payload bytes modulo 2^64
// A query embedding is an embedding file with n = 1.
//
// Annotation file (.jsonl), one JSON object per non-blank line:
//   {"query_id": str, "video_id": str, "fps": num, "n_frames": int,
//    "segments": [[start_sec, end_sec], ...]}
//
// Checkpoint file (.evck)
//   "EVCK" | u32 version = 1 |
//   u32 dim | u32 subspaces | u32 window | u32 lambda_param (1 = sigmoid
//   of lambda.logit) | f64 lambda_init | u64 init_seed | u64 train_seed |
//   u32 tensor_count | tensor_count x
//     (u32 name_len | name bytes | u32 rows | u32 cols | rows*cols f64)

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evsel/numerics.hpp"
#include "evsel/scoring.hpp"
#include "evsel/training.hpp"

namespace evsel::io {

inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kLambdaSigmoidParam = 1;

/// Embeddings as stored: 32-bit floats, n rows of d.
struct EmbeddingTable {
  std::uint32_t n = 0;
  std::uint32_t d = 0;
  std::vector<float> values;

  static EmbeddingTable from_dense(const DenseMatrix& m);
  DenseMatrix to_dense() const;
  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;
};

std::uint64_t additive_checksum(std::span<const std::uint8_t> bytes) noexcept;

std::vector<std::uint8_t> encode_embeddings(const EmbeddingTable& table);
/// Throws kBadMagic, kBadVersion, kTruncated, kChecksumMismatch, or
/// kValidation (trailing bytes) as appropriate.
EmbeddingTable decode_embeddings(std::span<const std::uint8_t> bytes);

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable load_embeddings(const std::filesystem::path& path);

struct AnnotationRecord {
  std::string query_id;
  std::string video_id;
  double fps = 1.0;
  std::size_t n_frames = 0;
  std::vector<EvidenceSegment> segments;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

/// Throws kMalformedRecord (bad JSON or fields) or kValidation (start > end,
/// negative time, fps <= 0); messages carry the zero-based record index.
std::vector<AnnotationRecord> parse_annotations(const std::string& text);
std::string format_annotations(std::span<const AnnotationRecord> records);
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path);
void save_annotations(const std::filesystem::path& path,
                      std::span<const AnnotationRecord> records);

struct Checkpoint {
  ScorerConfig config;
  ScorerParams params;
  std::uint64_t train_seed = 0;
};

/// What the caller's pipeline requires; unset fields are not checked.
struct CheckpointExpectation {
  std::optional<std::size_t> dim;
  std::optional<std::size_t> subspaces;
  std::optional<std::size_t> window;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws kBadMagic, kBadVersion, kTruncated, kMissingTensor,
/// kDuplicateTensor, kShapeMismatch, kMalformedRecord (unknown tensor or
/// trailing bytes), kConfigMismatch.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes,
                             const CheckpointExpectation& expect = {});

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const CheckpointExpectation& expect = {});

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace evsel::io
