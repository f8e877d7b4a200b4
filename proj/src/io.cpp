// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

#include "evsel/io.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <system_error>

#include <unistd.h>

#include "evsel/error.hpp"
#include "json.hpp"

namespace evsel::io {
namespace {

constexpr char kEmbeddingMagic[4] = {'E', 'V', 'S', 'B'};
constexpr char kCheckpointMagic[4] = {'E', 'V', 'C', 'K'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }
  std::size_t size() const { return out_.size(); }
  const std::vector<std::uint8_t>& view() const { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, const char* what) : bytes_(bytes), what_(what) {}

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorKind::kTruncated, std::string(what_) + " ends after " +
                                             std::to_string(bytes_.size()) + " bytes");
    }
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    auto s = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{s[i]} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    auto s = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{s[i]} << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  const char* what_;
};

void check_magic(Reader& r, const char (&magic)[4], const char* what) {
  if (r.remaining() < 4) {
    throw Error(ErrorKind::kTruncated, std::string(what) + " is shorter than its magic");
  }
  auto m = r.take(4);
  for (int i = 0; i < 4; ++i) {
    if (m[i] != static_cast<std::uint8_t>(magic[i])) {
      throw Error(ErrorKind::kBadMagic, std::string(what) + " does not start with \"" +
                                            std::string(magic, 4) + "\"");
    }
  }
}

std::uint32_t to_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffULL) throw Error(ErrorKind::kInvalidArgument, std::string(what) + " too large");
  return static_cast<std::uint32_t>(v);
}

// Expected shape of each tensor for a config, in visit() order.
ScorerParams shaped_for(const ScorerConfig& config) { return zero_scorer(config); }

}  // namespace

EmbeddingTable EmbeddingTable::from_dense(const DenseMatrix& m) {
  EmbeddingTable t;
  t.n = to_u32(m.rows(), "embedding row count");
  t.d = to_u32(m.cols(), "embedding width");
  t.values.reserve(m.size());
  for (double v : m.values()) t.values.push_back(static_cast<float>(v));
  return t;
}

DenseMatrix EmbeddingTable::to_dense() const {
  std::vector<double> v(values.begin(), values.end());
  return DenseMatrix(n, d, std::move(v));
}

std::uint64_t additive_checksum(std::span<const std::uint8_t> bytes) noexcept {
  std::uint64_t sum = 0;
  for (std::uint8_t b : bytes) sum += b;
  return sum;
}

std::vector<std::uint8_t> encode_embeddings(const EmbeddingTable& table) {
  if (table.values.size() != std::size_t{table.n} * table.d) {
    throw Error(ErrorKind::kShapeMismatch, "embedding table holds " +
                                               std::to_string(table.values.size()) +
                                               " values for " + std::to_string(table.n) + "x" +
                                               std::to_string(table.d));
  }
  Writer w;
  w.bytes(kEmbeddingMagic, 4);
  w.u32(kEmbeddingVersion);
  w.u32(table.n);
  w.u32(table.d);
  const std::size_t payload_start = w.size();
  for (float v : table.values) w.f32(v);
  const auto& buf = w.view();
  const std::uint64_t sum =
      additive_checksum(std::span(buf).subspan(payload_start, buf.size() - payload_start));
  w.u64(sum);
  return w.take();
}

EmbeddingTable decode_embeddings(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "embedding file");
  check_magic(r, kEmbeddingMagic, "embedding file");
  const std::uint32_t version = r.u32();
  if (version != kEmbeddingVersion) {
    throw Error(ErrorKind::kBadVersion, "embedding file version " + std::to_string(version) +
                                            ", expected " + std::to_string(kEmbeddingVersion));
  }
  EmbeddingTable t;
  t.n = r.u32();
  t.d = r.u32();
  const std::uint64_t count = std::uint64_t{t.n} * t.d;
  if (r.remaining() < 8 || (r.remaining() - 8) / 4 < count) {
    throw Error(ErrorKind::kTruncated, "embedding file payload shorter than " +
                                           std::to_string(t.n) + "x" + std::to_string(t.d));
  }
  const auto payload = r.take(static_cast<std::size_t>(count) * 4);
  const std::uint64_t stored = r.u64();
  if (r.remaining() != 0) {
    throw Error(ErrorKind::kValidation,
                "embedding file has " + std::to_string(r.remaining()) + " trailing bytes");
  }
  const std::uint64_t actual = additive_checksum(payload);
  if (stored != actual) {
    throw Error(ErrorKind::kChecksumMismatch, "embedding payload checksum " +
                                                  std::to_string(actual) + " != stored " +
                                                  std::to_string(stored));
  }
  Reader p(payload, "embedding payload");
  t.values.resize(static_cast<std::size_t>(count));
  for (float& v : t.values) v = p.f32();
  return t;
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
  write_file_atomic(path, encode_embeddings(table));
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  try {
    return decode_embeddings(read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kIo) throw;
    throw Error(e.kind(), path.string() + ": " + e.detail());
  }
}

std::vector<AnnotationRecord> parse_annotations(const std::string& text) {
  std::vector<AnnotationRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::size_t index = out.size();
    const std::string where =
        "record " + std::to_string(index) + " (line " + std::to_string(line_no) + ")";
    AnnotationRecord rec;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw Error(ErrorKind::kMalformedRecord, where + ": not an object");
      for (const auto& [key, _] : j.items()) {
        if (key != "query_id" && key != "video_id" && key != "fps" && key != "n_frames" &&
            key != "segments") {
          throw Error(ErrorKind::kMalformedRecord, where + ": unknown field '" + key + "'");
        }
      }
      rec.query_id = j.at("query_id").get<std::string>();
      rec.video_id = j.at("video_id").get<std::string>();
      rec.fps = j.at("fps").get<double>();
      rec.n_frames = j.at("n_frames").get<std::size_t>();
      for (const auto& seg : j.at("segments")) {
        if (!seg.is_array() || seg.size() != 2) {
          throw Error(ErrorKind::kMalformedRecord, where + ": segment must be [start, end]");
        }
        rec.segments.push_back({seg[0].get<double>(), seg[1].get<double>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kMalformedRecord, where + ": " + e.what());
    }
    if (!(rec.fps > 0.0) || !std::isfinite(rec.fps)) {
      throw Error(ErrorKind::kValidation, where + ": fps must be > 0");
    }
    for (std::size_t s = 0; s < rec.segments.size(); ++s) {
      const auto& seg = rec.segments[s];
      if (!std::isfinite(seg.start_sec) || !std::isfinite(seg.end_sec) || seg.start_sec < 0.0) {
        throw Error(ErrorKind::kValidation,
                    where + ": segment " + std::to_string(s) + " has an invalid timestamp");
      }
      if (seg.start_sec > seg.end_sec) {
        throw Error(ErrorKind::kValidation,
                    where + ": segment " + std::to_string(s) + " starts after it ends");
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::string format_annotations(std::span<const AnnotationRecord> records) {
  std::string out;
  for (const AnnotationRecord& r : records) {
    nlohmann::json j;
    j["query_id"] = r.query_id;
    j["video_id"] = r.video_id;
    j["fps"] = r.fps;
    j["n_frames"] = r.n_frames;
    j["segments"] = nlohmann::json::array();
    for (const auto& s : r.segments) j["segments"].push_back({s.start_sec, s.end_sec});
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse_annotations(std::string(bytes.begin(), bytes.end()));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.detail());
  }
}

void save_annotations(const std::filesystem::path& path,
                      std::span<const AnnotationRecord> records) {
  write_text_atomic(path, format_annotations(records));
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  check_params_match(ckpt.params, ckpt.config);
  Writer w;
  w.bytes(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(to_u32(ckpt.config.dim, "dim"));
  w.u32(to_u32(ckpt.config.subspaces, "subspaces"));
  w.u32(to_u32(ckpt.config.window, "window"));
  w.u32(kLambdaSigmoidParam);
  w.f64(ckpt.config.lambda_init);
  w.u64(ckpt.config.seed);
  w.u64(ckpt.train_seed);
  std::uint32_t count = 0;
  ckpt.params.visit([&count](const std::string&, const ParamTensor&) { ++count; });
  w.u32(count);
  ckpt.params.visit([&w](const std::string& name, const ParamTensor& t) {
    w.u32(to_u32(name.size(), "tensor name"));
    w.bytes(name.data(), name.size());
    w.u32(to_u32(t.value.rows(), "tensor rows"));
    w.u32(to_u32(t.value.cols(), "tensor cols"));
    for (double v : t.value.values()) w.f64(v);
  });
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes,
                             const CheckpointExpectation& expect) {
  Reader r(bytes, "checkpoint");
  check_magic(r, kCheckpointMagic, "checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::kBadVersion, "checkpoint version " + std::to_string(version) +
                                            ", expected " + std::to_string(kCheckpointVersion));
  }
  Checkpoint ck;
  ck.config.dim = r.u32();
  ck.config.subspaces = r.u32();
  ck.config.window = r.u32();
  const std::uint32_t lambda_param = r.u32();
  ck.config.lambda_init = r.f64();
  ck.config.seed = r.u64();
  ck.train_seed = r.u64();
  if (lambda_param != kLambdaSigmoidParam) {
    throw Error(ErrorKind::kMalformedRecord,
                "unknown lambda parameterization " + std::to_string(lambda_param));
  }
  try {
    ck.config.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::kMalformedRecord, std::string("checkpoint config: ") + e.what());
  }

  auto mismatch = [](const char* field, std::size_t want, std::size_t got) {
    throw Error(ErrorKind::kConfigMismatch, std::string("checkpoint has ") + field + "=" +
                                                std::to_string(got) + ", pipeline expects " +
                                                std::to_string(want));
  };
  if (expect.dim && *expect.dim != ck.config.dim) mismatch("dim", *expect.dim, ck.config.dim);
  if (expect.subspaces && *expect.subspaces != ck.config.subspaces)
    mismatch("subspaces", *expect.subspaces, ck.config.subspaces);
  if (expect.window && *expect.window != ck.config.window)
    mismatch("window", *expect.window, ck.config.window);

  const std::uint32_t count = r.u32();
  std::map<std::string, DenseMatrix> found;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    const auto name_bytes = r.take(name_len);
    std::string name(name_bytes.begin(), name_bytes.end());
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    const std::uint64_t n = std::uint64_t{rows} * cols;
    if (r.remaining() / 8 < n) {
      throw Error(ErrorKind::kTruncated, "checkpoint ends inside tensor " + name);
    }
    std::vector<double> values(static_cast<std::size_t>(n));
    for (double& v : values) v = r.f64();
    if (found.count(name)) throw Error(ErrorKind::kDuplicateTensor, "tensor " + name);
    found.emplace(std::move(name), DenseMatrix(rows, cols, std::move(values)));
  }
  if (r.remaining() != 0) {
    throw Error(ErrorKind::kMalformedRecord,
                "checkpoint has " + std::to_string(r.remaining()) + " trailing bytes");
  }

  ck.params = shaped_for(ck.config);
  std::set<std::string> used;
  ck.params.visit([&](const std::string& name, ParamTensor& t) {
    auto it = found.find(name);
    if (it == found.end()) throw Error(ErrorKind::kMissingTensor, "tensor " + name);
    if (!it->second.same_shape(t.value)) {
      throw Error(ErrorKind::kShapeMismatch,
                  "tensor " + name + " is " + std::to_string(it->second.rows()) + "x" +
                      std::to_string(it->second.cols()) + ", config implies " +
                      std::to_string(t.value.rows()) + "x" + std::to_string(t.value.cols()));
    }
    t = ParamTensor(std::move(it->second));
    used.insert(name);
  });
  for (const auto& [name, _] : found) {
    if (!used.count(name)) throw Error(ErrorKind::kMalformedRecord, "unknown tensor " + name);
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const CheckpointExpectation& expect) {
  try {
    return decode_checkpoint(read_file(path), expect);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kIo) throw;
    throw Error(e.kind(), path.string() + ": " + e.detail());
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::kIo, "read failed for " + path.string());
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot create " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::kIo, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorKind::kIo, "cannot rename onto " + path.string());
  }
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                    text.size()));
}

}  // namespace evsel::io
