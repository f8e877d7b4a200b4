// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

#include "app.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "evsel/error.hpp"
#include "evsel/infotheory.hpp"
#include "evsel/io.hpp"
#include "evsel/kernels.hpp"
#include "evsel/scoring.hpp"
#include "evsel/selection.hpp"
#include "evsel/synthetic.hpp"
#include "evsel/training.hpp"

namespace evsel::app {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Raised for a failed check so the caller can pick the invariant exit code.
struct InvariantFailure {
  std::string what;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string set_str(const info::FrameSet& s) {
  std::string out = "{";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "}";
}

void print_config(std::ostream& out, json config) {
  config["kernels"] = std::string(kernels::backend_name(kernels::active().backend));
  out << "config: " << config.dump() << "\n";
}

json scorer_json(const ScorerConfig& c) {
  return {{"dim", c.dim},
          {"subspaces", c.subspaces},
          {"window", c.window},
          {"lambda_init", c.lambda_init},
          {"seed", c.seed}};
}

json train_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"seed", c.seed},
          {"clip_norm", c.clip_norm ? json(*c.clip_norm) : json(nullptr)}};
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (const char* key : keys) ok = ok || k == key;
    if (!ok) throw Error(ErrorKind::kInvalidArgument, where + ": unknown key '" + k + "'");
  }
}

// Reads the training config file; a missing scorer.dim is left at 0 so the
// caller can take it from the data.
std::pair<ScorerConfig, TrainConfig> read_train_config(const std::string& path) {
  ScorerConfig s;
  s.dim = 0;
  TrainConfig t;
  if (path.empty()) return {s, t};
  const auto bytes = io::read_file(path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
    reject_unknown(j, {"scorer", "train"}, path);
    if (j.contains("scorer")) {
      const json& js = j["scorer"];
      reject_unknown(js, {"dim", "subspaces", "window", "lambda_init", "seed"}, path + " scorer");
      s.dim = js.value("dim", s.dim);
      s.subspaces = js.value("subspaces", s.subspaces);
      s.window = js.value("window", s.window);
      s.lambda_init = js.value("lambda_init", s.lambda_init);
      s.seed = js.value("seed", s.seed);
    }
    if (j.contains("train")) {
      const json& jt = j["train"];
      reject_unknown(jt, {"learning_rate", "epochs", "batch_size", "beta1", "beta2", "epsilon",
                          "seed", "clip_norm"},
                     path + " train");
      t.learning_rate = jt.value("learning_rate", t.learning_rate);
      t.epochs = jt.value("epochs", t.epochs);
      t.batch_size = jt.value("batch_size", t.batch_size);
      t.beta1 = jt.value("beta1", t.beta1);
      t.beta2 = jt.value("beta2", t.beta2);
      t.epsilon = jt.value("epsilon", t.epsilon);
      t.seed = jt.value("seed", t.seed);
      if (jt.contains("clip_norm") && !jt["clip_norm"].is_null()) t.clip_norm = jt["clip_norm"].get<double>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kMalformedRecord, path + ": " + e.what());
  }
  return {s, t};
}

struct ScoreRecord {
  std::string query_id;
  std::vector<double> scores;
};

std::vector<ScoreRecord> read_score_records(const std::string& path) {
  const auto bytes = io::read_file(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::vector<ScoreRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("query_id").get<std::string>(), j.at("scores").get<std::vector<double>>()});
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kMalformedRecord,
                  path + " record " + std::to_string(out.size()) + ": " + e.what());
    }
  }
  return out;
}

std::string query_id_from_path(const fs::path& p) {
  std::string stem = p.filename().string();
  for (const char* suffix : {".evsb", ".query"}) {
    const std::string s(suffix);
    if (stem.size() > s.size() && stem.ends_with(s)) stem.resize(stem.size() - s.size());
  }
  return stem;
}

// oracle --------------------------------------------------------------------

struct OracleOptions {
  std::string fixture;
  std::size_t random_n = 0;
  std::uint64_t seed = 0;
  std::size_t budget = 1;
  std::size_t frame_alphabet = 2;
  std::size_t answer_alphabet = 3;
};

int cmd_oracle(const OracleOptions& o, std::ostream& out) {
  std::string name;
  std::optional<info::DiscreteModel> model;
  if (!o.fixture.empty()) {
    auto fx = info::load_model_fixture(o.fixture);
    name = fx.name.empty() ? fs::path(o.fixture).stem().string() : fx.name;
    model = std::move(fx.model);
  } else {
    if (o.random_n > info::kMaxFrames) {
      throw Error(ErrorKind::kTractabilityGuard,
                  "--random " + std::to_string(o.random_n) + " exceeds the exact-oracle limit of " +
                      std::to_string(info::kMaxFrames) + " frames");
    }
    Prng rng(o.seed);
    model = info::random_factorized_model(o.random_n, o.frame_alphabet, o.answer_alphabet, rng);
    name = "random-factorized";
  }
  const info::DiscreteModel& m = *model;
  json config = {{"command", "oracle"}, {"model", name}, {"budget", o.budget}};
  if (o.fixture.empty()) {
    config["random"] = o.random_n;
    config["seed"] = o.seed;
    config["frame_alphabet"] = o.frame_alphabet;
    config["answer_alphabet"] = o.answer_alphabet;
  } else {
    config["fixture"] = o.fixture;
  }
  print_config(out, config);
  if (o.budget > m.n_frames()) {
    throw Error(ErrorKind::kInvalidArgument, "--budget exceeds the model's frame count");
  }

  out << "model: " << name << " frames=" << m.n_frames() << " answer_alphabet=" << m.answer_alphabet()
      << " factorized=" << (m.factorized() ? "yes" : "no") << "\n";
  out << "H(O) = " << fmt(info::answer_entropy(m)) << " nats\n";
  for (std::size_t f = 0; f < m.n_frames(); ++f) {
    const std::size_t s[1] = {f};
    out << "F({" << f << "}) = " << fmt(info::conditional_mi(m, s)) << "\n";
  }

  bool ok = true;
  const auto exhaustive = info::exhaustive_select(m, o.budget);
  const auto greedy = info::greedy_select(m, o.budget);
  const double ratio = exhaustive.value > 0.0 ? greedy.value / exhaustive.value : 1.0;
  const double bound = 1.0 - std::exp(-1.0);
  out << "exhaustive: " << set_str(exhaustive.subset) << " F = " << fmt(exhaustive.value) << "\n";
  out << "greedy:     " << set_str(greedy.subset) << " F = " << fmt(greedy.value) << "\n";
  out << "greedy/OPT = " << fmt(ratio) << " (guarantee " << fmt(bound) << ")\n";

  const double ub_ex = info::modular_upper_bound(m, exhaustive.subset);
  const double ub_gr = info::modular_upper_bound(m, greedy.subset);
  out << "modular bound: exhaustive " << fmt(ub_ex) << " greedy " << fmt(ub_gr) << "\n";
  const auto ll = info::verify_loglik_equivalence(m, o.budget);
  out << "loglik argmax: " << set_str(ll.by_loglik.subset)
      << " E[log p(O|S)] = " << fmt(ll.by_loglik.value)
      << " coincides with F argmax: " << (ll.coincide ? "yes" : "no") << "\n";
  if (!ll.coincide) ok = false;

  std::size_t mono = 0, submod = 0;
  if (m.n_frames() <= info::kMaxSubmodularCheckFrames) {
    for (const auto& v : info::check_submodular(m))
      (v.kind == info::ViolationKind::kMonotonicity ? mono : submod)++;
    out << "monotonicity violations: " << mono << "\n";
    out << "submodularity violations: " << submod;
    if (submod > 0 && !m.factorized()) out << " (expected counterexample: model is not factorized)";
    out << "\n";
    if (mono > 0) ok = false;
  } else {
    out << "submodularity check: skipped (n_frames > " << info::kMaxSubmodularCheckFrames << ")\n";
  }

  if (m.factorized()) {
    if (submod > 0) ok = false;
    if (greedy.value < bound * exhaustive.value - info::kViolationTolerance) ok = false;
    if (ub_ex < exhaustive.value - info::kViolationTolerance ||
        ub_gr < greedy.value - info::kViolationTolerance)
      ok = false;
  }
  out << "result: " << (ok ? "PASS" : "FAIL") << "\n";
  if (!ok) throw InvariantFailure{"oracle invariants violated"};
  return kExitOk;
}

// train ---------------------------------------------------------------------

struct TrainOptions {
  std::string embeddings;
  std::string annotations;
  std::string config;
  std::string out;
  std::string loss_log;
};

int cmd_train(const TrainOptions& o, std::ostream& out) {
  auto [sconf, tconf] = read_train_config(o.config);
  const auto records = io::load_annotations(o.annotations);
  std::vector<TrainingExample> dataset;
  for (const auto& rec : records) {
    TrainingExample ex;
    ex.frames = io::load_embeddings(synth::frames_path(o.embeddings, rec.video_id)).to_dense();
    const auto q = io::load_embeddings(synth::query_path(o.embeddings, rec.query_id));
    if (q.n != 1) {
      throw Error(ErrorKind::kValidation, "query embedding for " + rec.query_id + " has " +
                                              std::to_string(q.n) + " rows, expected 1");
    }
    ex.query.assign(q.values.begin(), q.values.end());
    if (ex.frames.rows() != rec.n_frames) {
      throw Error(ErrorKind::kValidation, "video " + rec.video_id + " has " +
                                              std::to_string(ex.frames.rows()) +
                                              " frames, annotation says " +
                                              std::to_string(rec.n_frames));
    }
    if (sconf.dim == 0) sconf.dim = ex.frames.cols();
    if (ex.frames.cols() != sconf.dim || ex.query.size() != sconf.dim) {
      throw Error(ErrorKind::kConfigMismatch, "embeddings for " + rec.video_id +
                                                  " have width " +
                                                  std::to_string(ex.frames.cols()) +
                                                  ", scorer dim is " + std::to_string(sconf.dim));
    }
    ex.positive = label_frames(rec.segments, ex.frames.rows(), rec.fps);
    dataset.push_back(std::move(ex));
  }
  if (sconf.dim == 0) sconf.dim = 768;
  const std::string loss_log = o.loss_log.empty() ? o.out + ".loss.txt" : o.loss_log;
  print_config(out, {{"command", "train"},
                     {"embeddings", o.embeddings},
                     {"annotations", o.annotations},
                     {"out", o.out},
                     {"loss_log", loss_log},
                     {"scorer", scorer_json(sconf)},
                     {"train", train_json(tconf)}});

  std::string log;
  TrainResult result;
  try {
    result = train(dataset, sconf, tconf, [&](std::size_t epoch, double loss) {
      out << "epoch " << epoch + 1 << " mean_loss " << fmt(loss) << "\n";
      char line[64];
      std::snprintf(line, sizeof line, "%zu %.17g\n", epoch + 1, loss);
      log += line;
    });
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kNonFinite) throw InvariantFailure{e.what()};
    throw;
  }
  io::save_checkpoint(o.out, {sconf, result.params, tconf.seed});
  io::write_text_atomic(loss_log, log);
  char digest[32];
  std::snprintf(digest, sizeof digest, "%016llx",
                static_cast<unsigned long long>(result.report.params_checksum));
  out << "examples used " << result.report.used << " skipped " << result.report.skipped << "\n";
  out << "checkpoint " << o.out << " params_checksum " << digest << "\n";
  return kExitOk;
}

// score ---------------------------------------------------------------------

struct ScoreOptions {
  std::string ckpt, video, query, out, query_id;
};

int cmd_score(const ScoreOptions& o, std::ostream& out) {
  const auto ck = io::load_checkpoint(o.ckpt);
  const FrameSequence frames = io::load_embeddings(o.video).to_dense();
  const auto q = io::load_embeddings(o.query);
  if (q.n != 1) {
    throw Error(ErrorKind::kValidation, "query embedding has " + std::to_string(q.n) +
                                            " rows, expected 1");
  }
  if (frames.cols() != ck.config.dim || q.d != ck.config.dim) {
    throw Error(ErrorKind::kConfigMismatch,
                "embedding width " + std::to_string(frames.cols()) + "/" + std::to_string(q.d) +
                    " does not match checkpoint dim " + std::to_string(ck.config.dim));
  }
  const std::string qid = o.query_id.empty() ? query_id_from_path(o.query) : o.query_id;
  print_config(out, {{"command", "score"},
                     {"ckpt", o.ckpt},
                     {"video_emb", o.video},
                     {"query_emb", o.query},
                     {"query_id", qid},
                     {"out", o.out},
                     {"scorer", scorer_json(ck.config)}});
  const std::vector<double> query(q.values.begin(), q.values.end());
  const auto scores = score_frames(frames, query, ck.params, ck.config);
  json rec = {{"query_id", qid}, {"scores", scores}};
  io::write_text_atomic(o.out, rec.dump() + "\n");
  out << "scored " << scores.size() << " frames -> " << o.out << "\n";
  return kExitOk;
}

// select / eval-coverage ----------------------------------------------------

struct SelectOptions {
  std::string scores, out;
  std::size_t bins = 1;
  std::size_t per_bin = 1;
  bool uniform = false;
};

int cmd_select(const SelectOptions& o, std::ostream& out) {
  const SelectionConfig cfg{o.bins, o.per_bin};
  cfg.validate();
  print_config(out, {{"command", "select"},
                     {"scores", o.scores},
                     {"bins", o.bins},
                     {"per_bin", o.per_bin},
                     {"budget", cfg.budget()},
                     {"mode", o.uniform ? "uniform" : "scored"},
                     {"out", o.out}});
  std::string text;
  for (const auto& rec : read_score_records(o.scores)) {
    const Selection sel = o.uniform ? with_scores(uniform_select(rec.scores.size(), cfg.budget()),
                                                  rec.scores)
                                    : select(rec.scores, cfg);
    json j = {{"query_id", rec.query_id}, {"indices", sel.indices}, {"scores", sel.scores}};
    text += j.dump() + "\n";
  }
  if (o.out.empty()) {
    out << text;
  } else {
    io::write_text_atomic(o.out, text);
    out << "selections -> " << o.out << "\n";
  }
  return kExitOk;
}

struct CoverageOptions {
  std::string selections, annotations;
};

int cmd_eval_coverage(const CoverageOptions& o, std::ostream& out) {
  print_config(out, {{"command", "eval-coverage"},
                     {"selections", o.selections},
                     {"annotations", o.annotations}});
  std::map<std::string, io::AnnotationRecord> by_query;
  for (auto& rec : io::load_annotations(o.annotations)) by_query[rec.query_id] = rec;
  std::vector<CoverageCase> cases;
  const auto bytes = io::read_file(o.selections);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    CoverageCase c;
    std::string qid;
    try {
      const json j = json::parse(line);
      qid = j.at("query_id").get<std::string>();
      c.selection.indices = j.at("indices").get<std::vector<std::size_t>>();
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kMalformedRecord, o.selections + " record " +
                                                   std::to_string(cases.size()) + ": " + e.what());
    }
    auto it = by_query.find(qid);
    if (it == by_query.end()) {
      throw Error(ErrorKind::kValidation, "no annotation for query " + qid);
    }
    c.segments = it->second.segments;
    c.fps = it->second.fps;
    cases.push_back(std::move(c));
  }
  const double rate = coverage_rate(cases);
  std::size_t hit = 0;
  for (const auto& c : cases) hit += coverage(c.selection, c.segments, c.fps) ? 1 : 0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * rate);
  out << "coverage: " << buf << " (" << hit << "/" << cases.size() << ")\n";
  return kExitOk;
}

// gradcheck -----------------------------------------------------------------

struct GradcheckOptions {
  std::uint64_t seed = 0;
  std::size_t instances = 20;
  std::size_t frames = 4, dim = 6, subspaces = 2, window = 2;
  double eps = 1e-5;
  double tolerance = 1e-4;
  std::string fault = "none";
};

int cmd_gradcheck(const GradcheckOptions& o, std::ostream& out) {
  GradientFault fault = GradientFault::kNone;
  if (o.fault == "negate-gate-bias") {
    fault = GradientFault::kNegateGateBias;
  } else if (o.fault != "none") {
    throw Error(ErrorKind::kInvalidArgument, "unknown --inject-fault " + o.fault);
  }
  print_config(out, {{"command", "gradcheck"},
                     {"seed", o.seed},
                     {"instances", o.instances},
                     {"frames", o.frames},
                     {"dim", o.dim},
                     {"subspaces", o.subspaces},
                     {"window", o.window},
                     {"eps", o.eps},
                     {"tolerance", o.tolerance},
                     {"inject_fault", o.fault}});
  double worst = 0.0;
  for (std::size_t i = 0; i < o.instances; ++i) {
    const auto inst = random_gradcheck_instance(o.frames, o.dim, o.subspaces, o.window, o.seed + i);
    const auto r = gradient_check(inst.example, inst.params, inst.config, o.eps, fault);
    out << "instance " << i << " seed " << o.seed + i << " max_rel_err " << fmt(r.max_relative_error)
        << " at " << r.worst_tensor << "[" << r.worst_index << "]\n";
    worst = std::max(worst, r.max_relative_error);
  }
  const bool pass = worst < o.tolerance;
  out << "max relative error " << fmt(worst) << " -> " << (pass ? "PASS" : "FAIL") << "\n";
  if (!pass) throw InvariantFailure{"gradient check failed"};
  return kExitOk;
}

// synth ---------------------------------------------------------------------

struct SynthOptions {
  std::string out;
  synth::PlantedCorpusConfig corpus;
};

int cmd_synth(const SynthOptions& o, std::ostream& out) {
  const auto& c = o.corpus;
  print_config(out, {{"command", "synth"},
                     {"out", o.out},
                     {"dim", c.dim},
                     {"videos", c.videos},
                     {"frames", c.frames_per_video},
                     {"fps", c.fps},
                     {"segment_min", c.segment_min_frames},
                     {"segment_max", c.segment_max_frames},
                     {"scenes", c.scenes},
                     {"signal", c.signal},
                     {"noise", c.noise},
                     {"seed", c.seed}});
  const auto corpus = synth::planted_corpus(c);
  const auto records = synth::write_corpus(o.out, corpus);
  io::save_annotations(fs::path(o.out) / "annotations.jsonl", records);
  out << "wrote " << records.size() << " videos to " << o.out << "\n";
  return kExitOk;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNonFinite:
      return kExitInvariant;
    default:
      return kExitInput;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"evsel: evidence-driven keyframe selection"};
  app.require_subcommand(1);
  app.allow_extras(false);
  std::string backend;
  app.add_option("--kernels", backend, "Kernel backend: scalar, avx2 or neon");

  OracleOptions oracle;
  auto* c_oracle = app.add_subcommand("oracle", "Exact information-theoretic oracle");
  auto* fixture_opt = c_oracle->add_option("--model-fixture", oracle.fixture, "Model fixture JSON");
  auto* random_opt = c_oracle->add_option("--random", oracle.random_n, "Random factorized model with N frames");
  fixture_opt->excludes(random_opt);
  c_oracle->add_option("--seed", oracle.seed, "Seed for --random");
  c_oracle->add_option("--budget", oracle.budget, "Frame budget m")->required();
  c_oracle->add_option("--frame-alphabet", oracle.frame_alphabet, "Alphabet per frame for --random");
  c_oracle->add_option("--answer-alphabet", oracle.answer_alphabet, "Answer alphabet for --random");

  TrainOptions trainopt;
  auto* c_train = app.add_subcommand("train", "Train the evidence scorer");
  c_train->add_option("--embeddings", trainopt.embeddings, "Embedding directory")->required();
  c_train->add_option("--annotations", trainopt.annotations, "Annotation JSONL")->required();
  c_train->add_option("--config", trainopt.config, "Training config JSON");
  c_train->add_option("--out", trainopt.out, "Checkpoint path")->required();
  c_train->add_option("--loss-log", trainopt.loss_log, "Loss log path (default <out>.loss.txt)");

  ScoreOptions scoreopt;
  auto* c_score = app.add_subcommand("score", "Score the frames of one video for one query");
  c_score->add_option("--ckpt", scoreopt.ckpt, "Checkpoint")->required();
  c_score->add_option("--video-emb", scoreopt.video, "Frame embedding file")->required();
  c_score->add_option("--query-emb", scoreopt.query, "Query embedding file")->required();
  c_score->add_option("--out", scoreopt.out, "Score file (JSONL)")->required();
  c_score->add_option("--query-id", scoreopt.query_id, "Query id (default from file name)");

  SelectOptions selopt;
  auto* c_select = app.add_subcommand("select", "Select frames from score files");
  c_select->add_option("--scores", selopt.scores, "Score file (JSONL)")->required();
  c_select->add_option("--bins", selopt.bins, "Number of temporal bins B")->required();
  c_select->add_option("--per-bin", selopt.per_bin, "Frames per bin")->required();
  c_select->add_flag("--uniform", selopt.uniform, "Evenly spaced baseline with budget B*K");
  c_select->add_option("--out", selopt.out, "Selection file (default stdout)");

  CoverageOptions covopt;
  auto* c_cov = app.add_subcommand("eval-coverage", "Evidence coverage of selections");
  c_cov->add_option("--selections", covopt.selections, "Selection file (JSONL)")->required();
  c_cov->add_option("--annotations", covopt.annotations, "Annotation JSONL")->required();

  GradcheckOptions gcopt;
  auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  c_gc->add_option("--seed", gcopt.seed, "First instance seed");
  c_gc->add_option("--instances", gcopt.instances, "Number of random instances");
  c_gc->add_option("--frames", gcopt.frames, "Frames per instance");
  c_gc->add_option("--dim", gcopt.dim, "Embedding width");
  c_gc->add_option("--subspaces", gcopt.subspaces, "Subspace heads K");
  c_gc->add_option("--window", gcopt.window, "Aggregator window");
  c_gc->add_option("--eps", gcopt.eps, "Finite-difference step");
  c_gc->add_option("--tolerance", gcopt.tolerance, "Maximum allowed relative error");
  c_gc->add_option("--inject-fault", gcopt.fault, "Corrupt a gradient path (testing)")
      ->group("");

  SynthOptions synopt;
  auto* c_syn = app.add_subcommand("synth", "Write a synthetic planted-evidence corpus");
  c_syn->add_option("--out", synopt.out, "Output directory")->required();
  c_syn->add_option("--videos", synopt.corpus.videos, "Number of videos");
  c_syn->add_option("--frames", synopt.corpus.frames_per_video, "Frames per video");
  c_syn->add_option("--dim", synopt.corpus.dim, "Embedding width");
  c_syn->add_option("--fps", synopt.corpus.fps, "Frames per second");
  c_syn->add_option("--segment-min", synopt.corpus.segment_min_frames, "Shortest evidence segment (frames)");
  c_syn->add_option("--segment-max", synopt.corpus.segment_max_frames, "Longest evidence segment (frames)");
  c_syn->add_option("--scenes", synopt.corpus.scenes, "Scene changes per video");
  c_syn->add_option("--signal", synopt.corpus.signal, "Query component in evidence frames");
  c_syn->add_option("--noise", synopt.corpus.noise, "Per-frame noise norm");
  c_syn->add_option("--seed", synopt.corpus.seed, "Seed");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (!backend.empty()) {
      const auto b = kernels::parse_backend(backend);
      if (!b || !kernels::set_kernel_backend(*b)) {
        err << "error: kernel backend '" << backend << "' is not available\n";
        return kExitInput;
      }
    }
    if (*c_oracle) {
      if (oracle.fixture.empty() && random_opt->count() == 0) {
        err << "error: oracle needs --model-fixture or --random\n";
        return kExitInput;
      }
      return cmd_oracle(oracle, out);
    }
    if (*c_train) return cmd_train(trainopt, out);
    if (*c_score) return cmd_score(scoreopt, out);
    if (*c_select) return cmd_select(selopt, out);
    if (*c_cov) return cmd_eval_coverage(covopt, out);
    if (*c_gc) return cmd_gradcheck(gcopt, out);
    if (*c_syn) return cmd_synth(synopt, out);
  } catch (const InvariantFailure& f) {
    err << "invariant failure: " << f.what << "\n";
    return kExitInvariant;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace evsel::app
