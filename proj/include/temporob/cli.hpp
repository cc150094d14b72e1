// Copyright 2026 The temporob Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Subcommand front-end. dispatch() parses argv, records the resolved
// configuration next to the outputs and runs one pipeline stage.
//
// Exit codes: 0 success, 1 runtime failure (one JSON line on stderr),
// 2 usage error.

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "temporob/annotations.hpp"
#include "temporob/error.hpp"
#include "temporob/evalclient.hpp"
#include "temporob/io.hpp"
#include "temporob/metrics.hpp"
#include "temporob/panodpo.hpp"
#include "temporob/perturb.hpp"
#include "temporob/plot.hpp"
#include "temporob/prefdata.hpp"

namespace temporob::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Environment variables read by the network subcommands.
inline constexpr const char* kApiKeyEnv = "TEMPOROB_API_KEY";
inline constexpr const char* kGeneratorModelEnv = "TEMPOROB_GENERATOR_MODEL";

/// Every flag of every subcommand, with its default.
struct Options {
  std::string subcommand;

  // build-bench
  std::string annotations;
  std::string perturb = "all";

  // evaluate
  std::string bench;
  std::string endpoint;
  std::string model;
  std::string mock;
  int rounds = 1;
  std::string setting = "both";
  std::size_t max_concurrency = 4;

  // score
  std::string clean;
  std::string adv;
  bool csv = false;

  // make-prefs
  std::string in;
  std::string video_mode = "shuffle";
  std::string generator_endpoint;
  bool stub = false;

  // train-toy
  std::string prefs;
  std::string loss = "panodpo";
  double beta = TrainConfig{}.beta;
  int epochs = TrainConfig{}.epochs;
  std::size_t batch = TrainConfig{}.batch;
  double lr = TrainConfig{}.lr;

  // gap
  std::string ckpt;

  // shared
  std::string out;
  std::uint64_t seed = 0;
};

struct RunConfig {
  std::string subcommand;
  nlohmann::json options;
  /// File the configuration is written to.
  fs::path path;
};

/// Builds the flag grammar, binding every option to `o`.
inline std::unique_ptr<CLI::App> make_app(Options& o) {
  auto app = std::make_unique<CLI::App>("Temporal-shortcut benchmark and preference-training toolkit",
                                        "temporob");
  app->require_subcommand(1);
  app->fallthrough(false);

  auto* bb = app->add_subcommand("build-bench", "Build clean and adversarial benchmark items");
  bb->add_option("--annotations", o.annotations, "Annotation manifest (JSONL)")->required();
  bb->add_option("--out", o.out, "Benchmark output (JSONL)")->required();
  bb->add_option("--seed", o.seed, "Seed")->capture_default_str();
  bb->add_option("--perturb", o.perturb, "Perturbation family")
      ->check(CLI::IsMember({"intrinsic-light", "intrinsic-severe", "extrinsic-absolute",
                             "extrinsic-relative", "all"}))
      ->capture_default_str();

  auto* ev = app->add_subcommand("evaluate", "Query a model or mock over a benchmark");
  ev->add_option("--bench", o.bench, "Benchmark (JSONL)")->required();
  ev->add_option("--out", o.out, "Response log (JSONL, appended and resumed)")->required();
  auto* src = ev->add_option_group("source");
  auto* ep = src->add_option("--endpoint", o.endpoint, "Chat-completions base URL");
  src->add_option("--mock", o.mock,
                  "always_correct | always_shortcut | fixed_letter:X | seeded_uniform:N");
  src->require_option(1);
  ev->add_option("--model", o.model, "Model name sent to the endpoint")->needs(ep);
  ep->needs(ev->get_option("--model"));
  ev->add_option("--rounds", o.rounds, "1, or 4 rotated option rounds")
      ->check(CLI::IsMember({1, 4}))
      ->capture_default_str();
  ev->add_option("--setting", o.setting, "Which variants to query")
      ->check(CLI::IsMember({"clean", "adversarial", "both"}))
      ->capture_default_str();
  ev->add_option("--max-concurrency", o.max_concurrency, "Requests in flight")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  auto* sc = app->add_subcommand("score", "Compute Acc, FR, WFR and T-Acc");
  sc->add_option("--clean", o.clean, "Clean-setting log (JSONL)")->required();
  sc->add_option("--adv", o.adv, "Adversarial-setting log (JSONL)")->required();
  sc->add_option("--out", o.out, "Report (JSON)")->required();
  sc->add_flag("--csv", o.csv, "Also write the per-severity table as CSV");

  auto* mp = app->add_subcommand("make-prefs", "Expand base preferences into training tuples");
  mp->add_option("--in", o.in, "Base preferences (JSONL)")->required();
  mp->add_option("--out", o.out, "Preference tuples (JSONL)")->required();
  mp->add_option("--video-mode", o.video_mode, "Rejected-video transform")
      ->check(CLI::IsMember({"shuffle", "crop", "replace"}))
      ->capture_default_str();
  auto* gen = mp->add_option_group("generator");
  gen->add_option("--generator-endpoint", o.generator_endpoint, "Chat-completions base URL");
  gen->add_flag("--stub", o.stub, "Deterministic negation generator");
  gen->require_option(1);
  mp->add_option("--seed", o.seed, "Seed")->capture_default_str();

  auto* tt = app->add_subcommand("train-toy", "Train the toy policy with DPO or PanoDPO");
  tt->add_option("--prefs", o.prefs, "Preference tuples (JSONL)")->required();
  tt->add_option("--out", o.out, "Output directory")->required();
  tt->add_option("--loss", o.loss, "Objective")
      ->check(CLI::IsMember({"dpo", "panodpo"}))
      ->capture_default_str();
  tt->add_option("--beta", o.beta, "Preference temperature")->capture_default_str();
  tt->add_option("--epochs", o.epochs, "Epochs")->check(CLI::NonNegativeNumber)->capture_default_str();
  tt->add_option("--batch", o.batch, "Batch size")->check(CLI::PositiveNumber)->capture_default_str();
  tt->add_option("--lr", o.lr, "Peak learning rate")->check(CLI::NonNegativeNumber)->capture_default_str();
  tt->add_option("--seed", o.seed, "Seed")->capture_default_str();

  auto* gp = app->add_subcommand("gap", "Per-item likelihood gap of a trained policy");
  gp->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
  gp->add_option("--bench", o.bench, "Benchmark (JSONL)")->required();
  gp->add_option("--out", o.out, "Per-item gap table (CSV)")->required();

  auto* rp = app->add_subcommand("report", "Table and bar chart from a score report");
  rp->add_option("--in", o.in, "Report (JSON) written by score")->required();
  rp->add_option("--out", o.out, "Output directory")->required();

  for (auto* sub : app->get_subcommands({})) sub->allow_extras(false);
  return app;
}

inline TrainConfig train_config(const Options& o) {
  TrainConfig c;
  c.beta = o.beta;
  c.epochs = o.epochs;
  c.batch = o.batch;
  c.lr = o.lr;
  c.seed = o.seed;
  c.loss.kind = parse_loss_kind(o.loss);
  return c;
}

/// The resolved configuration of one run, as recorded in run_config.json.
inline RunConfig resolve(const Options& o) {
  using nlohmann::json;
  RunConfig rc{o.subcommand, json::object(), {}};
  json& j = rc.options;
  const std::string& s = o.subcommand;
  if (s == "build-bench") {
    j = {{"annotations", o.annotations}, {"out", o.out}, {"seed", o.seed}, {"perturb", o.perturb}};
  } else if (s == "evaluate") {
    j = {{"bench", o.bench},
         {"out", o.out},
         {"rounds", o.rounds},
         {"setting", o.setting},
         {"max_concurrency", o.max_concurrency}};
    if (!o.mock.empty()) {
      j["mock"] = o.mock;
    } else {
      j["endpoint"] = o.endpoint;
      j["model"] = o.model;
      j["auth_env"] = std::getenv(kApiKeyEnv) ? kApiKeyEnv : "";
    }
  } else if (s == "score") {
    j = {{"clean", o.clean}, {"adv", o.adv}, {"out", o.out}, {"csv", o.csv}};
  } else if (s == "make-prefs") {
    j = {{"in", o.in}, {"out", o.out}, {"video_mode", o.video_mode}, {"seed", o.seed}};
    if (o.stub) {
      j["generator"] = "stub";
    } else {
      j["generator"] = "remote";
      j["generator_endpoint"] = o.generator_endpoint;
      const char* m = std::getenv(kGeneratorModelEnv);
      j["generator_model"] = m ? m : "default";
      j["perturbation_prompt_version"] = kPerturbationPromptVersion;
    }
  } else if (s == "train-toy") {
    const TrainConfig c = train_config(o);
    const ToyModelConfig m;
    j = {{"prefs", o.prefs},
         {"out", o.out},
         {"loss", o.loss},
         {"beta", c.beta},
         {"epochs", c.epochs},
         {"batch", c.batch},
         {"lr", c.lr},
         {"schedule", c.schedule == Schedule::cosine ? "cosine" : "constant"},
         {"warmup_ratio", c.warmup_ratio},
         {"flip_dpo_t", c.loss.flip_dpo_t},
         {"adam", {{"beta1", c.adam_beta1}, {"beta2", c.adam_beta2}, {"eps", c.adam_eps}}},
         {"model", {{"dim", m.dim}, {"hidden", m.hidden}, {"init_scale", m.init_scale}}},
         {"seed", c.seed}};
  } else if (s == "gap") {
    j = {{"ckpt", o.ckpt}, {"bench", o.bench}, {"out", o.out}};
  } else if (s == "report") {
    j = {{"in", o.in}, {"out", o.out}};
  }
  const bool dir_output = s == "train-toy" || s == "report";
  rc.path = dir_output ? fs::path(o.out) / "run_config.json" : fs::path(o.out + ".run_config.json");
  return rc;
}

inline void write_run_config(const RunConfig& rc) {
  const nlohmann::json j = {{"subcommand", rc.subcommand}, {"options", rc.options}};
  write_file(rc.path, j.dump(2) + "\n");
}

/// Parses argv without running anything. Returns the exit code on a usage
/// error or help request.
inline std::optional<int> parse(int argc, const char* const* argv, Options& o, std::ostream& out,
                                std::ostream& err) {
  auto app = make_app(o);
  try {
    app->parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app->exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  for (auto* sub : app->get_subcommands())
    if (sub->parsed()) o.subcommand = sub->get_name();
  return std::nullopt;
}

namespace detail {

inline std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e)) return "parse_error";
  if (dynamic_cast<const ValidationError*>(&e)) return "validation_error";
  if (dynamic_cast<const EmptyDatasetError*>(&e)) return "empty_dataset";
  if (dynamic_cast<const TooFewEventsError*>(&e)) return "too_few_events";
  if (dynamic_cast<const ConstructionError*>(&e)) return "construction_error";
  if (dynamic_cast<const IncompleteRoundsError*>(&e)) return "incomplete_rounds";
  if (dynamic_cast<const VocabularyError*>(&e)) return "vocabulary_error";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric_error";
  if (dynamic_cast<const IoError*>(&e)) return "io_error";
  if (dynamic_cast<const TransportError*>(&e)) return "transport_error";
  if (dynamic_cast<const GenerationError*>(&e)) return "generation_error";
  if (dynamic_cast<const PreconditionError*>(&e)) return "precondition_error";
  if (dynamic_cast<const nlohmann::json::exception*>(&e)) return "parse_error";
  return "internal_error";
}

inline void note(std::ostream& err, const std::string& sub, const nlohmann::json& fields) {
  nlohmann::json j = {{"subcommand", sub}};
  j.update(fields);
  err << j.dump() << "\n";
}

inline std::vector<std::pair<Modality, Severity>> perturbation_families(const std::string& name) {
  if (name == "intrinsic-light") return {{Modality::intrinsic, Severity::light}};
  if (name == "intrinsic-severe") return {{Modality::intrinsic, Severity::severe}};
  if (name == "extrinsic-absolute") return {{Modality::extrinsic, Severity::absolute}};
  if (name == "extrinsic-relative") return {{Modality::extrinsic, Severity::relative}};
  return {{Modality::intrinsic, Severity::light},
          {Modality::intrinsic, Severity::severe},
          {Modality::extrinsic, Severity::absolute},
          {Modality::extrinsic, Severity::relative}};
}

inline fs::path sibling(const fs::path& p, const std::string& ext) {
  fs::path q = p;
  q.replace_extension(ext);
  if (q == p) q += ext;
  return q;
}

/// Resolves a path from a data file relative to that file's directory.
inline fs::path resolve_from(const fs::path& data_file, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : data_file.parent_path() / path;
}

/// `target` relative to the directory of `data_file` when it lies below
/// that directory, otherwise absolute.
inline std::string relative_to(const fs::path& data_file, const fs::path& target) {
  const fs::path base = fs::absolute(data_file).parent_path().lexically_normal();
  const fs::path abs = fs::absolute(target).lexically_normal();
  const fs::path rel = abs.lexically_relative(base);
  if (rel.empty() || *rel.begin() == "..") return abs.generic_string();
  return rel.generic_string();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands

inline int run_build_bench(const Options& o, std::ostream& err) {
  const auto records = parse_annotations(read_file(o.annotations));
  if (records.empty()) throw EmptyDatasetError();
  std::vector<BenchmarkItem> items;
  std::size_t skipped = 0;
  for (const auto& rec : records) {
    for (const auto& [m, s] : detail::perturbation_families(o.perturb)) {
      try {
        auto [clean, adv] = build_item(rec, m, s, o.seed);
        items.push_back(std::move(clean));
        items.push_back(std::move(adv));
      } catch (const ConstructionError& e) {
        ++skipped;
        detail::note(err, o.subcommand, {{"skipped", rec.video_id}, {"reason", e.what()}});
      }
    }
  }
  write_file(o.out, serialize_benchmark(items));
  detail::note(err, o.subcommand,
               {{"videos", records.size()}, {"items", items.size()}, {"skipped", skipped}});
  return kExitOk;
}

inline int run_evaluate(const Options& o, std::ostream& err) {
  const auto bench = parse_benchmark(read_file(o.bench));
  EvalOptions eo;
  eo.rounds = o.rounds;
  if (o.setting != "both") eo.setting = parse_setting(o.setting);
  eo.max_concurrency = o.max_concurrency;
  std::unique_ptr<Responder> responder;
  if (!o.mock.empty()) {
    responder = std::make_unique<MockResponder>(MockPolicy::parse(o.mock));
  } else {
    EndpointConfig cfg;
    cfg.base_url = o.endpoint;
    cfg.model_name = o.model;
    cfg.max_concurrency = o.max_concurrency;
    if (std::getenv(kApiKeyEnv)) cfg.auth_token_env_name = kApiKeyEnv;
    const auto origin = split_endpoint(o.endpoint).first;
    responder = std::make_unique<ChatResponder>(
        cfg, std::make_shared<HttpTransport>(origin, cfg.timeout));
  }
  const EvalSummary s = run_evaluation(bench, *responder, eo, o.out);
  detail::note(err, o.subcommand,
               {{"written", s.written}, {"skipped", s.skipped}, {"failed", s.failed}});
  if (s.failed > 0)
    throw TransportError(std::to_string(s.failed) + " of " + std::to_string(s.written) +
                         " requests failed; see the error field in the log");
  return kExitOk;
}

inline int run_score(const Options& o, std::ostream&) {
  const auto clean = parse_eval_log(read_file(o.clean));
  const auto adv = parse_eval_log(read_file(o.adv));
  const MetricReport rep = build_report(clean, adv);
  write_file(o.out, to_json(rep).dump(2) + "\n");
  if (o.csv) write_file(detail::sibling(o.out, ".csv"), report_to_csv(rep));
  return kExitOk;
}

inline int run_make_prefs(const Options& o, std::ostream& err) {
  const fs::path in(o.in), out(o.out);
  auto base = parse_base_preferences(read_file(in));
  if (base.empty()) throw EmptyDatasetError();
  std::unique_ptr<TextGenerator> gen;
  if (o.stub) {
    gen = std::make_unique<StubGenerator>();
  } else {
    EndpointConfig cfg;
    cfg.base_url = o.generator_endpoint;
    const char* m = std::getenv(kGeneratorModelEnv);
    cfg.model_name = m ? m : "default";
    if (std::getenv(kApiKeyEnv)) cfg.auth_token_env_name = kApiKeyEnv;
    gen = std::make_unique<RemoteGenerator>(
        cfg, std::make_shared<HttpTransport>(split_endpoint(cfg.base_url).first, cfg.timeout));
  }
  BuildPrefOptions bo;
  bo.video_mode = parse_reject_mode(o.video_mode);
  bo.seed = o.seed;
  bo.video_root = fs::absolute(in).parent_path();
  BuildPrefResult res = build_pref_tuples(base, *gen, bo);
  for (const auto& [id, reason] : res.skipped)
    detail::note(err, o.subcommand, {{"skipped", id}, {"reason", reason}});

  // Rejected videos go to <out stem>_frames/<tuple>/; paths in the output
  // are relative to the output file.
  const fs::path frames_root = out.parent_path() / (out.stem().string() + "_frames");
  for (auto& t : res.tuples) {
    std::string dir_name = t.tuple_id;
    for (char& c : dir_name)
      if (c == '/' || c == ':' || c == '\\') c = '_';
    const fs::path dir = frames_root / dir_name;
    if (fs::exists(dir)) fs::remove_all(dir);
    save_frame_dir(*t.rejected_video, dir);
    t.rejected_video_path = detail::relative_to(out, dir);
    t.video_path = detail::relative_to(out, detail::resolve_from(in, t.video_path));
  }
  write_file(out, serialize_preferences(res.tuples));
  detail::note(err, o.subcommand, {{"tuples", res.tuples.size()}, {"skipped", res.skipped.size()}});
  if (res.tuples.empty()) throw EmptyDatasetError();
  return kExitOk;
}

inline int run_train_toy(const Options& o, std::ostream& err) {
  const fs::path prefs(o.prefs), out_dir(o.out);
  const auto tuples = parse_preferences(read_file(prefs));
  if (tuples.empty()) throw EmptyDatasetError();
  std::map<std::string, std::vector<std::string>> cache;
  auto video_tokens = [&](const std::string& p) -> std::vector<std::string> {
    auto it = cache.find(p);
    if (it == cache.end())
      it = cache.emplace(p, frame_tokens(load_frame_dir(detail::resolve_from(prefs, p)))).first;
    return it->second;
  };
  const Vocab vocab = Vocab::from_tokens(corpus_tokens(tuples, video_tokens));
  std::vector<PanoExample> data;
  for (const auto& t : tuples) data.push_back(to_example(t, vocab, video_tokens));

  const TrainConfig cfg = train_config(o);
  const ToyModelConfig model;
  const ToyPolicyParams init =
      ToyPolicyParams::random(vocab.size(), model.dim, model.hidden, o.seed, model.init_scale);
  const TrainResult res = train(PolicyPair(init), data, cfg);

  const nlohmann::json meta = {{"loss", o.loss}, {"seed", o.seed}, {"steps", res.steps}};
  write_file(out_dir / "init.ckpt", serialize_checkpoint(init, vocab, {{"role", "reference"}}));
  write_file(out_dir / "policy.ckpt", serialize_checkpoint(res.theta, vocab, meta));
  write_file(out_dir / "history.csv", history_to_csv(res.history));
  const auto& last = res.history.back();
  detail::note(err, o.subcommand,
               {{"examples", data.size()},
                {"vocab", vocab.size()},
                {"steps", res.steps},
                {"final_loss", last.loss.total},
                {"mean_gap", last.mean_gap}});
  return kExitOk;
}

/// Text context for an item: the question, then (extrinsic) the event
/// descriptions in the order the prompt shows them.
inline std::vector<std::string> gap_context_words(const BenchmarkItem& item) {
  std::vector<std::string> words = tokenize_text(item.question);
  if (item.modality == Modality::extrinsic && item.disordered_text)
    for (std::size_t idx : item.disordered_text->order)
      if (idx < item.event_descriptions.size()) {
        const auto w = tokenize_text(item.event_descriptions[idx]);
        words.insert(words.end(), w.begin(), w.end());
      }
  return words;
}

inline int run_gap(const Options& o, std::ostream& err) {
  const Checkpoint ck = parse_checkpoint(read_file(o.ckpt));
  ck.params.check_shapes();
  const auto bench = parse_benchmark(read_file(o.bench));
  std::string csv = "item_id,setting,modality,severity,delta\n";
  std::vector<double> deltas;
  std::size_t skipped = 0;
  for (const auto& item : bench) {
    const auto enc = [&](const std::vector<std::string>& w) {
      return ck.vocab.encode(w, Vocab::Oov::skip);
    };
    const TokenSeq ctx = enc(gap_context_words(item));
    const TokenSeq good = enc(tokenize_text(item.option_with(Role::correct).text));
    const TokenSeq bad = enc(tokenize_text(item.option_with(Role::shortcut).text));
    if (ctx.empty() || good.empty() || bad.empty()) {
      ++skipped;
      continue;
    }
    const double delta = log_prob(ck.params, ctx, good) - log_prob(ck.params, ctx, bad);
    deltas.push_back(delta);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", delta);
    csv += item.item_id + "," + std::string(to_string(item.setting)) + "," +
           std::string(to_string(item.modality)) + "," + std::string(to_string(item.severity)) +
           "," + buf + "\n";
  }
  write_file(o.out, csv);
  write_file(detail::sibling(o.out, ".svg"),
             plot::histogram("Likelihood gap per item", "log p(correct) - log p(shortcut)", deltas));
  detail::note(err, o.subcommand, {{"items", deltas.size()}, {"skipped_oov", skipped}});
  return kExitOk;
}

inline int run_report(const Options& o, std::ostream&) {
  const MetricReport rep = report_from_json(nlohmann::json::parse(read_file(o.in)));
  const fs::path dir(o.out);
  write_file(dir / "report.csv", report_to_csv(rep));
  std::vector<std::string> cats;
  plot::Series acc{"Acc (adversarial)", {}}, fr{"FR", {}}, wfr{"WFR", {}};
  auto add = [&](const std::string& name, const MetricSummary& s) {
    cats.push_back(name);
    acc.values.push_back(s.acc_adv.value_or(NAN));
    fr.values.push_back(s.fr.value_or(NAN));
    wfr.values.push_back(s.wfr.value_or(NAN));
  };
  for (const auto& [sev, s] : rep.by_severity) add(sev, s);
  add("all", rep.overall);
  const std::vector<plot::Series> series{acc, fr, wfr};
  write_file(dir / "report.svg", plot::grouped_bars("Accuracy and flip rates by severity", cats, series));
  return kExitOk;
}

inline int run(const Options& o, std::ostream& err) {
  const std::string& s = o.subcommand;
  if (s == "build-bench") return run_build_bench(o, err);
  if (s == "evaluate") return run_evaluate(o, err);
  if (s == "score") return run_score(o, err);
  if (s == "make-prefs") return run_make_prefs(o, err);
  if (s == "train-toy") return run_train_toy(o, err);
  if (s == "gap") return run_gap(o, err);
  if (s == "report") return run_report(o, err);
  throw PreconditionError("unknown subcommand '" + s + "'");
}

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  Options o;
  if (auto code = parse(argc, argv, o, out, err)) return *code;
  try {
    write_run_config(resolve(o));
    return run(o, err);
  } catch (const std::exception& e) {
    err << nlohmann::json{{"subcommand", o.subcommand},
                          {"error", detail::error_kind(e)},
                          {"message", e.what()}}
               .dump()
        << "\n";
    return kExitFailure;
  }
}

}  // namespace temporob::cli
