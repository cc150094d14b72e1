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


// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails. Tolerances and sizes are the contract values; none are
// relaxed here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "temporob/cli.hpp"

namespace {

using namespace temporob;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// 1 and 2 ------------------------------------------------------------------

std::pair<Verdict, Verdict> metric_criteria() {
  Verdict oracle, order;
  const auto t0 = Clock::now();
  Rng rng = Rng::stream(1, "", "acceptance-metrics");
  std::size_t logs = 0, fr_defined = 0;
  for (int trial = 0; trial < 1000; ++trial, ++logs) {
    const auto items = oracle::random_items(rng, 1 + rng.below(50));
    const auto expect = oracle::brute_force(items);
    const auto [clean, adv] = oracle::to_logs(items, rng);
    const MetricSummary got = summarize(clean, adv);
    if (got.acc_clean != expect.acc_clean || got.acc_adv != expect.acc_adv || got.fr != expect.fr ||
        got.wfr != expect.wfr || got.t_acc != expect.t_acc)
      oracle.fail("mismatch against brute force on log " + std::to_string(trial));
    if (got.fr.has_value() != got.wfr.has_value()) order.fail("FR/WFR definedness differs");
    if (got.fr) {
      ++fr_defined;
      if (!(*got.fr <= *got.wfr)) order.fail("FR > WFR on log " + std::to_string(trial));
    }
  }
  const double dt = seconds_since(t0);
  if (dt >= 5.0) oracle.fail(fmt("runtime %.2f s >= 5 s", dt));
  if (oracle.pass)
    oracle.detail = std::to_string(logs) + " logs, N <= 50, exact match, " + fmt("%.2f s", dt);
  if (order.pass)
    order.detail = std::to_string(fr_defined) + " logs with defined FR, FR <= WFR on all";
  return {oracle, order};
}

// 3 ------------------------------------------------------------------------

Verdict fixed_point() {
  Verdict v;
  Rng rng = Rng::stream(3, "", "acceptance-fixed-point");
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t V = 2 + rng.below(7);
    const PolicyPair pair(ToyPolicyParams::random(V, 1 + rng.below(4), 1 + rng.below(4),
                                                  static_cast<std::uint64_t>(i), 0.8));
    const auto ex = oracle::random_example(rng, V, 5);
    const double beta = 0.01 + 2.0 * rng.uniform01();
    const std::vector<PanoExample> batch{ex};
    const double errs[] = {
        std::abs(loss_dpo_m(pair, ex.question, ex.video, ex.chosen, ex.rejected, beta).loss - std::numbers::ln2),
        std::abs(loss_dpo_v(pair, ex.question, ex.video, ex.rejected_video, ex.chosen, beta).loss -
                 std::numbers::ln2),
        std::abs(loss_dpo_t(pair, ex.question, ex.perturbation, ex.video, ex.chosen, beta).loss -
                 std::numbers::ln2),
        std::abs(loss_pano(pair, batch, beta).total - 3.0 * std::numbers::ln2)};
    for (double e : errs) worst = std::max(worst, e);
  }
  if (worst > 1e-12) v.fail(fmt("max deviation %.3g > 1e-12", worst));
  else v.detail = fmt("100 inputs, max deviation %.3g", worst);
  return v;
}

// 4 ------------------------------------------------------------------------

Verdict spot_value() {
  Verdict v;
  constexpr double kStated = 0.626281;
  const double oracle_value = oracle::closed_form_dpo(0.8, 0.5, 0.2, 0.5, 0.1);
  const ToyPolicyParams ref = ToyPolicyParams::zeros(2, 1, 1);
  const double m = loss_dpo_m(PolicyPair(oracle::policy_response_pref(), ref), TokenSeq{1}, TokenSeq{0},
                              TokenSeq{0}, TokenSeq{1}, 0.1)
                       .loss;
  const double vv = loss_dpo_v(PolicyPair(oracle::policy_video_pref(), ref), TokenSeq{}, TokenSeq{0},
                               TokenSeq{1}, TokenSeq{0}, 0.1)
                        .loss;
  const double t = loss_dpo_t(PolicyPair(oracle::policy_question_pref(), ref), TokenSeq{0}, TokenSeq{1},
                              TokenSeq{}, TokenSeq{0}, 0.1)
                       .loss;
  for (double x : {m, vv, t})
    if (std::abs(x - oracle_value) > 1e-12) v.fail(fmt("loss %.9f disagrees with the oracle %.9f", x, oracle_value));
  for (double x : {m, vv, t})
    if (std::abs(x - kStated) > 1e-6)
      v.fail(fmt("losses m/v/t = %.7f (hand-derived oracle %.7f) differ from the stated 0.626281 by %.2g", x,
                 oracle_value, std::abs(x - kStated)));
  if (v.pass) v.detail = fmt("m = v = t = %.7f", m);
  return v;
}

// 5 ------------------------------------------------------------------------

Verdict gradients() {
  Verdict v;
  const auto t0 = Clock::now();
  Rng rng = Rng::stream(5, "", "acceptance-gradients");
  double worst = 0.0;
  for (int cfg = 0; cfg < 20; ++cfg) {
    const std::size_t V = 2 + rng.below(7), d = 1 + rng.below(4), m = 1 + rng.below(4);
    const PolicyPair pair(ToyPolicyParams::random(V, d, m, 500 + cfg, 0.8),
                          ToyPolicyParams::random(V, d, m, 600 + cfg, 0.8));
    std::vector<PanoExample> batch;
    for (int i = 0; i < 2; ++i) batch.push_back(oracle::random_example(rng, V, 5));
    const double beta = 0.05 + rng.uniform01();
    const Gradients g = backward(pair, batch, beta);
    const auto check = oracle::finite_difference_check(pair.theta, g, [&](const ToyPolicyParams& th) {
      return loss_pano(PolicyPair(th, pair.ref()), batch, beta).total;
    });
    worst = std::max(worst, check.max_rel_error);
  }
  const double dt = seconds_since(t0);
  if (worst >= 1e-4) v.fail(fmt("max relative error %.3g >= 1e-4", worst));
  if (dt >= 30.0) v.fail(fmt("runtime %.2f s >= 30 s", dt));
  if (v.pass) v.detail = fmt("20 configs, max relative error %.3g, %.2f s", worst, dt);
  return v;
}

// 6 ------------------------------------------------------------------------

Verdict trainer_efficacy() {
  Verdict v;
  const auto t0 = Clock::now();
  constexpr std::uint64_t kSeed = 0;
  const auto prepared = prepare_examples(synthetic_preferences(512, kSeed, "train"),
                                         synthetic_preferences(512, kSeed, "heldout"));
  const ToyPolicyParams init = ToyPolicyParams::random(prepared.vocab.size(), 8, 8, kSeed);
  auto run = [&](LossKind kind) {
    TrainConfig c;
    c.lr = 0.2;
    c.seed = kSeed;
    c.loss.kind = kind;
    return train(PolicyPair(init), prepared.train, c, prepared.heldout);
  };
  const TrainResult pano = run(LossKind::panodpo);
  const TrainResult dpo = run(LossKind::dpo);
  const double g0 = *pano.history.front().heldout_gap;
  const double gp = *pano.history.back().heldout_gap;
  const double gd = *dpo.history.back().heldout_gap;
  const double dt = seconds_since(t0);
  if (!(gp > g0)) v.fail(fmt("held-out gap did not increase: init %.4f, PanoDPO %.4f", g0, gp));
  if (!(gp >= gd)) v.fail(fmt("PanoDPO gap %.4f < DPO gap %.4f", gp, gd));
  if (dt >= 300.0) v.fail(fmt("runtime %.1f s >= 300 s", dt));
  if (v.pass)
    v.detail = fmt("held-out gap init %.4f -> PanoDPO %.4f, DPO %.4f", g0, gp, gd) + fmt(", %.2f s", dt);
  return v;
}

// 7 ------------------------------------------------------------------------

int cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"temporob"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

Verdict mock_pipeline() {
  Verdict v;
  testing::TempDir dir("acceptance");
  std::vector<VideoRecord> records;
  for (std::size_t i = 0; i < 12; ++i) records.push_back(testing::make_record(3 + i % 5, "video" + std::to_string(i)));
  write_file(dir / "annotations.jsonl", serialize_annotations(records));
  const auto p = [&](const char* name) { return (dir / name).string(); };
  int rc = cli({"build-bench", "--annotations", p("annotations.jsonl"), "--out", p("bench.jsonl"), "--seed", "0"});
  rc |= cli({"evaluate", "--bench", p("bench.jsonl"), "--out", p("clean.jsonl"), "--mock", "always_correct",
             "--setting", "clean"});
  rc |= cli({"evaluate", "--bench", p("bench.jsonl"), "--out", p("adv.jsonl"), "--mock", "always_shortcut",
             "--setting", "adversarial"});
  rc |= cli({"score", "--clean", p("clean.jsonl"), "--adv", p("adv.jsonl"), "--out", p("two_mock.json")});
  rc |= cli({"evaluate", "--bench", p("bench.jsonl"), "--out", p("letter_a.jsonl"), "--mock", "fixed_letter:A",
             "--setting", "adversarial", "--rounds", "4"});
  rc |= cli({"score", "--clean", p("clean.jsonl"), "--adv", p("letter_a.jsonl"), "--out", p("letter_a.json")});
  if (rc != 0) {
    v.fail("a pipeline command exited non-zero");
    return v;
  }
  const auto a = nlohmann::json::parse(read_file(dir / "two_mock.json"));
  const auto b = nlohmann::json::parse(read_file(dir / "letter_a.json"));
  if (a["acc_clean"] != 1.0 || a["acc_adv"] != 0.0 || a["fr"] != 1.0 || a["wfr"] != 1.0)
    v.fail("two-mock report: " + a.dump());
  if (b["t_acc"] != 0.0 || b["acc_adv"] != 1.0) v.fail("fixed_letter:A report: " + b.dump());
  if (v.pass)
    v.detail = "acc_clean=1 acc_adv=0 FR=1 WFR=1 over " + a["counts"]["n_paired"].dump() +
               " items; fixed_letter:A round-0 acc=1, T-Acc=0";
  return v;
}

// 8 ------------------------------------------------------------------------

std::size_t position(const std::vector<std::size_t>& order, std::size_t value) {
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), value) - order.begin());
}

Verdict perturbation_suite() {
  Verdict v;
  constexpr int kRuns = 10000;
  auto size_for = [](std::uint64_t seed) { return 3 + static_cast<std::size_t>(seed % 10); };
  for (std::uint64_t seed = 0; seed < kRuns; ++seed) {
    const std::size_t n = size_for(seed);
    const std::string at = " (n=" + std::to_string(n) + ", seed=" + std::to_string(seed) + ")";

    const Permutation light = light_disorder(n, seed);
    if (!light.is_bijection() || !light.is_single_adjacent_swap()) v.fail("light disorder invalid" + at);
    if (light_disorder(n, seed) != light) v.fail("light disorder not reproducible" + at);

    const Permutation severe = severe_disorder(n, seed);
    if (!severe.is_bijection() || severe.is_identity() || severe.is_single_adjacent_swap())
      v.fail("severe disorder in the excluded set" + at);
    if (severe_disorder(n, seed) != severe) v.fail("severe disorder not reproducible" + at);

    const DisorderedText abs = absolute_disorder(n, seed);
    const auto [p, q] = abs.target_pair;
    if (!Permutation{abs.order}.is_bijection() || q != p + 1 ||
        position(abs.order, q) + 1 != position(abs.order, p))
      v.fail("absolute disorder does not place q immediately before p" + at);
    if (absolute_disorder(n, seed) != abs) v.fail("absolute disorder not reproducible" + at);

    const DisorderedText rel = relative_disorder(n, seed);
    const auto [rp, rq] = rel.target_pair;
    bool ok = Permutation{rel.order}.is_bijection() && rel.inserted_k && rq == rp + 1 && *rel.inserted_k > rq;
    if (ok) {
      const std::size_t k = *rel.inserted_k;
      ok = position(rel.order, rp) + 1 == position(rel.order, k) &&
           position(rel.order, k) + 1 == position(rel.order, rq);
      std::vector<std::size_t> others;
      for (std::size_t e : rel.order)
        if (e != k) others.push_back(e);
      ok = ok && std::is_sorted(others.begin(), others.end());
    }
    if (!ok) v.fail("relative disorder is not a single insertion between the pair" + at);
    if (relative_disorder(n, seed) != rel) v.fail("relative disorder not reproducible" + at);
  }
  if (v.pass) v.detail = "10000 seeded runs per operation, n in 3..12";
  return v;
}

// 9 ------------------------------------------------------------------------

Verdict transform_arithmetic() {
  Verdict v;
  std::size_t grids = 0, videos = 0;
  for (std::size_t h = 1; h <= 20; ++h)
    for (std::size_t w = 1; w <= 20; ++w) {
      if (h * w < 5) continue;
      FrameSequence s;
      s.frames.assign(3, Frame(h, w, 1.0));
      const auto want = static_cast<std::size_t>(std::round(0.20 * static_cast<double>(h * w)));
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        for (const auto& f : reject_video(s, RejectMode::crop, seed).frames) {
          ++grids;
          if (static_cast<std::size_t>(std::count(f.cells.begin(), f.cells.end(), 0.0)) != want)
            v.fail("crop on " + std::to_string(h) + "x" + std::to_string(w));
        }
      }
    }
  for (std::size_t n = 1; n <= 40; ++n)
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      FrameSequence s;
      s.frames.assign(n, Frame(4, 4, 1.0));
      std::size_t blank = 0;
      for (const auto& f : reject_video(s, RejectMode::replace, seed).frames)
        blank += std::all_of(f.cells.begin(), f.cells.end(), [](double x) { return x == 0.0; });
      ++videos;
      if (blank != n / 2) v.fail("replace on " + std::to_string(n) + " frames blanked " + std::to_string(blank));
    }
  if (v.pass)
    v.detail = std::to_string(grids) + " cropped grids, " + std::to_string(videos) + " replaced videos";
  return v;
}

// 10 -----------------------------------------------------------------------

Verdict defaults_audit() {
  Verdict v;
  cli::Options o;
  const char* argv[] = {"temporob", "train-toy", "--prefs", "prefs.jsonl", "--out", "run"};
  std::ostringstream out, err;
  if (cli::parse(6, argv, o, out, err)) {
    v.fail("train-toy did not parse with only the required flags");
    return v;
  }
  const auto j = cli::resolve(o).options;
  if (j["beta"] != 0.1) v.fail("beta = " + j["beta"].dump());
  if (j["epochs"] != 3) v.fail("epochs = " + j["epochs"].dump());
  if (j["batch"] != 64) v.fail("batch = " + j["batch"].dump());
  if (j["lr"] != 1e-5) v.fail("lr = " + j["lr"].dump());
  if (j["schedule"] != "cosine") v.fail("schedule = " + j["schedule"].dump());
  if (j["warmup_ratio"] != 0.1) v.fail("warmup_ratio = " + j["warmup_ratio"].dump());
  if (v.pass) v.detail = "beta 0.1, epochs 3, batch 64, lr 1e-5, cosine, warm-up 0.1";
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    Verdict verdict;
  };
  std::vector<Criterion> results;
  const auto [oracle_v, order_v] = metric_criteria();
  results.push_back({1, "metric oracle equivalence", oracle_v});
  results.push_back({2, "FR <= WFR on every log", order_v});
  results.push_back({3, "DPO fixed point at theta = ref", fixed_point()});
  results.push_back({4, "closed-form spot value", spot_value()});
  results.push_back({5, "gradient correctness", gradients()});
  results.push_back({6, "trainer efficacy", trainer_efficacy()});
  results.push_back({7, "end-to-end mock pipeline", mock_pipeline()});
  results.push_back({8, "perturbation property suite", perturbation_suite()});
  results.push_back({9, "preference-transform arithmetic", transform_arithmetic()});
  results.push_back({10, "train-toy defaults audit", defaults_audit()});

  int failed = 0;
  for (const auto& c : results) {
    std::printf("%s  %2d  %-32s %s\n", c.verdict.pass ? "PASS" : "FAIL", c.id, c.name, c.verdict.detail.c_str());
    failed += !c.verdict.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(results.size()) - failed, results.size());
  return failed == 0 ? 0 : 1;
}
