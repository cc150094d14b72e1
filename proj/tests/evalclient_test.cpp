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


#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "fixtures.hpp"
#include "httplib.h"
#include "temporob/evalclient.hpp"

namespace temporob {
namespace {

using testing::make_record;
using testing::TempDir;

BenchmarkItem relative_item(Setting s) {
  auto [clean, adv] = build_item(make_record(3), Modality::extrinsic, Severity::relative, 5);
  return s == Setting::clean ? clean : adv;
}

std::vector<BenchmarkItem> small_bench(std::size_t videos) {
  std::vector<BenchmarkItem> out;
  for (std::size_t v = 0; v < videos; ++v) {
    const auto rec = make_record(4 + v % 3, "vid" + std::to_string(v));
    for (auto [m, s] : {std::pair{Modality::intrinsic, Severity::light},
                        std::pair{Modality::extrinsic, Severity::absolute}}) {
      auto [clean, adv] = build_item(rec, m, s, 17);
      out.push_back(clean);
      out.push_back(adv);
    }
  }
  return out;
}

// --- prompts --------------------------------------------------------------

std::size_t find_line(const std::string& text, const std::string& line) {
  return text.find("\n" + line + "\n");
}

TEST(RenderPrompt, ExtrinsicListsEventsInTextOrder) {
  const auto adv = render_prompt(relative_item(Setting::adversarial)).user_text;
  const auto a = find_line(adv, "1. e1"), b = find_line(adv, "2. e3"), c = find_line(adv, "3. e2");
  ASSERT_NE(a, std::string::npos);
  ASSERT_NE(b, std::string::npos);
  ASSERT_NE(c, std::string::npos);
  const auto clean = render_prompt(relative_item(Setting::clean)).user_text;
  EXPECT_NE(find_line(clean, "2. e2"), std::string::npos);
  EXPECT_NE(find_line(clean, "3. e3"), std::string::npos);
}

TEST(RenderPrompt, FourLetteredOptionsAndInstruction) {
  const auto item = relative_item(Setting::adversarial);
  const auto p = render_prompt(item);
  for (const auto& o : item.options)
    EXPECT_NE(find_line(p.user_text, std::string(1, o.letter) + ". " + o.text), std::string::npos);
  EXPECT_EQ(find_line(p.user_text, "E. "), std::string::npos);
  EXPECT_NE(p.user_text.find(kAnswerInstruction), std::string::npos);
  EXPECT_TRUE(p.images.empty());
  const auto msgs = p.messages();
  EXPECT_EQ(msgs[0]["role"], "system");
  EXPECT_EQ(msgs[1]["content"][0]["type"], "text");
}

TEST(RenderPrompt, IntrinsicHasNoEventList) {
  auto [clean, adv] = build_item(make_record(4), Modality::intrinsic, Severity::light, 1);
  EXPECT_EQ(render_prompt(adv).user_text.find("Event descriptions"), std::string::npos);
}

TEST(RenderPrompt, FramesAreAttachedAsDataUrls) {
  TempDir dir("frames");
  write_file(dir / "f0.png", std::string("abc"));
  write_file(dir / "f1.jpg", std::string("\x01\x02", 2));
  const std::vector<std::filesystem::path> frames{dir / "f0.png", dir / "f1.jpg"};
  const auto p = render_prompt(relative_item(Setting::clean), frames);
  ASSERT_EQ(p.images.size(), 2u);
  EXPECT_EQ(p.images[0], "data:image/png;base64,YWJj");
  EXPECT_EQ(p.images[1], "data:image/jpeg;base64,AQI=");
  EXPECT_EQ(p.messages()[1]["content"].size(), 3u);
}

TEST(RenderPrompt, MissingFramesListed) {
  const std::vector<std::filesystem::path> frames{"/nonexistent/a.png", "/nonexistent/b.png"};
  try {
    render_prompt(relative_item(Setting::clean), frames);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("a.png"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("b.png"), std::string::npos);
  }
}

// --- parsing --------------------------------------------------------------

TEST(ParseSelection, Examples) {
  const auto item = relative_item(Setting::adversarial);
  auto role_of = [&](char l) {
    for (const auto& o : item.options)
      if (o.letter == l) return o.role;
    return Role::unparsable;
  };
  EXPECT_EQ(parse_selection(item, "Answer: D").parsed_role, role_of('D'));
  EXPECT_EQ(parse_selection(item, "It must be option B, since the video shows it").parsed_role,
            role_of('B'));
  const auto empty = parse_selection(item, "");
  EXPECT_EQ(empty.parsed_role, Role::unparsable);
  EXPECT_FALSE(empty.parsed_letter);
  EXPECT_EQ(parse_selection(item, "Answer: D").item_id, item.item_id);
}

// --- mocks ----------------------------------------------------------------

TEST(MockPolicy, Parse) {
  EXPECT_EQ(MockPolicy::parse("always_correct").mode, MockPolicy::Mode::always_correct);
  EXPECT_EQ(MockPolicy::parse("always_shortcut").mode, MockPolicy::Mode::always_shortcut);
  EXPECT_EQ(MockPolicy::parse("fixed_letter:C").letter, 'C');
  EXPECT_EQ(MockPolicy::parse("seeded_uniform:7").seed, 7u);
  EXPECT_THROW(MockPolicy::parse("fixed_letter:Z"), PreconditionError);
  EXPECT_THROW(MockPolicy::parse("oracle"), PreconditionError);
}

TEST(MockResponder, Policies) {
  const auto item = relative_item(Setting::adversarial);
  const auto p = render_prompt(item);
  MockResponder correct(MockPolicy::parse("always_correct"));
  MockResponder shortcut(MockPolicy::parse("always_shortcut"));
  EXPECT_EQ(parse_selection(item, correct.respond(item, p)).parsed_role, Role::correct);
  EXPECT_EQ(parse_selection(item, shortcut.respond(item, p)).parsed_role, Role::shortcut);
  MockResponder uni(MockPolicy::parse("seeded_uniform:3"));
  EXPECT_EQ(uni.respond(item, p), uni.respond(item, p));
}

// --- endpoint client ------------------------------------------------------

TEST(SplitEndpoint, Forms) {
  using P = std::pair<std::string, std::string>;
  EXPECT_EQ(split_endpoint("http://h:8000"), (P{"http://h:8000", "/v1/chat/completions"}));
  EXPECT_EQ(split_endpoint("http://h:8000/v1/"), (P{"http://h:8000", "/v1/chat/completions"}));
  EXPECT_EQ(split_endpoint("https://h/api/chat/completions"), (P{"https://h", "/api/chat/completions"}));
  EXPECT_THROW(split_endpoint("h:8000"), PreconditionError);
}

/// Scripted transport: fails the first `failures` calls, then answers.
class ScriptedTransport final : public Transport {
 public:
  explicit ScriptedTransport(int failures, std::string content = "Answer: B")
      : failures_(failures), content_(std::move(content)) {}

  std::string post(const std::string& path, const std::string& body,
                   const std::vector<std::pair<std::string, std::string>>& headers) override {
    std::lock_guard lock(mu_);
    paths.push_back(path);
    bodies.push_back(body);
    header_sets.push_back(headers);
    if (calls++ < failures_) throw TransportError("connection refused");
    return nlohmann::json{{"choices", {{{"message", {{"content", content_}}}}}}}.dump();
  }

  int calls = 0;
  std::vector<std::string> paths, bodies;
  std::vector<std::vector<std::pair<std::string, std::string>>> header_sets;

 private:
  std::mutex mu_;
  int failures_;
  std::string content_;
};

EndpointConfig config() {
  EndpointConfig c;
  c.base_url = "http://127.0.0.1:1/v1";
  c.model_name = "m";
  return c;
}

TEST(ChatResponder, RequestShapeAndAuth) {
  ::setenv("TEMPOROB_TEST_TOKEN", "sekrit", 1);
  auto cfg = config();
  cfg.auth_token_env_name = "TEMPOROB_TEST_TOKEN";
  auto t = std::make_shared<ScriptedTransport>(0);
  ChatResponder r(cfg, t, [](double) {});
  const auto item = relative_item(Setting::clean);
  EXPECT_EQ(r.respond(item, render_prompt(item)), "Answer: B");
  EXPECT_EQ(t->paths[0], "/v1/chat/completions");
  const auto body = nlohmann::json::parse(t->bodies[0]);
  EXPECT_EQ(body["model"], "m");
  EXPECT_EQ(body["temperature"], 0);
  EXPECT_EQ(body["messages"].size(), 2u);
  ASSERT_EQ(t->header_sets[0].size(), 1u);
  EXPECT_EQ(t->header_sets[0][0].second, "Bearer sekrit");
}

TEST(ChatResponder, MissingTokenFailsAtStartup) {
  ::unsetenv("TEMPOROB_TEST_MISSING");
  auto cfg = config();
  cfg.auth_token_env_name = "TEMPOROB_TEST_MISSING";
  EXPECT_THROW(ChatResponder(cfg, std::make_shared<ScriptedTransport>(0)), PreconditionError);
}

TEST(ChatResponder, RetriesWithExponentialBackoff) {
  auto cfg = config();
  cfg.retry = {4, 1.0};
  auto t = std::make_shared<ScriptedTransport>(3);
  std::vector<double> sleeps;
  ChatResponder r(cfg, t, [&](double s) { sleeps.push_back(s); });
  const auto item = relative_item(Setting::clean);
  EXPECT_EQ(r.respond(item, render_prompt(item)), "Answer: B");
  EXPECT_EQ(t->calls, 4);
  ASSERT_EQ(sleeps.size(), 3u);
  for (std::size_t i = 0; i < sleeps.size(); ++i) {
    const double base = std::ldexp(1.0, static_cast<int>(i));
    EXPECT_GE(sleeps[i], 0.5 * base);
    EXPECT_LE(sleeps[i], base);
  }
}

TEST(ChatResponder, GivesUpAfterMaxAttempts) {
  auto cfg = config();
  cfg.retry = {2, 0.01};
  auto t = std::make_shared<ScriptedTransport>(100);
  ChatResponder r(cfg, t, [](double) {});
  const auto item = relative_item(Setting::clean);
  EXPECT_THROW(r.respond(item, render_prompt(item)), TransportError);
  EXPECT_EQ(t->calls, 2);
}

TEST(HttpTransport, TalksToLocalServer) {
  httplib::Server srv;
  std::string seen_model;
  srv.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_model = nlohmann::json::parse(req.body)["model"];
    res.set_content(nlohmann::json{{"choices", {{{"message", {{"content", "Answer: C"}}}}}}}.dump(),
                    "application/json");
  });
  srv.Post("/v1/broken/chat/completions", [](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
  });
  const int port = srv.bind_to_any_port("127.0.0.1");
  std::thread th([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  const std::string origin = "http://127.0.0.1:" + std::to_string(port);

  auto cfg = config();
  cfg.base_url = origin + "/v1";
  ChatResponder r(cfg, std::make_shared<HttpTransport>(origin, 5.0), [](double) {});
  const auto item = relative_item(Setting::clean);
  EXPECT_EQ(r.respond(item, render_prompt(item)), "Answer: C");
  EXPECT_EQ(seen_model, "m");

  cfg.base_url = origin + "/v1/broken";
  cfg.retry = {2, 0.0};
  ChatResponder bad(cfg, std::make_shared<HttpTransport>(origin, 5.0), [](double) {});
  EXPECT_THROW(bad.respond(item, render_prompt(item)), TransportError);

  srv.stop();
  th.join();
}

// --- evaluation loop ------------------------------------------------------

/// Counts simultaneous calls and answers correctly after a short delay.
class CountingResponder final : public Responder {
 public:
  std::string respond(const BenchmarkItem& item, const PromptPayload&) override {
    const int now = ++in_flight;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    --in_flight;
    ++calls;
    return std::string("Answer: ") + item.correct_letter();
  }
  std::atomic<int> in_flight{0}, peak{0}, calls{0};
};

TEST(RunEvaluation, BoundedConcurrencyAndOrderedOutput) {
  TempDir dir("eval");
  const auto bench = small_bench(6);
  CountingResponder serial, parallel;
  EvalOptions o1;
  o1.rounds = 4;
  EvalOptions o4 = o1;
  o4.max_concurrency = 3;
  const auto s1 = run_evaluation(bench, serial, o1, dir / "serial.jsonl");
  const auto s4 = run_evaluation(bench, parallel, o4, dir / "parallel.jsonl");
  EXPECT_EQ(s1.written, bench.size() * 4);
  EXPECT_EQ(s4.written, bench.size() * 4);
  EXPECT_EQ(serial.peak.load(), 1);
  EXPECT_LE(parallel.peak.load(), 3);
  EXPECT_GE(parallel.peak.load(), 2);
  EXPECT_EQ(read_file(dir / "serial.jsonl"), read_file(dir / "parallel.jsonl"));
  for (const auto& r : parse_eval_log(read_file(dir / "serial.jsonl")))
    EXPECT_EQ(r.parsed_role, Role::correct);
}

TEST(RunEvaluation, SettingFilterAndRoundsValidation) {
  TempDir dir("eval");
  const auto bench = small_bench(2);
  MockResponder mock(MockPolicy::parse("always_shortcut"));
  EvalOptions o;
  o.setting = Setting::adversarial;
  run_evaluation(bench, mock, o, dir / "adv.jsonl");
  for (const auto& r : parse_eval_log(read_file(dir / "adv.jsonl"))) {
    EXPECT_EQ(r.setting, Setting::adversarial);
    EXPECT_EQ(r.parsed_role, Role::shortcut);
    EXPECT_EQ(r.round, 0);
  }
  o.rounds = 2;
  EXPECT_THROW(run_evaluation(bench, mock, o, dir / "x.jsonl"), PreconditionError);
}

TEST(RunEvaluation, ResumeIsIdempotent) {
  TempDir dir("eval");
  const auto bench = small_bench(3);
  const auto path = dir / "log.jsonl";
  CountingResponder full;
  EvalOptions o;
  o.rounds = 4;
  run_evaluation(bench, full, o, dir / "reference.jsonl");

  // Interrupted run: a prefix of complete lines plus a torn record.
  const std::string ref = read_file(dir / "reference.jsonl");
  std::size_t cut = 0;
  for (int i = 0; i < 5; ++i) cut = ref.find('\n', cut) + 1;
  write_file(path, ref.substr(0, cut) + ref.substr(cut, 20));

  CountingResponder resumed;
  const auto s = run_evaluation(bench, resumed, o, path);
  EXPECT_EQ(s.skipped, 5u);
  EXPECT_EQ(resumed.calls.load(), static_cast<int>(bench.size() * 4 - 5));
  EXPECT_EQ(read_file(path), ref);

  CountingResponder again;
  const auto s2 = run_evaluation(bench, again, o, path);
  EXPECT_EQ(s2.written, 0u);
  EXPECT_EQ(again.calls.load(), 0);
  EXPECT_EQ(read_file(path), ref);
}

class ThrowingResponder final : public Responder {
 public:
  std::string respond(const BenchmarkItem& item, const PromptPayload&) override {
    if (item.setting == Setting::adversarial) throw TransportError("endpoint unreachable");
    return "Answer: A";
  }
};

TEST(RunEvaluation, FailuresAreAnnotatedAndRunContinues) {
  TempDir dir("eval");
  const auto bench = small_bench(2);
  ThrowingResponder r;
  const auto s = run_evaluation(bench, r, {}, dir / "log.jsonl");
  EXPECT_EQ(s.written, bench.size());
  EXPECT_EQ(s.failed, bench.size() / 2);
  for (const auto& rec : parse_eval_log(read_file(dir / "log.jsonl"))) {
    if (rec.setting == Setting::adversarial) {
      EXPECT_EQ(rec.parsed_role, Role::unparsable);
      ASSERT_TRUE(rec.error);
      EXPECT_NE(rec.error->find("unreachable"), std::string::npos);
    } else {
      EXPECT_FALSE(rec.error);
    }
  }
}

TEST(RunEvaluation, FixedLetterHitsOneRoundPerItem) {
  TempDir dir("eval");
  const auto bench = small_bench(3);
  MockResponder mock(MockPolicy::parse("fixed_letter:A"));
  EvalOptions o;
  o.rounds = 4;
  o.setting = Setting::adversarial;
  run_evaluation(bench, mock, o, dir / "log.jsonl");
  std::map<std::string, int> correct;
  for (const auto& r : parse_eval_log(read_file(dir / "log.jsonl")))
    correct[r.item_id] += r.parsed_role == Role::correct;
  for (const auto& [id, c] : correct) EXPECT_EQ(c, 1) << id;
}

}  // namespace
}  // namespace temporob
