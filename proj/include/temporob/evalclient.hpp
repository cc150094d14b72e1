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


#pragma once

// Drives a model over benchmark items and writes one SelectionRecord per
// (item, setting, round) to a JSONL log.
//
// Requests fan out over at most `max_concurrency` worker threads. The calling
// thread is the only writer and emits records in job order, so the log bytes
// do not depend on completion order. Keys already present in the log are
// skipped, which makes a re-run over a complete log a no-op.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "temporob/error.hpp"
#include "temporob/io.hpp"
#include "temporob/metrics.hpp"
#include "temporob/perturb.hpp"
#include "temporob/rng.hpp"

namespace temporob {

struct RetryPolicy {
  int max_attempts = 3;
  double backoff_base = 1.0;  // seconds
};

struct EndpointConfig {
  std::string base_url;
  std::string model_name;
  std::string auth_token_env_name;  // empty: no Authorization header
  double timeout = 60.0;            // seconds
  std::size_t max_concurrency = 4;
  RetryPolicy retry;

  void validate() const {
    if (base_url.empty()) throw PreconditionError("endpoint base_url is empty");
    if (max_concurrency < 1) throw PreconditionError("max_concurrency must be >= 1");
    if (retry.max_attempts < 1) throw PreconditionError("max_attempts must be >= 1");
    if (!(timeout > 0.0)) throw PreconditionError("timeout must be positive");
  }
};

struct MockPolicy {
  enum class Mode { always_correct, always_shortcut, fixed_letter, seeded_uniform };
  Mode mode = Mode::always_correct;
  char letter = 'A';
  std::uint64_t seed = 0;

  /// "always_correct", "always_shortcut", "fixed_letter:B", "seeded_uniform:7".
  static MockPolicy parse(std::string_view text) {
    MockPolicy p;
    const auto colon = text.find(':');
    const std::string_view name = text.substr(0, colon);
    const std::string_view arg =
        colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
    if (name == "always_correct") {
      p.mode = Mode::always_correct;
    } else if (name == "always_shortcut") {
      p.mode = Mode::always_shortcut;
    } else if (name == "fixed_letter") {
      p.mode = Mode::fixed_letter;
      if (arg.empty()) {
        p.letter = 'A';
      } else if (arg.size() == 1 && arg[0] >= 'A' && arg[0] <= 'D') {
        p.letter = arg[0];
      } else {
        throw PreconditionError("fixed_letter expects A-D");
      }
    } else if (name == "seeded_uniform") {
      p.mode = Mode::seeded_uniform;
      p.seed = arg.empty() ? 0 : std::stoull(std::string(arg));
    } else {
      throw PreconditionError("unknown mock mode '" + std::string(text) + "'");
    }
    return p;
  }
};

struct PromptPayload {
  std::string system;
  std::string user_text;
  /// data: URLs, one per attached frame.
  std::vector<std::string> images;

  nlohmann::json messages() const {
    using nlohmann::json;
    json content = json::array();
    content.push_back({{"type", "text"}, {"text", user_text}});
    for (const auto& url : images)
      content.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
    return json::array({{{"role", "system"}, {"content", system}},
                        {{"role", "user"}, {"content", std::move(content)}}});
  }
};

inline constexpr std::string_view kSystemPrompt =
    "You are a careful video understanding assistant. Answer multiple-choice "
    "questions using only what the video shows.";
inline constexpr std::string_view kAnswerInstruction =
    "Answer with the option's letter from the given choices directly.";

namespace detail {

inline std::string mime_for(const std::filesystem::path& p) {
  const auto ext = lower(p.extension().string());
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".pgm") return "image/x-portable-graymap";
  return "application/octet-stream";
}

}  // namespace detail

/// Renders the chat prompt for one item round. Extrinsic items carry the
/// event descriptions in the item's text order (true order for clean items).
inline PromptPayload render_prompt(
    const BenchmarkItem& item,
    std::span<const std::filesystem::path> frame_files = {}) {
  if (item.options.size() != 4)
    throw PreconditionError(item.item_id + ": expected 4 lettered options");
  std::vector<std::string> missing;
  for (const auto& f : frame_files)
    if (!std::filesystem::is_regular_file(f)) missing.push_back(f.string());
  if (!missing.empty()) {
    std::string msg = "missing frame files:";
    for (const auto& m : missing) msg += " " + m;
    throw IoError(msg);
  }

  PromptPayload p;
  p.system = std::string(kSystemPrompt);
  std::string& u = p.user_text;
  if (!frame_files.empty())
    u += "The video is provided as " + std::to_string(frame_files.size()) +
         " frames in playback order.\n\n";
  if (item.modality == Modality::extrinsic && item.disordered_text) {
    u += "Event descriptions of the video:\n";
    std::size_t i = 1;
    for (std::size_t idx : item.disordered_text->order) {
      if (idx >= item.event_descriptions.size())
        throw ValidationError(item.item_id, "text order index out of range");
      u += std::to_string(i++) + ". " + item.event_descriptions[idx] + "\n";
    }
    u += "\n";
  }
  u += "Question: " + item.question + "\nOptions:\n";
  for (const auto& o : item.options)
    u += std::string(1, o.letter) + ". " + o.text + "\n";
  u += std::string(kAnswerInstruction);

  for (const auto& f : frame_files)
    p.images.push_back("data:" + detail::mime_for(f) + ";base64," +
                       httplib::detail::base64_encode(read_file(f)));
  return p;
}

inline SelectionRecord parse_selection(std::string_view response,
                                       std::span<const Option> options) {
  char correct = '?';
  for (const auto& o : options)
    if (o.role == Role::correct) correct = o.letter;
  const ScoreResult s = score_match(correct, response, options);
  SelectionRecord r;
  r.raw_text = std::string(response);
  r.parsed_letter = s.letter;
  r.parsed_role = s.role;
  return r;
}

inline SelectionRecord parse_selection(const BenchmarkItem& item,
                                       std::string_view response) {
  SelectionRecord r = parse_selection(response, item.options);
  r.item_id = item.item_id;
  r.setting = item.setting;
  r.round = item.round;
  return r;
}

// ---------------------------------------------------------------------------
// Responders

/// Produces raw response text for one item round. Implementations must be
/// safe to call from several threads at once.
class Responder {
 public:
  virtual ~Responder() = default;
  virtual std::string respond(const BenchmarkItem& item,
                              const PromptPayload& prompt) = 0;
};

class MockResponder final : public Responder {
 public:
  explicit MockResponder(MockPolicy policy) : policy_(policy) {}

  std::string respond(const BenchmarkItem& item, const PromptPayload&) override {
    char letter = 'A';
    switch (policy_.mode) {
      case MockPolicy::Mode::always_correct:
        letter = item.option_with(Role::correct).letter;
        break;
      case MockPolicy::Mode::always_shortcut:
        letter = item.option_with(Role::shortcut).letter;
        break;
      case MockPolicy::Mode::fixed_letter:
        letter = policy_.letter;
        break;
      case MockPolicy::Mode::seeded_uniform: {
        Rng rng = Rng::stream(policy_.seed,
                              item.item_id + "#" + std::string(to_string(item.setting)) +
                                  "#" + std::to_string(item.round),
                              "mock");
        letter = static_cast<char>('A' + rng.below(4));
        break;
      }
    }
    return std::string("Answer: ") + letter;
  }

 private:
  MockPolicy policy_;
};

/// Posts a JSON body to a path and returns the response body. Throws
/// TransportError on connection failures or non-2xx status.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string post(const std::string& path, const std::string& body,
                           const std::vector<std::pair<std::string, std::string>>&
                               headers) = 0;
};

class HttpTransport final : public Transport {
 public:
  HttpTransport(const std::string& scheme_host_port, double timeout_s)
      : origin_(scheme_host_port), timeout_s_(timeout_s) {}

  std::string post(const std::string& path, const std::string& body,
                   const std::vector<std::pair<std::string, std::string>>& headers)
      override {
    // One client per call keeps the transport thread-safe.
    httplib::Client cli(origin_);
    const auto secs = static_cast<time_t>(timeout_s_);
    const auto usecs = static_cast<time_t>((timeout_s_ - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = cli.Post(path, h, body, "application/json");
    if (!res) throw TransportError("request to " + origin_ + path + " failed: " +
                                   httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
      throw TransportError("HTTP " + std::to_string(res->status) + " from " +
                           origin_ + path);
    return res->body;
  }

 private:
  std::string origin_;
  double timeout_s_;
};

/// Splits "http://host:port/prefix" into origin and chat-completions path.
inline std::pair<std::string, std::string> split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw PreconditionError("endpoint must start with http:// or https://");
  const auto path_start = url.find('/', scheme_end + 3);
  std::string origin = url.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  constexpr std::string_view suffix = "/chat/completions";
  if (path.size() < suffix.size() ||
      path.compare(path.size() - suffix.size(), suffix.size(), suffix) != 0) {
    if (path.empty()) path = "/v1";
    path += suffix;
  }
  return {origin, path};
}

/// Chat-completions client with exponential backoff. Jitter comes from a
/// stream keyed by the request, so retries are reproducible.
class ChatResponder final : public Responder {
 public:
  using Sleeper = std::function<void(double seconds)>;

  ChatResponder(EndpointConfig config, std::shared_ptr<Transport> transport,
                Sleeper sleeper = default_sleeper())
      : config_(std::move(config)),
        transport_(std::move(transport)),
        sleeper_(std::move(sleeper)) {
    config_.validate();
    path_ = split_endpoint(config_.base_url).second;
    if (!config_.auth_token_env_name.empty()) {
      const char* tok = std::getenv(config_.auth_token_env_name.c_str());
      if (tok == nullptr || *tok == '\0')
        throw PreconditionError("auth token environment variable '" +
                                config_.auth_token_env_name + "' is not set");
      auth_ = std::string("Bearer ") + tok;
    }
  }

  static Sleeper default_sleeper() {
    return [](double s) {
      std::this_thread::sleep_for(std::chrono::duration<double>(s));
    };
  }

  nlohmann::json request_body(const PromptPayload& prompt) const {
    return {{"model", config_.model_name},
            {"messages", prompt.messages()},
            {"temperature", 0}};
  }

  std::string respond(const BenchmarkItem& item, const PromptPayload& prompt) override {
    const std::string body = request_body(prompt).dump();
    std::vector<std::pair<std::string, std::string>> headers;
    if (!auth_.empty()) headers.emplace_back("Authorization", auth_);
    Rng jitter = Rng::stream(0, item.item_id + "#" + std::string(to_string(item.setting)) +
                                    "#" + std::to_string(item.round),
                             "backoff");
    std::string last_error;
    for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
      try {
        const auto reply = nlohmann::json::parse(transport_->post(path_, body, headers));
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const TransportError& e) {
        last_error = e.what();
      } catch (const nlohmann::json::exception& e) {
        last_error = std::string("malformed response: ") + e.what();
      }
      if (attempt < config_.retry.max_attempts) {
        const double base = config_.retry.backoff_base * std::ldexp(1.0, attempt - 1);
        sleeper_(base * (0.5 + 0.5 * jitter.uniform01()));
      }
    }
    throw TransportError("gave up after " + std::to_string(config_.retry.max_attempts) +
                         " attempts: " + last_error);
  }

 private:
  EndpointConfig config_;
  std::shared_ptr<Transport> transport_;
  Sleeper sleeper_;
  std::string path_;
  std::string auth_;
};

// ---------------------------------------------------------------------------
// Evaluation loop

struct EvalOptions {
  int rounds = 1;                  // 1 or 4
  std::optional<Setting> setting;  // nullopt: both
  std::size_t max_concurrency = 1;
  /// Frame files per item; empty means text-only.
  std::function<std::vector<std::filesystem::path>(const BenchmarkItem&)> frames;
};

struct EvalSummary {
  std::size_t written = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
};

namespace detail {

using RecordKey = std::tuple<std::string, Setting, int>;

/// Loads keys of an existing log, dropping a torn final line if present.
inline std::set<RecordKey> load_resume_keys(const std::filesystem::path& path) {
  std::set<RecordKey> keys;
  if (!std::filesystem::exists(path)) return keys;
  std::string text = read_file(path);
  const auto last_nl = text.rfind('\n');
  const std::size_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
  if (keep != text.size()) {
    text.resize(keep);
    write_file(path, text);
  }
  for (const auto& r : parse_eval_log(text)) keys.emplace(r.item_id, r.setting, r.round);
  return keys;
}

}  // namespace detail

inline EvalSummary run_evaluation(std::span<const BenchmarkItem> bench,
                                  Responder& responder, const EvalOptions& opts,
                                  const std::filesystem::path& output_path) {
  if (opts.rounds != 1 && opts.rounds != 4)
    throw PreconditionError("rounds must be 1 or 4");
  if (opts.max_concurrency < 1)
    throw PreconditionError("max_concurrency must be >= 1");

  EvalSummary summary;
  const auto done = detail::load_resume_keys(output_path);

  std::vector<BenchmarkItem> jobs;
  for (const auto& item : bench) {
    if (opts.setting && item.setting != *opts.setting) continue;
    if (opts.rounds == 4) {
      for (auto& r : shuffle_option_rounds(item, item.seed)) jobs.push_back(std::move(r));
    } else {
      jobs.push_back(item);
      jobs.back().round = 0;
    }
  }
  std::erase_if(jobs, [&](const BenchmarkItem& j) {
    const bool skip = done.count({j.item_id, j.setting, j.round}) != 0;
    summary.skipped += skip;
    return skip;
  });
  if (jobs.empty()) return summary;

  if (output_path.has_parent_path())
    std::filesystem::create_directories(output_path.parent_path());
  std::ofstream out(output_path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot open '" + output_path.string() + "' for append");

  std::vector<std::optional<SelectionRecord>> results(jobs.size());
  std::mutex mu;
  std::condition_variable ready;
  std::atomic<std::size_t> next_job{0};

  auto work = [&] {
    for (;;) {
      const std::size_t i = next_job.fetch_add(1);
      if (i >= jobs.size()) return;
      const BenchmarkItem& job = jobs[i];
      SelectionRecord rec;
      try {
        std::vector<std::filesystem::path> frames;
        if (opts.frames && job.modality == Modality::intrinsic) frames = opts.frames(job);
        rec = parse_selection(job, responder.respond(job, render_prompt(job, frames)));
      } catch (const std::exception& e) {
        rec = SelectionRecord{job.item_id, job.setting, job.round, "", std::nullopt,
                              Role::unparsable, std::string(e.what())};
      }
      {
        std::lock_guard lock(mu);
        results[i] = std::move(rec);
      }
      ready.notify_all();
    }
  };

  const std::size_t n_workers = std::min(opts.max_concurrency, jobs.size());
  std::vector<std::jthread> workers;
  workers.reserve(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) workers.emplace_back(work);

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    SelectionRecord rec;
    {
      std::unique_lock lock(mu);
      ready.wait(lock, [&] { return results[i].has_value(); });
      rec = std::move(*results[i]);
      results[i].reset();
    }
    out << to_json(rec).dump() << '\n';
    out.flush();
    ++summary.written;
    summary.failed += rec.error.has_value();
  }
  if (!out) throw IoError("write failed for '" + output_path.string() + "'");
  return summary;
}

}  // namespace temporob
