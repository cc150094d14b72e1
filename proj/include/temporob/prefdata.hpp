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

// Visual- and text-conditioned preference data.
//
// Frames are scalar grids in [0, 1]. A rejected video comes from the chosen
// one by shuffling frames, blanking a 20% rectangle in every frame, or
// blanking half of the frames. A perturbed question appends a misleading
// clause produced by a TextGenerator.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "temporob/error.hpp"
#include "temporob/evalclient.hpp"
#include "temporob/io.hpp"
#include "temporob/rng.hpp"

namespace temporob {

struct Frame {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> cells;  // row-major

  Frame() = default;
  Frame(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), cells(h * w, fill) {}

  double& at(std::size_t r, std::size_t c) { return cells[r * width + c]; }
  double at(std::size_t r, std::size_t c) const { return cells[r * width + c]; }

  friend bool operator==(const Frame&, const Frame&) = default;
  friend auto operator<=>(const Frame& a, const Frame& b) {
    return std::tie(a.height, a.width, a.cells) <=> std::tie(b.height, b.width, b.cells);
  }
};

struct FrameSequence {
  std::vector<Frame> frames;

  void validate() const {
    if (frames.empty()) throw ValidationError("frames", "sequence is empty");
    for (const auto& f : frames) {
      if (f.height != frames.front().height || f.width != frames.front().width)
        throw ValidationError("frames", "frames differ in dimensions");
      if (f.cells.size() != f.height * f.width)
        throw ValidationError("frames", "cell count does not match dimensions");
      for (double v : f.cells)
        if (!(v >= 0.0 && v <= 1.0))
          throw ValidationError("frames", "cell value outside [0, 1]");
    }
  }

  friend bool operator==(const FrameSequence&, const FrameSequence&) = default;
};

enum class RejectMode { shuffle, crop, replace };

inline std::string_view to_string(RejectMode m) {
  switch (m) {
    case RejectMode::shuffle: return "shuffle";
    case RejectMode::crop: return "crop";
    case RejectMode::replace: return "replace";
  }
  return "?";
}

inline RejectMode parse_reject_mode(std::string_view s) {
  if (s == "shuffle") return RejectMode::shuffle;
  if (s == "crop") return RejectMode::crop;
  if (s == "replace") return RejectMode::replace;
  throw ValidationError("video_mode", "unknown value '" + std::string(s) + "'");
}

inline constexpr double kCropAreaFraction = 0.20;
inline constexpr double kReplaceFrameFraction = 0.50;
inline constexpr std::size_t kMinCropCells = 5;

inline std::size_t crop_cell_count(std::size_t h, std::size_t w) {
  return static_cast<std::size_t>(
      std::llround(kCropAreaFraction * static_cast<double>(h * w)));
}

inline std::size_t replace_frame_count(std::size_t n) {
  return static_cast<std::size_t>(std::floor(kReplaceFrameFraction * static_cast<double>(n)));
}

/// Zeroes exactly crop_cell_count(H, W) cells of `f`. The region is an
/// h x ceil(area/h) rectangle filled row-major, so only its last row can be
/// partial; h is uniform over heights whose width fits.
inline void crop_frame(Frame& f, Rng& rng) {
  const std::size_t H = f.height, W = f.width;
  if (H * W < kMinCropCells)
    throw ValidationError("frames", "degenerate frame: fewer than 5 cells");
  const std::size_t area = crop_cell_count(H, W);
  std::vector<std::size_t> heights;
  for (std::size_t h = 1; h <= H; ++h)
    if ((area + h - 1) / h <= W) heights.push_back(h);
  const std::size_t h = heights[static_cast<std::size_t>(rng.below(heights.size()))];
  const std::size_t w = (area + h - 1) / h;
  const std::size_t top = rng.between(0, H - h);
  const std::size_t left = rng.between(0, W - w);
  for (std::size_t k = 0; k < area; ++k) f.at(top + k / w, left + k % w) = 0.0;
}

inline FrameSequence reject_video(const FrameSequence& video, RejectMode mode, Rng& rng) {
  video.validate();
  FrameSequence out = video;
  const std::size_t n = out.frames.size();
  switch (mode) {
    case RejectMode::shuffle: {
      if (n < 2) throw PreconditionError("shuffle needs at least 2 frames");
      std::vector<std::size_t> order(n);
      do {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(std::span<std::size_t>(order));
      } while (std::is_sorted(order.begin(), order.end()));
      for (std::size_t i = 0; i < n; ++i) out.frames[i] = video.frames[order[i]];
      break;
    }
    case RejectMode::crop:
      for (auto& f : out.frames) crop_frame(f, rng);
      break;
    case RejectMode::replace: {
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      rng.shuffle(std::span<std::size_t>(idx));
      for (std::size_t i = 0; i < replace_frame_count(n); ++i)
        std::fill(out.frames[idx[i]].cells.begin(), out.frames[idx[i]].cells.end(), 0.0);
      break;
    }
  }
  return out;
}

inline FrameSequence reject_video(const FrameSequence& video, RejectMode mode,
                                  std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "", "reject-video:" + std::string(to_string(mode)));
  return reject_video(video, mode, rng);
}

// ---------------------------------------------------------------------------
// Portable graymap I/O (P2 and P5, maxval <= 255 for P5)

inline Frame parse_pgm(std::string_view bytes) {
  std::size_t pos = 0;
  auto skip_ws = [&] {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        return;
      }
    }
  };
  auto read_uint = [&]() -> std::size_t {
    skip_ws();
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos])))
      throw ParseError(1, pos, "pgm: expected an unsigned integer");
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos])))
      v = v * 10 + static_cast<std::size_t>(bytes[pos++] - '0');
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5'))
    throw ParseError(1, 0, "pgm: expected P2 or P5 magic");
  const bool binary = bytes[1] == '5';
  pos = 2;
  const std::size_t w = read_uint(), h = read_uint(), maxval = read_uint();
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535)
    throw ParseError(1, pos, "pgm: bad header");
  Frame f(h, w);
  if (binary) {
    if (maxval > 255) throw ParseError(1, pos, "pgm: 16-bit P5 not supported");
    ++pos;  // single whitespace after maxval
    if (bytes.size() < pos + h * w) throw ParseError(1, pos, "pgm: truncated raster");
    for (std::size_t i = 0; i < h * w; ++i)
      f.cells[i] = static_cast<unsigned char>(bytes[pos + i]) / static_cast<double>(maxval);
  } else {
    for (std::size_t i = 0; i < h * w; ++i)
      f.cells[i] = std::min<double>(1.0, static_cast<double>(read_uint()) / maxval);
  }
  return f;
}

inline std::string format_pgm(const Frame& f) {
  std::string out = "P5\n" + std::to_string(f.width) + " " + std::to_string(f.height) + "\n255\n";
  for (double v : f.cells)
    out += static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  return out;
}

/// Reads every *.pgm in `dir`, ordered by file name.
inline FrameSequence load_frame_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw IoError("frame directory '" + dir.string() + "' does not exist");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  FrameSequence seq;
  for (const auto& p : files) seq.frames.push_back(parse_pgm(read_file(p)));
  seq.validate();
  return seq;
}

inline void save_frame_dir(const FrameSequence& seq, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04zu.pgm", i);
    write_file(dir / name, format_pgm(seq.frames[i]));
  }
}

/// Discrete tokens for a frame sequence: per frame, the mean of each
/// quadrant quantized to 4 levels, tagged with frame and quadrant index.
inline std::vector<std::string> frame_tokens(const FrameSequence& seq) {
  std::vector<std::string> toks;
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const Frame& f = seq.frames[i];
    const std::size_t hh = std::max<std::size_t>(1, f.height / 2);
    const std::size_t hw = std::max<std::size_t>(1, f.width / 2);
    for (std::size_t q = 0; q < 4; ++q) {
      const std::size_t r0 = (q / 2) * hh, c0 = (q % 2) * hw;
      const std::size_t r1 = q / 2 ? f.height : hh, c1 = q % 2 ? f.width : hw;
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) {
          sum += f.at(r, c);
          ++count;
        }
      const double mean = count ? sum / static_cast<double>(count) : 0.0;
      const int level = std::min(3, static_cast<int>(mean * 4.0));
      toks.push_back("<f" + std::to_string(i) + "q" + std::to_string(q) + "l" +
                     std::to_string(level) + ">");
    }
  }
  return toks;
}

// ---------------------------------------------------------------------------
// Question perturbations

inline constexpr std::string_view kPerturbationPromptVersion = "v1";

/// Mirror of assets/perturbation_prompt_v1.txt.
inline constexpr std::string_view kPerturbationPromptV1 =
    "[perturbation-prompt v1]\n"
    "You write misleading context for video question answering.\n"
    "\n"
    "Video caption:\n"
    "{caption}\n"
    "\n"
    "Question:\n"
    "{question}\n"
    "\n"
    "Correct answer:\n"
    "{answer}\n"
    "\n"
    "Rules:\n"
    "1. Write one short sentence that could be appended to the question.\n"
    "2. The sentence must sound plausible given the caption but contradict the correct answer.\n"
    "3. Do not mention the correct answer's wording verbatim unless negating it.\n"
    "4. Do not reveal that the sentence is misleading.\n"
    "5. Output only the sentence, with no quotes or explanation.\n";

struct PerturbationRequest {
  std::string caption;
  std::string question;
  std::string answer;
};

inline std::string render_perturbation_prompt(const PerturbationRequest& req,
                                              std::string_view tmpl = kPerturbationPromptV1) {
  std::string out(tmpl);
  auto sub = [&](std::string_view key, const std::string& value) {
    for (std::size_t at = out.find(key); at != std::string::npos;
         at = out.find(key, at + value.size()))
      out.replace(at, key.size(), value);
  };
  sub("{caption}", req.caption);
  sub("{question}", req.question);
  sub("{answer}", req.answer);
  return out;
}

class TextGenerator {
 public:
  virtual ~TextGenerator() = default;
  /// Perturbation text for the request; empty output counts as a failure.
  virtual std::string generate(const PerturbationRequest& req) = 0;
  /// Prompt that generate() sends, empty if the generator uses none.
  virtual std::string prompt_for(const PerturbationRequest&) const { return {}; }
};

namespace detail {

inline std::string strip_sentence(std::string_view s) {
  std::string out(trim(s));
  while (!out.empty() && (out.back() == '.' || out.back() == '!' || out.back() == '?'))
    out.pop_back();
  if (out.size() > 1 && std::isupper(static_cast<unsigned char>(out[0])) &&
      std::islower(static_cast<unsigned char>(out[1])))
    out[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(out[0])));
  return out;
}

inline bool ends_with(std::string_view s, std::string_view suf) {
  return s.size() >= suf.size() && s.substr(s.size() - suf.size()) == suf;
}

/// Base form of a third-person singular verb.
inline std::string verb_base(std::string_view v) {
  if (ends_with(v, "ies") && v.size() > 4) return std::string(v.substr(0, v.size() - 3)) + "y";
  for (std::string_view suf : {"shes", "ches", "sses", "xes", "zes", "oes"})
    if (ends_with(v, suf)) return std::string(v.substr(0, v.size() - 2));
  return std::string(v.substr(0, v.size() - 1));
}

}  // namespace detail

/// Rule-based inversion of a declarative claim.
///   "the man pours water first" -> "the man does not pour water first"
///   "the bowl is empty"         -> "the bowl is not empty"
inline std::string negate_claim(std::string_view claim) {
  const std::string s = detail::strip_sentence(claim);
  std::vector<std::string> words;
  {
    std::istringstream in(s);
    for (std::string w; in >> w;) words.push_back(w);
  }
  auto join = [](const std::vector<std::string>& ws) {
    std::string out;
    for (const auto& w : ws) out += (out.empty() ? "" : " ") + w;
    return out;
  };
  static const std::array<std::string_view, 12> kAux = {
      "is", "are", "was", "were", "will", "should", "could", "would", "does", "do", "did", "must"};
  static const std::array<std::string_view, 14> kNotVerbs = {
      "is", "was", "has", "this", "his", "its", "hers", "yours", "ours",
      "theirs", "us", "as", "always", "sometimes"};
  for (std::size_t i = 1; i < words.size(); ++i) {
    const std::string w = detail::lower(words[i]);
    if (std::find(kAux.begin(), kAux.end(), w) != kAux.end()) {
      words.insert(words.begin() + static_cast<long>(i) + 1, "not");
      return join(words);
    }
    if (w == "can") {
      words[i] = "cannot";
      return join(words);
    }
    if (w == "has" || w == "have" || w == "had") {
      words[i] = w == "has" ? "does not have" : w == "have" ? "do not have" : "did not have";
      return join(words);
    }
  }
  for (std::size_t i = 1; i < words.size(); ++i) {
    const std::string w = detail::lower(words[i]);
    const bool verb_like = w.size() > 2 && w.back() == 's' && !detail::ends_with(w, "ss") &&
                           !detail::ends_with(w, "us") &&
                           std::find(kNotVerbs.begin(), kNotVerbs.end(), w) == kNotVerbs.end();
    if (verb_like) {
      words[i] = "does not " + detail::verb_base(w);
      return join(words);
    }
  }
  return "it is not the case that " + s;
}

/// Deterministic generator: "Note that in the video, <negated answer>."
class StubGenerator final : public TextGenerator {
 public:
  std::string generate(const PerturbationRequest& req) override {
    return "Note that in the video, " + negate_claim(req.answer) + ".";
  }
};

/// Sends the rendered prompt template to a chat-completions endpoint.
class RemoteGenerator final : public TextGenerator {
 public:
  RemoteGenerator(EndpointConfig config, std::shared_ptr<Transport> transport,
                  ChatResponder::Sleeper sleeper = ChatResponder::default_sleeper())
      : responder_(std::move(config), std::move(transport), std::move(sleeper)) {}

  std::string prompt_for(const PerturbationRequest& req) const override {
    return render_perturbation_prompt(req);
  }

  std::string generate(const PerturbationRequest& req) override {
    PromptPayload p;
    p.system = "You are a helpful assistant.";
    p.user_text = prompt_for(req);
    BenchmarkItem key;  // only names the jitter stream
    key.item_id = "perturb:" + std::to_string(fnv1a64(p.user_text));
    try {
      return std::string(detail::trim(responder_.respond(key, p)));
    } catch (const TransportError& e) {
      throw GenerationError(e.what());
    }
  }

 private:
  ChatResponder responder_;
};

struct Perturbation {
  std::string text;
  std::string prompt;  // verbatim prompt for audit; empty for the stub
};

inline constexpr int kGenerationAttempts = 3;

inline Perturbation perturb_question(std::string_view question, std::string_view caption,
                                     std::string_view answer, TextGenerator& gen) {
  if (detail::trim(question).empty() || detail::trim(caption).empty() ||
      detail::trim(answer).empty())
    throw PreconditionError("perturb_question: question, caption and answer must be non-empty");
  const PerturbationRequest req{std::string(caption), std::string(question), std::string(answer)};
  for (int attempt = 0; attempt < kGenerationAttempts; ++attempt) {
    std::string text = std::string(detail::trim(gen.generate(req)));
    if (!text.empty()) return {std::move(text), gen.prompt_for(req)};
  }
  throw GenerationError("generator returned empty text " +
                        std::to_string(kGenerationAttempts) + " times");
}

// ---------------------------------------------------------------------------
// Preference tuples

struct BasePreference {
  std::string id;
  std::string video_path;
  std::optional<FrameSequence> video;  // loaded from video_path when absent
  std::string question;
  std::string caption;
  std::string chosen;
  std::string rejected;
};

struct PreferenceTuple {
  std::string tuple_id;
  std::string video_path;
  std::optional<std::string> rejected_video_path;
  std::string question;
  std::optional<std::string> perturbation;
  std::string chosen;
  std::string rejected;
  std::string video_mode;
  std::uint64_t seed = 0;
  /// Optional pre-tokenized videos; take precedence over the paths.
  std::vector<std::string> video_tokens;
  std::vector<std::string> rejected_video_tokens;
  std::optional<std::string> perturbation_prompt;
  std::optional<FrameSequence> rejected_video;  // in-memory only

  friend bool operator==(const PreferenceTuple&, const PreferenceTuple&) = default;
};

inline nlohmann::json to_json(const PreferenceTuple& t) {
  using nlohmann::json;
  json j = {{"tuple_id", t.tuple_id},
            {"video_path", t.video_path},
            {"rejected_video_path", t.rejected_video_path ? json(*t.rejected_video_path) : json(nullptr)},
            {"question", t.question},
            {"perturbation", t.perturbation ? json(*t.perturbation) : json(nullptr)},
            {"chosen", t.chosen},
            {"rejected", t.rejected},
            {"video_mode", t.video_mode},
            {"seed", t.seed}};
  if (!t.video_tokens.empty()) j["video_tokens"] = t.video_tokens;
  if (!t.rejected_video_tokens.empty()) j["rejected_video_tokens"] = t.rejected_video_tokens;
  if (t.perturbation_prompt) j["perturbation_prompt"] = *t.perturbation_prompt;
  return j;
}

inline PreferenceTuple preference_from_json(const nlohmann::json& j) {
  PreferenceTuple t;
  t.tuple_id = j.at("tuple_id").get<std::string>();
  t.video_path = j.value("video_path", std::string{});
  if (j.contains("rejected_video_path") && !j["rejected_video_path"].is_null())
    t.rejected_video_path = j["rejected_video_path"].get<std::string>();
  t.question = j.at("question").get<std::string>();
  if (j.contains("perturbation") && !j["perturbation"].is_null())
    t.perturbation = j["perturbation"].get<std::string>();
  t.chosen = j.at("chosen").get<std::string>();
  t.rejected = j.at("rejected").get<std::string>();
  t.video_mode = j.value("video_mode", std::string{});
  t.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("video_tokens")) t.video_tokens = j["video_tokens"].get<std::vector<std::string>>();
  if (j.contains("rejected_video_tokens"))
    t.rejected_video_tokens = j["rejected_video_tokens"].get<std::vector<std::string>>();
  if (j.contains("perturbation_prompt")) t.perturbation_prompt = j["perturbation_prompt"].get<std::string>();
  if (t.chosen == t.rejected) throw ValidationError(t.tuple_id, "chosen equals rejected");
  return t;
}

inline std::vector<PreferenceTuple> parse_preferences(std::string_view text) {
  std::vector<PreferenceTuple> out;
  for_each_jsonl(text, [&](const nlohmann::json& j, std::size_t line_no) {
    try {
      out.push_back(preference_from_json(j));
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(line_no, 0, ex.what());
    }
  });
  return out;
}

inline std::string serialize_preferences(std::span<const PreferenceTuple> tuples) {
  std::string out;
  for (const auto& t : tuples) out += to_json(t).dump() + "\n";
  return out;
}

inline std::vector<BasePreference> parse_base_preferences(std::string_view text) {
  std::vector<BasePreference> out;
  for_each_jsonl(text, [&](const nlohmann::json& j, std::size_t line_no) {
    try {
      BasePreference b;
      b.id = j.at("id").get<std::string>();
      b.video_path = j.at("video_path").get<std::string>();
      b.question = j.at("question").get<std::string>();
      b.caption = j.at("caption").get<std::string>();
      b.chosen = j.at("chosen").get<std::string>();
      b.rejected = j.at("rejected").get<std::string>();
      out.push_back(std::move(b));
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(line_no, 0, ex.what());
    }
  });
  return out;
}

struct BuildPrefOptions {
  RejectMode video_mode = RejectMode::shuffle;
  std::uint64_t seed = 0;
  /// Non-zero re-rolls the video transforms for that training epoch.
  std::uint64_t reroll_epoch = 0;
  /// Base directory for relative video paths.
  std::filesystem::path video_root;
};

struct BuildPrefResult {
  std::vector<PreferenceTuple> tuples;
  std::vector<std::pair<std::string, std::string>> skipped;  // (base id, reason)
};

inline std::string tuple_id_for(std::string_view base_id, RejectMode mode) {
  return std::string(base_id) + ":" + std::string(to_string(mode));
}

/// Expands base tuples with a rejected video and a perturbed question.
/// Failing tuples are skipped and reported, never fatal to the batch.
inline BuildPrefResult build_pref_tuples(std::span<const BasePreference> base,
                                         TextGenerator& generator,
                                         const BuildPrefOptions& opts) {
  BuildPrefResult res;
  for (const auto& b : base) {
    try {
      if (b.chosen == b.rejected) throw ValidationError(b.id, "chosen equals rejected");
      const FrameSequence video =
          b.video ? *b.video
                  : load_frame_dir(opts.video_root.empty() ? std::filesystem::path(b.video_path)
                                                           : opts.video_root / b.video_path);
      std::string purpose = "reject-video:" + std::string(to_string(opts.video_mode));
      if (opts.reroll_epoch) purpose += ":epoch" + std::to_string(opts.reroll_epoch);
      Rng rng = Rng::stream(opts.seed, b.id, purpose);
      PreferenceTuple t;
      t.tuple_id = tuple_id_for(b.id, opts.video_mode);
      t.video_path = b.video_path;
      t.question = b.question;
      t.chosen = b.chosen;
      t.rejected = b.rejected;
      t.video_mode = std::string(to_string(opts.video_mode));
      t.seed = opts.seed;
      t.rejected_video = reject_video(video, opts.video_mode, rng);
      Perturbation c = perturb_question(b.question, b.caption, b.chosen, generator);
      t.perturbation = std::move(c.text);
      if (!c.prompt.empty()) t.perturbation_prompt = std::move(c.prompt);
      res.tuples.push_back(std::move(t));
    } catch (const Error& e) {
      res.skipped.emplace_back(b.id, e.what());
    }
  }
  return res;
}

}  // namespace temporob
