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

// Temporal-inconsistency perturbations and four-option QA items.
//
// Intrinsic perturbations reorder a video's event clips (light: one adjacent
// swap; severe: several random transpositions). Extrinsic perturbations
// reorder the event descriptions shown in the prompt (absolute: an adjacent
// pair reversed and re-inserted into a shuffled list; relative: a later event
// moved between an adjacent pair).

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "temporob/annotations.hpp"
#include "temporob/error.hpp"
#include "temporob/io.hpp"
#include "temporob/rng.hpp"
#include "temporob/types.hpp"

namespace temporob {

/// Playback order: position i shows original event mapping[i].
struct Permutation {
  std::vector<std::size_t> mapping;

  static Permutation identity(std::size_t n) {
    Permutation p;
    p.mapping.resize(n);
    std::iota(p.mapping.begin(), p.mapping.end(), std::size_t{0});
    return p;
  }

  std::size_t size() const noexcept { return mapping.size(); }

  bool is_bijection() const {
    std::vector<bool> seen(mapping.size(), false);
    for (std::size_t v : mapping) {
      if (v >= mapping.size() || seen[v]) return false;
      seen[v] = true;
    }
    return true;
  }

  bool is_identity() const {
    for (std::size_t i = 0; i < mapping.size(); ++i)
      if (mapping[i] != i) return false;
    return true;
  }

  /// True when exactly one adjacent transposition away from identity.
  bool is_single_adjacent_swap() const {
    std::vector<std::size_t> moved;
    for (std::size_t i = 0; i < mapping.size(); ++i)
      if (mapping[i] != i) moved.push_back(i);
    return moved.size() == 2 && moved[1] == moved[0] + 1 &&
           mapping[moved[0]] == moved[1] && mapping[moved[1]] == moved[0];
  }

  friend bool operator==(const Permutation&, const Permutation&) = default;
};

struct EditPlan {
  std::string video_id;
  /// (source_start, source_end) in playback order.
  std::vector<std::pair<double, double>> segments;

  friend bool operator==(const EditPlan&, const EditPlan&) = default;
};

struct DisorderedText {
  std::vector<std::size_t> order;
  std::pair<std::size_t, std::size_t> target_pair{};
  std::optional<std::size_t> inserted_k;

  friend bool operator==(const DisorderedText&,
                         const DisorderedText&) = default;
};

struct Option {
  char letter = 'A';
  std::string text;
  Role role = Role::incorrect;

  friend bool operator==(const Option&, const Option&) = default;
};

struct BenchmarkItem {
  std::string item_id;
  std::string video_id;
  Modality modality = Modality::intrinsic;
  Severity severity = Severity::light;
  Setting setting = Setting::adversarial;
  std::string question;
  std::vector<Option> options;
  std::optional<EditPlan> edit_plan;
  std::optional<DisorderedText> disordered_text;
  /// Event descriptions in true order; prompts render them by text order.
  std::vector<std::string> event_descriptions;
  std::uint64_t seed = 0;
  int round = 0;

  const Option& option_with(Role role) const {
    for (const auto& o : options)
      if (o.role == role) return o;
    throw ValidationError(item_id, "no option with role " +
                                       std::string(to_string(role)));
  }
  char correct_letter() const { return option_with(Role::correct).letter; }

  friend bool operator==(const BenchmarkItem&,
                         const BenchmarkItem&) = default;
};

inline constexpr std::string_view kIntrinsicQuestion =
    "What is the correct sequence of events in the video?";
inline constexpr std::string_view kDistractorSimultaneous =
    "The two events occur simultaneously.";
inline constexpr std::string_view kDistractorAbsent =
    "Neither event appears in the video.";

inline constexpr std::size_t kSevereMinSwaps = 2;

inline void require_events(std::size_t n) {
  if (n < kMinEventsPerVideo) throw TooFewEventsError(n);
}

// ---------------------------------------------------------------------------
// Video-order perturbations

/// Identity with positions pos and pos+1 exchanged.
inline Permutation adjacent_swap(std::size_t n, std::size_t pos) {
  require_events(n);
  if (pos + 1 >= n) throw PreconditionError("swap position out of range");
  Permutation p = Permutation::identity(n);
  std::swap(p.mapping[pos], p.mapping[pos + 1]);
  return p;
}

inline Permutation light_disorder(std::size_t n, Rng& rng) {
  require_events(n);
  return adjacent_swap(n, static_cast<std::size_t>(rng.below(n - 1)));
}

inline Permutation light_disorder(std::size_t n, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "", "light_disorder");
  return light_disorder(n, rng);
}

inline std::size_t severe_swap_count(std::size_t n) {
  return std::max<std::size_t>(kSevereMinSwaps, (n + 1) / 2);
}

/// Applies max(2, ceil(n/2)) transpositions over pairwise-distinct index
/// pairs, resampling until the result is neither identity nor a single
/// adjacent swap.
inline Permutation severe_disorder(std::size_t n, Rng& rng) {
  require_events(n);
  const std::size_t k = severe_swap_count(n);
  for (;;) {
    Permutation p = Permutation::identity(n);
    std::vector<std::pair<std::size_t, std::size_t>> used;
    while (used.size() < k) {
      std::size_t a = static_cast<std::size_t>(rng.below(n));
      std::size_t b = static_cast<std::size_t>(rng.below(n - 1));
      if (b >= a) ++b;
      const std::pair<std::size_t, std::size_t> pair{std::min(a, b), std::max(a, b)};
      if (std::find(used.begin(), used.end(), pair) != used.end()) continue;
      used.emplace_back(pair);
      std::swap(p.mapping[a], p.mapping[b]);
    }
    if (!p.is_identity() && !p.is_single_adjacent_swap()) return p;
  }
}

inline Permutation severe_disorder(std::size_t n, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "", "severe_disorder");
  return severe_disorder(n, rng);
}

// ---------------------------------------------------------------------------
// Text-order perturbations

/// Absolute disorder with every choice explicit: the pair (p, p+1), the
/// arrangement of the other events, and the insertion slot for the reversed
/// block (0 = front, rest.size() = back).
inline DisorderedText absolute_disorder_with(
    std::size_t n, std::size_t p, std::span<const std::size_t> rest,
    std::size_t insert_at) {
  require_events(n);
  if (p + 1 >= n) throw PreconditionError("pair index out of range");
  if (rest.size() != n - 2 || insert_at > rest.size())
    throw PreconditionError("rest/insert position inconsistent with n");
  DisorderedText t;
  t.order.assign(rest.begin(), rest.begin() + insert_at);
  t.order.push_back(p + 1);
  t.order.push_back(p);
  t.order.insert(t.order.end(), rest.begin() + insert_at, rest.end());
  t.target_pair = {p, p + 1};
  if (!Permutation{t.order}.is_bijection())
    throw PreconditionError("rest must hold every other event once");
  return t;
}

inline DisorderedText absolute_disorder(std::size_t n, Rng& rng) {
  require_events(n);
  const std::size_t p = static_cast<std::size_t>(rng.below(n - 1));
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < n; ++i)
    if (i != p && i != p + 1) rest.push_back(i);
  rng.shuffle(std::span<std::size_t>(rest));
  const std::size_t slot = static_cast<std::size_t>(rng.below(rest.size() + 1));
  return absolute_disorder_with(n, p, rest, slot);
}

inline DisorderedText absolute_disorder(std::size_t n, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "", "absolute_disorder");
  return absolute_disorder(n, rng);
}

/// Relative disorder with explicit pair (p, p+1) and displaced event k > p+1.
inline DisorderedText relative_disorder_with(std::size_t n, std::size_t p,
                                             std::size_t k) {
  if (n < kMinEventsPerVideo || p + 2 >= n)
    throw ConstructionError("relative disorder: no admissible (pair, k)");
  const std::size_t q = p + 1;
  if (k <= q || k >= n)
    throw ConstructionError("relative disorder: k must occur after q");
  DisorderedText t;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == k) continue;
    t.order.push_back(i);
    if (i == p) t.order.push_back(k);
  }
  t.target_pair = {p, q};
  t.inserted_k = k;
  return t;
}

inline DisorderedText relative_disorder(std::size_t n, Rng& rng) {
  if (n < kMinEventsPerVideo)
    throw ConstructionError("relative disorder: no admissible (pair, k) for " +
                            std::to_string(n) + " events");
  // Admissible pairs (p, p+1) need an event after p+1, so p <= n-3.
  const std::size_t p = static_cast<std::size_t>(rng.below(n - 2));
  const std::size_t k = rng.between(p + 2, n - 1);
  return relative_disorder_with(n, p, k);
}

inline DisorderedText relative_disorder(std::size_t n, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "", "relative_disorder");
  return relative_disorder(n, rng);
}

// ---------------------------------------------------------------------------
// Item assembly

namespace detail {

inline std::string join_events(const VideoRecord& rec,
                               std::span<const std::size_t> order) {
  std::string out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i) out += ", ";
    out += rec.events[order[i]].description;
  }
  return out;
}

inline std::string before(const VideoRecord& rec, std::size_t a,
                          std::size_t b) {
  return rec.events[a].description + " occurs before " +
         rec.events[b].description;
}

inline EditPlan edit_plan_for(const VideoRecord& rec, const Permutation& p) {
  EditPlan plan{rec.video_id, {}};
  for (std::size_t i : p.mapping)
    plan.segments.emplace_back(rec.events[i].start, rec.events[i].end);
  return plan;
}

inline void require_distinct_texts(const BenchmarkItem& item) {
  for (std::size_t i = 0; i < item.options.size(); ++i)
    for (std::size_t j = i + 1; j < item.options.size(); ++j)
      if (item.options[i].text == item.options[j].text)
        throw ConstructionError(item.item_id +
                                ": option texts are not distinct");
}

inline void assign_letters(std::vector<Option>& opts) {
  for (std::size_t i = 0; i < opts.size(); ++i)
    opts[i].letter = static_cast<char>('A' + i);
}

}  // namespace detail

inline std::string item_id_for(std::string_view video_id, Modality m,
                               Severity s) {
  return std::string(video_id) + "/" + std::string(to_string(m)) + "-" +
         std::string(to_string(s));
}

/// Stream used for one item's construction.
inline Rng item_rng(std::uint64_t seed, std::string_view video_id, Modality m,
                    Severity s) {
  return Rng::stream(seed, video_id,
                     "item:" + std::string(to_string(m)) + "-" +
                         std::string(to_string(s)));
}

/// Builds the (clean, adversarial) pair for one video.
///
/// Both variants share the question, the four option texts and their letter
/// layout. Roles follow each variant's ground truth: in the intrinsic clean
/// variant the unedited sequence is correct and the edited one takes the
/// shortcut slot; extrinsic roles coincide across variants.
inline std::pair<BenchmarkItem, BenchmarkItem> build_item(
    const VideoRecord& record, Modality modality, Severity severity,
    std::uint64_t seed) {
  require_events(record.events.size());
  validate(record);
  if (!compatible(modality, severity))
    throw PreconditionError("severity " + std::string(to_string(severity)) +
                            " is not valid for modality " +
                            std::string(to_string(modality)));
  const std::size_t n = record.events.size();
  Rng rng = item_rng(seed, record.video_id, modality, severity);

  BenchmarkItem adv;
  adv.item_id = item_id_for(record.video_id, modality, severity);
  adv.video_id = record.video_id;
  adv.modality = modality;
  adv.severity = severity;
  adv.setting = Setting::adversarial;
  adv.seed = seed;
  for (const auto& e : record.events)
    adv.event_descriptions.push_back(e.description);

  BenchmarkItem clean;
  std::vector<Option> opts;

  if (modality == Modality::intrinsic) {
    const Permutation edited = severity == Severity::light
                                   ? light_disorder(n, rng)
                                   : severe_disorder(n, rng);
    const Permutation original = Permutation::identity(n);
    std::vector<Permutation> used{edited, original};
    opts.push_back({'A', detail::join_events(record, edited.mapping),
                    Role::correct});
    opts.push_back({'A', detail::join_events(record, original.mapping),
                    Role::shortcut});
    constexpr int kMaxDraws = 10000;
    int draws = 0;
    while (opts.size() < 4) {
      if (++draws > kMaxDraws)
        throw ConstructionError(adv.item_id +
                                ": cannot draw two distinct distractors");
      Permutation cand = Permutation::identity(n);
      rng.shuffle(std::span<std::size_t>(cand.mapping));
      if (std::find(used.begin(), used.end(), cand) != used.end()) continue;
      std::string text = detail::join_events(record, cand.mapping);
      const bool dup = std::any_of(opts.begin(), opts.end(), [&](auto& o) {
        return o.text == text;
      });
      if (dup) continue;
      used.push_back(cand);
      opts.push_back({'A', std::move(text), Role::incorrect});
    }
    adv.question = std::string(kIntrinsicQuestion);
    rng.shuffle(std::span<Option>(opts));
    detail::assign_letters(opts);
    adv.options = opts;
    adv.edit_plan = detail::edit_plan_for(record, edited);

    clean = adv;
    clean.setting = Setting::clean;
    clean.edit_plan = detail::edit_plan_for(record, original);
    for (auto& o : clean.options) {
      if (o.role == Role::correct) o.role = Role::shortcut;
      else if (o.role == Role::shortcut) o.role = Role::correct;
    }
  } else {
    DisorderedText text = severity == Severity::absolute
                              ? absolute_disorder(n, rng)
                              : relative_disorder(n, rng);
    // Contradicted pair in true (video) order.
    const std::size_t first = severity == Severity::absolute
                                  ? text.target_pair.first
                                  : text.target_pair.second;
    const std::size_t second = severity == Severity::absolute
                                   ? text.target_pair.second
                                   : *text.inserted_k;
    // Name the pair in the order the perturbed text shows it.
    adv.question = "According to the video, what is the actual order of the "
                   "events \"" +
                   record.events[second].description + "\" and \"" +
                   record.events[first].description + "\"?";
    opts.push_back({'A', detail::before(record, first, second), Role::correct});
    opts.push_back({'A', detail::before(record, second, first),
                    Role::shortcut});
    opts.push_back({'A', std::string(kDistractorSimultaneous),
                    Role::incorrect});
    opts.push_back({'A', std::string(kDistractorAbsent), Role::incorrect});
    rng.shuffle(std::span<Option>(opts));
    detail::assign_letters(opts);
    adv.options = opts;
    adv.disordered_text = text;

    clean = adv;
    clean.setting = Setting::clean;
    clean.disordered_text->order = Permutation::identity(n).mapping;
  }
  detail::require_distinct_texts(adv);
  return {std::move(clean), std::move(adv)};
}

/// Four option layouts; round r puts the correct option at letter r and
/// shuffles the others over the remaining letters.
inline std::array<BenchmarkItem, 4> shuffle_option_rounds(
    const BenchmarkItem& item, std::uint64_t seed) {
  if (item.options.size() != 4)
    throw PreconditionError(item.item_id + ": expected 4 options");
  Rng rng = Rng::stream(seed, item.item_id, "option-rounds");
  const Option& correct = item.option_with(Role::correct);
  std::vector<Option> others;
  for (const auto& o : item.options)
    if (o.role != Role::correct) others.push_back(o);

  std::array<BenchmarkItem, 4> rounds;
  for (int r = 0; r < 4; ++r) {
    std::vector<Option> rest = others;
    rng.shuffle(std::span<Option>(rest));
    std::vector<Option> layout;
    for (int pos = 0, next = 0; pos < 4; ++pos)
      layout.push_back(pos == r ? correct : rest[next++]);
    detail::assign_letters(layout);
    rounds[r] = item;
    rounds[r].options = std::move(layout);
    rounds[r].round = r;
  }
  return rounds;
}

// ---------------------------------------------------------------------------
// Benchmark JSONL

inline nlohmann::json to_json(const BenchmarkItem& item) {
  using nlohmann::json;
  json opts = json::array();
  for (const auto& o : item.options)
    opts.push_back({{"letter", std::string(1, o.letter)},
                    {"text", o.text},
                    {"role", to_string(o.role)}});
  json j = {{"item_id", item.item_id},
            {"video_id", item.video_id},
            {"modality", to_string(item.modality)},
            {"severity", to_string(item.severity)},
            {"setting", to_string(item.setting)},
            {"question", item.question},
            {"options", std::move(opts)},
            {"events", item.event_descriptions},
            {"seed", item.seed}};
  if (item.edit_plan) {
    json segs = json::array();
    for (const auto& [s, e] : item.edit_plan->segments)
      segs.push_back({s, e});
    j["edit_plan"] = std::move(segs);
  } else {
    j["edit_plan"] = nullptr;
  }
  if (item.disordered_text) {
    const auto& t = *item.disordered_text;
    j["text_order"] = t.order;
    j["target_pair"] = {t.target_pair.first, t.target_pair.second};
    j["inserted_k"] = t.inserted_k ? json(*t.inserted_k) : json(nullptr);
  } else {
    j["text_order"] = nullptr;
  }
  return j;
}

inline BenchmarkItem benchmark_item_from_json(const nlohmann::json& j) {
  BenchmarkItem item;
  item.item_id = j.at("item_id").get<std::string>();
  item.video_id = j.at("video_id").get<std::string>();
  item.modality = parse_modality(j.at("modality").get<std::string>());
  item.severity = parse_severity(j.at("severity").get<std::string>());
  item.setting = parse_setting(j.at("setting").get<std::string>());
  item.question = j.at("question").get<std::string>();
  for (const auto& o : j.at("options")) {
    const auto letter = o.at("letter").get<std::string>();
    if (letter.size() != 1 || letter[0] < 'A' || letter[0] > 'D')
      throw ValidationError(item.item_id, "bad option letter '" + letter + "'");
    item.options.push_back({letter[0], o.at("text").get<std::string>(),
                            parse_role(o.at("role").get<std::string>())});
  }
  if (j.contains("events"))
    item.event_descriptions = j.at("events").get<std::vector<std::string>>();
  item.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("edit_plan") && !j.at("edit_plan").is_null()) {
    EditPlan plan{item.video_id, {}};
    for (const auto& seg : j.at("edit_plan"))
      plan.segments.emplace_back(seg.at(0).get<double>(),
                                 seg.at(1).get<double>());
    item.edit_plan = std::move(plan);
  }
  if (j.contains("text_order") && !j.at("text_order").is_null()) {
    DisorderedText t;
    t.order = j.at("text_order").get<std::vector<std::size_t>>();
    if (j.contains("target_pair"))
      t.target_pair = {j["target_pair"].at(0).get<std::size_t>(),
                       j["target_pair"].at(1).get<std::size_t>()};
    if (j.contains("inserted_k") && !j["inserted_k"].is_null())
      t.inserted_k = j["inserted_k"].get<std::size_t>();
    item.disordered_text = std::move(t);
  }
  return item;
}

inline std::string serialize_benchmark(std::span<const BenchmarkItem> items) {
  std::string out;
  for (const auto& item : items) {
    out += to_json(item).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<BenchmarkItem> parse_benchmark(std::string_view text) {
  std::vector<BenchmarkItem> out;
  for_each_jsonl(text, [&](const nlohmann::json& j, std::size_t line_no) {
    try {
      out.push_back(benchmark_item_from_json(j));
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(line_no, 0, ex.what());
    }
  });
  return out;
}

}  // namespace temporob
