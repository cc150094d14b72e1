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

// Score / Acc / FR / WFR / T-Acc and likelihood-gap statistics.
//
// Undefined metrics (zero denominators) are std::nullopt and serialize as
// JSON null, never as 0.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "temporob/error.hpp"
#include "temporob/io.hpp"
#include "temporob/perturb.hpp"
#include "temporob/types.hpp"

namespace temporob {

struct ScoreResult {
  int score = 0;
  std::optional<char> letter;
  Role role = Role::unparsable;
};

namespace detail {

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace detail

/// First standalone letter A-D in `text`, if any.
inline std::optional<char> find_option_letter(std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c < 'A' || c > 'D') continue;
    const bool left_ok = i == 0 || !detail::is_word_char(text[i - 1]);
    const bool right_ok =
        i + 1 == text.size() || !detail::is_word_char(text[i + 1]);
    if (left_ok && right_ok) return c;
  }
  return std::nullopt;
}

/// Parses a free-form response against lettered options. A standalone letter
/// wins; otherwise the longest option text contained in the response
/// (case-insensitive) is taken if no other option ties its length.
inline ScoreResult score_match(char correct_letter, std::string_view response,
                               std::span<const Option> options) {
  ScoreResult r;
  std::optional<char> letter = find_option_letter(response);
  if (!letter) {
    const std::string hay = detail::lower(response);
    std::size_t best_len = 0;
    int best_count = 0;
    for (const auto& o : options) {
      if (o.text.empty()) continue;
      if (hay.find(detail::lower(o.text)) == std::string::npos) continue;
      if (o.text.size() > best_len) {
        best_len = o.text.size();
        best_count = 1;
        letter = o.letter;
      } else if (o.text.size() == best_len) {
        ++best_count;
      }
    }
    if (best_count != 1) letter.reset();
  }
  if (!letter) return r;
  const auto it = std::find_if(options.begin(), options.end(),
                               [&](const Option& o) { return o.letter == *letter; });
  if (it == options.end()) return r;
  r.letter = letter;
  r.role = it->role;
  r.score = *letter == correct_letter ? 1 : 0;
  return r;
}

struct SelectionRecord {
  std::string item_id;
  Setting setting = Setting::adversarial;
  int round = 0;
  std::string raw_text;
  std::optional<char> parsed_letter;
  Role parsed_role = Role::unparsable;
  std::optional<std::string> error;

  friend bool operator==(const SelectionRecord&,
                         const SelectionRecord&) = default;
};

inline nlohmann::json to_json(const SelectionRecord& r) {
  using nlohmann::json;
  return {{"item_id", r.item_id},
          {"setting", to_string(r.setting)},
          {"round", r.round},
          {"raw_text", r.raw_text},
          {"parsed_letter",
           r.parsed_letter ? json(std::string(1, *r.parsed_letter)) : json(nullptr)},
          {"parsed_role", to_string(r.parsed_role)},
          {"error", r.error ? json(*r.error) : json(nullptr)}};
}

inline SelectionRecord selection_from_json(const nlohmann::json& j) {
  SelectionRecord r;
  r.item_id = j.at("item_id").get<std::string>();
  r.setting = parse_setting(j.at("setting").get<std::string>());
  r.round = j.at("round").get<int>();
  r.raw_text = j.at("raw_text").get<std::string>();
  if (j.contains("parsed_letter") && !j["parsed_letter"].is_null()) {
    const auto s = j["parsed_letter"].get<std::string>();
    if (s.size() != 1) throw ValidationError(r.item_id, "bad parsed_letter");
    r.parsed_letter = s[0];
  }
  r.parsed_role = parse_role(j.at("parsed_role").get<std::string>());
  if (j.contains("error") && !j["error"].is_null())
    r.error = j["error"].get<std::string>();
  return r;
}

inline std::vector<SelectionRecord> parse_eval_log(std::string_view text) {
  std::vector<SelectionRecord> out;
  for_each_jsonl(text, [&](const nlohmann::json& j, std::size_t line_no) {
    try {
      out.push_back(selection_from_json(j));
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(line_no, 0, ex.what());
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Accuracy / flip rates

/// Round-0 records of one setting, first occurrence per item.
inline std::map<std::string, Role> round0_roles(
    std::span<const SelectionRecord> log, Setting setting) {
  std::map<std::string, Role> roles;
  for (const auto& r : log)
    if (r.setting == setting && r.round == 0) roles.emplace(r.item_id, r.parsed_role);
  return roles;
}

inline std::optional<double> accuracy(std::span<const SelectionRecord> log,
                                      Setting setting) {
  const auto roles = round0_roles(log, setting);
  if (roles.empty()) return std::nullopt;
  std::size_t hits = 0;
  for (const auto& [id, role] : roles) hits += role == Role::correct;
  return static_cast<double>(hits) / static_cast<double>(roles.size());
}

struct PairedEntry {
  Role clean = Role::unparsable;
  Role adversarial = Role::unparsable;
};

struct PairedEvalLog {
  std::map<std::string, PairedEntry> items;
  /// Items seen in only one setting.
  std::size_t excluded = 0;
};

inline PairedEvalLog pair_logs(std::span<const SelectionRecord> log) {
  const auto clean = round0_roles(log, Setting::clean);
  const auto adv = round0_roles(log, Setting::adversarial);
  PairedEvalLog p;
  for (const auto& [id, role] : clean) {
    const auto it = adv.find(id);
    if (it == adv.end()) {
      ++p.excluded;
      continue;
    }
    p.items.emplace(id, PairedEntry{role, it->second});
  }
  for (const auto& [id, role] : adv) p.excluded += clean.count(id) == 0;
  return p;
}

struct FlipCounts {
  std::size_t d_plus = 0;
  std::size_t to_shortcut = 0;
  std::size_t not_correct = 0;
};

inline FlipCounts flip_counts(const PairedEvalLog& paired) {
  FlipCounts c;
  for (const auto& [id, e] : paired.items) {
    if (e.clean != Role::correct) continue;
    ++c.d_plus;
    c.to_shortcut += e.adversarial == Role::shortcut;
    c.not_correct += e.adversarial != Role::correct;
  }
  return c;
}

inline std::optional<double> flip_rate(const PairedEvalLog& paired) {
  const FlipCounts c = flip_counts(paired);
  if (c.d_plus == 0) return std::nullopt;
  return static_cast<double>(c.to_shortcut) / static_cast<double>(c.d_plus);
}

inline std::optional<double> weak_flip_rate(const PairedEvalLog& paired) {
  const FlipCounts c = flip_counts(paired);
  if (c.d_plus == 0) return std::nullopt;
  return static_cast<double>(c.not_correct) / static_cast<double>(c.d_plus);
}

inline constexpr int kVotingRounds = 4;
inline constexpr int kVotingThreshold = 3;

/// Fraction of items answered correctly in at least 3 of their 4 rounds.
inline std::optional<double> true_accuracy(std::span<const SelectionRecord> log,
                                           Setting setting = Setting::adversarial) {
  std::map<std::string, std::map<int, Role>> rounds;
  for (const auto& r : log)
    if (r.setting == setting) rounds[r.item_id].emplace(r.round, r.parsed_role);
  if (rounds.empty()) return std::nullopt;
  std::string missing;
  std::size_t voted = 0;
  for (const auto& [id, by_round] : rounds) {
    int correct = 0;
    bool complete = true;
    for (int k = 0; k < kVotingRounds; ++k) {
      const auto it = by_round.find(k);
      if (it == by_round.end()) {
        complete = false;
        break;
      }
      correct += it->second == Role::correct;
    }
    if (!complete) {
      missing += missing.empty() ? id : ", " + id;
      continue;
    }
    voted += correct >= kVotingThreshold;
  }
  if (!missing.empty())
    throw IncompleteRoundsError("items without 4 rounds: " + missing);
  return static_cast<double>(voted) / static_cast<double>(rounds.size());
}

// ---------------------------------------------------------------------------
// Likelihood gaps

struct GapStats {
  std::vector<double> gaps;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::vector<std::size_t> histogram;

  double bin_width() const {
    return histogram.empty() ? 0.0
                             : (max - min) / static_cast<double>(histogram.size());
  }
};

/// Mean plus an equal-width histogram over [min, max]; the top edge falls
/// into the last bin and a zero-width range puts everything in bin 0.
inline std::optional<GapStats> gap_stats(std::span<const double> gaps,
                                         std::size_t bin_count) {
  if (gaps.empty()) return std::nullopt;
  if (bin_count == 0) throw PreconditionError("bin_count must be positive");
  GapStats s;
  s.gaps.assign(gaps.begin(), gaps.end());
  double sum = 0.0;
  for (double g : gaps) {
    if (!std::isfinite(g)) throw NumericError("gap_stats: non-finite gap");
    sum += g;
  }
  s.mean = sum / static_cast<double>(gaps.size());
  const auto [lo, hi] = std::minmax_element(gaps.begin(), gaps.end());
  s.min = *lo;
  s.max = *hi;
  s.histogram.assign(bin_count, 0);
  const double width = s.max - s.min;
  for (double g : gaps) {
    std::size_t b = 0;
    if (width > 0.0) {
      b = static_cast<std::size_t>((g - s.min) / width *
                                   static_cast<double>(bin_count));
      b = std::min(b, bin_count - 1);
    }
    ++s.histogram[b];
  }
  return s;
}

// ---------------------------------------------------------------------------
// Reports

struct MetricCounts {
  std::size_t n_clean = 0;
  std::size_t n_adv = 0;
  std::size_t n_paired = 0;
  std::size_t d_plus = 0;
  std::size_t excluded = 0;
  std::size_t unparsable_clean = 0;
  std::size_t unparsable_adv = 0;
  std::size_t fr_numerator = 0;
  std::size_t wfr_numerator = 0;
};

struct MetricSummary {
  std::optional<double> acc_clean;
  std::optional<double> acc_adv;
  std::optional<double> fr;
  std::optional<double> wfr;
  std::optional<double> t_acc;
  MetricCounts counts;
};

struct MetricReport {
  MetricSummary overall;
  std::map<std::string, MetricSummary> by_severity;
};

/// "video/modality-severity" -> "severity"; "unknown" when not of that shape.
inline std::string severity_from_item_id(std::string_view item_id) {
  const auto slash = item_id.rfind('/');
  const auto dash = item_id.rfind('-');
  if (slash == std::string_view::npos || dash == std::string_view::npos ||
      dash < slash)
    return "unknown";
  const std::string sev(item_id.substr(dash + 1));
  try {
    parse_severity(sev);
  } catch (const ValidationError&) {
    return "unknown";
  }
  return sev;
}

inline MetricSummary summarize(std::span<const SelectionRecord> clean,
                               std::span<const SelectionRecord> adv) {
  std::vector<SelectionRecord> both;
  for (const auto& r : clean)
    if (r.setting == Setting::clean) both.push_back(r);
  for (const auto& r : adv)
    if (r.setting == Setting::adversarial) both.push_back(r);

  MetricSummary s;
  s.acc_clean = accuracy(both, Setting::clean);
  s.acc_adv = accuracy(both, Setting::adversarial);
  const PairedEvalLog paired = pair_logs(both);
  s.fr = flip_rate(paired);
  s.wfr = weak_flip_rate(paired);
  const bool has_rounds = std::any_of(both.begin(), both.end(), [](auto& r) {
    return r.setting == Setting::adversarial && r.round > 0;
  });
  if (has_rounds) s.t_acc = true_accuracy(both, Setting::adversarial);

  const auto cr = round0_roles(both, Setting::clean);
  const auto ar = round0_roles(both, Setting::adversarial);
  const FlipCounts fc = flip_counts(paired);
  s.counts.n_clean = cr.size();
  s.counts.n_adv = ar.size();
  s.counts.n_paired = paired.items.size();
  s.counts.excluded = paired.excluded;
  s.counts.d_plus = fc.d_plus;
  s.counts.fr_numerator = fc.to_shortcut;
  s.counts.wfr_numerator = fc.not_correct;
  for (const auto& [id, role] : cr) s.counts.unparsable_clean += role == Role::unparsable;
  for (const auto& [id, role] : ar) s.counts.unparsable_adv += role == Role::unparsable;
  return s;
}

inline MetricReport build_report(std::span<const SelectionRecord> clean,
                                 std::span<const SelectionRecord> adv) {
  MetricReport rep;
  rep.overall = summarize(clean, adv);
  std::map<std::string, std::pair<std::vector<SelectionRecord>,
                                  std::vector<SelectionRecord>>> groups;
  for (const auto& r : clean) groups[severity_from_item_id(r.item_id)].first.push_back(r);
  for (const auto& r : adv) groups[severity_from_item_id(r.item_id)].second.push_back(r);
  for (const auto& [sev, g] : groups)
    rep.by_severity.emplace(sev, summarize(g.first, g.second));
  return rep;
}

namespace detail {

inline nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline std::optional<double> opt_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

inline nlohmann::json summary_json(const MetricSummary& s) {
  const auto& c = s.counts;
  return {{"acc_clean", opt_json(s.acc_clean)},
          {"acc_adv", opt_json(s.acc_adv)},
          {"fr", opt_json(s.fr)},
          {"wfr", opt_json(s.wfr)},
          {"t_acc", opt_json(s.t_acc)},
          {"counts",
           {{"n_clean", c.n_clean},
            {"n_adv", c.n_adv},
            {"n_paired", c.n_paired},
            {"d_plus", c.d_plus},
            {"excluded", c.excluded},
            {"unparsable_clean", c.unparsable_clean},
            {"unparsable_adv", c.unparsable_adv},
            {"fr_numerator", c.fr_numerator},
            {"wfr_numerator", c.wfr_numerator}}}};
}

inline MetricSummary summary_from_json(const nlohmann::json& j) {
  MetricSummary s;
  s.acc_clean = opt_from(j, "acc_clean");
  s.acc_adv = opt_from(j, "acc_adv");
  s.fr = opt_from(j, "fr");
  s.wfr = opt_from(j, "wfr");
  s.t_acc = opt_from(j, "t_acc");
  if (j.contains("counts")) {
    const auto& c = j.at("counts");
    auto get = [&](const char* k) { return c.value(k, std::size_t{0}); };
    s.counts = {get("n_clean"),          get("n_adv"),          get("n_paired"),
                get("d_plus"),           get("excluded"),       get("unparsable_clean"),
                get("unparsable_adv"),   get("fr_numerator"),   get("wfr_numerator")};
  }
  return s;
}

inline std::string csv_cell(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

}  // namespace detail

inline nlohmann::json to_json(const MetricReport& rep) {
  nlohmann::json j = detail::summary_json(rep.overall);
  nlohmann::json sev = nlohmann::json::object();
  for (const auto& [k, s] : rep.by_severity) sev[k] = detail::summary_json(s);
  j["by_severity"] = std::move(sev);
  return j;
}

inline MetricReport report_from_json(const nlohmann::json& j) {
  MetricReport rep;
  rep.overall = detail::summary_from_json(j);
  if (j.contains("by_severity"))
    for (const auto& [k, v] : j.at("by_severity").items())
      rep.by_severity.emplace(k, detail::summary_from_json(v));
  return rep;
}

/// One row per severity class, then an "all" row. Undefined cells are empty.
inline std::string report_to_csv(const MetricReport& rep) {
  std::string out = "severity,acc_clean,acc_adv,fr,wfr,t_acc,n_paired,d_plus\n";
  auto row = [&](const std::string& name, const MetricSummary& s) {
    out += name + "," + detail::csv_cell(s.acc_clean) + "," +
           detail::csv_cell(s.acc_adv) + "," + detail::csv_cell(s.fr) + "," +
           detail::csv_cell(s.wfr) + "," + detail::csv_cell(s.t_acc) + "," +
           std::to_string(s.counts.n_paired) + "," +
           std::to_string(s.counts.d_plus) + "\n";
  };
  for (const auto& [k, s] : rep.by_severity) row(k, s);
  row("all", rep.overall);
  return out;
}

}  // namespace temporob
