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

// Event-annotated video manifests.
//
// A manifest is JSONL, one video per line:
//   {"video_id": str, "duration": float,
//    "events": [{"event_id": str, "description": str,
//                "start": float, "end": float}, ...]}

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "temporob/error.hpp"
#include "temporob/io.hpp"

namespace temporob {

struct EventAnnotation {
  std::string event_id;
  std::string description;
  double start = 0.0;
  double end = 0.0;

  friend bool operator==(const EventAnnotation&,
                         const EventAnnotation&) = default;
};

struct VideoRecord {
  std::string video_id;
  double duration = 0.0;
  std::vector<EventAnnotation> events;

  friend bool operator==(const VideoRecord&, const VideoRecord&) = default;
};

struct DatasetStats {
  std::size_t video_count = 0;
  double events_per_video_mean = 0.0;
  double duration_min = 0.0;
  double duration_max = 0.0;
  double duration_mean = 0.0;
};

inline constexpr std::size_t kMinEventsPerVideo = 3;

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\f\v");
  return s.substr(first, last - first + 1);
}

}  // namespace detail

/// Throws ValidationError naming the video and the broken rule.
inline void validate(const VideoRecord& rec) {
  const std::string& id = rec.video_id;
  if (id.empty()) throw ValidationError("<unnamed>", "video_id is empty");
  if (!std::isfinite(rec.duration) || rec.duration < 0.0)
    throw ValidationError(id, "duration must be finite and non-negative");
  if (rec.events.size() < kMinEventsPerVideo)
    throw ValidationError(id, "events count >= 3 required, got " +
                                  std::to_string(rec.events.size()));
  for (std::size_t i = 0; i < rec.events.size(); ++i) {
    const auto& e = rec.events[i];
    const std::string where = "event " + std::to_string(i) + " ('" +
                              e.event_id + "')";
    if (!std::isfinite(e.start) || !std::isfinite(e.end))
      throw ValidationError(id, where + ": non-finite timestamp");
    if (e.start < 0.0)
      throw ValidationError(id, where + ": start must be non-negative");
    if (!(e.start < e.end))
      throw ValidationError(id, where + ": start < end required");
    if (detail::trim(e.description).empty())
      throw ValidationError(id, where + ": description is blank");
    if (i > 0) {
      const auto& prev = rec.events[i - 1];
      if (e.start < prev.start)
        throw ValidationError(id, where + ": events not sorted by start");
      if (prev.end > e.start)
        throw ValidationError(id, where + ": overlaps previous event (end_" +
                                      std::to_string(i - 1) + " > start_" +
                                      std::to_string(i) + ")");
    }
  }
  if (rec.duration < rec.events.back().end)
    throw ValidationError(id, "duration must be >= end of last event");
}

inline nlohmann::json to_json(const VideoRecord& rec) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : rec.events) {
    events.push_back({{"event_id", e.event_id},
                      {"description", e.description},
                      {"start", e.start},
                      {"end", e.end}});
  }
  return {{"video_id", rec.video_id},
          {"duration", rec.duration},
          {"events", std::move(events)}};
}

/// Builds a record from one decoded manifest object. Schema violations
/// surface as ValidationError.
inline VideoRecord video_record_from_json(const nlohmann::json& j) {
  const std::string id =
      j.is_object() && j.contains("video_id") && j["video_id"].is_string()
          ? j["video_id"].get<std::string>()
          : std::string("<unnamed>");
  try {
    VideoRecord rec;
    rec.video_id = j.at("video_id").get<std::string>();
    rec.duration = j.at("duration").get<double>();
    for (const auto& ej : j.at("events")) {
      EventAnnotation e;
      e.event_id = ej.at("event_id").get<std::string>();
      e.description = ej.at("description").get<std::string>();
      e.start = ej.at("start").get<double>();
      e.end = ej.at("end").get<double>();
      rec.events.push_back(std::move(e));
    }
    return rec;
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(id, std::string("schema: ") + ex.what());
  }
}

/// Parses a JSONL manifest. Blank lines are skipped; records keep file order.
inline std::vector<VideoRecord> parse_annotations(std::string_view manifest) {
  std::vector<VideoRecord> out;
  for_each_jsonl(manifest, [&](const nlohmann::json& j, std::size_t) {
    VideoRecord rec = video_record_from_json(j);
    validate(rec);
    out.push_back(std::move(rec));
  });
  return out;
}

/// Canonical JSONL (keys sorted, one record per line, trailing newline).
inline std::string serialize_annotations(std::span<const VideoRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

/// Converts a COIN-style annotation database into manifest records.
///
/// Mapping: database key -> video_id, "duration" -> duration, each
/// "annotation" entry -> event with event_id = "id", description = "label",
/// (start, end) = "segment". Events are sorted by start. Videos come out in
/// key order; invalid videos are skipped and their ids appended to `skipped`.
inline std::vector<VideoRecord> convert_coin(
    const nlohmann::json& coin, std::vector<std::string>* skipped = nullptr) {
  std::vector<VideoRecord> out;
  const auto& db = coin.contains("database") ? coin.at("database") : coin;
  for (const auto& [key, v] : db.items()) {
    VideoRecord rec;
    rec.video_id = key;
    try {
      rec.duration = v.at("duration").get<double>();
      for (const auto& a : v.at("annotation")) {
        EventAnnotation e;
        e.event_id = a.at("id").is_string() ? a.at("id").get<std::string>()
                                            : a.at("id").dump();
        e.description = a.at("label").get<std::string>();
        e.start = a.at("segment").at(0).get<double>();
        e.end = a.at("segment").at(1).get<double>();
        rec.events.push_back(std::move(e));
      }
      std::stable_sort(rec.events.begin(), rec.events.end(),
                       [](const auto& a, const auto& b) {
                         return a.start < b.start;
                       });
      validate(rec);
    } catch (const std::exception&) {
      if (skipped) skipped->push_back(key);
      continue;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

/// Summary statistics over a non-empty record set. Durations are summed in
/// sorted order so the result does not depend on input order.
inline DatasetStats dataset_stats(std::span<const VideoRecord> records) {
  if (records.empty()) throw EmptyDatasetError();
  std::vector<double> durations;
  durations.reserve(records.size());
  std::size_t events = 0;
  for (const auto& r : records) {
    durations.push_back(r.duration);
    events += r.events.size();
  }
  std::sort(durations.begin(), durations.end());
  double sum = 0.0;
  for (double d : durations) sum += d;
  const double n = static_cast<double>(records.size());
  DatasetStats s;
  s.video_count = records.size();
  s.events_per_video_mean = static_cast<double>(events) / n;
  s.duration_min = durations.front();
  s.duration_max = durations.back();
  s.duration_mean = std::clamp(sum / n, s.duration_min, s.duration_max);
  return s;
}

}  // namespace temporob
