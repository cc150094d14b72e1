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

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "temporob/annotations.hpp"

namespace temporob {
namespace {

using testing::make_record;

std::string manifest_line(const VideoRecord& r) { return to_json(r).dump() + "\n"; }

TEST(ParseAnnotations, OneVideoThreeEvents) {
  const auto recs = parse_annotations(manifest_line(make_record(3)));
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].events.size(), 3u);
  EXPECT_EQ(recs[0], make_record(3));
}

TEST(ParseAnnotations, PreservesManifestOrderAndSkipsBlankLines) {
  const std::string text = manifest_line(make_record(3, "b")) + "\n   \n" +
                           manifest_line(make_record(4, "a"));
  const auto recs = parse_annotations(text);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].video_id, "b");
  EXPECT_EQ(recs[1].video_id, "a");
}

TEST(ParseAnnotations, OverlapIsRejectedWithRule) {
  VideoRecord r = make_record(3);
  r.events[0].end = 12.0;  // end_1 > start_2
  try {
    parse_annotations(manifest_line(r));
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.subject(), "vid");
    EXPECT_NE(e.rule().find("overlaps"), std::string::npos);
  }
}

TEST(ParseAnnotations, TwoEventsIsRejected) {
  try {
    parse_annotations(manifest_line(make_record(2)));
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(e.rule().find("events count >= 3"), std::string::npos);
  }
}

TEST(ParseAnnotations, SyntaxErrorReportsLine) {
  const std::string text = manifest_line(make_record(3)) + "{\"video_id\": \"x\",\n";
  try {
    parse_annotations(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(ParseAnnotations, SchemaErrorNamesVideo) {
  try {
    parse_annotations(R"({"video_id": "v9", "duration": 3})" "\n");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.subject(), "v9");
  }
}

TEST(Validate, Rules) {
  auto broken = [](auto mutate) {
    VideoRecord r = make_record(4);
    mutate(r);
    return r;
  };
  EXPECT_NO_THROW(validate(make_record(4)));
  EXPECT_THROW(validate(broken([](auto& r) { r.video_id.clear(); })), ValidationError);
  EXPECT_THROW(validate(broken([](auto& r) { r.events[1].end = r.events[1].start; })), ValidationError);
  EXPECT_THROW(validate(broken([](auto& r) { r.events[2].description = " \t "; })), ValidationError);
  EXPECT_THROW(validate(broken([](auto& r) { r.events[0].start = -1.0; })), ValidationError);
  EXPECT_THROW(validate(broken([](auto& r) { std::swap(r.events[1], r.events[2]); })), ValidationError);
  EXPECT_THROW(validate(broken([](auto& r) { r.duration = 35.0; })), ValidationError);
  EXPECT_THROW(validate(broken([](auto& r) { r.duration = NAN; })), ValidationError);
  // Touching events are allowed.
  EXPECT_NO_THROW(validate(broken([](auto& r) { r.events[1].end = r.events[2].start; })));
}

TEST(SerializeAnnotations, RoundTrips) {
  std::vector<VideoRecord> recs{make_record(3, "x"), make_record(5, "y")};
  recs[1].events[2].description = "stir \"slowly\"";
  const std::string text = serialize_annotations(recs);
  EXPECT_EQ(parse_annotations(text), recs);
  EXPECT_EQ(serialize_annotations(parse_annotations(text)), text);
}

TEST(ConvertCoin, MapsFieldsSortsAndSkipsInvalid) {
  const auto coin = nlohmann::json::parse(R"({"database": {
    "vidA": {"duration": 50.0, "annotation": [
      {"id": "2", "label": "add sugar", "segment": [20.0, 30.0]},
      {"id": "1", "label": "boil water", "segment": [5.0, 15.0]},
      {"id": "3", "label": "pour tea", "segment": [31.0, 40.0]}]},
    "vidB": {"duration": 20.0, "annotation": [
      {"id": 7, "label": "only one", "segment": [1.0, 2.0]}]}}})");
  std::vector<std::string> skipped;
  const auto recs = convert_coin(coin, &skipped);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].video_id, "vidA");
  EXPECT_EQ(recs[0].events[0].description, "boil water");
  EXPECT_EQ(recs[0].events[0].event_id, "1");
  EXPECT_EQ(recs[0].events[2].end, 40.0);
  EXPECT_EQ(skipped, std::vector<std::string>{"vidB"});
}

TEST(DatasetStats, SingleVideo) {
  const std::vector<VideoRecord> recs{make_record(3)};
  const auto s = dataset_stats(recs);
  EXPECT_EQ(s.video_count, 1u);
  EXPECT_DOUBLE_EQ(s.events_per_video_mean, 3.0);
  EXPECT_DOUBLE_EQ(s.duration_min, 30.0);
  EXPECT_DOUBLE_EQ(s.duration_max, 30.0);
  EXPECT_DOUBLE_EQ(s.duration_mean, 30.0);
}

TEST(DatasetStats, MeanEvents) {
  const std::vector<VideoRecord> recs{make_record(4, "a"), make_record(6, "b")};
  EXPECT_DOUBLE_EQ(dataset_stats(recs).events_per_video_mean, 5.0);
}

TEST(DatasetStats, EmptyThrows) {
  EXPECT_THROW(dataset_stats(std::vector<VideoRecord>{}), EmptyDatasetError);
}

TEST(DatasetStats, PermutationInvariantAndOrdered) {
  std::vector<VideoRecord> recs;
  for (int i = 0; i < 50; ++i) {
    VideoRecord r = make_record(3 + i % 5, "v" + std::to_string(i));
    r.duration += 0.1 * i * i;
    recs.push_back(r);
  }
  const auto a = dataset_stats(recs);
  std::reverse(recs.begin(), recs.end());
  std::rotate(recs.begin(), recs.begin() + 17, recs.end());
  const auto b = dataset_stats(recs);
  EXPECT_EQ(a.duration_mean, b.duration_mean);
  EXPECT_EQ(a.events_per_video_mean, b.events_per_video_mean);
  EXPECT_LE(a.duration_min, a.duration_mean);
  EXPECT_LE(a.duration_mean, a.duration_max);
}

// A manifest built to the published benchmark statistics: 562 videos,
// 6.4 events per video, durations 20.8 s to 149.9 s averaging 106.7 s.
TEST(DatasetStats, PublishedBenchmarkShape) {
  std::vector<VideoRecord> recs;
  const std::size_t n = 562;
  const double total_events = 3597;  // 6.4 * 562 = 3596.8, rounded
  std::vector<double> durations(n, 106.7);
  durations[0] = 20.8;
  durations[1] = 149.9;
  // Keep the sum at 106.7 * 562 by compensating on one record.
  durations[2] = 106.7 * n - 20.8 - 149.9 - 106.7 * (n - 3);
  std::size_t events_left = static_cast<std::size_t>(total_events);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i < 225 ? 7 : 6;
    events_left -= k;
    VideoRecord r = make_record(k, "coin" + std::to_string(i));
    const double scale = durations[i] / r.duration;
    for (auto& e : r.events) {
      e.start *= scale;
      e.end *= scale;
    }
    r.duration = durations[i];
    ASSERT_NO_THROW(validate(r));
    recs.push_back(r);
  }
  ASSERT_EQ(events_left, 0u);
  const auto s = dataset_stats(recs);
  EXPECT_EQ(s.video_count, 562u);
  EXPECT_NEAR(s.events_per_video_mean, 6.4, 0.05);
  EXPECT_DOUBLE_EQ(s.duration_min, 20.8);
  EXPECT_DOUBLE_EQ(s.duration_max, 149.9);
  EXPECT_NEAR(s.duration_mean, 106.7, 1e-9);
  // Three questions per video.
  EXPECT_EQ(3 * s.video_count, 1686u);
}

}  // namespace
}  // namespace temporob
