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


// Library walk-through: benchmark construction, a mock evaluation, scoring,
// and a short PanoDPO run on synthetic preferences.
//
//   pipeline_sample [samples/data/annotations.jsonl]

#include <cstdio>
#include <string>
#include <vector>

#include "temporob/annotations.hpp"
#include "temporob/evalclient.hpp"
#include "temporob/metrics.hpp"
#include "temporob/panodpo.hpp"
#include "temporob/perturb.hpp"

using namespace temporob;

int main(int argc, char** argv) {
  const std::string path = argc > 1 ? argv[1] : "samples/data/annotations.jsonl";
  try {
    const auto records = parse_annotations(read_file(path));
    const auto stats = dataset_stats(records);
    std::printf("%zu videos, %.1f events per video\n", stats.video_count, stats.events_per_video_mean);

    std::vector<BenchmarkItem> bench;
    for (const auto& rec : records) {
      auto [clean, adv] = build_item(rec, Modality::extrinsic, Severity::relative, 42);
      bench.push_back(clean);
      bench.push_back(adv);
    }
    std::printf("\n%s\n\n", render_prompt(bench[1]).user_text.c_str());

    // A model that always follows the text order: correct on clean items,
    // shortcut on adversarial ones.
    MockResponder clean_model(MockPolicy::parse("always_correct"));
    MockResponder shortcut_model(MockPolicy::parse("always_shortcut"));
    std::vector<SelectionRecord> clean_log, adv_log;
    for (const auto& item : bench) {
      const auto prompt = render_prompt(item);
      if (item.setting == Setting::clean)
        clean_log.push_back(parse_selection(item, clean_model.respond(item, prompt)));
      else
        adv_log.push_back(parse_selection(item, shortcut_model.respond(item, prompt)));
    }
    const MetricSummary s = summarize(clean_log, adv_log);
    std::printf("acc_clean %.2f  acc_adv %.2f  FR %.2f  WFR %.2f\n\n", *s.acc_clean, *s.acc_adv, *s.fr,
                *s.wfr);

    const auto data = prepare_examples(synthetic_preferences(512, 1), synthetic_preferences(512, 1, "heldout"));
    TrainConfig cfg;
    cfg.lr = 0.2;
    const TrainResult res =
        train(PolicyPair(ToyPolicyParams::random(data.vocab.size(), 8, 8, 1)), data.train, cfg, data.heldout);
    for (const auto& r : res.history)
      std::printf("epoch %d  loss %.4f  held-out gap %+.4f\n", r.epoch, r.loss.total, *r.heldout_gap);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
