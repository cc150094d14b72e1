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

// Small builders shared by the unit suites.

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "temporob/annotations.hpp"

namespace temporob::testing {

/// n back-to-back 10 s events described "e1".."en".
inline VideoRecord make_record(std::size_t n, std::string id = "vid") {
  VideoRecord rec;
  rec.video_id = std::move(id);
  for (std::size_t i = 0; i < n; ++i) {
    rec.events.push_back({std::to_string(i + 1), "e" + std::to_string(i + 1),
                          10.0 * static_cast<double>(i),
                          10.0 * static_cast<double>(i + 1)});
  }
  rec.duration = 10.0 * static_cast<double>(n);
  return rec;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("temporob-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  static int& counter() {
    static int n = 0;
    return n;
  }
  std::filesystem::path path_;
};

}  // namespace temporob::testing
