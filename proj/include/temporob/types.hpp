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

#include <optional>
#include <string>
#include <string_view>

#include "temporob/error.hpp"

namespace temporob {

enum class Modality { intrinsic, extrinsic };
enum class Severity { light, severe, absolute, relative };
enum class Setting { clean, adversarial };

/// Role of an answer option. `unparsable` only appears on parsed selections.
enum class Role { correct, shortcut, incorrect, unparsable };

inline std::string_view to_string(Modality m) {
  return m == Modality::intrinsic ? "intrinsic" : "extrinsic";
}

inline std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::light: return "light";
    case Severity::severe: return "severe";
    case Severity::absolute: return "absolute";
    case Severity::relative: return "relative";
  }
  return "?";
}

inline std::string_view to_string(Setting s) {
  return s == Setting::clean ? "clean" : "adversarial";
}

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::correct: return "correct";
    case Role::shortcut: return "shortcut";
    case Role::incorrect: return "incorrect";
    case Role::unparsable: return "unparsable";
  }
  return "?";
}

inline Modality parse_modality(std::string_view s) {
  if (s == "intrinsic") return Modality::intrinsic;
  if (s == "extrinsic") return Modality::extrinsic;
  throw ValidationError("modality", "unknown value '" + std::string(s) + "'");
}

inline Severity parse_severity(std::string_view s) {
  if (s == "light") return Severity::light;
  if (s == "severe") return Severity::severe;
  if (s == "absolute") return Severity::absolute;
  if (s == "relative") return Severity::relative;
  throw ValidationError("severity", "unknown value '" + std::string(s) + "'");
}

inline Setting parse_setting(std::string_view s) {
  if (s == "clean") return Setting::clean;
  if (s == "adversarial") return Setting::adversarial;
  throw ValidationError("setting", "unknown value '" + std::string(s) + "'");
}

inline Role parse_role(std::string_view s) {
  if (s == "correct") return Role::correct;
  if (s == "shortcut") return Role::shortcut;
  if (s == "incorrect") return Role::incorrect;
  if (s == "unparsable") return Role::unparsable;
  throw ValidationError("role", "unknown value '" + std::string(s) + "'");
}

inline bool compatible(Modality m, Severity s) {
  return m == Modality::intrinsic
             ? (s == Severity::light || s == Severity::severe)
             : (s == Severity::absolute || s == Severity::relative);
}

}  // namespace temporob
