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

#include <stdexcept>
#include <string>

namespace temporob {

/// Root of every exception the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input syntax. Carries the 1-based line and byte offset.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t offset, const std::string& what)
      : Error("line " + std::to_string(line) + ", offset " +
              std::to_string(offset) + ": " + what),
        line_(line),
        offset_(offset) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t line_;
  std::size_t offset_;
};

/// Well-formed input that breaks a domain rule.
class ValidationError : public Error {
 public:
  ValidationError(std::string subject, std::string rule)
      : Error(subject + ": " + rule),
        subject_(std::move(subject)),
        rule_(std::move(rule)) {}

  const std::string& subject() const noexcept { return subject_; }
  const std::string& rule() const noexcept { return rule_; }

 private:
  std::string subject_;
  std::string rule_;
};

class EmptyDatasetError : public Error {
 public:
  EmptyDatasetError() : Error("empty dataset") {}
};

/// A perturbation or option set could not be constructed.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

class TooFewEventsError : public ConstructionError {
 public:
  explicit TooFewEventsError(std::size_t n)
      : ConstructionError("too few events: need at least 3, got " +
                          std::to_string(n)) {}
};

class IncompleteRoundsError : public Error {
 public:
  using Error::Error;
};

class VocabularyError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace temporob
