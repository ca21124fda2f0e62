// Copyright 2026 The lidarprobe Authors
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

#ifndef LIDARPROBE_ERRORS_HPP
#define LIDARPROBE_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace lidarprobe {

enum class ErrorKind {
  kInvalidInput,
  kFrame,
  kOutOfRange,
  kIo,
  kNotEnoughData,
  kTooFewPoints,
  kMissingNormals,
  kEmptyReconstruction,
  kDegenerateScan,
  kDegeneracy,
  kRegistrationFailure,
  kNoMatch,
  kDivergence,
  kSolver,
  kInternal,
};

std::string_view to_string(ErrorKind kind);

/// Process exit code for an error class: 2 input/validation, 3 degeneracy,
/// 4 registration failure, 5 internal.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace lidarprobe

#endif  // LIDARPROBE_ERRORS_HPP
