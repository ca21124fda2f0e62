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

#include "lidarprobe/errors.hpp"

namespace lidarprobe {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid-input";
    case ErrorKind::kFrame: return "frame-mismatch";
    case ErrorKind::kOutOfRange: return "out-of-range";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kNotEnoughData: return "not-enough-data";
    case ErrorKind::kTooFewPoints: return "too-few-points";
    case ErrorKind::kMissingNormals: return "missing-normals";
    case ErrorKind::kEmptyReconstruction: return "empty-reconstruction";
    case ErrorKind::kDegenerateScan: return "degenerate-scan";
    case ErrorKind::kDegeneracy: return "degeneracy";
    case ErrorKind::kRegistrationFailure: return "registration-failure";
    case ErrorKind::kNoMatch: return "no-match";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kSolver: return "solver";
    case ErrorKind::kInternal: return "internal";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput:
    case ErrorKind::kFrame:
    case ErrorKind::kOutOfRange:
    case ErrorKind::kIo:
    case ErrorKind::kNotEnoughData:
    case ErrorKind::kTooFewPoints:
    case ErrorKind::kMissingNormals:
    case ErrorKind::kEmptyReconstruction:
      return 2;
    case ErrorKind::kDegenerateScan:
    case ErrorKind::kDegeneracy:
      return 3;
    case ErrorKind::kRegistrationFailure:
    case ErrorKind::kNoMatch:
      return 4;
    case ErrorKind::kDivergence:
    case ErrorKind::kSolver:
    case ErrorKind::kInternal:
      return 5;
  }
  return 5;
}

}  // namespace lidarprobe
