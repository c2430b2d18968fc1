// Copyright 2026 The adanpc Authors.
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
#include <string_view>

namespace adanpc {

enum class ErrorCode {
  kZeroNorm,
  kDimMismatch,
  kEmptyInput,
  kLabelOutOfRange,
  kEmptyBank,
  kNotEnoughEntries,
  kIndexStale,
  kIndexMissing,
  kUnknownEntry,
  kIo,
  kFormatVersionMismatch,
  kChecksumMismatch,
  kShapeMismatch,
  kInfeasibleParams,
  kNotEnoughSource,
  kSizeMismatch,
  kTooLarge,
  kBadParams,
};

/// Stable, machine-parseable name of an error code (e.g. "EmptyBank").
std::string_view error_name(ErrorCode code);

/// All library failures are reported through this exception type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace adanpc
