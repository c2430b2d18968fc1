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

#include "adanpc/error.hpp"

namespace adanpc {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kZeroNorm: return "ZeroNorm";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kEmptyBank: return "EmptyBank";
    case ErrorCode::kNotEnoughEntries: return "NotEnoughEntries";
    case ErrorCode::kIndexStale: return "IndexStale";
    case ErrorCode::kIndexMissing: return "IndexMissing";
    case ErrorCode::kUnknownEntry: return "UnknownEntry";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kFormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::kChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kInfeasibleParams: return "InfeasibleParams";
    case ErrorCode::kNotEnoughSource: return "NotEnoughSource";
    case ErrorCode::kSizeMismatch: return "SizeMismatch";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kBadParams: return "BadParams";
  }
  return "Unknown";
}

}  // namespace adanpc
