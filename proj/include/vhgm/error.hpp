/* Copyright 2026 The VHGM Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef VHGM_ERROR_HPP_
#define VHGM_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace vhgm {

enum class ErrorCode {
  kUnknownSchemaVersion,
  kColumnCountMismatch,
  kAllMissingColumn,
  kAttributeNotInSchema,
  kInvalidSchema,
  kParseError,
  kNonpositiveVariance,
  kEmptyKeyRow,
  kShapeMismatch,
  kTypeMismatch,
  kStatsSchemaMismatch,
  kDimensionMismatch,
  kUntrainedModel,
  kEmptyTestSet,
  kDegenerateRange,
  kNotPositiveDefinite,
  kRowBudgetExceeded,
  kInvalidArgument,
  kCheckpointMismatch,
  kIoError,
};

const char* ErrorCodeName(ErrorCode code);

// All library failures surface as this exception. `attribute_id` is set when
// the failure can be pinned to one column.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string attribute_id = {})
      : std::runtime_error(message), code_(code), attribute_id_(std::move(attribute_id)) {}

  ErrorCode code() const { return code_; }
  const std::string& attribute_id() const { return attribute_id_; }

 private:
  ErrorCode code_;
  std::string attribute_id_;
};

}  // namespace vhgm

#endif  // VHGM_ERROR_HPP_
