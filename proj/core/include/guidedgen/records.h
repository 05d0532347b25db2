// Copyright 2026 The guidedgen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// JSON records shared by the batch pipeline and the HTTP service.

#ifndef GUIDEDGEN_RECORDS_H_
#define GUIDEDGEN_RECORDS_H_

#include <map>
#include <optional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "guidedgen/common.h"
#include "guidedgen/decoder.h"

namespace guidedgen {

// kInvalidArgument that names the offending request field.
class FieldError : public Error {
 public:
  FieldError(std::string field, const std::string& message)
      : Error(ErrorCode::kInvalidArgument, field + ": " + message),
        field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

nlohmann::json to_json(const GenerationConfig& config);

// Applies the fields present in `overrides` (a JSON object); unknown fields,
// wrong types and out-of-range values raise FieldError. `prefix` is prepended
// to reported field names. The seed is not an override.
void apply_generation_overrides(GenerationConfig& config,
                                const nlohmann::json& overrides,
                                const std::string& prefix = "");

// Mean, over the non-warmup steps, of the posterior each control assigned to
// the chosen token. Controls without such steps map to nullopt.
std::map<std::string, std::optional<double>> mean_posteriors(
    const CandidateTrace& trace, std::span<const AttributeControl> controls);

// Compact per-step trace (no full distributions).
nlohmann::json steps_json(const CandidateTrace& trace);

// Stable digest of a candidate's text and token ids.
std::string candidate_digest(const std::string& text,
                             std::span<const TokenId> ids);

// Derived seed for one prompt of a batch run.
std::uint64_t prompt_seed(std::uint64_t seed, std::size_t prompt_index);

}  // namespace guidedgen

#endif  // GUIDEDGEN_RECORDS_H_
