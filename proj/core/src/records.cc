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


#include "guidedgen/records.h"

#include <cmath>

namespace guidedgen {
namespace {

using nlohmann::json;

int int_field(const json& v, const std::string& field) {
  if (!v.is_number_integer()) throw FieldError(field, "expected an integer");
  const auto x = v.get<std::int64_t>();
  if (x < 0 || x > 1'000'000) throw FieldError(field, "out of range");
  return static_cast<int>(x);
}

double real_field(const json& v, const std::string& field) {
  if (!v.is_number()) throw FieldError(field, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw FieldError(field, "must be finite");
  return x;
}

}  // namespace

json to_json(const GenerationConfig& c) {
  return {{"max_new_tokens", c.max_new_tokens},
          {"warmup_tokens", c.warmup_tokens},
          {"no_repeat_ngram", c.no_repeat_ngram},
          {"repetition_penalty", c.repetition_penalty},
          {"temperature", c.temperature},
          {"top_k", c.top_k},
          {"nucleus_p", c.nucleus_p},
          {"num_samples", c.num_samples}};
}

void apply_generation_overrides(GenerationConfig& config, const json& overrides,
                                const std::string& prefix) {
  if (overrides.is_null()) return;
  if (!overrides.is_object()) {
    throw FieldError(prefix.empty() ? "overrides" : prefix, "expected an object");
  }
  GenerationConfig c = config;
  for (const auto& [key, value] : overrides.items()) {
    const std::string field = prefix.empty() ? key : prefix + "." + key;
    if (key == "max_new_tokens") {
      c.max_new_tokens = int_field(value, field);
    } else if (key == "warmup_tokens") {
      c.warmup_tokens = int_field(value, field);
    } else if (key == "no_repeat_ngram") {
      c.no_repeat_ngram = int_field(value, field);
    } else if (key == "top_k") {
      c.top_k = int_field(value, field);
    } else if (key == "num_samples") {
      c.num_samples = int_field(value, field);
    } else if (key == "repetition_penalty") {
      c.repetition_penalty = real_field(value, field);
    } else if (key == "temperature") {
      c.temperature = real_field(value, field);
    } else if (key == "nucleus_p") {
      c.nucleus_p = real_field(value, field);
    } else {
      throw FieldError(field, "unknown field");
    }
  }
  try {
    c.validate();
  } catch (const Error& e) {
    throw FieldError(prefix.empty() ? "overrides" : prefix, e.what());
  }
  config = c;
}

std::map<std::string, std::optional<double>> mean_posteriors(
    const CandidateTrace& trace, std::span<const AttributeControl> controls) {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& step : trace.steps) {
    for (const auto& a : step.attributes) {
      auto& [sum, n] = acc[a.name];
      sum += a.posterior;
      ++n;
    }
  }
  std::map<std::string, std::optional<double>> out;
  for (const auto& c : controls) out[c.name] = std::nullopt;
  for (const auto& [name, v] : acc) out[name] = v.first / v.second;
  return out;
}

json steps_json(const CandidateTrace& trace) {
  json steps = json::array();
  for (const auto& s : trace.steps) {
    json posteriors = json::object();
    for (const auto& a : s.attributes) posteriors[a.name] = a.posterior;
    steps.push_back({{"token", s.token},
                     {"warmup", s.warmup},
                     {"base_logprob", s.base_logprob},
                     {"base_argmax", s.base_argmax},
                     {"posteriors", std::move(posteriors)},
                     {"combined_prob", s.combined_prob},
                     {"final_prob", s.final_prob},
                     {"banned", s.filters.banned},
                     {"support_top_k", s.filters.support_after_top_k},
                     {"support_nucleus", s.filters.support_after_nucleus},
                     {"filters_relaxed", s.filters_relaxed},
                     {"draw", s.draw}});
  }
  return steps;
}

std::string candidate_digest(const std::string& text,
                             std::span<const TokenId> ids) {
  std::string buf = text;
  buf += '\x1f';
  for (TokenId t : ids) {
    buf += std::to_string(t);
    buf += ',';
  }
  return hex64(fnv1a64(buf));
}

std::uint64_t prompt_seed(std::uint64_t seed, std::size_t prompt_index) {
  return fnv1a64(std::to_string(seed) + "/" + std::to_string(prompt_index));
}

}  // namespace guidedgen
