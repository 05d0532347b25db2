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

#ifndef GUIDEDGEN_COMMON_H_
#define GUIDEDGEN_COMMON_H_

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace guidedgen {

enum class ErrorCode {
  kInvalidArgument,
  kNotFound,
  kFailedPrecondition,
  kIo,
  kDataLoss,
  kInternal,
};

std::string_view to_string(ErrorCode code);

// Every recoverable failure in the library is reported as an Error. The code
// lets front ends (HTTP, CLI) map it to a status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;

// 64-bit FNV-1a. Used for vocabulary/model fingerprints and candidate
// digests; stable across platforms.
std::uint64_t fnv1a64(std::string_view data,
                      std::uint64_t state = kFnvOffsetBasis) noexcept;

// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

// Fixed-width lowercase hex, 16 characters.
std::string hex64(std::uint64_t value);

// Portable random stream. std::mt19937_64 and std::seed_seq are specified
// bit-exactly by the standard; the distributions are not, so the two draws
// we need are implemented here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  // Uniform in [0, 1) with 53 random bits.
  double uniform();

  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
};

// Numerically stable log(sum(exp(values))). Returns -inf for an empty span
// or when every entry is -inf.
double log_sum_exp(std::span<const double> values);

}  // namespace guidedgen

#endif  // GUIDEDGEN_COMMON_H_
