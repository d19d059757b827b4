// Copyright 2026 The ouqt Authors
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

namespace ouqt {

enum class Errc {
  dimension_mismatch,
  non_finite,
  not_hermitian,
  unstable_scheme,
  invalid_argument,
  not_normalized,
  vanishing_norm,
  wrong_mode,
  non_commuting,
  overflow,
  aborted,
  config,
};

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::non_finite: return "non_finite";
    case Errc::not_hermitian: return "not_hermitian";
    case Errc::unstable_scheme: return "unstable_scheme";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::not_normalized: return "not_normalized";
    case Errc::vanishing_norm: return "vanishing_norm";
    case Errc::wrong_mode: return "wrong_mode";
    case Errc::non_commuting: return "non_commuting";
    case Errc::overflow: return "overflow";
    case Errc::aborted: return "aborted";
    case Errc::config: return "config";
  }
  return "unknown";
}

// All library failures surface as this type; code() is stable, what() is for humans.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ouqt
