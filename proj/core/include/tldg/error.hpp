// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tldg {

enum class Errc {
  corpus_not_found,
  invalid_corpus,
  invalid_spec,
  invalid_input,
  invalid_config,
  invalid_state,
  invalid_cache,
  provider_error,
  io_error,
  numeric_failure,
};

std::string_view to_string(Errc code);

/// Library-wide exception. Every failure path named in the module contracts
/// throws one of these with the matching code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

}  // namespace tldg
