// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tldg/error.hpp"

namespace tldg {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::corpus_not_found: return "corpus-not-found";
    case Errc::invalid_corpus: return "invalid-corpus";
    case Errc::invalid_spec: return "invalid-spec";
    case Errc::invalid_input: return "invalid-input";
    case Errc::invalid_config: return "invalid-config";
    case Errc::invalid_state: return "invalid-state";
    case Errc::invalid_cache: return "invalid-cache";
    case Errc::provider_error: return "provider-error";
    case Errc::io_error: return "io-error";
    case Errc::numeric_failure: return "numeric-failure";
  }
  return "unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace tldg
