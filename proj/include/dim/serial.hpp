// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace dim {

/// Parse failure for the binary container formats.
struct ParseError : std::runtime_error {
    enum class Kind { bad_magic, bad_version, truncated, invariant };

    ParseError(Kind k, const std::string& what) : std::runtime_error(what), kind(k) {}
    Kind kind;
};

} // namespace dim
