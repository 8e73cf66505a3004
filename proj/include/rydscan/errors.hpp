// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace rydscan {

/// Numerical failure (non-convergent solver or quadrature); carries context
/// such as the offending grid point or scan index in the message.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file; message names the line or field at fault.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace rydscan
