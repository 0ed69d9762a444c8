#pragma once

#include <stdexcept>
#include <string>

namespace cmr {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Assembly/image text that does not conform; carries a 1-based line number
// (0 when the location is not line-addressable).
struct ParseError : Error {
    ParseError(int line_no, const std::string& what)
        : Error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + what : what),
          line(line_no) {}
    int line;
};

// Program + monitors + pads would not fit the configured grid.
struct CapacityError : Error {
    using Error::Error;
};

// Golden image digest mismatch; nothing may be loaded or restarted.
struct AuthError : Error {
    using Error::Error;
};

} // namespace cmr
