#pragma once

#include <stdexcept>
#include <string>

namespace gsalign {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter or argument violates a documented precondition.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// Malformed text or binary input. Carries the 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, long line = -1)
        : Error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

    long line() const noexcept { return line_; }

private:
    long line_;
};

/// Filesystem failure: unreadable, unwritable or missing paths.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace gsalign
