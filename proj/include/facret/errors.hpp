#pragma once

#include <stdexcept>
#include <string>

namespace facret {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bytes that do not conform to one of the on-disk or wire layouts.
class FormatError : public Error {
public:
    using Error::Error;
};

/// A caller-supplied argument violates an operation's precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Loadings whose column span has lower dimension than their column count.
class DegenerateLoadings : public Error {
public:
    using Error::Error;
};

/// Socket-level failure (connect, bind, timeout, peer closed).
class NetworkError : public Error {
public:
    using Error::Error;
};

} // namespace facret
