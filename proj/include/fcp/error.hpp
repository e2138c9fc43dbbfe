#pragma once

#include <stdexcept>
#include <string>

namespace fcp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numeric parameter is outside its admissible range.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Malformed input text or bytes; the message names the line or offset.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Shapes or sizes that do not agree with each other.
class StructuralError : public Error {
public:
    using Error::Error;
};

/// A value outside the domain of a transform (e.g. sqrt of a negative).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A noise model or filter pipeline that cannot be composed.
class ModelError : public Error {
public:
    using Error::Error;
};

/// A key (area, index) that is not present in a table.
class LookupError : public Error {
public:
    using Error::Error;
};

/// A simulation table too small for the requested computation.
class CapacityError : public Error {
public:
    using Error::Error;
};

} // namespace fcp
