#pragma once

#include <stdexcept>
#include <string>

namespace albench {

// Base of everything the library throws on bad input or bad files.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Arguments or data that violate a documented precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Mathematically undefined input (zero vector for cosine, one cluster for silhouette).
class DomainError : public Error {
public:
    using Error::Error;
};

// Wrong magic or version in a binary file.
class FormatError : public Error {
public:
    using Error::Error;
};

// Header is fine but the payload is short or carries trailing bytes.
class CorruptionError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace albench
