#pragma once

#include <stdexcept>
#include <string>

namespace shapmine {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input text (XML/CSV), carries line context in the message.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Structurally valid input that violates the expected schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Precondition violation on an operation's domain.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Two inputs that cannot be combined (e.g. diverging target values).
class ConflictError : public Error {
public:
    using Error::Error;
};

/// Persisted state that cannot be trusted (corrupt checkpoint, bad header).
class IntegrityError : public Error {
public:
    using Error::Error;
};

} // namespace shapmine
