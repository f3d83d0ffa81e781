#pragma once

#include <stdexcept>
#include <string>

namespace irspace {

/// Base of every error thrown by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unreadable input stream or file.
class InputError : public Error {
public:
    using Error::Error;
};

/// A value violates an operation's precondition or a config constraint.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A stage input is absent; carries the name of the stage that produces it.
class MissingInputError : public Error {
public:
    MissingInputError(const std::string& what, std::string producer)
        : Error(what), producer_(std::move(producer)) {}
    const std::string& producer() const noexcept { return producer_; }

private:
    std::string producer_;
};

/// Document id not present in the corpus statistics.
class CorpusMismatchError : public Error {
public:
    using Error::Error;
};

/// Query point outside the interior of a metric field's grid.
class BoundaryError : public Error {
public:
    using Error::Error;
};

/// Non-finite state, singular metric or similar numerical breakdown.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Two reports or spaces that cannot be compared.
class ComparabilityError : public Error {
public:
    using Error::Error;
};

}  // namespace irspace
