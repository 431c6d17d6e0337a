#pragma once

#include <stdexcept>
#include <string>

namespace bsa {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A score component lies outside [0,1], or a scalar parameter is outside
// its documented range.
struct OutOfRangeError : Error {
    using Error::Error;
};

// NaN or infinity where a finite value is required.
struct NonFiniteError : Error {
    using Error::Error;
};

// Score dimensions disagree (within a pair, across a batch, or with the
// configured dimension).
struct DimMismatchError : Error {
    using Error::Error;
};

// A betting factor 1 + phi(a) - phi(b) came out <= 0. The network output
// bound q < 1/2 makes this impossible for a well-formed net; seeing it
// means an internal bug or a tampered checkpoint.
struct NonPositiveFactorError : Error {
    using Error::Error;
};

struct EmptyInputError : Error {
    using Error::Error;
};

// A stream ran out of samples before an estimator's budget was met.
struct InsufficientDataError : Error {
    using Error::Error;
};

// A distribution or experiment spec violates its invariants.
struct InvalidSpecError : Error {
    using Error::Error;
};

// Malformed input file; the message names the offending line.
struct ParseError : Error {
    using Error::Error;
};

// Network-level failure talking to a scorer endpoint.
struct TransportError : Error {
    using Error::Error;
};

// Request deadline exceeded after all retries.
struct TimeoutError : TransportError {
    using TransportError::TransportError;
};

// The scorer endpoint answered, but not per the documented contract
// (length mismatch or scores outside [0,1]).
struct ContractViolationError : Error {
    using Error::Error;
};

}  // namespace bsa
