#pragma once

#include <stdexcept>
#include <string>

namespace madroid {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Unreadable or semantically invalid input (streams, URLs, value ranges).
class InputError : public Error {
public:
    using Error::Error;
};

// Malformed structure: duplicate ids, cyclic or over-deep nesting,
// dangling graph references.
class StructureError : public Error {
public:
    using Error::Error;
};

// Invalid or missing configuration (empty keyword list, empty template bank).
class ConfigError : public Error {
public:
    using Error::Error;
};

// A referenced element does not exist (click URL absent from capture).
class NotFoundError : public Error {
public:
    using Error::Error;
};

// A documented precondition was violated by the caller.
class ContractViolation : public Error {
public:
    using Error::Error;
};

// An external service returned an out-of-range or malformed response.
class ValidationError : public Error {
public:
    using Error::Error;
};

// An external service stayed unreachable after the retry budget.
class ServiceError : public Error {
public:
    using Error::Error;
};

// The service asked us to back off; carries the suggested delay.
class RateLimitError : public ServiceError {
public:
    RateLimitError(const std::string& what, int retry_after_ms)
        : ServiceError(what), retry_after_ms(retry_after_ms) {}
    int retry_after_ms = 0;
};

// Wraps a failure with the pipeline stage it occurred in.
class PipelineError : public Error {
public:
    PipelineError(std::string stage_name, const std::string& cause)
        : Error(stage_name + ": " + cause), stage(std::move(stage_name)) {}
    std::string stage;
};

}  // namespace madroid
