#pragma once

#include <stdexcept>
#include <string>

namespace absa {

// All pipeline failures derive from Error so CLI entry points can catch one type.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input bytes (XML syntax, bad UTF-8, bad JSONL). Message carries line/column
// or record number where known.
struct ParseError : Error {
    using Error::Error;
};

// Well-formed input that violates a dataset schema; message names the offending element.
struct SchemaError : Error {
    using Error::Error;
};

// Bad run configuration: empty training set, official split without source identity,
// unknown config keys, invalid flag combinations.
struct ConfigError : Error {
    using Error::Error;
};

// Tokenization/encoding contract violations (empty tokenization, oversized aspect).
struct EncodingError : Error {
    using Error::Error;
};

// Checkpoint load failures: missing parts, dimension mismatches, truncated blobs.
struct LoadError : Error {
    using Error::Error;
};

// Non-finite values in model computation; message names the layer.
struct NumericError : Error {
    using Error::Error;
};

// Caller broke an operation precondition (label id out of range, unseen gold label).
struct ContractError : Error {
    using Error::Error;
};

// Filesystem/stream failures; message names the path.
struct IoError : Error {
    using Error::Error;
};

}  // namespace absa
