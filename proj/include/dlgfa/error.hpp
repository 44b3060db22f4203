#pragma once

#include <stdexcept>
#include <string>

namespace dlgfa {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or index disagreement between operands.
struct DimensionError : Error {
    using Error::Error;
};

// Violated API precondition (e.g. backward on a non-scalar loss).
struct ContractError : Error {
    using Error::Error;
};

// Malformed input file; message carries the line number where known.
struct ParseError : Error {
    using Error::Error;
};

// NaN/Inf produced by a forward operation.
struct NumericError : Error {
    using Error::Error;
};

}  // namespace dlgfa
