#pragma once

#include <stdexcept>
#include <string>

namespace eiu {

// Error taxonomy shared by every module. The CLI maps all of these to exit
// code 1; anything else escaping main is a bug.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error { using Error::Error; };     // tensor dimension mismatch
struct DomainError : Error { using Error::Error; };    // value outside an operation's domain
struct ContractError : Error { using Error::Error; };  // caller violated a precondition
struct DataError : Error { using Error::Error; };      // bad corpus content
struct FormatError : Error { using Error::Error; };    // bad container bytes
struct NumericError : Error { using Error::Error; };   // NaN/Inf where finite values are required
struct ParseError : Error { using Error::Error; };     // malformed text input

}  // namespace eiu
