#pragma once

#include <stdexcept>
#include <string>

namespace vplan {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller passed a parameter outside its documented range.
struct InvalidParameter : Error { using Error::Error; };

// Input data is degenerate for the requested operation (empty chain, isolated node, ...).
struct InvalidInput : Error { using Error::Error; };

// Two pieces of state that must agree do not (graph vs skeleton, dims, ...).
struct IntegrityError : Error { using Error::Error; };

// Malformed document (JSON schema, model file, image header).
struct ParseError : Error { using Error::Error; };

struct IoError : Error { using Error::Error; };

// Source and target are not connected in the scored graph.
struct NoPathError : Error { using Error::Error; };

// Phantom generator could not satisfy its geometric constraints.
struct GenerationError : Error { using Error::Error; };

// External embedding (or similar keyed resource) missing for a requested key.
struct LookupError : Error { using Error::Error; };

}  // namespace vplan
