#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tier {

// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor dimensions don't line up (matmul inner dims, grid vs image size, ...).
struct ShapeError : Error {
  using Error::Error;
};

// Input value outside the operation's domain (negative probability,
// out-of-vocab token index, ...).
struct DomainError : Error {
  using Error::Error;
};

// A documented precondition of an API was violated (non-scalar loss,
// missing [CLS], contrastive batch of size < 2, ...).
struct ContractError : Error {
  using Error::Error;
};

// A vector with norm below the normalization epsilon; signals an upstream bug
// rather than something to clamp.
struct DegenerateVectorError : Error {
  using Error::Error;
};

// Bad run configuration (CLI flags, config file, generator settings).
struct ConfigError : Error {
  using Error::Error;
};

// Corrupt or truncated on-disk container. `record` is the index of the
// offending record when known, SIZE_MAX otherwise.
struct IntegrityError : Error {
  explicit IntegrityError(const std::string& what, std::size_t record_index = SIZE_MAX)
      : Error(what), record(record_index) {}
  std::size_t record;
};

// Non-finite value produced during a forward/backward pass.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace tier
