#pragma once
// Shared plumbing: version string, error taxonomy, small numeric helpers.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace vollab {

inline constexpr const char* kVersion = "0.1.0";

// ============================================================================
// Error taxonomy
//
// Every failure the library can signal maps onto one of these categories so
// the CLI can translate them into stable process exit codes:
//   ConfigError  -> exit 2 (bad config file, unknown keys, invalid values)
//   NumericError -> exit 3 (non-finite intermediates, divergence, degenerate
//                           statistics)
// Everything else (IO, schema, shape) is a usage error and also maps to 2.
// ============================================================================

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or rejected run configuration (unknown key, bad value, bad file).
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error("config: " + msg) {}
};

// Input data violates a schema contract (missing column, empty panel...).
struct SchemaError : Error {
  explicit SchemaError(const std::string& msg) : Error("schema: " + msg) {}
};

// Tensor/matrix dimensions do not line up.
struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error("shape: " + msg) {}
};

// Non-finite values, degenerate statistics, failed convergence.
struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error("numeric: " + msg) {}
};

// Filesystem-level failure.
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error("io: " + msg) {}
};

// ----------------------------------------------------------------------------

inline bool is_finite(double x) { return std::isfinite(x); }

// Square helper used all over the estimator and loss code.
inline double sq(double x) { return x * x; }

}  // namespace vollab
