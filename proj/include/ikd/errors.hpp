#pragma once

#include <stdexcept>
#include <string>

namespace ikd {

/// Base type for all library exceptions.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A dimension or size argument violates a contract (e.g. lift dim < state dim).
struct BadDims : Error {
  explicit BadDims(const std::string& msg) : Error(msg) {}
};

/// Two operands disagree on shape.
struct ShapeMismatch : Error {
  explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};

/// A plant step produced a non-finite state.
struct NonFiniteState : Error {
  explicit NonFiniteState(const std::string& msg) : Error(msg) {}
};

/// A latent rollout produced a non-finite or overflowed prediction.
struct NonFinitePrediction : Error {
  explicit NonFinitePrediction(const std::string& msg) : Error(msg) {}
};

/// Gram matrix numerically singular and no ridge was requested.
struct SingularGram : Error {
  explicit SingularGram(const std::string& msg) : Error(msg) {}
};

/// A matrix expected to be positive definite failed to factorize.
struct NotPD : Error {
  explicit NotPD(const std::string& msg) : Error(msg) {}
};

/// Problem dimension exceeds what an enumeration oracle accepts.
struct DimTooLarge : Error {
  explicit DimTooLarge(const std::string& msg) : Error(msg) {}
};

/// An operation that needs data received an empty dataset.
struct EmptyDataset : Error {
  explicit EmptyDataset(const std::string& msg) : Error(msg) {}
};

/// Trajectory or reference generation exhausted its retry budget.
struct RepoGenerationFailed : Error {
  explicit RepoGenerationFailed(const std::string& msg) : Error(msg) {}
};

/// Training kept failing after the epoch budget was halved down to its floor.
struct TrainingCollapsed : Error {
  explicit TrainingCollapsed(const std::string& msg) : Error(msg) {}
};

/// Filesystem-level read/write failure.
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

/// A file exists but its content does not match the expected format.
struct FormatError : Error {
  explicit FormatError(const std::string& msg) : Error(msg) {}
};

/// Configuration rejected (unknown key, unparsable value, or bad combination).
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// A regression or fit has no usable spread in its inputs.
struct DegenerateFit : Error {
  explicit DegenerateFit(const std::string& msg) : Error(msg) {}
};

}  // namespace ikd
