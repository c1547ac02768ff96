#ifndef MMC_TYPES_HPP
#define MMC_TYPES_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mmc {

/// One point per row, columns are x/y/z.
template <typename Scalar>
using PointMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, 3>;

/// Fine-grained feature block: rows are channels, columns are tokens.
template <typename Scalar>
using TokenMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Index = Eigen::Index;

/// Dimension of the frozen global image/text embeddings.
inline constexpr int kGlobalDim = 512;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyInput : Error {
  using Error::Error;
};

struct InvalidInput : Error {
  using Error::Error;
};

struct InvalidArgument : Error {
  using Error::Error;
};

struct DegenerateGeometry : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

/// Failure talking to an external backend, after `attempts` tries.
struct BackendError : Error {
  BackendError(const std::string& what, int attempts_made, int max_attempts)
      : Error(what), attempts(attempts_made), retry_limit(max_attempts) {}
  int attempts;
  int retry_limit;
};

struct CompositionError : Error {
  using Error::Error;
};

/// Thrown when a fusion stage is invoked with no global feature enabled; the
/// caller is expected to skip the stage instead.
struct FusionDisabled : Error {
  using Error::Error;
};

struct TooShortText : Error {
  using Error::Error;
};

struct TaxonomyError : Error {
  using Error::Error;
};

struct TrainingAborted : Error {
  using Error::Error;
};

template <typename Scalar>
bool all_finite(const Eigen::Ref<const Matrix<Scalar>>& m) {
  return m.allFinite();
}

}  // namespace mmc

#endif  // MMC_TYPES_HPP
