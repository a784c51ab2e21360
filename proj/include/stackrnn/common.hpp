#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace stackrnn {

#ifdef STACKRNN_FLOAT32
using Scalar = float;
#else
using Scalar = double;
#endif

// Batch-major dense storage: rows index batch elements, columns index features.
using Array = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using ArrayCol = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();

// Error taxonomy shared by the library and the CLI exit codes.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

// Stable derivation of per-stream seeds from a base seed (splitmix64 mix).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace stackrnn
