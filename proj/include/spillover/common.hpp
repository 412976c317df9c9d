#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace spillover {

using Scalar = double;
using Index = Eigen::Index;

template <typename S = Scalar>
using VectorX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S = Scalar>
using MatrixX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = VectorX<Scalar>;
using Matrix = MatrixX<Scalar>;
using SparseRowMatrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

// Base of every recoverable failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition or input-shape violation by the caller.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Least-squares design without full column rank.
class RankDeficient : public Error {
 public:
  using Error::Error;
};

// One non-fatal problem attached to a row or an entity.
struct Diagnostic {
  std::size_t row = 0;  // 1-based data row, 0 when not row-bound
  std::string subject;  // id of the offending entity if known
  std::string reason;

  bool operator==(const Diagnostic&) const = default;
};

using Diagnostics = std::vector<Diagnostic>;

}  // namespace spillover
