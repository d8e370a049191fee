#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgsim {

using AgentId = std::size_t;
using Vector = std::vector<double>;

// Error kinds surfaced by the library. Every thrown mgsim::Error carries one.
enum class ErrorKind {
  AsymmetricAdjacency,
  DisconnectedGraph,
  NegativeWeight,
  InvalidMatrix,
  InvalidParams,
  SingularNetwork,
  NonFiniteState,
  NonFinitePayload,
  StaleRound,
  EmptyBlock,
  InvalidZeta,
  DimensionMismatch,
  InsufficientHistory,
  AllNodesCompromised,
  NoTrustedSource,
  ParseError,
  UnknownAttackKind,
  DanglingAgentReference,
  IoError,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::AsymmetricAdjacency: return "AsymmetricAdjacency";
    case ErrorKind::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorKind::NegativeWeight: return "NegativeWeight";
    case ErrorKind::InvalidMatrix: return "InvalidMatrix";
    case ErrorKind::InvalidParams: return "InvalidParams";
    case ErrorKind::SingularNetwork: return "SingularNetwork";
    case ErrorKind::NonFiniteState: return "NonFiniteState";
    case ErrorKind::NonFinitePayload: return "NonFinitePayload";
    case ErrorKind::StaleRound: return "StaleRound";
    case ErrorKind::EmptyBlock: return "EmptyBlock";
    case ErrorKind::InvalidZeta: return "InvalidZeta";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InsufficientHistory: return "InsufficientHistory";
    case ErrorKind::AllNodesCompromised: return "AllNodesCompromised";
    case ErrorKind::NoTrustedSource: return "NoTrustedSource";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UnknownAttackKind: return "UnknownAttackKind";
    case ErrorKind::DanglingAgentReference: return "DanglingAgentReference";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Validation errors map to CLI exit code 1, everything else to 2.
  bool is_validation() const noexcept {
    switch (kind_) {
      case ErrorKind::NonFiniteState:
      case ErrorKind::SingularNetwork:
      case ErrorKind::IoError:
        return false;
      default:
        return true;
    }
  }

 private:
  ErrorKind kind_;
};

// Dense row-major matrix. Sizes here are agent/bus counts, so nothing fancy.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(const std::vector<Vector>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols_)
        throw Error(ErrorKind::InvalidMatrix, "ragged row " + std::to_string(i));
      for (std::size_t j = 0; j < m.cols_; ++j) m(i, j) = rows[i][j];
    }
    return m;
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  Vector operator*(std::span<const double> x) const {
    if (x.size() != cols_)
      throw Error(ErrorKind::DimensionMismatch, "matrix-vector size mismatch");
    Vector y(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < cols_; ++j) acc += (*this)(i, j) * x[j];
      y[i] = acc;
    }
    return y;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace mgsim
