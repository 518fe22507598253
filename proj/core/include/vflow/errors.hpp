#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The differential crushes a plane: det(YᵀY) fell below the rank threshold.
class DegeneratePushForward : public Error {
 public:
  static constexpr std::size_t kNoAtom = static_cast<std::size_t>(-1);

  explicit DegeneratePushForward(double gram_det, std::size_t atom = kNoAtom)
      : Error(message(gram_det, atom)), atom_(atom), gram_det_(gram_det) {}

  std::size_t atom() const { return atom_; }
  double gram_determinant() const { return gram_det_; }

 private:
  static std::string message(double gram_det, std::size_t atom) {
    std::string where = atom == kNoAtom ? std::string() : " at atom " + std::to_string(atom);
    return "degenerate push-forward" + where + " (det(Y^T Y) = " + std::to_string(gram_det) + ")";
  }

  std::size_t atom_;
  double gram_det_;
};

/// A step size failed the diffeomorphism gate; `value` is the offending quantity.
class CertificateViolation : public Error {
 public:
  CertificateViolation(const std::string& what, double value, double limit)
      : Error(what), value_(value), limit_(limit) {}

  double value() const { return value_; }
  double limit() const { return limit_; }

 private:
  double value_;
  double limit_;
};

class QuadratureBudgetExceeded : public Error {
 public:
  using Error::Error;
};

class QuadratureNonConvergence : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class DegenerateNeighborhood : public Error {
 public:
  explicit DegenerateNeighborhood(std::size_t point)
      : Error("degenerate neighbourhood around point " + std::to_string(point) +
              " (zero covariance)"),
        point_(point) {}

  std::size_t point() const { return point_; }

 private:
  std::size_t point_;
};

class InfeasibleTestFunction : public Error {
 public:
  using Error::Error;
};

}  // namespace vflow
