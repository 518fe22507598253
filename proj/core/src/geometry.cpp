#include "vflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vflow/errors.hpp"

namespace vflow {

namespace {

constexpr double kFrameRankTol = 1e-14;

// Y (YᵀY)^{-1/2}: the orthonormal basis of range(Y) closest to the columns of Y.
Mat polar_orthonormal_columns(const Mat& y, const Mat& gram) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(gram);
  const Vec inv_sqrt = eig.eigenvalues().cwiseSqrt().cwiseInverse();
  const Mat gram_inv_sqrt = eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
  return y * gram_inv_sqrt;
}

}  // namespace

Plane::Plane(Mat frame) : frame_(std::move(frame)), projector_(frame_.transpose() * frame_) {}

Plane Plane::from_frame(Mat frame, double tol) {
  if (frame.rows() < 1 || frame.cols() < frame.rows()) {
    throw DimensionMismatch("plane frame must be d x n with 1 <= d <= n");
  }
  const Mat gram = frame * frame.transpose();
  const double err = max_abs(gram - Mat::Identity(frame.rows(), frame.rows()));
  if (!(err <= tol)) {
    throw InvalidArgument("plane frame rows are not orthonormal (|F F^T - I|_inf = " +
                          std::to_string(err) + ")");
  }
  return Plane(std::move(frame));
}

Plane Plane::from_spanning_rows(const Mat& rows) {
  if (rows.rows() < 1 || rows.cols() < rows.rows()) {
    throw DimensionMismatch("spanning rows must form a d x n matrix with 1 <= d <= n");
  }
  const Mat y = rows.transpose();
  const Mat gram = y.transpose() * y;
  if (!(gram.determinant() > kFrameRankTol)) {
    throw InvalidArgument("spanning rows are rank deficient");
  }
  return Plane(polar_orthonormal_columns(y, gram).transpose());
}

Plane Plane::coordinate(int d, int n) {
  if (d < 1 || d > n) {
    throw DimensionMismatch("coordinate plane needs 1 <= d <= n");
  }
  return Plane(Mat::Identity(d, n));
}

Mat Plane::complement() const {
  return Mat::Identity(ambient(), ambient()) - projector_;
}

double operator_norm(const Mat& m) {
  if (m.size() == 0) {
    return 0.0;
  }
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

double max_abs(const Mat& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

double plane_distance(const Plane& s, const Plane& t) {
  if (s.dim() != t.dim() || s.ambient() != t.ambient()) {
    throw DimensionMismatch("plane_distance: planes have different (d, n)");
  }
  const Mat diff = s.projector() - t.projector();
  // Symmetric, so the largest singular value is the largest |eigenvalue|.
  Eigen::SelfAdjointEigenSolver<Mat> eig(diff, Eigen::EigenvaluesOnly);
  const double value = eig.eigenvalues().cwiseAbs().maxCoeff();
  return std::min(1.0, value);
}

AlignedFrames align_frames(const Plane& s, const Plane& t) {
  if (s.dim() != t.dim() || s.ambient() != t.ambient()) {
    throw DimensionMismatch("align_frames: planes have different (d, n)");
  }
  const Mat cross = s.frame() * t.frame().transpose();
  Eigen::JacobiSVD<Mat> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return {svd.matrixU().transpose() * s.frame(), svd.matrixV().transpose() * t.frame()};
}

TangentialJacobian tangential_jacobian(const Mat& df, const Plane& s) {
  if (df.rows() != s.ambient() || df.cols() != s.ambient()) {
    throw DimensionMismatch("tangential_jacobian: Df must be n x n");
  }
  if (df == Mat::Identity(df.rows(), df.cols())) {
    return {1.0, s};
  }
  const Mat y = df * s.frame().transpose();
  const Mat gram = y.transpose() * y;
  const double det = gram.determinant();
  if (!(det > kDegenerateGram)) {
    throw DegeneratePushForward(det);
  }
  TangentialJacobian out;
  out.jacobian = std::sqrt(det);
  out.image = Plane::from_frame(polar_orthonormal_columns(y, gram).transpose(), 1e-8);
  return out;
}

DetPerturbation det_perturbation_check(const Mat& q) {
  if (q.rows() != q.cols()) {
    throw DimensionMismatch("det_perturbation_check: Q must be square");
  }
  if (max_abs(q) > 1.0) {
    throw InvalidArgument("det_perturbation_check: requires |Q|_inf <= 1");
  }
  const auto k = q.rows();
  const double det = (Mat::Identity(k, k) + q).determinant();
  return {std::abs(det - 1.0), std::abs(det - 1.0 - q.trace())};
}

}  // namespace vflow
