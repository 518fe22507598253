#pragma once

// Small dense linear algebra on the Grassmannian G(d, n).

#include <Eigen/Dense>

namespace vflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// A d-dimensional linear subspace of ℝⁿ.
///
/// The orthonormal frame (d×n, rows span the subspace) is the canonical
/// storage; the orthogonal projector frameᵀ·frame is recomputed on
/// construction and cached.
class Plane {
 public:
  Plane() = default;

  /// Takes a frame whose rows must be orthonormal within `tol`.
  static Plane from_frame(Mat frame, double tol = 1e-10);

  /// Orthonormalises arbitrary spanning rows (must have full row rank).
  static Plane from_spanning_rows(const Mat& rows);

  /// span(e_1, ..., e_d) in ℝⁿ.
  static Plane coordinate(int d, int n);

  int dim() const { return static_cast<int>(frame_.rows()); }
  int ambient() const { return static_cast<int>(frame_.cols()); }

  const Mat& frame() const { return frame_; }
  const Mat& projector() const { return projector_; }

  /// I_n − P.
  Mat complement() const;

 private:
  explicit Plane(Mat frame);

  Mat frame_;
  Mat projector_;
};

/// Operator 2-norm (largest singular value).
double operator_norm(const Mat& m);

/// Entrywise max |m_ij|.
double max_abs(const Mat& m);

/// ‖P_S − P_T‖, the sine of the largest principal angle.
double plane_distance(const Plane& s, const Plane& t);

struct AlignedFrames {
  Mat first;
  Mat second;
};

/// Orthonormal frames of S and T rotated by the principal-vector factors of
/// frame_S·frame_Tᵀ, so that ‖first − second‖ ≤ 2·plane_distance(S, T).
AlignedFrames align_frames(const Plane& s, const Plane& t);

struct TangentialJacobian {
  double jacobian = 0.0;  ///< det(YᵀY)^½ with Y = Df·frameᵀ
  Plane image;            ///< Df(S)
};

/// Gram determinant below which a push-forward counts as rank deficient.
inline constexpr double kDegenerateGram = 1e-14;

/// Throws DegeneratePushForward when det(YᵀY) ≤ kDegenerateGram.
TangentialJacobian tangential_jacobian(const Mat& df, const Plane& s);

struct DetPerturbation {
  double first_order = 0.0;   ///< |det(I+Q) − 1|
  double second_order = 0.0;  ///< |det(I+Q) − 1 − tr Q|
};

/// Determinant expansion residuals around the identity; requires |Q|_∞ ≤ 1.
DetPerturbation det_perturbation_check(const Mat& q);

}  // namespace vflow
