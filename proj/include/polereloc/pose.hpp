#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace polereloc {

/// Rigid transform x' = R x + t. Composition follows the usual convention:
/// (a * b)(x) = a(b(x)).
class PoseSE3 {
 public:
  PoseSE3() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}
  PoseSE3(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : rotation_(rotation), translation_(translation) {}
  PoseSE3(const Eigen::Quaterniond& q, const Eigen::Vector3d& translation)
      : rotation_(q.normalized().toRotationMatrix()), translation_(translation) {}

  static PoseSE3 Identity() { return {}; }
  /// Rotation of `yaw` radians about +z followed by translation.
  static PoseSE3 FromYaw(double yaw, const Eigen::Vector3d& translation);

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }
  Eigen::Quaterniond quaternion() const;
  double yaw() const;

  PoseSE3 inverse() const;
  PoseSE3 operator*(const PoseSE3& rhs) const;
  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return rotation_ * p + translation_; }

  /// Re-orthonormalizes the rotation (nearest rotation in Frobenius norm).
  PoseSE3 renormalized() const;

  /// RᵀR = I and det R = +1 within `tol`, all entries finite.
  bool is_valid(double tol = 1e-9) const;

  Eigen::Matrix4d matrix() const;

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

/// Rotation angle of a⁻¹b in degrees.
double rotation_error_deg(const PoseSE3& a, const PoseSE3& b);
double translation_error(const PoseSE3& a, const PoseSE3& b);

struct StampedPose {
  double timestamp = 0.0;
  PoseSE3 pose;
};

}  // namespace polereloc
