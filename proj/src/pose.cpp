#include "polereloc/pose.hpp"

#include <cmath>

#include <Eigen/SVD>

#include "polereloc/types.hpp"

namespace polereloc {

PoseSE3 PoseSE3::FromYaw(double yaw, const Eigen::Vector3d& translation) {
  return {Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix(), translation};
}

Eigen::Quaterniond PoseSE3::quaternion() const {
  Eigen::Quaterniond q(rotation_);
  q.normalize();
  // Canonical hemisphere keeps serialized output stable.
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return q;
}

double PoseSE3::yaw() const { return std::atan2(rotation_(1, 0), rotation_(0, 0)); }

PoseSE3 PoseSE3::inverse() const {
  Eigen::Matrix3d rt = rotation_.transpose();
  return {rt, -(rt * translation_)};
}

PoseSE3 PoseSE3::operator*(const PoseSE3& rhs) const {
  return {rotation_ * rhs.rotation_, rotation_ * rhs.translation_ + translation_};
}

PoseSE3 PoseSE3::renormalized() const {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(rotation_, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Eigen::Matrix3d u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return {r, translation_};
}

bool PoseSE3::is_valid(double tol) const {
  if (!rotation_.allFinite() || !translation_.allFinite()) return false;
  const double ortho = (rotation_.transpose() * rotation_ - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(rotation_.determinant() - 1.0) <= tol;
}

Eigen::Matrix4d PoseSE3::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

double rotation_error_deg(const PoseSE3& a, const PoseSE3& b) {
  const Eigen::Matrix3d d = a.rotation().transpose() * b.rotation();
  const Eigen::Vector3d axis(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (d.trace() - 1.0)) * 180.0 / M_PI;
}

double translation_error(const PoseSE3& a, const PoseSE3& b) {
  return (a.translation() - b.translation()).norm();
}

std::string to_string(SemanticLabel label) {
  switch (label.cls) {
    case LabelClass::kPole:
      return "pole";
    case LabelClass::kTrunk:
      return "trunk";
    case LabelClass::kOther:
      break;
  }
  return "other:" + std::to_string(label.category);
}

}  // namespace polereloc
