/*
 * Copyright 2026 The Cotransport Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cotransport/whole_body.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

namespace cotransport::wbc {

namespace {

Eigen::Isometry3d dh_transform(const DhLink& l, double q) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.rotate(Eigen::AngleAxisd(q, Vec3::UnitZ()));
  t.translate(Vec3(l.a, 0.0, l.d));
  t.rotate(Eigen::AngleAxisd(l.alpha, Vec3::UnitX()));
  return t;
}

Eigen::Isometry3d base_transform(const JointState& s) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.translate(Vec3(s.q[0], s.q[1], 0.0));
  t.rotate(Eigen::AngleAxisd(s.q[2], Vec3::UnitZ()));
  return t;
}

void require_finite(const JointState& s) {
  if (!s.q.allFinite()) throw std::invalid_argument("non-finite joint state");
}

}  // namespace

WholeBodyModel::WholeBodyModel(const std::array<DhLink, kArmDof>& links,
                               const Eigen::Isometry3d& mount, const JointVector& q_def,
                               const Eigen::Isometry3d& tool)
    : links_(links), mount_(mount), tool_(tool), q_def_(q_def) {
  if (!q_def_.allFinite()) throw std::invalid_argument("WholeBodyModel: non-finite q_def");
  for (const auto& l : links_) {
    if (!(l.lower < l.upper)) throw std::invalid_argument("WholeBodyModel: empty joint range");
  }
}

WholeBodyModel WholeBodyModel::mobile_manipulator() {
  constexpr double kHalfPi = EIGEN_PI / 2.0;
  const std::array<DhLink, kArmDof> links{{
      {0.1807, 0.0, kHalfPi},
      {0.0, -0.4784, 0.0},
      {0.0, -0.36, 0.0},
      {0.17415, 0.0, kHalfPi},
      {0.11985, 0.0, -kHalfPi},
      {0.11655, 0.0, 0.0},
  }};
  Eigen::Isometry3d mount = Eigen::Isometry3d::Identity();
  mount.translate(Vec3(0.2, 0.0, 0.45));
  JointVector q_def;
  q_def << 0.0, 0.0, 0.0, 0.66, -1.71, -2.55, 1.12, 0.91, 1.57;
  return {links, mount, q_def};
}

bool WholeBodyModel::within_limits(const JointState& s) const {
  for (int i = 0; i < kArmDof; ++i) {
    const double v = s.q[kBaseDof + i];
    if (v < links_[i].lower || v > links_[i].upper) return false;
  }
  return true;
}

JointState WholeBodyModel::clamp_to_limits(const JointState& s) const {
  JointState out = s;
  for (int i = 0; i < kArmDof; ++i) {
    double& v = out.q[kBaseDof + i];
    v = std::clamp(v, links_[i].lower, links_[i].upper);
  }
  return out;
}

GainSet GainSet::reference() {
  GainSet g;
  g.K << 0.1, 0.1, 0.1, 0.01, 0.01, 0.01;
  g.W1 << 10, 10, 10, 5, 5, 5;
  g.W1 *= 100.0;
  g.W2 << 2, 2, 2, 5, 5, 5, 5, 5, 5;
  g.W3 << 0, 0, 0, 3, 3, 3, 3, 3, 3;
  g.damping = 0.1;
  g.secondary_gain = 1.0;
  return g;
}

void GainSet::validate() const {
  if (!(K.array() > 0.0).all()) throw std::invalid_argument("GainSet: K must be positive definite");
  if (!(W1.array() > 0.0).all()) throw std::invalid_argument("GainSet: W1 must be positive definite");
  if (!(W2.array() > 0.0).all()) throw std::invalid_argument("GainSet: W2 must be positive definite");
  if (!(W3.array() >= 0.0).all())
    throw std::invalid_argument("GainSet: W3 must be positive semidefinite");
  if (!(damping > 0.0) || !std::isfinite(damping))
    throw std::invalid_argument("GainSet: damping must be positive");
  if (!std::isfinite(secondary_gain)) throw std::invalid_argument("GainSet: non-finite step");
}

PoseSE3 forward_kinematics(const WholeBodyModel& model, const JointState& s) {
  require_finite(s);
  Eigen::Isometry3d t = base_transform(s) * model.mount();
  for (int i = 0; i < kArmDof; ++i) t = t * dh_transform(model.links()[i], s.q[kBaseDof + i]);
  return PoseSE3::from_isometry(t * model.tool());
}

Jacobian whole_body_jacobian(const WholeBodyModel& model, const JointState& s) {
  require_finite(s);
  const Eigen::Isometry3d base = base_transform(s);

  // Joint i of the arm rotates about the z axis of the frame preceding it.
  std::array<Vec3, kArmDof> axes;
  std::array<Vec3, kArmDof> origins;
  Eigen::Isometry3d t = base * model.mount();
  for (int i = 0; i < kArmDof; ++i) {
    axes[i] = t.linear().col(2);
    origins[i] = t.translation();
    t = t * dh_transform(model.links()[i], s.q[kBaseDof + i]);
  }
  const Vec3 p_ee = (t * model.tool()).translation();

  Jacobian J = Jacobian::Zero();
  J(0, 0) = 1.0;
  J(1, 1) = 1.0;
  const Vec3 z = Vec3::UnitZ();
  J.block<3, 1>(0, 2) = z.cross(p_ee - base.translation());
  J.block<3, 1>(3, 2) = z;
  for (int i = 0; i < kArmDof; ++i) {
    J.block<3, 1>(0, kBaseDof + i) = axes[i].cross(p_ee - origins[i]);
    J.block<3, 1>(3, kBaseDof + i) = axes[i];
  }
  return J;
}

Vec6 pose_error(const PoseSE3& desired, const PoseSE3& current) {
  Vec6 e;
  e.head<3>() = desired.position - current.position;
  const Eigen::Matrix3d r_err =
      desired.orientation.toRotationMatrix() * current.orientation.toRotationMatrix().transpose();
  const Eigen::AngleAxisd aa(r_err);
  e.tail<3>() = aa.angle() * aa.axis();
  return e;
}

Matrix9 nullspace_projector(const Jacobian& J, const JointVector& W2) {
  const JointVector w_inv_sqrt = W2.cwiseSqrt().cwiseInverse();
  const Jacobian Jw = J * w_inv_sqrt.asDiagonal();
  const Eigen::JacobiSVD<Eigen::Matrix<double, 6, kDof>> svd(Jw, Eigen::ComputeFullU |
                                                                     Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double tol = 1e-12 * std::max(1.0, sv(0));
  Eigen::Matrix<double, kDof, 6> jw_pinv = Eigen::Matrix<double, kDof, 6>::Zero();
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol)
      jw_pinv += svd.matrixV().col(i) * (1.0 / sv(i)) * svd.matrixU().col(i).transpose();
  }
  const Eigen::Matrix<double, kDof, 6> j_pinv = w_inv_sqrt.asDiagonal() * jw_pinv;
  return Matrix9::Identity() - j_pinv * J;
}

ClikSolution solve_clik(const WholeBodyModel& model, const JointState& s,
                        const TaskTarget& target, const GainSet& gains) {
  gains.validate();
  require_finite(s);
  if (!target.twist.allFinite() || !target.pose.position.allFinite() ||
      !target.pose.orientation.coeffs().allFinite())
    throw std::invalid_argument("solve_clik: non-finite target");

  const Jacobian J = whole_body_jacobian(model, s);
  const Vec6 e = pose_error(target.pose, forward_kinematics(model, s));
  const Vec6 task = target.twist + gains.K.asDiagonal() * e;

  const Eigen::Matrix<double, kDof, 6> jt_w1 = J.transpose() * gains.W1.asDiagonal();
  Matrix9 normal = jt_w1 * J;
  normal.diagonal() += gains.damping * gains.damping * gains.W2;

  ClikSolution out;
  out.error = e;
  out.primary = normal.ldlt().solve(jt_w1 * task);

  const JointVector z =
      gains.secondary_gain * gains.W3.asDiagonal() * (model.q_def() - s.q);
  out.secondary = nullspace_projector(J, gains.W2) * z;
  out.qdot = out.primary + out.secondary;
  return out;
}

JointState integrate_joints(const JointState& s, const JointVector& qdot, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate_joints: dt must be positive");
  JointState out;
  out.q = s.q + qdot * dt;
  out.q[2] = wrap_angle(out.q[2]);
  return out;
}

}  // namespace cotransport::wbc
