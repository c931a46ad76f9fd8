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

#pragma once

#include <array>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "cotransport/geometry.hpp"

namespace cotransport::wbc {

inline constexpr int kBaseDof = 3;
inline constexpr int kArmDof = 6;
inline constexpr int kDof = kBaseDof + kArmDof;

using JointVector = Eigen::Matrix<double, kDof, 1>;
using Jacobian = Eigen::Matrix<double, 6, kDof>;
using Matrix9 = Eigen::Matrix<double, kDof, kDof>;

/// Revolute link in standard Denavit-Hartenberg form:
/// Rz(q) * Tz(d) * Tx(a) * Rx(alpha).
struct DhLink {
  double d{0.0};
  double a{0.0};
  double alpha{0.0};
  double lower{-2.0 * EIGEN_PI};
  double upper{2.0 * EIGEN_PI};
};

/// Joint configuration: [base x (m), base y (m), base yaw (rad), arm q1..q6 (rad)].
struct JointState {
  JointVector q{JointVector::Zero()};

  Pose2D base_pose() const { return {q[0], q[1], q[2]}; }
  auto arm() const { return q.tail<kArmDof>(); }
};

/// Mobile base with three virtual planar joints carrying a 6-R serial arm.
class WholeBodyModel {
 public:
  WholeBodyModel(const std::array<DhLink, kArmDof>& links, const Eigen::Isometry3d& mount,
                 const JointVector& q_def,
                 const Eigen::Isometry3d& tool = Eigen::Isometry3d::Identity());

  /// UR16e-like arm (public nominal DH values) mounted 0.45 m above the
  /// base origin and 0.2 m forward. The geometry is a placeholder, not a
  /// calibrated model. q_def puts the flange 0.6 m ahead of the base origin
  /// at 0.9 m height with the tool axis pointing forward.
  static WholeBodyModel mobile_manipulator();

  const std::array<DhLink, kArmDof>& links() const { return links_; }
  const Eigen::Isometry3d& mount() const { return mount_; }
  const Eigen::Isometry3d& tool() const { return tool_; }
  const JointVector& q_def() const { return q_def_; }

  bool within_limits(const JointState& s) const;
  JointState clamp_to_limits(const JointState& s) const;

 private:
  std::array<DhLink, kArmDof> links_;
  Eigen::Isometry3d mount_;
  Eigen::Isometry3d tool_;
  JointVector q_def_;
};

/// K, W1, W2, W3 are stored as their diagonals.
struct GainSet {
  Vec6 K;
  Vec6 W1;
  JointVector W2;
  JointVector W3;
  double damping{0.1};
  /// Step size of the secondary posture task.
  double secondary_gain{1.0};

  /// Controller gains of the reference setup: K = diag{0.1 x3, 0.01 x3},
  /// W1 = 100 diag{10 x3, 5 x3}, W2 = diag{2 (base x3), 5 (arm x6)},
  /// W3 = diag{0 (base x3), 3 (arm x6)}.
  static GainSet reference();

  /// Throws std::invalid_argument when a definiteness requirement fails.
  void validate() const;
};

struct TaskTarget {
  PoseSE3 pose;
  Vec6 twist{Vec6::Zero()};
};

struct ClikSolution {
  JointVector qdot;
  JointVector primary;    // argmin of the weighted damped cost
  JointVector secondary;  // null-space projected posture motion
  Vec6 error;             // [position error; rotation vector]
};

PoseSE3 forward_kinematics(const WholeBodyModel& model, const JointState& s);

/// World-frame geometric Jacobian; rows are [linear; angular] velocity.
Jacobian whole_body_jacobian(const WholeBodyModel& model, const JointState& s);

/// [p_d - p; rotvec(R_d R^T)].
Vec6 pose_error(const PoseSE3& desired, const PoseSE3& current);

/// Weighted pseudoinverse W2^{-1/2} (J W2^{-1/2})^+ and the projector I - J^+ J.
Matrix9 nullspace_projector(const Jacobian& J, const JointVector& W2);

/// Weighted damped least-squares CLIK with a null-space posture task.
ClikSolution solve_clik(const WholeBodyModel& model, const JointState& s,
                        const TaskTarget& target, const GainSet& gains);

/// Explicit Euler step; base yaw is re-wrapped.
JointState integrate_joints(const JointState& s, const JointVector& qdot, double dt);

}  // namespace cotransport::wbc
