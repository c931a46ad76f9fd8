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

#include <deque>

#include "cotransport/geometry.hpp"
#include "cotransport/whole_body.hpp"

namespace cotransport::aci {

/// Diagonal virtual mass (kg) and damping (N s/m) per translational axis.
struct AdmittanceParams {
  Vec3 mass{12.0, 12.0, 12.0};
  Vec3 damping{150.0, 150.0, 150.0};

  void validate() const;
};

struct AdmittanceState {
  Vec3 velocity{Vec3::Zero()};
};

/// Semi-implicit Euler step of M v' + D v = F:
///   v_next = (M + dt D)^-1 (M v + dt F).
AdmittanceState admittance_step(const Vec3& force, const AdmittanceState& state,
                                const AdmittanceParams& params, double dt);

/// Timestamped admittance and hand velocities over the last `length` seconds.
class SlidingWindow {
 public:
  struct Sample {
    double time;
    Vec3 v_adm;
    Vec3 v_h;
  };

  explicit SlidingWindow(double length = 0.5, double epsilon = 1e-6);

  /// Appends a sample and drops everything older than time - length.
  /// Timestamps must be strictly increasing.
  void push(double time, const Vec3& v_adm, const Vec3& v_h);
  void clear() { samples_.clear(); }

  bool empty() const { return samples_.empty(); }
  std::size_t size() const { return samples_.size(); }
  const std::deque<Sample>& samples() const { return samples_; }
  double length() const { return length_; }
  double epsilon() const { return epsilon_; }

  /// Trapezoidal integrals over the retained samples.
  Vec3 admittance_displacement() const;
  Vec3 hand_displacement() const;

 private:
  double length_;
  double epsilon_;
  std::deque<Sample> samples_;
};

/// alpha = clamp(1 - |int v_adm| / (|int v_h| + eps), 0, 1).
/// Throws std::invalid_argument on an empty window.
double adaptive_index(const SlidingWindow& window);

/// v_d = v_adm + alpha v_h.
Vec3 fuse_velocity(const Vec3& v_adm, const Vec3& v_h, double alpha);

struct ReferenceState {
  PoseSE3 x_d;
  double alpha{1.0};
};

/// Advances the desired position by v_d dt. The angular reference is zero,
/// so the orientation is left untouched.
ReferenceState integrate_reference(const ReferenceState& state, const Vec3& v_d, double dt);

struct InterfaceConfig {
  AdmittanceParams admittance;
  double window_length{0.5};
  double epsilon{1e-6};
  /// First-order low-pass on the measured force; 0 disables it.
  double force_filter_time_constant{0.0};
};

/// Admittance controller plus reference generator, stepped once per control tick.
class AdaptiveInterface {
 public:
  struct Output {
    Vec3 v_adm;
    Vec3 v_d;
    double alpha;
    wbc::TaskTarget target;
  };

  AdaptiveInterface(const InterfaceConfig& config, const PoseSE3& initial_reference);

  Output step(double time, const Vec3& force, const Vec3& v_h, double dt);

  const AdmittanceState& admittance() const { return admittance_; }
  const ReferenceState& reference() const { return reference_; }
  const SlidingWindow& window() const { return window_; }
  const Vec3& filtered_force() const { return filtered_force_; }

 private:
  InterfaceConfig config_;
  AdmittanceState admittance_;
  SlidingWindow window_;
  ReferenceState reference_;
  Vec3 filtered_force_{Vec3::Zero()};
  bool filter_primed_{false};
};

}  // namespace cotransport::aci
