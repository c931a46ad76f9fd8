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

#include "cotransport/adaptive_interface.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cotransport::aci {

void AdmittanceParams::validate() const {
  if (!(mass.array() > 0.0).all() || !mass.allFinite())
    throw std::invalid_argument("AdmittanceParams: mass must be positive");
  if (!(damping.array() > 0.0).all() || !damping.allFinite())
    throw std::invalid_argument("AdmittanceParams: damping must be positive");
}

AdmittanceState admittance_step(const Vec3& force, const AdmittanceState& state,
                                const AdmittanceParams& params, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("admittance_step: dt must be positive");
  if (!force.allFinite()) throw std::invalid_argument("admittance_step: non-finite force");
  AdmittanceState next;
  next.velocity = (params.mass.cwiseProduct(state.velocity) + dt * force)
                      .cwiseQuotient(params.mass + dt * params.damping);
  return next;
}

SlidingWindow::SlidingWindow(double length, double epsilon) : length_(length), epsilon_(epsilon) {
  if (!(length > 0.0)) throw std::invalid_argument("SlidingWindow: length must be positive");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("SlidingWindow: epsilon must be >= 0");
}

void SlidingWindow::push(double time, const Vec3& v_adm, const Vec3& v_h) {
  if (!samples_.empty() && !(time > samples_.back().time))
    throw std::invalid_argument("SlidingWindow: timestamps must be strictly increasing");
  samples_.push_back({time, v_adm, v_h});
  const double oldest = time - length_;
  while (samples_.front().time < oldest) samples_.pop_front();
}

namespace {

template <typename Select>
Vec3 trapezoid(const std::deque<SlidingWindow::Sample>& s, Select select) {
  Vec3 acc = Vec3::Zero();
  for (std::size_t i = 1; i < s.size(); ++i)
    acc += 0.5 * (s[i].time - s[i - 1].time) * (select(s[i]) + select(s[i - 1]));
  return acc;
}

}  // namespace

Vec3 SlidingWindow::admittance_displacement() const {
  return trapezoid(samples_, [](const Sample& x) { return x.v_adm; });
}

Vec3 SlidingWindow::hand_displacement() const {
  return trapezoid(samples_, [](const Sample& x) { return x.v_h; });
}

double adaptive_index(const SlidingWindow& window) {
  if (window.empty()) throw std::invalid_argument("adaptive_index: empty window");
  const double num = window.admittance_displacement().norm();
  const double den = window.hand_displacement().norm() + window.epsilon();
  if (den == 0.0) return num == 0.0 ? 1.0 : 0.0;
  return std::clamp(1.0 - num / den, 0.0, 1.0);
}

Vec3 fuse_velocity(const Vec3& v_adm, const Vec3& v_h, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("fuse_velocity: alpha out of range");
  return v_adm + alpha * v_h;
}

ReferenceState integrate_reference(const ReferenceState& state, const Vec3& v_d, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate_reference: dt must be positive");
  ReferenceState next = state;
  next.x_d.position += v_d * dt;
  return next;
}

AdaptiveInterface::AdaptiveInterface(const InterfaceConfig& config,
                                     const PoseSE3& initial_reference)
    : config_(config), window_(config.window_length, config.epsilon) {
  config_.admittance.validate();
  if (config_.force_filter_time_constant < 0.0)
    throw std::invalid_argument("AdaptiveInterface: negative filter time constant");
  reference_.x_d = initial_reference;
}

AdaptiveInterface::Output AdaptiveInterface::step(double time, const Vec3& force, const Vec3& v_h,
                                                  double dt) {
  Vec3 f = force;
  if (config_.force_filter_time_constant > 0.0) {
    if (!filter_primed_) {
      filtered_force_ = force;
      filter_primed_ = true;
    } else {
      const double a = dt / (config_.force_filter_time_constant + dt);
      filtered_force_ += a * (force - filtered_force_);
    }
    f = filtered_force_;
  } else {
    filtered_force_ = force;
  }

  admittance_ = admittance_step(f, admittance_, config_.admittance, dt);
  window_.push(time, admittance_.velocity, v_h);
  const double alpha = adaptive_index(window_);
  const Vec3 v_d = fuse_velocity(admittance_.velocity, v_h, alpha);
  reference_ = integrate_reference(reference_, v_d, dt);
  reference_.alpha = alpha;

  Output out;
  out.v_adm = admittance_.velocity;
  out.v_d = v_d;
  out.alpha = alpha;
  out.target.pose = reference_.x_d;
  out.target.twist << v_d, Vec3::Zero();
  return out;
}

}  // namespace cotransport::aci
