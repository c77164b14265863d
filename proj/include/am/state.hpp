#pragma once

#include "am/math.hpp"
#include "am/model.hpp"

#include <stdexcept>

namespace am {

/// Full state of one AM. V stacks the body-frame base twist and the joint
/// rates: V = [v_b; w_b; qdot] with p_b_dot = R_b v_b and R_b_dot = R_b hat(w_b).
struct AmState {
  Vec3 p_b = Vec3::Zero();
  Mat3 R_b = Mat3::Identity();
  VecX q;
  VecX V;

  static AmState rest(const MultibodyModel& model) {
    AmState s;
    s.q = VecX::Zero(model.n());
    s.V = VecX::Zero(model.dof());
    return s;
  }

  Eigen::Ref<const Vec3> v_b() const { return V.segment<3>(0); }
  Eigen::Ref<const Vec3> w_b() const { return V.segment<3>(3); }
  Eigen::Ref<const VecX> qdot() const { return V.segment(6, q.size()); }

  void validate(const MultibodyModel& model) const {
    if (q.size() != model.n() || V.size() != model.dof()) {
      throw std::invalid_argument("state: dimension mismatch with model");
    }
    if (!all_finite(p_b) || !all_finite(R_b) || !all_finite(q) || !all_finite(V)) {
      throw std::invalid_argument("state: non-finite entry");
    }
    if (!is_rotation(R_b)) {
      throw std::invalid_argument("state: base orientation is not a rotation");
    }
  }

  bool finite() const {
    return all_finite(p_b) && all_finite(R_b) && all_finite(q) && all_finite(V);
  }

  /// State advanced by h along its own velocity (configuration only; V kept).
  /// Used for central finite differences of configuration-dependent matrices
  /// along the current flow.
  AmState flow(double h) const {
    AmState s = *this;
    s.p_b = p_b + h * (R_b * v_b());
    s.R_b = R_b * so3_exp(h * Vec3(w_b()));
    s.q = q + h * qdot();
    return s;
  }
};

/// A wrench with an explicit frame tag. The contact module produces wrenches
/// in the end-effector body frame, matching the F/T-sensor reading the
/// controller consumes.
struct Wrench {
  enum class Frame { kWorld, kEndEffectorBody };
  Vec3 force = Vec3::Zero();
  Vec3 moment = Vec3::Zero();
  Frame frame = Frame::kEndEffectorBody;

  Vec6 stacked() const {
    Vec6 w;
    w << force, moment;
    return w;
  }

  bool finite() const { return all_finite(force) && all_finite(moment); }
};

}  // namespace am
