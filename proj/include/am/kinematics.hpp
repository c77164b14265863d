#pragma once

#include "am/math.hpp"
#include "am/model.hpp"
#include "am/state.hpp"

#include <vector>

namespace am {

/// Forward kinematics of the chain relative to the base frame. Everything in
/// here depends on q only; world-frame quantities are obtained by composing
/// with the base pose. Body 0 is the base, bodies 1..n the arm links.
struct KinCache {
  int n = 0;
  std::vector<Mat3> R;       // body frame in base coords
  std::vector<Vec3> p;       // body origin in base coords
  std::vector<Vec3> com;     // body CoM in base coords
  std::vector<Vec3> axis;    // joint axis of joint k (k >= 1) in base coords
  Mat3 R_eb = Mat3::Identity();
  Vec3 p_eb = Vec3::Zero();
};

inline KinCache compute_kin(const MultibodyModel& model, const VecX& q) {
  if (!all_finite(q) || q.size() != model.n()) {
    throw std::invalid_argument("compute_kin: invalid joint vector");
  }
  KinCache k;
  k.n = model.n();
  k.R.resize(k.n + 1);
  k.p.resize(k.n + 1);
  k.com.resize(k.n + 1);
  k.axis.resize(k.n + 1);
  k.R[0] = Mat3::Identity();
  k.p[0] = Vec3::Zero();
  k.com[0] = Vec3::Zero();  // {b} sits at the base CoM
  k.axis[0] = Vec3::Zero();
  for (int i = 1; i <= k.n; ++i) {
    const LinkSpec& l = model.links[i - 1];
    const Mat3 R_joint = k.R[i - 1] * l.origin_R;
    k.p[i] = k.p[i - 1] + k.R[i - 1] * l.origin_p;
    k.axis[i] = R_joint * l.axis;
    k.R[i] = R_joint * axis_angle(l.axis, q(i - 1));
    k.com[i] = k.p[i] + k.R[i] * l.com;
  }
  k.R_eb = k.R[k.n] * model.ee_R;
  k.p_eb = k.p[k.n] + k.R[k.n] * model.ee_p;
  return k;
}

/// Per-body velocity maps, base coordinates: the CoM linear velocity of body
/// k is Jv[k] * V and its angular velocity is Jw[k] * V, both expressed in
/// the base frame. Functions of q only.
struct BodyJacobians {
  std::vector<MatX> Jv;
  std::vector<MatX> Jw;
};

inline BodyJacobians body_jacobians(const MultibodyModel& model, const KinCache& k) {
  const int dof = model.dof();
  BodyJacobians J;
  J.Jv.assign(k.n + 1, MatX::Zero(3, dof));
  J.Jw.assign(k.n + 1, MatX::Zero(3, dof));
  for (int b = 0; b <= k.n; ++b) {
    J.Jv[b].block<3, 3>(0, 0).setIdentity();
    J.Jv[b].block<3, 3>(0, 3) = -hat(k.com[b]);
    J.Jw[b].block<3, 3>(0, 3).setIdentity();
    for (int j = 1; j <= b; ++j) {
      J.Jv[b].col(5 + j) = k.axis[j].cross(k.com[b] - k.p[j]);
      J.Jw[b].col(5 + j) = k.axis[j];
    }
  }
  return J;
}

/// Analytic time derivatives of the body Jacobians along a joint velocity.
/// The base-frame Jacobians depend on q only, so their rates are driven by
/// qdot alone.
struct BodyJacobianRates {
  std::vector<MatX> Jv_dot;
  std::vector<MatX> Jw_dot;
  std::vector<Vec3> w_rel;     // body angular velocity relative to base
  std::vector<Vec3> com_dot;   // CoM velocity relative to base
};

inline BodyJacobianRates body_jacobian_rates(const MultibodyModel& model,
                                             const KinCache& k,
                                             const VecX& qdot) {
  const int dof = model.dof();
  BodyJacobianRates r;
  r.Jv_dot.assign(k.n + 1, MatX::Zero(3, dof));
  r.Jw_dot.assign(k.n + 1, MatX::Zero(3, dof));
  r.w_rel.assign(k.n + 1, Vec3::Zero());
  r.com_dot.assign(k.n + 1, Vec3::Zero());

  std::vector<Vec3> axis_dot(k.n + 1, Vec3::Zero());
  std::vector<Vec3> origin_dot(k.n + 1, Vec3::Zero());
  for (int i = 1; i <= k.n; ++i) {
    // Joint i's origin and axis are carried by the parent body i-1.
    origin_dot[i] = origin_dot[i - 1] + r.w_rel[i - 1].cross(k.p[i] - k.p[i - 1]);
    axis_dot[i] = r.w_rel[i - 1].cross(k.axis[i]);
    r.w_rel[i] = r.w_rel[i - 1] + k.axis[i] * qdot(i - 1);
    r.com_dot[i] = origin_dot[i] + r.w_rel[i].cross(k.com[i] - k.p[i]);
  }

  for (int b = 0; b <= k.n; ++b) {
    r.Jv_dot[b].block<3, 3>(0, 3) = -hat(r.com_dot[b]);
    for (int j = 1; j <= b; ++j) {
      r.Jv_dot[b].col(5 + j) = axis_dot[j].cross(k.com[b] - k.p[j]) +
                               k.axis[j].cross(r.com_dot[b] - origin_dot[j]);
      r.Jw_dot[b].col(5 + j) = axis_dot[j];
    }
  }
  return r;
}

/// End-effector body Jacobian, rows [linear; angular] in {e} coordinates:
/// V_e = J_e V.
inline MatX ee_body_jacobian(const MultibodyModel& model, const KinCache& k) {
  const int dof = model.dof();
  MatX Jp = MatX::Zero(3, dof);
  Jp.block<3, 3>(0, 0).setIdentity();
  Jp.block<3, 3>(0, 3) = -hat(k.p_eb);
  MatX Jw = MatX::Zero(3, dof);
  Jw.block<3, 3>(0, 3).setIdentity();
  for (int j = 1; j <= k.n; ++j) {
    Jp.col(5 + j) = k.axis[j].cross(k.p_eb - k.p[j]);
    Jw.col(5 + j) = k.axis[j];
  }
  MatX Je(6, dof);
  Je.topRows(3) = k.R_eb.transpose() * Jp;
  Je.bottomRows(3) = k.R_eb.transpose() * Jw;
  return Je;
}

}  // namespace am
