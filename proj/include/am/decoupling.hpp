#pragma once

#include "am/dynamics.hpp"
#include "am/kinematics.hpp"
#include "am/math.hpp"
#include "am/model.hpp"
#include "am/state.hpp"

namespace am {

/// Everything the inertial-decoupling coordinate change produces at one
/// state: the transform T mapping V to xi = [rdot_c; w_b; rho], its inverse
/// and inverse transpose, the transformed inertia/Coriolis/gravity terms and
/// the nullspace projector. The block structure of Lambda/Gamma/zeta is a
/// property of the transform; it is asserted by tests, never imposed here.
struct DecoupledTerms {
  int n = 0;
  MatX T;
  MatX T_inv;
  MatX T_invT;
  VecX xi;
  MatX Lambda;
  MatX Gamma;
  VecX zeta;
  MatX N;
  MatX N1;

  // Cached per-state quantities shared with the controller.
  MatX M;
  MatX J_e;
  Mat3 R_e = Mat3::Identity();
  Vec3 p_e = Vec3::Zero();
  ComQuantities com;

  Eigen::Ref<const Vec3> rdot_c() const { return xi.segment<3>(0); }
  Eigen::Ref<const Vec3> w_b() const { return xi.segment<3>(3); }
  Eigen::Ref<const VecX> rho() const { return xi.segment(6, n); }

  Mat3 Lambda_wb() const { return Lambda.block<3, 3>(3, 3); }
  MatX Lambda_rho() const { return Lambda.bottomRightCorner(n, n); }
  Mat3 Gamma_wb() const { return Gamma.block<3, 3>(3, 3); }
  MatX Gamma_wb_rho() const { return Gamma.block(3, 6, 3, n); }
  MatX Gamma_rho() const { return Gamma.bottomRightCorner(n, n); }
};

struct TransformParts {
  MatX T;
  MatX N;
  MatX N1;
  MatX Z;
  MatX M;
  ComQuantities com;
};

/// Assembles T = [J_c; J_wb; N] with the dynamically consistent nullspace
/// projector N = (Z M Z^T)^-1 Z M, Z = [-(dr_bc/dq)^T R_b, 0, I].
inline TransformParts build_transform(const MultibodyModel& model, const AmState& s) {
  s.validate(model);
  const int n = model.n();
  const int dof = model.dof();
  TransformParts parts;
  parts.com = com_quantities(model, s);
  parts.M = mass_matrix(model, s.q);

  parts.Z = MatX::Zero(n, dof);
  // (dr_bc/dq)^T R_b collapses to the base-frame Jacobian transpose.
  parts.Z.leftCols(3) = -parts.com.dr_bc_dq_body.transpose();
  parts.Z.rightCols(n).setIdentity();

  const MatX ZM = parts.Z * parts.M;
  const MatX ZMZt = ZM * parts.Z.transpose();
  parts.N = guarded_inverse(ZMZt, "decoupling: Z M Z^T") * ZM;
  parts.N1 = parts.N.middleCols(3, 3);

  parts.T = MatX::Zero(dof, dof);
  parts.T.topRows(3) = parts.com.J_c;
  parts.T.block<3, 3>(3, 3).setIdentity();
  parts.T.bottomRows(n) = parts.N;
  return parts;
}

/// Full decoupled terms at a state. Tdot and the Lambda rate are obtained by
/// central finite differences along the current flow (step scaled by the
/// velocity magnitude), matching how Gamma is defined:
///   Gamma = T^-T (C - M T^-1 Tdot) T^-1.
inline DecoupledTerms decoupled_terms(const MultibodyModel& model, const AmState& s,
                                      double fd_step = 1e-6) {
  const int n = model.n();
  const TransformParts parts = build_transform(model, s);
  DecoupledTerms d;
  d.n = n;
  d.T = parts.T;
  d.N = parts.N;
  d.N1 = parts.N1;
  d.M = parts.M;
  d.com = parts.com;
  d.T_inv = guarded_inverse(parts.T, "decoupling: T");
  d.T_invT = d.T_inv.transpose();
  d.xi = parts.T * s.V;

  d.Lambda = d.T_invT * parts.M * d.T_inv;
  d.Lambda = 0.5 * (d.Lambda + d.Lambda.transpose()).eval();
  d.zeta = d.T_invT * gravity_vector(model, s.q, s.R_b);

  const double h = fd_step / std::max(1.0, s.V.lpNorm<Eigen::Infinity>());
  const MatX T_plus = build_transform(model, s.flow(h)).T;
  const MatX T_minus = build_transform(model, s.flow(-h)).T;
  const MatX Tdot = (T_plus - T_minus) / (2.0 * h);
  const MatX C = coriolis_matrix(model, s.q, s.V);
  d.Gamma = d.T_invT * (C - parts.M * d.T_inv * Tdot) * d.T_inv;

  const KinCache kin = compute_kin(model, s.q);
  d.J_e = ee_body_jacobian(model, kin);
  d.R_e = s.R_b * kin.R_eb;
  d.p_e = s.p_b + s.R_b * kin.p_eb;
  return d;
}

/// Maps an end-effector body wrench into the transformed coordinates:
/// F_xi = T^-T J_e^T F_e, with blocks [F_rc; F_wb; F_rho].
inline VecX transform_wrench(const DecoupledTerms& terms, const MatX& J_e,
                             const Wrench& F_e) {
  if (F_e.frame != Wrench::Frame::kEndEffectorBody) {
    throw std::invalid_argument("transform_wrench: wrench must be in the {e} body frame");
  }
  if (!F_e.finite()) {
    throw std::invalid_argument("transform_wrench: non-finite wrench");
  }
  return terms.T_invT * (J_e.transpose() * F_e.stacked());
}

/// Planar task variable for the 3-DOF arm: position of {e} along the task
/// frame x-axis and the world z-axis, plus the pitch of {e} about the task
/// frame y-axis. The task frame is a yaw-only rotation R_t of the world
/// frame, one per AM, so AMs approaching from any side share one controller.
struct TaskOutput {
  Vec3 y = Vec3::Zero();
  Vec3 ydot = Vec3::Zero();
  MatX J_task;  // 3 x (n+6), ydot = J_task V
  MatX J;       // 3 x (n+6), ydot = J xi
  MatX Jdot;    // finite-difference rate of J along the flow
};

namespace detail {

inline MatX task_jacobian(const MultibodyModel& model, const AmState& s, const Mat3& R_t) {
  const KinCache kin = compute_kin(model, s.q);
  const MatX Je = ee_body_jacobian(model, kin);
  const Mat3 R_e = s.R_b * kin.R_eb;
  const Mat3 Rbar = R_t.transpose() * R_e;
  MatX Jt(3, model.dof());
  const MatX lin_world = R_e * Je.topRows(3);
  Jt.row(0) = R_t.col(0).transpose() * lin_world;
  Jt.row(1) = Vec3::UnitZ().transpose() * lin_world;
  const double r02 = Rbar(0, 2);
  const double r22 = Rbar(2, 2);
  const double denom = r02 * r02 + r22 * r22;
  // d/dt atan2(r02, r22) written as a linear form in the {e} body rates.
  Vec3 cpitch;
  cpitch(0) = -(r22 * Rbar(0, 1) - r02 * Rbar(2, 1)) / denom;
  cpitch(1) = (r22 * Rbar(0, 0) - r02 * Rbar(2, 0)) / denom;
  cpitch(2) = 0.0;
  Jt.row(2) = cpitch.transpose() * Je.bottomRows(3);
  return Jt;
}

inline Vec3 task_value(const MultibodyModel& model, const AmState& s, const Mat3& R_t) {
  const KinCache kin = compute_kin(model, s.q);
  const Vec3 p_e = s.p_b + s.R_b * kin.p_eb;
  const Mat3 Rbar = R_t.transpose() * s.R_b * kin.R_eb;
  return Vec3(R_t.col(0).dot(p_e), p_e.z(), std::atan2(Rbar(0, 2), Rbar(2, 2)));
}

}  // namespace detail

inline TaskOutput task_output(const MultibodyModel& model, const AmState& s,
                              const Mat3& R_t, double fd_step = 1e-6) {
  if (model.n() != 3) {
    throw std::invalid_argument("task_output: the planar task needs a 3-DOF arm");
  }
  TaskOutput out;
  out.J_task = detail::task_jacobian(model, s, R_t);
  out.y = detail::task_value(model, s, R_t);
  out.ydot = out.J_task * s.V;

  const MatX T_inv = guarded_inverse(build_transform(model, s).T, "task_output: T");
  out.J = out.J_task * T_inv;

  const double h = fd_step / std::max(1.0, s.V.lpNorm<Eigen::Infinity>());
  const AmState sp = s.flow(h);
  const AmState sm = s.flow(-h);
  const MatX Jp = detail::task_jacobian(model, sp, R_t) *
                  guarded_inverse(build_transform(model, sp).T, "task_output: T+");
  const MatX Jm = detail::task_jacobian(model, sm, R_t) *
                  guarded_inverse(build_transform(model, sm).T, "task_output: T-");
  out.Jdot = (Jp - Jm) / (2.0 * h);
  return out;
}

}  // namespace am
