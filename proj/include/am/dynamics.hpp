#pragma once

#include "am/kinematics.hpp"
#include "am/math.hpp"
#include "am/model.hpp"
#include "am/state.hpp"

#include <utility>
#include <vector>

namespace am {

namespace spatial {

/// Spatial motion/force vectors in [angular; linear] component order,
/// expressed in a body-local frame.
struct SVec {
  Vec3 ang = Vec3::Zero();
  Vec3 lin = Vec3::Zero();
};

inline SVec motion_cross(const SVec& v, const SVec& m) {
  return {v.ang.cross(m.ang), v.ang.cross(m.lin) + v.lin.cross(m.ang)};
}

inline SVec force_cross(const SVec& v, const SVec& f) {
  return {v.ang.cross(f.ang) + v.lin.cross(f.lin), v.ang.cross(f.lin)};
}

/// Applies the spatial inertia of a body with mass m, CoM offset c and
/// rotational inertia I_c (about the CoM), all in the local frame.
inline SVec apply_inertia(double m, const Vec3& c, const Mat3& I_c, const SVec& v) {
  SVec h;
  h.lin = m * (v.lin + v.ang.cross(c));
  h.ang = I_c * v.ang - m * c.cross(c.cross(v.ang)) + m * c.cross(v.lin);
  return h;
}

/// Child frame posed at (R, p) in the parent; transforms a motion vector
/// from parent to child coordinates.
inline SVec to_child(const Mat3& R, const Vec3& p, const SVec& v) {
  return {R.transpose() * v.ang, R.transpose() * (v.lin + v.ang.cross(p))};
}

/// Transforms a force vector from child to parent coordinates.
inline SVec force_to_parent(const Mat3& R, const Vec3& p, const SVec& f) {
  const Vec3 f_p = R * f.lin;
  return {R * f.ang + p.cross(f_p), f_p};
}

}  // namespace spatial

/// Recursive Newton-Euler over the floating-base chain: the generalized force
/// M(q) Vdot + C(q,V) V + g required to produce the quasi-velocity
/// acceleration Vdot at state (q, V). Gravity enters through the standard
/// fictitious base acceleration and needs R_b; pass gravity_on = false for
/// the velocity-product bias alone.
inline VecX rnea(const MultibodyModel& model, const VecX& q, const VecX& V,
                 const VecX& Vdot, const Mat3& R_b, bool gravity_on) {
  using spatial::SVec;
  const int n = model.n();
  VecX out(model.dof());

  std::vector<SVec> v(n + 1), a(n + 1), f(n + 1);
  v[0] = {V.segment<3>(3), V.segment<3>(0)};
  a[0] = {Vdot.segment<3>(3), Vdot.segment<3>(0)};
  if (gravity_on) {
    a[0].lin += model.gravity * (R_b.transpose() * Vec3::UnitZ());
  }
  f[0] = spatial::apply_inertia(model.base_mass, Vec3::Zero(), model.base_inertia, a[0]);
  {
    const SVec h0 = spatial::apply_inertia(model.base_mass, Vec3::Zero(),
                                           model.base_inertia, v[0]);
    const SVec gyro0 = spatial::force_cross(v[0], h0);
    f[0].ang += gyro0.ang;
    f[0].lin += gyro0.lin;
  }

  std::vector<Mat3> R_pl(n + 1);
  std::vector<Vec3> p_pl(n + 1);
  for (int i = 1; i <= n; ++i) {
    const LinkSpec& l = model.links[i - 1];
    R_pl[i] = l.origin_R * axis_angle(l.axis, q(i - 1));
    p_pl[i] = l.origin_p;

    v[i] = spatial::to_child(R_pl[i], p_pl[i], v[i - 1]);
    v[i].ang += l.axis * V(5 + i);
    a[i] = spatial::to_child(R_pl[i], p_pl[i], a[i - 1]);
    a[i].ang += l.axis * Vdot(5 + i);
    const SVec vj{l.axis * V(5 + i), Vec3::Zero()};
    const SVec coriolis = spatial::motion_cross(v[i], vj);
    a[i].ang += coriolis.ang;
    a[i].lin += coriolis.lin;

    f[i] = spatial::apply_inertia(l.mass, l.com, l.inertia, a[i]);
    const SVec h = spatial::apply_inertia(l.mass, l.com, l.inertia, v[i]);
    const SVec gyro = spatial::force_cross(v[i], h);
    f[i].ang += gyro.ang;
    f[i].lin += gyro.lin;
  }

  for (int i = n; i >= 1; --i) {
    out(5 + i) = model.links[i - 1].axis.dot(f[i].ang);
    const SVec fp = spatial::force_to_parent(R_pl[i], p_pl[i], f[i]);
    f[i - 1].ang += fp.ang;
    f[i - 1].lin += fp.lin;
  }
  out.segment<3>(0) = f[0].lin;
  out.segment<3>(3) = f[0].ang;
  return out;
}

/// Velocity-product bias b(q, V) = C(q, V) V: zero-gravity, zero-acceleration
/// inverse dynamics.
inline VecX velocity_bias(const MultibodyModel& model, const VecX& q, const VecX& V) {
  return rnea(model, q, V, VecX::Zero(model.dof()), Mat3::Identity(), false);
}

/// Joint-space mass matrix in the quasi-velocity coordinates; depends on q
/// only. Assembled from per-body CoM/angular velocity maps, which keeps the
/// kinetic-energy identity exact by construction.
inline MatX mass_matrix(const MultibodyModel& model, const VecX& q) {
  const KinCache kin = compute_kin(model, q);
  const BodyJacobians J = body_jacobians(model, kin);
  const int dof = model.dof();
  MatX M = MatX::Zero(dof, dof);
  for (int b = 0; b <= kin.n; ++b) {
    const double m = (b == 0) ? model.base_mass : model.links[b - 1].mass;
    const Mat3& I_c = (b == 0) ? model.base_inertia : model.links[b - 1].inertia;
    const Mat3 I_base = kin.R[b] * I_c * kin.R[b].transpose();
    M.noalias() += m * J.Jv[b].transpose() * J.Jv[b];
    M.noalias() += J.Jw[b].transpose() * I_base * J.Jw[b];
  }
  return 0.5 * (M + M.transpose());
}

/// Coriolis/centrifugal factorization C(q, V) with the two properties the
/// rest of the artifact relies on: C(q,V) V equals the inverse-dynamics bias
/// exactly, and Mdot - 2C is skew-symmetric along any trajectory. Built from
/// world-frame CoM translation terms plus body-frame angular terms; the
/// gyroscopic part uses the skew matrix -hat(I w) rather than the equivalent
/// non-skew form hat(w) I.
inline MatX coriolis_matrix(const MultibodyModel& model, const VecX& q, const VecX& V) {
  if (!all_finite(V) || V.size() != model.dof()) {
    throw std::invalid_argument("coriolis_matrix: invalid velocity");
  }
  const KinCache kin = compute_kin(model, q);
  const BodyJacobians J = body_jacobians(model, kin);
  const BodyJacobianRates Jd = body_jacobian_rates(model, kin, V.segment(6, model.n()));
  const Mat3 w_b_hat = hat(V.segment<3>(3));
  const int dof = model.dof();
  MatX C = MatX::Zero(dof, dof);
  for (int b = 0; b <= kin.n; ++b) {
    const double m = (b == 0) ? model.base_mass : model.links[b - 1].mass;
    const Mat3& I_c = (b == 0) ? model.base_inertia : model.links[b - 1].inertia;
    // Translation: world-frame CoM velocities; the base rotation cancels.
    C.noalias() += m * J.Jv[b].transpose() * (w_b_hat * J.Jv[b] + Jd.Jv_dot[b]);
    // Rotation: body-frame angular velocities.
    const MatX U = kin.R[b].transpose() * J.Jw[b];
    const MatX U_dot = kin.R[b].transpose() * (Jd.Jw_dot[b] - hat(Jd.w_rel[b]) * J.Jw[b]);
    const Vec3 w_body = U * V;
    C.noalias() += U.transpose() * I_c * U_dot;
    C.noalias() -= U.transpose() * hat(I_c * w_body) * U;
  }
  return C;
}

inline VecX coriolis_product(const MultibodyModel& model, const VecX& q,
                             const VecX& V, const VecX& u) {
  return coriolis_matrix(model, q, V) * u;
}

/// Gravity term of the quasi-velocity dynamics (left-hand-side sign): the
/// gradient of the potential energy mapped through the per-body CoM maps.
inline VecX gravity_vector(const MultibodyModel& model, const VecX& q, const Mat3& R_b) {
  if (!is_rotation(R_b)) {
    throw std::invalid_argument("gravity_vector: invalid rotation");
  }
  const KinCache kin = compute_kin(model, q);
  const BodyJacobians J = body_jacobians(model, kin);
  const Vec3 up_b = model.gravity * (R_b.transpose() * Vec3::UnitZ());
  VecX g = VecX::Zero(model.dof());
  for (int b = 0; b <= kin.n; ++b) {
    const double m = (b == 0) ? model.base_mass : model.links[b - 1].mass;
    g.noalias() += m * (J.Jv[b].transpose() * up_b);
  }
  return g;
}

/// End-effector body Jacobian: V_e = J_e V with rows [linear; angular] in {e}.
inline MatX ee_jacobian(const MultibodyModel& model, const VecX& q) {
  return ee_body_jacobian(model, compute_kin(model, q));
}

struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 p = Vec3::Zero();
};

inline Pose ee_pose(const MultibodyModel& model, const AmState& s) {
  const KinCache kin = compute_kin(model, s.q);
  return {s.R_b * kin.R_eb, s.p_b + s.R_b * kin.p_eb};
}

/// CoM position/maps of the whole AM: r_c in {w}, the base-to-CoM vector in
/// {w}, its joint Jacobian, and the CoM velocity map J_c with rdot_c = J_c V.
struct ComQuantities {
  Vec3 r_c = Vec3::Zero();
  Vec3 r_bc = Vec3::Zero();
  MatX dr_bc_dq;   // 3 x n, world frame
  MatX J_c;        // 3 x (n+6)
  Vec3 r_bc_body = Vec3::Zero();
  MatX dr_bc_dq_body;  // 3 x n, base frame
};

inline ComQuantities com_quantities(const MultibodyModel& model, const AmState& s) {
  const KinCache kin = compute_kin(model, s.q);
  const BodyJacobians J = body_jacobians(model, kin);
  const double m = model.total_mass;
  ComQuantities c;
  MatX Jc_body = MatX::Zero(3, model.dof());
  Vec3 com_b = Vec3::Zero();
  for (int b = 0; b <= kin.n; ++b) {
    const double mb = (b == 0) ? model.base_mass : model.links[b - 1].mass;
    com_b += mb * kin.com[b];
    Jc_body.noalias() += mb * J.Jv[b];
  }
  com_b /= m;
  Jc_body /= m;
  c.r_bc_body = com_b;
  c.dr_bc_dq_body = Jc_body.rightCols(model.n());
  c.r_bc = s.R_b * com_b;
  c.r_c = s.p_b + c.r_bc;
  c.dr_bc_dq = s.R_b * c.dr_bc_dq_body;
  c.J_c = MatX::Zero(3, model.dof());
  c.J_c.leftCols<3>() = s.R_b;
  c.J_c.middleCols<3>(3) = -hat(c.r_bc) * s.R_b;
  c.J_c.rightCols(model.n()) = c.dr_bc_dq;
  return c;
}

inline double kinetic_energy(const MultibodyModel& model, const VecX& q, const VecX& V) {
  return 0.5 * V.dot(mass_matrix(model, q) * V);
}

inline double potential_energy(const MultibodyModel& model, const AmState& s) {
  const KinCache kin = compute_kin(model, s.q);
  double U = 0.0;
  for (int b = 0; b <= kin.n; ++b) {
    const double mb = (b == 0) ? model.base_mass : model.links[b - 1].mass;
    const Vec3 r_w = s.p_b + s.R_b * kin.com[b];
    U += mb * model.gravity * r_w.z();
  }
  return U;
}

/// Quasi-velocity forward dynamics under a generalized force tau and an
/// end-effector body wrench.
inline VecX forward_dynamics(const MultibodyModel& model, const AmState& s,
                             const VecX& tau, const Wrench& F_e) {
  const VecX bias = rnea(model, s.q, s.V, VecX::Zero(model.dof()), s.R_b, true);
  VecX rhs = tau - bias;
  if (F_e.force.squaredNorm() > 0.0 || F_e.moment.squaredNorm() > 0.0) {
    const MatX Je = ee_jacobian(model, s.q);
    rhs.noalias() += Je.transpose() * F_e.stacked();
  }
  const MatX M = mass_matrix(model, s.q);
  return M.ldlt().solve(rhs);
}

}  // namespace am
