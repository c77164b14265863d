#pragma once

#include "am/math.hpp"
#include "am/state.hpp"

#include <optional>
#include <vector>

namespace am {

/// Rigid box object. Pose is the CoM pose; twist is world-frame.
struct ObjectState {
  Vec3 p = Vec3::Zero();
  Mat3 R = Mat3::Identity();
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();
  double mass = 1.0;
  Mat3 inertia = Mat3::Identity();  // about the CoM, body frame
  Vec3 half_extents = Vec3(0.1, 0.1, 0.1);

  void validate() const {
    if (mass <= 0.0) {
      throw std::invalid_argument("object: mass must be positive");
    }
    if ((inertia - inertia.transpose()).norm() > 1e-12 * (1.0 + inertia.norm())) {
      throw std::invalid_argument("object: inertia not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es(inertia);
    if (es.eigenvalues().minCoeff() <= 0.0) {
      throw std::invalid_argument("object: inertia not positive definite");
    }
    if (!is_rotation(R)) {
      throw std::invalid_argument("object: rotation invalid");
    }
    if ((half_extents.array() <= 0.0).any()) {
      throw std::invalid_argument("object: half extents must be positive");
    }
  }

  static Mat3 box_inertia(double mass, const Vec3& half) {
    const Vec3 e = 2.0 * half;
    return Vec3(mass * (e.y() * e.y() + e.z() * e.z()) / 12.0,
                mass * (e.x() * e.x() + e.z() * e.z()) / 12.0,
                mass * (e.x() * e.x() + e.y() * e.y()) / 12.0)
        .asDiagonal();
  }
};

struct ContactParams {
  double k_n = 5000.0;  // normal stiffness [N/m]
  double d_n = 50.0;    // normal damping [N s/m]
  double mu = 0.8;      // Coulomb friction coefficient
  double k_t = 2000.0;  // tangential anchor stiffness [N/m]
  double d_t = 20.0;    // tangential damping [N s/m]
};

/// One resolved contact, world frame. Forces are the ones applied to the
/// non-object body (end-effector tip or, for the table, the ground reaction
/// on the object).
struct ContactRecord {
  int am_id = -1;  // -1 marks a table contact
  Vec3 point = Vec3::Zero();
  double depth = 0.0;
  Vec3 normal = Vec3::UnitZ();
  double normal_force = 0.0;
  Vec3 tangential_force = Vec3::Zero();
  bool sticking = false;
  bool active = false;
};

/// Persistent stick-slip bookkeeping: the tangential anchor point, stored in
/// the frame of the surface that carries it.
struct ContactAnchor {
  bool active = false;
  Vec3 anchor = Vec3::Zero();
};

struct WorldWrench {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();  // about the object CoM
};

namespace detail {

struct PointContact {
  double normal_force = 0.0;
  Vec3 tangential = Vec3::Zero();
  bool sticking = false;
  double spring_energy = 0.0;
};

/// Penalty normal force plus regularized Coulomb friction for one point
/// contact. `rel_vel` is the velocity of the point relative to the surface,
/// `tangent_err` the spring stretch from the anchor (both world, tangent
/// plane for the latter). Returns the force on the point-side body and the
/// updated stretch after cone projection.
inline PointContact point_contact(const ContactParams& cp, double depth,
                                  double depth_rate, const Vec3& normal,
                                  const Vec3& rel_vel, Vec3& tangent_err) {
  PointContact out;
  const double fn = cp.k_n * depth + cp.d_n * depth_rate;
  out.normal_force = std::max(0.0, fn);
  const Mat3 P = Mat3::Identity() - normal * normal.transpose();
  const Vec3 v_t = P * rel_vel;
  tangent_err = P * tangent_err;
  Vec3 f_t = -cp.k_t * tangent_err - cp.d_t * v_t;
  const double cap = cp.mu * out.normal_force;
  if (f_t.norm() <= cap) {
    out.sticking = true;
  } else {
    out.sticking = false;
    f_t = (cap > 0.0) ? Vec3(cap * f_t.normalized()) : Vec3::Zero();
    // Slide the anchor so the spring alone carries the cone-surface force.
    tangent_err = -(f_t + cp.d_t * v_t) / cp.k_t;
    tangent_err = P * tangent_err;
  }
  out.tangential = f_t;
  out.spring_energy = 0.5 * cp.k_n * depth * depth +
                      0.5 * cp.k_t * tangent_err.squaredNorm();
  return out;
}

}  // namespace detail

struct EeContactInput {
  Vec3 tip = Vec3::Zero();      // world position of the end-effector tip
  Vec3 tip_vel = Vec3::Zero();  // world velocity of the tip
  Mat3 R_e = Mat3::Identity();  // end-effector orientation (for the F/T frame)
};

struct ContactResult {
  std::vector<ContactRecord> ee_records;     // one per AM
  std::vector<Wrench> F_e;                   // per AM, {e} body frame
  std::vector<ContactRecord> table_records;  // active table corner contacts
  WorldWrench object_wrench;                 // net contact wrench on the object
  double spring_energy = 0.0;                // stored penalty energy
};

/// Evaluates all end-effector/object and object/table contacts from a world
/// snapshot. Anchor bookkeeping is carried in `ee_anchors` (per AM, object
/// frame) and `table_anchors` (per box corner, world frame).
inline ContactResult evaluate_contacts(const ObjectState& obj, const ContactParams& cp,
                                       const std::vector<EeContactInput>& ees,
                                       std::vector<ContactAnchor>& ee_anchors,
                                       std::vector<ContactAnchor>& table_anchors,
                                       bool table_enabled = true) {
  ContactResult res;
  const size_t n_am = ees.size();
  ee_anchors.resize(n_am);
  res.ee_records.resize(n_am);
  res.F_e.resize(n_am);

  for (size_t i = 0; i < n_am; ++i) {
    ContactRecord rec;
    rec.am_id = static_cast<int>(i);
    Wrench F_e;
    F_e.frame = Wrench::Frame::kEndEffectorBody;

    const Vec3 local = obj.R.transpose() * (ees[i].tip - obj.p);
    const Vec3 slack = obj.half_extents - local.cwiseAbs();
    if ((slack.array() > 0.0).all()) {
      int face = 0;
      slack.minCoeff(&face);
      const double sign = (local(face) >= 0.0) ? 1.0 : -1.0;
      const Vec3 normal = sign * obj.R.col(face);
      const Vec3 obj_pt_vel = obj.v + obj.w.cross(ees[i].tip - obj.p);
      const Vec3 rel_vel = ees[i].tip_vel - obj_pt_vel;

      if (!ee_anchors[i].active) {
        ee_anchors[i].active = true;
        ee_anchors[i].anchor = local;
      }
      const Vec3 anchor_world = obj.p + obj.R * ee_anchors[i].anchor;
      Vec3 stretch = ees[i].tip - anchor_world;

      const auto pc = detail::point_contact(cp, slack(face), -normal.dot(rel_vel),
                                            normal, rel_vel, stretch);
      rec.active = true;
      rec.point = ees[i].tip;
      rec.depth = slack(face);
      rec.normal = normal;
      rec.normal_force = pc.normal_force;
      rec.tangential_force = pc.tangential;
      rec.sticking = pc.sticking;
      res.spring_energy += pc.spring_energy;
      ee_anchors[i].anchor = obj.R.transpose() * (ees[i].tip - stretch - obj.p);

      const Vec3 f_world = pc.normal_force * normal + pc.tangential;
      F_e.force = ees[i].R_e.transpose() * f_world;
      F_e.moment.setZero();  // point contact at the {e} origin
      res.object_wrench.force -= f_world;
      res.object_wrench.torque -= (ees[i].tip - obj.p).cross(f_world);
    } else {
      ee_anchors[i].active = false;
    }
    res.ee_records[i] = rec;
    res.F_e[i] = F_e;
  }

  if (table_enabled) {
    table_anchors.resize(8);
    int idx = 0;
    for (int sx : {-1, 1}) {
      for (int sy : {-1, 1}) {
        for (int sz : {-1, 1}) {
          const Vec3 corner_local = obj.half_extents.cwiseProduct(
              Vec3(static_cast<double>(sx), static_cast<double>(sy),
                   static_cast<double>(sz)));
          const Vec3 corner = obj.p + obj.R * corner_local;
          ContactAnchor& anchor = table_anchors[idx];
          if (corner.z() < 0.0) {
            const Vec3 corner_vel = obj.v + obj.w.cross(corner - obj.p);
            if (!anchor.active) {
              anchor.active = true;
              anchor.anchor = corner;
            }
            Vec3 stretch = corner - anchor.anchor;
            const auto pc = detail::point_contact(cp, -corner.z(), -corner_vel.z(),
                                                  Vec3::UnitZ(), corner_vel, stretch);
            anchor.anchor = corner - stretch;
            anchor.anchor.z() = 0.0;
            // Ground reaction on the object.
            const Vec3 f_world = pc.normal_force * Vec3::UnitZ() + pc.tangential;
            res.object_wrench.force += f_world;
            res.object_wrench.torque += (corner - obj.p).cross(f_world);
            res.spring_energy += pc.spring_energy;

            ContactRecord rec;
            rec.am_id = -1;
            rec.active = true;
            rec.point = corner;
            rec.depth = -corner.z();
            rec.normal = Vec3::UnitZ();
            rec.normal_force = pc.normal_force;
            rec.tangential_force = pc.tangential;
            rec.sticking = pc.sticking;
            res.table_records.push_back(rec);
          } else {
            anchor.active = false;
          }
          ++idx;
        }
      }
    }
  }
  return res;
}

/// Newton-Euler step of the object under a zero-order-hold wrench, 4th-order
/// Runge-Kutta, rotation re-projected onto SO(3) afterwards.
inline ObjectState object_step(const ObjectState& obj, const WorldWrench& wrench,
                               double gravity, double dt) {
  if (dt <= 0.0) {
    throw std::invalid_argument("object_step: dt must be positive");
  }
  struct Deriv {
    Vec3 dp, dv, dw;
    Mat3 dR;
  };
  auto deriv = [&](const ObjectState& s) {
    Deriv d;
    d.dp = s.v;
    d.dR = hat(s.w) * s.R;
    d.dv = wrench.force / s.mass - gravity * Vec3::UnitZ();
    const Mat3 I_w = s.R * s.inertia * s.R.transpose();
    d.dw = I_w.ldlt().solve(wrench.torque - s.w.cross(I_w * s.w));
    return d;
  };
  auto advance = [&](const ObjectState& s, const Deriv& d, double h) {
    ObjectState r = s;
    r.p += h * d.dp;
    r.R += h * d.dR;
    r.v += h * d.dv;
    r.w += h * d.dw;
    return r;
  };
  const Deriv k1 = deriv(obj);
  const Deriv k2 = deriv(advance(obj, k1, 0.5 * dt));
  const Deriv k3 = deriv(advance(obj, k2, 0.5 * dt));
  const Deriv k4 = deriv(advance(obj, k3, dt));
  ObjectState out = obj;
  out.p += dt / 6.0 * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
  out.R += dt / 6.0 * (k1.dR + 2.0 * k2.dR + 2.0 * k3.dR + k4.dR);
  out.v += dt / 6.0 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
  out.w += dt / 6.0 * (k1.dw + 2.0 * k2.dw + 2.0 * k3.dw + k4.dw);
  out.R = project_to_so3(out.R);
  return out;
}

inline double object_kinetic_energy(const ObjectState& obj) {
  const Mat3 I_w = obj.R * obj.inertia * obj.R.transpose();
  return 0.5 * obj.mass * obj.v.squaredNorm() + 0.5 * obj.w.dot(I_w * obj.w);
}

}  // namespace am
