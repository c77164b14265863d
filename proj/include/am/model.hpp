#pragma once

#include "am/math.hpp"

#include <stdexcept>
#include <vector>

namespace am {

/// One revolute link of the serial arm. The joint frame is reached from the
/// parent frame by the fixed origin transform (origin_R, origin_p) followed by
/// a rotation of the joint angle about `axis` (expressed in the joint frame;
/// with an identity origin rotation this coincides with the parent frame).
/// `com` and `inertia` are the link center of mass and the inertia tensor
/// about that center of mass, both in the link frame.
struct LinkSpec {
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  Mat3 inertia = Mat3::Zero();
  Vec3 axis = Vec3::UnitY();
  Mat3 origin_R = Mat3::Identity();
  Vec3 origin_p = Vec3::Zero();
};

/// Kinematic and inertial description of one aerial manipulator: a floating
/// base (frame {b} at the base center of mass) plus an n-joint serial arm and
/// an end-effector frame {e} fixed to the last link.
struct MultibodyModel {
  double base_mass = 0.0;
  Mat3 base_inertia = Mat3::Zero();
  std::vector<LinkSpec> links;
  Mat3 ee_R = Mat3::Identity();
  Vec3 ee_p = Vec3::Zero();
  double gravity = kDefaultGravity;

  /// Soft joint limit (warning only), symmetric about zero.
  double joint_limit = 150.0 * M_PI / 180.0;

  double total_mass = 0.0;

  int n() const { return static_cast<int>(links.size()); }
  int dof() const { return n() + 6; }

  void finalize() {
    total_mass = base_mass;
    for (const auto& l : links) {
      total_mass += l.mass;
    }
    validate();
  }

  void validate() const {
    auto check_spd = [](const Mat3& I, const char* what) {
      if ((I - I.transpose()).norm() > 1e-12 * (1.0 + I.norm())) {
        throw std::invalid_argument(std::string(what) + ": inertia tensor not symmetric");
      }
      Eigen::SelfAdjointEigenSolver<Mat3> es(I);
      if (es.eigenvalues().minCoeff() <= 0.0) {
        throw std::invalid_argument(std::string(what) + ": inertia tensor not positive definite");
      }
    };
    if (base_mass <= 0.0) {
      throw std::invalid_argument("model: base mass must be positive");
    }
    check_spd(base_inertia, "base");
    double sum = base_mass;
    for (size_t i = 0; i < links.size(); ++i) {
      const auto& l = links[i];
      if (l.mass <= 0.0) {
        throw std::invalid_argument("link " + std::to_string(i) + ": mass must be positive");
      }
      check_spd(l.inertia, "link");
      if (std::abs(l.axis.norm() - 1.0) > 1e-9) {
        throw std::invalid_argument("link " + std::to_string(i) + ": joint axis not unit length");
      }
      if (!is_rotation(l.origin_R)) {
        throw std::invalid_argument("link " + std::to_string(i) + ": origin rotation invalid");
      }
      sum += l.mass;
    }
    if (!is_rotation(ee_R)) {
      throw std::invalid_argument("model: end-effector offset rotation invalid");
    }
    if (std::abs(sum - total_mass) > 0.0) {
      throw std::invalid_argument("model: cached total mass is stale");
    }
    if (gravity < 0.0) {
      throw std::invalid_argument("model: gravity must be non-negative");
    }
  }
};

/// Link inertia about its center: thin rod along +x plus the gear-amplified
/// rotor inertia of the joint actuator, which dominates the rotational terms
/// for a small geared arm.
inline Mat3 link_inertia(double mass, double length, double reflected = 1.2e-3) {
  const double rod = mass * length * length / 12.0;
  Mat3 I = Mat3::Zero();
  I.diagonal() << 0.5 * reflected, rod + reflected, rod + reflected;
  return I;
}

/// Default AM: 1.5 kg base with a 3-DOF planar arm in the base x-z plane
/// (joint axes +y), link lengths 0.15 m, link masses 0.1 kg. All values can
/// be overridden through the run configuration.
inline MultibodyModel default_model() {
  MultibodyModel m;
  m.base_mass = 1.5;
  m.base_inertia = Vec3(0.029, 0.029, 0.048).asDiagonal();
  const double len = 0.15;
  const double lm = 0.1;
  for (int i = 0; i < 3; ++i) {
    LinkSpec l;
    l.mass = lm;
    l.com = Vec3(0.5 * len, 0.0, 0.0);
    l.inertia = link_inertia(lm, len);
    l.axis = Vec3::UnitY();
    l.origin_R = Mat3::Identity();
    l.origin_p = (i == 0) ? Vec3(0.0, 0.0, -0.03) : Vec3(len, 0.0, 0.0);
    m.links.push_back(l);
  }
  m.ee_R = Mat3::Identity();
  m.ee_p = Vec3(len, 0.0, 0.0);
  m.finalize();
  return m;
}

/// Nominal arm configuration used for pre-grasp poses and the desired
/// attitude inertia: first link hanging down, distal links level, end-effector
/// pitch zero. Clear of the stretched-arm singularity.
inline VecX default_nominal_q() {
  VecX q(3);
  q << 1.57, -1.67, 0.10;
  return q;
}

}  // namespace am
