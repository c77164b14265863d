#include "am/world.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace am {
namespace {

ObjectState unit_box() {
  ObjectState o;
  o.mass = 1.0;
  o.half_extents = Vec3(0.1, 0.1, 0.1);
  o.inertia = ObjectState::box_inertia(o.mass, o.half_extents);
  o.p = Vec3(0, 0, 0.5);
  return o;
}

TEST(Contact, NoPenetrationMeansNoForce) {
  ObjectState obj = unit_box();
  std::vector<EeContactInput> ees(1);
  ees[0].tip = obj.p + Vec3(0.2, 0, 0);  // outside the +x face
  std::vector<ContactAnchor> ee_anchors, table_anchors;
  const ContactResult res =
      evaluate_contacts(obj, ContactParams{}, ees, ee_anchors, table_anchors, false);
  EXPECT_FALSE(res.ee_records[0].active);
  EXPECT_LT(res.F_e[0].force.norm(), 1e-15);
  EXPECT_LT(res.object_wrench.force.norm(), 1e-15);
}

TEST(Contact, StaticPenetrationFollowsSpringLaw) {
  ObjectState obj = unit_box();
  ContactParams cp;
  cp.k_n = 5000.0;
  std::vector<EeContactInput> ees(1);
  ees[0].tip = obj.p + Vec3(0.099, 0, 0);  // 1 mm inside the +x face
  std::vector<ContactAnchor> ee_anchors, table_anchors;
  const ContactResult res = evaluate_contacts(obj, cp, ees, ee_anchors, table_anchors, false);
  ASSERT_TRUE(res.ee_records[0].active);
  EXPECT_NEAR(res.ee_records[0].depth, 1e-3, 1e-12);
  EXPECT_NEAR(res.ee_records[0].normal_force, 5.0, 1e-9);
  EXPECT_LT((res.ee_records[0].normal - Vec3::UnitX()).norm(), 1e-12);
}

TEST(Contact, NewtonThirdLawHolds) {
  test::Rng rng(61);
  ObjectState obj = unit_box();
  obj.R = rng.rotation();
  obj.v = rng.vec3(0.3);
  obj.w = rng.vec3(0.3);
  ContactParams cp;
  std::vector<ContactAnchor> ee_anchors, table_anchors;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<EeContactInput> ees(3);
    for (auto& e : ees) {
      e.tip = obj.p + obj.R * rng.vec3(0.099);
      e.tip_vel = rng.vec3(0.2);
      e.R_e = rng.rotation();
    }
    ee_anchors.clear();
    const ContactResult res = evaluate_contacts(obj, cp, ees, ee_anchors, table_anchors, false);
    Vec3 force_on_ees = Vec3::Zero();
    Vec3 torque_about_com = Vec3::Zero();
    for (size_t i = 0; i < ees.size(); ++i) {
      const Vec3 f_world = ees[i].R_e * res.F_e[i].force;
      force_on_ees += f_world;
      torque_about_com += (ees[i].tip - obj.p).cross(f_world);
    }
    EXPECT_LT((force_on_ees + res.object_wrench.force).norm(), 1e-12);
    EXPECT_LT((torque_about_com + res.object_wrench.torque).norm(), 1e-12);
  }
}

TEST(Contact, CoulombConeNeverViolated) {
  test::Rng rng(62);
  ObjectState obj = unit_box();
  ContactParams cp;
  std::vector<ContactAnchor> ee_anchors(1), table_anchors;
  std::vector<EeContactInput> ees(1);
  ees[0].tip = obj.p + Vec3(0.095, 0, 0);
  // Drag the tip along the face and watch the cone.
  for (int k = 0; k < 200; ++k) {
    ees[0].tip += Vec3(0, 1e-4, 2e-5 * std::sin(0.1 * k));
    ees[0].tip_vel = Vec3(0, 0.1, rng.uniform(-0.05, 0.05));
    const ContactResult res = evaluate_contacts(obj, cp, ees, ee_anchors, table_anchors, false);
    ASSERT_TRUE(res.ee_records[0].active);
    EXPECT_LE(res.ee_records[0].tangential_force.norm(),
              cp.mu * res.ee_records[0].normal_force + 1e-9);
  }
}

TEST(Contact, SlidingResetsAnchorToConeSurface) {
  ObjectState obj = unit_box();
  ContactParams cp;
  std::vector<ContactAnchor> ee_anchors(1), table_anchors;
  std::vector<EeContactInput> ees(1);
  ees[0].tip = obj.p + Vec3(0.099, 0, 0);
  evaluate_contacts(obj, cp, ees, ee_anchors, table_anchors, false);
  // Large lateral displacement forces a slip.
  ees[0].tip += Vec3(0, 0.05, 0);
  const ContactResult res = evaluate_contacts(obj, cp, ees, ee_anchors, table_anchors, false);
  EXPECT_FALSE(res.ee_records[0].sticking);
  // After the slip, the anchor spring alone reproduces the cone-surface force.
  const ContactResult res2 = evaluate_contacts(obj, cp, ees, ee_anchors, table_anchors, false);
  EXPECT_NEAR(res2.ee_records[0].tangential_force.norm(),
              cp.mu * res2.ee_records[0].normal_force, 1e-6);
}

TEST(ObjectStep, ZeroWrenchZeroGravityIsConstant) {
  ObjectState obj = unit_box();
  obj.v = Vec3(0.1, 0, -0.05);
  const ObjectState next = object_step(obj, WorldWrench{}, 0.0, 1e-3);
  EXPECT_LT((next.p - (obj.p + 1e-3 * obj.v)).norm(), 1e-15);
  EXPECT_LT((next.v - obj.v).norm(), 1e-15);
}

TEST(ObjectStep, FreeFallMatchesBallistics) {
  ObjectState obj = unit_box();
  obj.p = Vec3(0, 0, 2.0);
  const double g = 9.81;
  const double dt = 1e-4;
  const double t_end = 0.5;
  ObjectState s = obj;
  for (int i = 0; i < static_cast<int>(t_end / dt); ++i) {
    s = object_step(s, WorldWrench{}, g, dt);
  }
  const double drop = obj.p.z() - s.p.z();
  EXPECT_NEAR(drop, 0.5 * g * t_end * t_end, 1e-6);
}

TEST(ObjectStep, TumblingConservesEnergyWithoutForces) {
  ObjectState obj = unit_box();
  obj.inertia = Vec3(0.002, 0.004, 0.006).asDiagonal();
  obj.w = Vec3(2.0, -3.0, 1.0);
  const double e0 = object_kinetic_energy(obj);
  ObjectState s = obj;
  for (int i = 0; i < 20000; ++i) {
    s = object_step(s, WorldWrench{}, 0.0, 1e-4);
  }
  EXPECT_NEAR(object_kinetic_energy(s), e0, 1e-6 * e0);
  EXPECT_LT(rotation_defect(s.R), 1e-9);
}

TEST(Table, RestingObjectCarriesItsWeight) {
  ObjectState obj = unit_box();
  obj.p = Vec3(0, 0, 0.0995);  // just touching
  ContactParams cp;
  std::vector<ContactAnchor> ee_anchors, table_anchors;
  std::vector<EeContactInput> ees;
  ObjectState s = obj;
  ContactResult res;
  for (int i = 0; i < 20000; ++i) {
    res = evaluate_contacts(s, cp, ees, ee_anchors, table_anchors, true);
    s = object_step(s, res.object_wrench, 9.81, 1e-4);
  }
  EXPECT_NEAR(res.object_wrench.force.z(), s.mass * 9.81, 0.01 * s.mass * 9.81);
  EXPECT_LT(s.v.norm(), 1e-4);
}

TEST(Grasp, TwoPinnedTipsHoldTheObjectByFriction) {
  // Object squeezed between two stationary tips; after settling, each contact
  // carries half the weight in friction.
  ObjectState obj = unit_box();
  obj.p = Vec3(0, 0, 0.5);
  ContactParams cp;
  std::vector<ContactAnchor> ee_anchors, table_anchors;
  std::vector<EeContactInput> ees(2);
  ees[0].tip = obj.p + Vec3(0.098, 0, 0);
  ees[0].R_e = Mat3::Identity();
  ees[1].tip = obj.p + Vec3(-0.098, 0, 0);
  ees[1].R_e = Mat3::Identity();
  ObjectState s = obj;
  ContactResult res;
  for (int i = 0; i < 40000; ++i) {
    res = evaluate_contacts(s, cp, ees, ee_anchors, table_anchors, false);
    s = object_step(s, res.object_wrench, 9.81, 1e-4);
  }
  ASSERT_TRUE(res.ee_records[0].active);
  ASSERT_TRUE(res.ee_records[1].active);
  EXPECT_LT(s.v.norm(), 1e-3);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(res.ee_records[i].tangential_force.z(), -0.5 * s.mass * 9.81, 0.05);
    EXPECT_LE(res.ee_records[i].tangential_force.norm(),
              cp.mu * res.ee_records[i].normal_force + 1e-9);
  }
}

TEST(Energy, ContactNeverCreatesEnergy) {
  // Drop the object onto the table and verify the contact work on the body
  // never exceeds the energy released by the penalty springs.
  ObjectState obj = unit_box();
  obj.p = Vec3(0.01, -0.02, 0.15);
  obj.w = Vec3(0.5, 0.2, -0.1);
  ContactParams cp;
  std::vector<ContactAnchor> ee_anchors, table_anchors;
  std::vector<EeContactInput> ees;
  ObjectState s = obj;
  const double dt = 1e-4;
  double work = 0.0;      // cumulative contact work on the object
  double spring0 = 0.0;   // initial stored penalty energy (zero: starts free)
  bool first = true;
  for (int i = 0; i < 30000; ++i) {
    const ContactResult res = evaluate_contacts(s, cp, ees, ee_anchors, table_anchors, true);
    if (first) {
      spring0 = res.spring_energy;
      first = false;
    }
    EXPECT_LE(work, spring0 - res.spring_energy + 2e-6)
        << "contact created energy at step " << i;
    const ObjectState next = object_step(s, res.object_wrench, 9.81, dt);
    // Exact ZOH work for translation, trapezoid for rotation.
    work += res.object_wrench.force.dot(next.p - s.p) +
            0.5 * dt * res.object_wrench.torque.dot(s.w + next.w);
    s = next;
  }
}

}  // namespace
}  // namespace am
