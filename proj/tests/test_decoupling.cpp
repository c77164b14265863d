#include "am/decoupling.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace am {
namespace {

using test::Rng;

TEST(Transform, NullspaceBaseAnnihilatesTaskRows) {
  const MultibodyModel model = default_model();
  Rng rng(31);
  for (int i = 0; i < 20; ++i) {
    const AmState s = rng.state(model);
    const TransformParts parts = build_transform(model, s);
    MatX task(6, model.dof());
    task.topRows(3) = parts.com.J_c;
    task.bottomRows(3).setZero();
    task.block<3, 3>(3, 3).setIdentity();
    EXPECT_LT((parts.Z * task.transpose()).norm(), 1e-12);
  }
}

TEST(Transform, ProjectorReducesToSimplifiedForm) {
  const MultibodyModel model = default_model();
  Rng rng(32);
  for (int i = 0; i < 50; ++i) {
    const AmState s = rng.state(model);
    const TransformParts parts = build_transform(model, s);
    EXPECT_LT(parts.N.leftCols(3).norm(), 1e-10);
    EXPECT_LT((parts.N.rightCols(model.n()) - MatX::Identity(3, 3)).norm(), 1e-10);
  }
}

TEST(Transform, InverseTransposeTopRowsAreBaseRotation) {
  const MultibodyModel model = default_model();
  Rng rng(33);
  for (int i = 0; i < 50; ++i) {
    const AmState s = rng.state(model);
    const DecoupledTerms d = decoupled_terms(model, s);
    EXPECT_TRUE(std::isfinite(condition_number(d.T)));
    MatX expected = MatX::Zero(3, model.dof());
    expected.leftCols(3) = s.R_b;
    EXPECT_LT((d.T_invT.topRows(3) - expected).norm(), 1e-10);
  }
}

TEST(Terms, LambdaIsBlockDiagonalWithPointMassTopBlock) {
  const MultibodyModel model = default_model();
  Rng rng(34);
  const int n = model.n();
  for (int i = 0; i < 100; ++i) {
    const AmState s = rng.state(model);
    const DecoupledTerms d = decoupled_terms(model, s);
    MatX off = d.Lambda;
    off.block<3, 3>(0, 0).setZero();
    off.block<3, 3>(3, 3).setZero();
    off.bottomRightCorner(n, n).setZero();
    EXPECT_LT(off.norm(), 1e-8 * d.Lambda.norm());
    const Mat3 top = d.Lambda.block<3, 3>(0, 0);
    EXPECT_LT((top - model.total_mass * Mat3::Identity()).norm(),
              1e-9 * model.total_mass);
    EXPECT_LT((d.Lambda - d.T_invT * d.M * d.T_inv).norm(), 1e-9 * d.Lambda.norm());
  }
}

TEST(Terms, GravityTransformsToConstantVector) {
  const MultibodyModel model = default_model();
  Rng rng(35);
  for (int i = 0; i < 50; ++i) {
    const AmState s = rng.state(model);
    const DecoupledTerms d = decoupled_terms(model, s);
    VecX expected = VecX::Zero(model.dof());
    expected(2) = model.total_mass * model.gravity;
    EXPECT_LT((d.zeta - expected).norm(), 1e-9);
  }
}

TEST(Terms, CoordinateChangePreservesKineticEnergy) {
  const MultibodyModel model = default_model();
  Rng rng(36);
  for (int i = 0; i < 50; ++i) {
    const AmState s = rng.state(model);
    const DecoupledTerms d = decoupled_terms(model, s);
    const double e_xi = 0.5 * d.xi.dot(d.Lambda * d.xi);
    const double e_v = 0.5 * s.V.dot(d.M * s.V);
    EXPECT_NEAR(e_xi, e_v, 1e-10 * std::max(1.0, e_v));
  }
}

TEST(Terms, LambdaRateMinusTwoGammaIsSkew) {
  const MultibodyModel model = default_model();
  Rng rng(37);
  const double h = 1e-6;
  for (int i = 0; i < 50; ++i) {
    const AmState s = rng.state(model);
    const VecX x = rng.vec(model.dof());
    const DecoupledTerms d = decoupled_terms(model, s);
    const MatX L_plus = decoupled_terms(model, s.flow(h)).Lambda;
    const MatX L_minus = decoupled_terms(model, s.flow(-h)).Lambda;
    const MatX Ldot = (L_plus - L_minus) / (2.0 * h);
    EXPECT_LT(std::abs(x.dot((Ldot - 2.0 * d.Gamma) * x)), 1e-4);
  }
}

TEST(Terms, GammaHasDecoupledStructure) {
  const MultibodyModel model = default_model();
  Rng rng(38);
  const int n = model.n();
  for (int i = 0; i < 50; ++i) {
    const AmState s = rng.state(model);
    const DecoupledTerms d = decoupled_terms(model, s);
    EXPECT_LT(d.Gamma.topRows(3).norm(), 1e-6);
    EXPECT_LT(d.Gamma.leftCols(3).norm(), 1e-6);
    const MatX cross = d.Gamma.block(6, 3, n, 3);
    EXPECT_LT((cross + d.Gamma_wb_rho().transpose()).norm(), 1e-6);
  }
}

TEST(Terms, GammaTimesXiMatchesTransformedBias) {
  // The transformed equation must agree with the original one along any
  // velocity, independent of the factorization.
  const MultibodyModel model = default_model();
  Rng rng(39);
  for (int i = 0; i < 20; ++i) {
    const AmState s = rng.state(model);
    const DecoupledTerms d = decoupled_terms(model, s);
    const double h = 1e-6 / std::max(1.0, s.V.lpNorm<Eigen::Infinity>());
    const MatX T_plus = build_transform(model, s.flow(h)).T;
    const MatX T_minus = build_transform(model, s.flow(-h)).T;
    const MatX Tdot = (T_plus - T_minus) / (2.0 * h);
    const VecX bias = velocity_bias(model, s.q, s.V);
    const VecX expected = d.T_invT * bias - d.Lambda * Tdot * s.V;
    EXPECT_LT((d.Gamma * d.xi - expected).norm(), 1e-8 * std::max(1.0, expected.norm()));
  }
}

TEST(WrenchTransform, ZeroWrenchMapsToZero) {
  const MultibodyModel model = default_model();
  Rng rng(40);
  const AmState s = rng.state(model);
  const DecoupledTerms d = decoupled_terms(model, s);
  const VecX F_xi = transform_wrench(d, d.J_e, Wrench{});
  EXPECT_LT(F_xi.norm(), 1e-15);
}

TEST(WrenchTransform, ComBlockIsWorldFrameForce) {
  const MultibodyModel model = default_model();
  Rng rng(41);
  for (int i = 0; i < 50; ++i) {
    const AmState s = rng.state(model);
    const DecoupledTerms d = decoupled_terms(model, s);
    Wrench F_e;
    F_e.force = rng.vec3(5.0);
    F_e.moment = rng.vec3(2.0);
    const VecX F_xi = transform_wrench(d, d.J_e, F_e);
    EXPECT_LT((F_xi.head<3>() - d.R_e * F_e.force).norm(), 1e-9);
  }
}

TEST(WrenchTransform, PowerIsInvariantUnderCoordinateChange) {
  const MultibodyModel model = default_model();
  Rng rng(42);
  for (int i = 0; i < 50; ++i) {
    const AmState s = rng.state(model);
    const DecoupledTerms d = decoupled_terms(model, s);
    Wrench F_e;
    F_e.force = rng.vec3(5.0);
    F_e.moment = rng.vec3(2.0);
    const VecX F_xi = transform_wrench(d, d.J_e, F_e);
    const double p_xi = d.xi.dot(F_xi);
    const double p_v = s.V.dot(d.J_e.transpose() * F_e.stacked());
    EXPECT_NEAR(p_xi, p_v, 1e-10 * std::max(1.0, std::abs(p_v)));
  }
}

TEST(WrenchTransform, ThrustOnlyInputKeepsMagnitude) {
  // tau = [0,0,f,tau_b,tau_q]: the first block of T^-T tau must be f R_b e3.
  const MultibodyModel model = default_model();
  Rng rng(43);
  for (int i = 0; i < 50; ++i) {
    const AmState s = rng.state(model);
    const DecoupledTerms d = decoupled_terms(model, s);
    VecX tau = rng.vec(model.dof(), 3.0);
    tau(0) = 0.0;
    tau(1) = 0.0;
    const VecX u = d.T_invT * tau;
    EXPECT_LT((u.head<3>() - tau(2) * (s.R_b * Vec3::UnitZ())).norm(), 1e-10);
  }
}

TEST(Task, FrozenStateHasZeroRate) {
  const MultibodyModel model = default_model();
  Rng rng(44);
  AmState s = rng.state(model);
  s.V.setZero();
  const TaskOutput t = task_output(model, s, rot_z(0.7));
  EXPECT_LT(t.ydot.norm(), 1e-15);
}

TEST(Task, RateMatchesFiniteDifferences) {
  const MultibodyModel model = default_model();
  Rng rng(45);
  const double h = 1e-6;
  for (int i = 0; i < 30; ++i) {
    const AmState s = rng.state(model, 1.2, 1.0);
    const Mat3 R_t = rot_z(rng.uniform(-M_PI, M_PI));
    const TaskOutput t = task_output(model, s, R_t);
    const DecoupledTerms d = decoupled_terms(model, s);
    const Vec3 via_xi = t.J * d.xi;
    const Vec3 fd = (detail::task_value(model, s.flow(h), R_t) -
                     detail::task_value(model, s.flow(-h), R_t)) / (2.0 * h);
    EXPECT_LT((via_xi - fd).norm(), 1e-6);
    EXPECT_LT((t.ydot - via_xi).norm(), 1e-10);
  }
}

TEST(Task, InertiaWeightedRightInverse) {
  const MultibodyModel model = default_model();
  Rng rng(46);
  for (int i = 0; i < 30; ++i) {
    const AmState s = rng.state(model, 1.2);
    const TaskOutput t = task_output(model, s, Mat3::Identity());
    const DecoupledTerms d = decoupled_terms(model, s);
    const MatX Li = d.Lambda.ldlt().solve(MatX::Identity(model.dof(), model.dof()));
    const MatX JLJ = t.J * Li * t.J.transpose();
    const MatX J_pinv = Li * t.J.transpose() * guarded_inverse(JLJ, "test");
    EXPECT_LT((t.J * J_pinv - Mat3::Identity()).norm(), 1e-10);
  }
}

}  // namespace
}  // namespace am
