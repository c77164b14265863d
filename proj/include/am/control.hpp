#pragma once

#include "am/decoupling.hpp"
#include "am/dynamics.hpp"
#include "am/math.hpp"
#include "am/model.hpp"
#include "am/state.hpp"

#include <optional>
#include <string>
#include <vector>

namespace am {

class DegenerateThrustError : public std::runtime_error {
 public:
  explicit DegenerateThrustError(const std::string& what) : std::runtime_error(what) {}
};

class SingularityError : public std::runtime_error {
 public:
  explicit SingularityError(const std::string& what) : std::runtime_error(what) {}
};

/// All controller gains. Every matrix is checked SPD at load time.
struct ControlGains {
  Mat3 K_t = Mat3::Zero();
  Mat3 D_t = Mat3::Zero();
  double k_R = 0.0;
  double k_w = 0.0;
  Mat3 Lambda_wb_d = Mat3::Identity();
  MatX K_y;
  MatX D_y;
  Vec3 b1d = Vec3::UnitX();
  bool compensate_forces = true;
  double lambda_min_Dy = 0.0;

  /// Slew limit on the commanded attitude and clamp on its differenced
  /// acceleration. The raw desired attitude is discontinuous wherever the
  /// measured wrench steps (contact onset); the command tracks it at a
  /// bounded rate so the rate feedforward stays consistent with the command.
  double w_bd_max = 2.0;      // rad/s
  double wdot_bd_max = 30.0;  // rad/s^2

  /// First-order low-pass on the measured wrench entering the compensation
  /// terms of the CoM and attitude laws. Contact onset is a force step; the
  /// desired attitude must not step with it. Zero disables the filter.
  double force_filter_tau = 0.05;  // s

  void validate(int n) {
    auto check_spd = [](const MatX& A, const char* what) {
      if ((A - A.transpose()).norm() > 1e-10 * (1.0 + A.norm())) {
        throw std::invalid_argument(std::string("gains: ") + what + " not symmetric");
      }
      Eigen::SelfAdjointEigenSolver<MatX> es(A);
      if (es.eigenvalues().minCoeff() <= 0.0) {
        throw std::invalid_argument(std::string("gains: ") + what + " not positive definite");
      }
    };
    check_spd(K_t, "K_t");
    check_spd(D_t, "D_t");
    check_spd(Lambda_wb_d, "Lambda_wb_d");
    if (K_y.rows() != n || K_y.cols() != n || D_y.rows() != n || D_y.cols() != n) {
      throw std::invalid_argument("gains: task gain dimension mismatch");
    }
    check_spd(K_y, "K_y");
    check_spd(D_y, "D_y");
    if (k_R <= 0.0 || k_w <= 0.0) {
      throw std::invalid_argument("gains: attitude gains must be positive");
    }
    if (std::abs(b1d.norm() - 1.0) > 1e-9) {
      throw std::invalid_argument("gains: heading direction must be unit length");
    }
    Eigen::SelfAdjointEigenSolver<MatX> es(D_y);
    lambda_min_Dy = es.eigenvalues().minCoeff();
  }
};

/// Default gain set for the default model, sized from the total mass and the
/// nominal-configuration rotational inertia.
inline ControlGains default_gains(const MultibodyModel& model, const VecX& nominal_q) {
  ControlGains g;
  const double m = model.total_mass;
  g.K_t = 16.0 * m * Mat3::Identity();
  g.D_t = 8.0 * m * Mat3::Identity();
  g.k_R = 8.0;
  g.k_w = 2.5;
  AmState nominal = AmState::rest(model);
  nominal.q = nominal_q;
  g.Lambda_wb_d = decoupled_terms(model, nominal).Lambda_wb();
  // Pitch channel sized to the arm's small apparent inertia so the damping
  // rate stays inside the 1 kHz zero-order-hold stability margin.
  g.K_y = Vec3(200.0, 200.0, 1.5).asDiagonal();
  g.D_y = Vec3(40.0, 40.0, 0.095).asDiagonal();
  g.validate(model.n());
  return g;
}

/// Twice-differentiable reference for the CoM and the task variable at one
/// control instant.
struct Setpoint {
  Vec3 r_c_d = Vec3::Zero();
  Vec3 rdot_c_d = Vec3::Zero();
  Vec3 rddot_c_d = Vec3::Zero();
  VecX y_d;
  VecX ydot_d;
  VecX yddot_d;
};

/// Controller output plus the diagnostics the monitors and telemetry consume.
struct ControlOutput {
  double u1 = 0.0;
  Vec3 u2 = Vec3::Zero();
  VecX u3;
  VecX tau;
  Vec3 f_d = Vec3::Zero();
  Mat3 R_b_d = Mat3::Identity();

  Vec3 e_R = Vec3::Zero();
  Vec3 e_w = Vec3::Zero();
  Vec3 r_c_err = Vec3::Zero();
  Vec3 rdot_c_err = Vec3::Zero();
  VecX y;
  VecX y_err;
  VecX ydot;
  VecX ydot_err;
  VecX F_xi;
  VecX F_y;
  MatX Lambda_y;
  double attitude_trace = 0.0;  // tr(I - R_bd^T R_b)
  Wrench F_e;

  bool fault = false;
  std::string fault_reason;
  std::vector<std::string> warnings;
};

inline double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

/// CoM control: desired force and its projection onto the base z-axis.
/// With compensate_forces off, the measured force drops out of f_d.
inline std::pair<Vec3, double> com_control(const ControlGains& gains,
                                           const Setpoint& sp, const AmState& s,
                                           const DecoupledTerms& terms,
                                           const Vec3& F_rc, double total_mass,
                                           double gravity) {
  const Vec3 r_err = terms.com.r_c - sp.r_c_d;
  const Vec3 rdot_err = Vec3(terms.rdot_c()) - sp.rdot_c_d;
  Vec3 f_d = total_mass * sp.rddot_c_d + total_mass * gravity * Vec3::UnitZ() -
             gains.K_t * r_err - gains.D_t * rdot_err;
  if (gains.compensate_forces) {
    f_d -= F_rc;
  }
  if (f_d.norm() < 1e-6) {
    throw DegenerateThrustError("com_control: desired force vanished");
  }
  return {f_d, f_d.dot(s.R_b * Vec3::UnitZ())};
}

/// Desired base attitude from the desired force and the heading direction.
inline Mat3 desired_attitude(const Vec3& f_d, const Vec3& b1d) {
  const double fn = f_d.norm();
  if (fn < 1e-6) {
    throw DegenerateThrustError("desired_attitude: |f_d| ~ 0");
  }
  const Vec3 b3 = f_d / fn;
  const Vec3 c = b3.cross(b1d);
  if (c.norm() < 1e-6) {
    throw DegenerateThrustError("desired_attitude: thrust parallel to heading");
  }
  const Vec3 b2 = c / c.norm();
  Mat3 R;
  R.col(0) = b2.cross(b3);
  R.col(1) = b2;
  R.col(2) = b3;
  return R;
}

struct AttitudeErrors {
  Vec3 e_R = Vec3::Zero();
  Vec3 e_w = Vec3::Zero();
  Vec3 w_bd = Vec3::Zero();  // desired rate transported into the body frame
};

inline AttitudeErrors attitude_errors(const Mat3& R_b, const Vec3& w_b,
                                      const Mat3& R_bd, const Vec3& w_d_desired_frame) {
  AttitudeErrors e;
  e.e_R = 0.5 * vee(R_bd.transpose() * R_b - R_b.transpose() * R_bd);
  e.w_bd = R_b.transpose() * R_bd * w_d_desired_frame;
  e.e_w = w_b - e.w_bd;
  return e;
}

/// Geometric attitude torque with Coriolis feedforward and optional force
/// compensation.
inline Vec3 attitude_control(const ControlGains& gains, const DecoupledTerms& terms,
                             const AttitudeErrors& err, const Vec3& wdot_bd,
                             const Vec3& F_wb) {
  const Mat3 Lwb = terms.Lambda_wb();
  Vec3 u2 = Lwb * (wdot_bd - gains.Lambda_wb_d.ldlt().solve(
                                 gains.k_R * err.e_R + gains.k_w * err.e_w));
  u2 += terms.Gamma_wb() * Vec3(terms.w_b());
  u2 += terms.Gamma_wb_rho() * terms.rho();
  if (gains.compensate_forces) {
    u2 -= F_wb;
  }
  return u2;
}

struct ImpedanceResult {
  VecX u3;
  MatX Lambda_y;
  MatX Jbar;  // (J^{Lambda+})^T
  VecX F_y;
};

/// End-effector impedance input: solves for u3 so the closed task loop is
/// Lambda_y yddot_err + D_y ydot_err + K_y y_err = F_y.
inline ImpedanceResult impedance_control(const ControlGains& gains, const Setpoint& sp,
                                         const AmState& s, const DecoupledTerms& terms,
                                         const TaskOutput& task, const VecX& F_xi,
                                         double u1, const Vec3& u2, double total_mass,
                                         double gravity) {
  const int n = terms.n;
  const MatX Lambda_inv =
      terms.Lambda.ldlt().solve(MatX::Identity(terms.Lambda.rows(), terms.Lambda.cols()));
  const MatX JLJ = task.J * Lambda_inv * task.J.transpose();
  const MatX Lambda_y = guarded_inverse(JLJ, "impedance: J Lambda^-1 J^T");
  const MatX Jbar = Lambda_y * task.J * Lambda_inv;  // (J^{Lambda+})^T, n x (n+6)

  const MatX J3 = Jbar.rightCols(n);
  const double c = condition_number(J3);
  if (!(c < kCondWarn)) {
    throw SingularityError("impedance: arm near singular configuration, cond(J3) = " +
                           std::to_string(c));
  }

  VecX y_err = task.y - sp.y_d;
  y_err(2) = wrap_angle(y_err(2));
  const VecX ydot_err = task.ydot - sp.ydot_d;

  const Vec3 thrust_net = u1 * (s.R_b * Vec3::UnitZ()) -
                          total_mass * gravity * Vec3::UnitZ();
  const Vec3 wb_net = u2 - terms.Gamma_wb() * Vec3(terms.w_b()) -
                      terms.Gamma_wb_rho() * terms.rho();
  const VecX drift = task.Jdot * terms.xi - sp.yddot_d;

  ImpedanceResult res;
  res.Lambda_y = Lambda_y;
  res.Jbar = Jbar;
  res.F_y = Jbar * F_xi;
  const VecX rhs = Jbar.leftCols(3) * thrust_net + Jbar.middleCols(3, 3) * wb_net +
                   Lambda_y * drift + gains.D_y * ydot_err + gains.K_y * y_err;
  res.u3 = -J3.fullPivLu().solve(rhs);
  res.u3 += terms.Gamma_rho() * terms.rho();
  res.u3 -= terms.Gamma_wb_rho().transpose() * Vec3(terms.w_b());
  return res;
}

/// Maps the transformed inputs back to the actuator space: tau = T^T u with
/// u = [u1 R_b e3; u2; u3]. The first two components vanish structurally and
/// the third is the total thrust.
inline VecX to_actuator_space(const DecoupledTerms& terms, double u1, const Vec3& u2,
                              const VecX& u3, const Mat3& R_b) {
  VecX u(terms.T.rows());
  u.segment<3>(0) = u1 * (R_b * Vec3::UnitZ());
  u.segment<3>(3) = u2;
  u.segment(6, u3.size()) = u3;
  return terms.T.transpose() * u;
}

/// Decentralized controller for one AM. Holds the per-AM memory needed to
/// finite-difference the desired attitude rates across ticks, and the last
/// valid command for fault fallback. Only this AM's state and its own
/// measured wrench ever enter control_step.
class Controller {
 public:
  Controller(MultibodyModel model, ControlGains gains, Mat3 task_frame, double dt)
      : model_(std::move(model)),
        gains_(std::move(gains)),
        R_t_(std::move(task_frame)),
        dt_(dt) {
    gains_.validate(model_.n());
    tau_prev_ = VecX::Zero(model_.dof());
  }

  const ControlGains& gains() const { return gains_; }
  const Mat3& task_frame() const { return R_t_; }
  const MultibodyModel& model() const { return model_; }

  void reset() {
    has_prev_ = false;
    tau_prev_.setZero();
    F_filt_ = Wrench{};
  }

  ControlOutput control_step(const Setpoint& sp, const AmState& s, const Wrench& F_e) {
    ControlOutput out;
    out.F_e = F_e;
    out.u3 = VecX::Zero(model_.n());
    out.tau = tau_prev_;
    try {
      const DecoupledTerms terms = decoupled_terms(model_, s);
      const TaskOutput task = task_output(model_, s, R_t_);
      const VecX F_xi = transform_wrench(terms, terms.J_e, F_e);

      if (gains_.force_filter_tau > 0.0) {
        const double alpha = 1.0 - std::exp(-dt_ / gains_.force_filter_tau);
        F_filt_.force += alpha * (F_e.force - F_filt_.force);
        F_filt_.moment += alpha * (F_e.moment - F_filt_.moment);
      } else {
        F_filt_ = F_e;
      }
      const VecX F_xi_comp = transform_wrench(terms, terms.J_e, F_filt_);

      auto [f_d, u1] = com_control(gains_, sp, s, terms, F_xi_comp.head<3>(),
                                   model_.total_mass, model_.gravity);
      const Mat3 R_bd_raw = desired_attitude(f_d, gains_.b1d);

      Mat3 R_bd = R_bd_raw;
      Vec3 w_d_frame = Vec3::Zero();
      if (has_prev_) {
        Vec3 step = so3_log(R_bd_prev_.transpose() * R_bd_raw);
        const double max_step = gains_.w_bd_max * dt_;
        if (step.norm() > max_step) {
          step *= max_step / step.norm();
          R_bd = R_bd_prev_ * so3_exp(step);
        }
        w_d_frame = step / dt_;
      }
      const AttitudeErrors err = attitude_errors(s.R_b, s.w_b(), R_bd, w_d_frame);
      Vec3 wdot_bd = Vec3::Zero();
      if (has_prev_) {
        wdot_bd = (err.w_bd - w_bd_prev_) / dt_;
        if (wdot_bd.norm() > gains_.wdot_bd_max) {
          wdot_bd *= gains_.wdot_bd_max / wdot_bd.norm();
        }
      }
      const Vec3 u2 = attitude_control(gains_, terms, err, wdot_bd, F_xi_comp.segment<3>(3));
      ImpedanceResult imp = impedance_control(gains_, sp, s, terms, task, F_xi, u1, u2,
                                              model_.total_mass, model_.gravity);

      out.u1 = u1;
      out.u2 = u2;
      out.u3 = imp.u3;
      out.f_d = f_d;
      out.R_b_d = R_bd;
      out.tau = to_actuator_space(terms, u1, u2, imp.u3, s.R_b);
      out.e_R = err.e_R;
      out.e_w = err.e_w;
      out.r_c_err = terms.com.r_c - sp.r_c_d;
      out.rdot_c_err = Vec3(terms.rdot_c()) - sp.rdot_c_d;
      out.y = task.y;
      out.ydot = task.ydot;
      out.y_err = task.y - sp.y_d;
      out.y_err(2) = wrap_angle(out.y_err(2));
      out.ydot_err = task.ydot - sp.ydot_d;
      out.F_xi = F_xi;
      out.F_y = imp.F_y;
      out.Lambda_y = imp.Lambda_y;
      out.attitude_trace = (Mat3::Identity() - R_bd.transpose() * s.R_b).trace();

      for (int i = 0; i < model_.n(); ++i) {
        if (std::abs(s.q(i)) > model_.joint_limit) {
          out.warnings.push_back("joint " + std::to_string(i) + " beyond soft limit");
        }
      }

      R_bd_prev_ = R_bd;
      w_bd_prev_ = err.w_bd;
      has_prev_ = true;
      tau_prev_ = out.tau;
    } catch (const DegenerateThrustError& e) {
      out.fault = true;
      out.fault_reason = e.what();
      out.tau = tau_prev_;
    } catch (const SingularityError& e) {
      out.fault = true;
      out.fault_reason = e.what();
      out.tau = tau_prev_;
    }
    return out;
  }

 private:
  MultibodyModel model_;
  ControlGains gains_;
  Mat3 R_t_;
  double dt_;
  bool has_prev_ = false;
  Mat3 R_bd_prev_ = Mat3::Identity();
  Vec3 w_bd_prev_ = Vec3::Zero();
  VecX tau_prev_;
  Wrench F_filt_;
};

/// Storage function of the runtime passivity monitor (cross terms set to
/// zero): CoM + attitude + task error energies at one control instant.
inline double storage_energy(const ControlGains& gains, const ControlOutput& out,
                             double total_mass) {
  double s = 0.0;
  s += 0.5 * total_mass * out.rdot_c_err.squaredNorm();
  s += 0.5 * out.r_c_err.dot(gains.K_t * out.r_c_err);
  s += 0.5 * out.e_w.dot(gains.Lambda_wb_d * out.e_w);
  s += 0.5 * gains.k_R * out.attitude_trace;
  s += 0.5 * out.ydot_err.dot(out.Lambda_y * out.ydot_err);
  s += 0.5 * out.y_err.dot(gains.K_y * out.y_err);
  return s;
}

}  // namespace am
