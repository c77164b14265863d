#pragma once

#include "am/control.hpp"
#include "am/scenario.hpp"
#include "am/world.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace am {

/// One RK4 step of a single AM under zero-order-hold inputs: the actuator
/// vector tau and the end-effector body wrench are held constant across the
/// substages. The base rotation is re-projected onto SO(3) afterwards.
inline AmState am_step(const MultibodyModel& model, const AmState& s0,
                       const VecX& tau, const Wrench& F_e, double dt) {
  struct Deriv {
    Vec3 dp;
    Mat3 dR;
    VecX dq;
    VecX dV;
  };
  auto deriv = [&](const AmState& s) {
    Deriv d;
    d.dp = s.R_b * s.v_b();
    d.dR = s.R_b * hat(s.w_b());
    d.dq = s.qdot();
    d.dV = forward_dynamics(model, s, tau, F_e);
    return d;
  };
  auto advance = [&](const AmState& s, const Deriv& d, double h) {
    AmState r = s;
    r.p_b += h * d.dp;
    r.R_b += h * d.dR;
    r.q += h * d.dq;
    r.V += h * d.dV;
    return r;
  };
  const Deriv k1 = deriv(s0);
  const Deriv k2 = deriv(advance(s0, k1, 0.5 * dt));
  const Deriv k3 = deriv(advance(s0, k2, 0.5 * dt));
  const Deriv k4 = deriv(advance(s0, k3, dt));
  AmState out = s0;
  out.p_b += dt / 6.0 * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
  out.R_b += dt / 6.0 * (k1.dR + 2.0 * k2.dR + 2.0 * k3.dR + k4.dR);
  out.q += dt / 6.0 * (k1.dq + 2.0 * k2.dq + 2.0 * k3.dq + k4.dq);
  out.V += dt / 6.0 * (k1.dV + 2.0 * k2.dV + 2.0 * k3.dV + k4.dV);
  out.R_b = project_to_so3(out.R_b);
  return out;
}

inline double am_total_energy(const MultibodyModel& model, const AmState& s) {
  return kinetic_energy(model, s.q, s.V) + potential_energy(model, s);
}

/// Per-step theorem monitors. The passivity residual at step k is the
/// forward difference [S(t_k + dt) - S(t_k)]/dt + lambda_m(D_y) |ydot|^2 -
/// ydot^T F_y, filled in when the next step's storage is known.
struct MonitorRecord {
  double t = 0.0;
  std::vector<double> S_am;
  double S_obj = 0.0;
  double S_tot = 0.0;
  std::vector<double> residual;
  std::vector<double> ydot_sq;
  std::vector<double> yF;
  double ybar_speed = 0.0;
  std::vector<double> r_err_norm;
  std::vector<double> e_R_norm;
  std::vector<double> y_err_norm;
  bool any_fault = false;
  bool in_passivity_window = false;
  bool in_storage_window = false;
};

/// One telemetry sample (decimated to every log_every-th tick).
struct LoggedStep {
  double t = 0.0;
  std::vector<ControlOutput> outputs;
  std::vector<AmState> states;
  std::vector<ContactRecord> contacts;  // active EE contacts this tick
  std::optional<ObjectState> object;
  size_t monitor_index = 0;
};

struct SimParams {
  double dt = 1e-3;
  int log_every = 10;
};

/// Owns all mutable state of a run: N AMs with their decentralized
/// controllers, the object, and the contact bookkeeping. One logical writer;
/// controllers see only their own state and measured wrench.
class Simulation {
 public:
  Simulation(const MultibodyModel& model, const ControlGains& gains,
             const Scenario& scenario, const ContactParams& contact,
             SimParams params)
      : model_(model),
        scenario_(scenario),
        contact_params_(contact),
        params_(params) {
    scenario_.validate();
    for (const auto& plan : scenario_.ams) {
      ControlGains g = gains;
      g.b1d = plan.b1d;
      g.validate(model_.n());
      controllers_.emplace_back(model_, g, plan.R_t, params_.dt);
      states_.push_back(plan.initial);
      states_.back().validate(model_);
    }
    object_ = scenario_.object;
    ee_anchors_.resize(scenario_.ams.size());
    n_steps_ = static_cast<long>(std::llround(scenario_.duration / params_.dt));
  }

  double time() const { return static_cast<double>(step_count_) * params_.dt; }
  bool finished() const { return step_count_ >= n_steps_ || diverged_; }
  bool diverged() const { return diverged_; }
  const std::string& abort_reason() const { return abort_reason_; }
  const std::vector<AmState>& states() const { return states_; }
  const std::optional<ObjectState>& object() const { return object_; }
  const Scenario& scenario() const { return scenario_; }
  const std::vector<MonitorRecord>& monitors() const { return monitors_; }
  const std::vector<LoggedStep>& log() const { return log_; }
  const SimParams& params() const { return params_; }
  const MultibodyModel& model() const { return model_; }
  const Controller& controller(size_t i) const { return controllers_[i]; }
  long fault_ticks() const { return fault_ticks_; }

  void step() {
    const double t = time();
    const size_t n_am = states_.size();

    // 1. Contacts from the current snapshot.
    ContactResult contacts;
    std::vector<Wrench> F_e(n_am);
    if (object_) {
      std::vector<EeContactInput> ees(n_am);
      for (size_t i = 0; i < n_am; ++i) {
        const Pose pe = ee_pose(model_, states_[i]);
        const Vec6 twist = ee_jacobian(model_, states_[i].q) * states_[i].V;
        ees[i].tip = pe.p;
        ees[i].tip_vel = pe.R * twist.head<3>();
        ees[i].R_e = pe.R;
      }
      contacts = evaluate_contacts(*object_, contact_params_, ees, ee_anchors_,
                                   table_anchors_, scenario_.table);
      F_e = contacts.F_e;
    }

    // 2. Decentralized control: each AM sees its own state and wrench only.
    std::vector<ControlOutput> outputs(n_am);
    bool any_fault = false;
    for (size_t i = 0; i < n_am; ++i) {
      const Setpoint sp = scenario_.ams[i].setpoint(t);
      outputs[i] = controllers_[i].control_step(sp, states_[i], F_e[i]);
      if (outputs[i].fault) {
        any_fault = true;
        ++fault_ticks_;
      }
    }

    // 3. Monitors at the pre-step instant.
    record_monitors(t, outputs, any_fault);

    // 4. Telemetry decimation.
    if (step_count_ % params_.log_every == 0) {
      LoggedStep row;
      row.t = t;
      row.outputs = outputs;
      row.states = states_;
      row.object = object_;
      row.monitor_index = monitors_.size() - 1;
      if (object_) {
        for (const auto& rec : contacts.ee_records) {
          if (rec.active) row.contacts.push_back(rec);
        }
      }
      log_.push_back(std::move(row));
    }

    // 5. Integrate, zero-order hold on tau and the wrenches.
    for (size_t i = 0; i < n_am; ++i) {
      states_[i] = am_step(model_, states_[i], outputs[i].tau, F_e[i], params_.dt);
    }
    if (object_) {
      *object_ = object_step(*object_, contacts.object_wrench, model_.gravity,
                             params_.dt);
    }
    ++step_count_;

    for (size_t i = 0; i < n_am; ++i) {
      if (!states_[i].finite()) {
        diverged_ = true;
        abort_reason_ = "AM " + std::to_string(i) + " state non-finite at t = " +
                        std::to_string(time());
      }
    }
    if (object_ && !(all_finite(object_->p) && all_finite(object_->v))) {
      diverged_ = true;
      abort_reason_ = "object state non-finite at t = " + std::to_string(time());
    }
  }

  void run() {
    while (!finished()) {
      step();
    }
  }

 private:
  void record_monitors(double t, const std::vector<ControlOutput>& outputs,
                       bool any_fault) {
    MonitorRecord rec;
    rec.t = t;
    rec.any_fault = any_fault;
    rec.in_passivity_window = scenario_.in_passivity_window(t);
    rec.in_storage_window = scenario_.in_storage_window(t);
    const size_t n_am = outputs.size();
    rec.S_am.resize(n_am);
    rec.residual.assign(n_am, 0.0);
    rec.ydot_sq.resize(n_am);
    rec.yF.resize(n_am);
    rec.r_err_norm.resize(n_am);
    rec.e_R_norm.resize(n_am);
    rec.y_err_norm.resize(n_am);
    double ybar_sq = 0.0;
    for (size_t i = 0; i < n_am; ++i) {
      const ControlOutput& o = outputs[i];
      rec.S_am[i] = o.fault ? (monitors_.empty() ? 0.0 : monitors_.back().S_am[i])
                            : storage_energy(controllers_[i].gains(), o,
                                             model_.total_mass);
      rec.ydot_sq[i] = o.fault ? 0.0 : o.ydot.squaredNorm();
      rec.yF[i] = o.fault ? 0.0 : o.ydot.dot(o.F_y);
      rec.r_err_norm[i] = o.r_c_err.norm();
      rec.e_R_norm[i] = o.e_R.norm();
      rec.y_err_norm[i] = o.fault ? 0.0 : o.y_err.norm();
      ybar_sq += rec.ydot_sq[i];
    }
    rec.ybar_speed = std::sqrt(ybar_sq);
    rec.S_obj = object_ ? object_kinetic_energy(*object_) : 0.0;
    rec.S_tot = rec.S_obj;
    for (double s : rec.S_am) rec.S_tot += s;

    if (!monitors_.empty()) {
      MonitorRecord& prev = monitors_.back();
      const double lam = controllers_.front().gains().lambda_min_Dy;
      for (size_t i = 0; i < n_am; ++i) {
        prev.residual[i] = (rec.S_am[i] - prev.S_am[i]) / params_.dt +
                           lam * prev.ydot_sq[i] - prev.yF[i];
      }
    }
    monitors_.push_back(std::move(rec));
  }

  MultibodyModel model_;
  Scenario scenario_;
  ContactParams contact_params_;
  SimParams params_;
  std::vector<Controller> controllers_;
  std::vector<AmState> states_;
  std::optional<ObjectState> object_;
  std::vector<ContactAnchor> ee_anchors_;
  std::vector<ContactAnchor> table_anchors_;
  std::vector<MonitorRecord> monitors_;
  std::vector<LoggedStep> log_;
  long step_count_ = 0;
  long n_steps_ = 0;
  long fault_ticks_ = 0;
  bool diverged_ = false;
  std::string abort_reason_;
};

/// Pinned monitor thresholds: the discrete shadows of the three theorems.
struct MonitorThresholds {
  double storage_increase = 1e-6;        // max per-step S_AM increase, free flight
  double passivity_tol = 1e-3;           // residual <= tol * (1 + |ydot^T F_y|)
  double hover_speed = 1e-3;             // aggregate task speed in hover
  double hover_speed_deadline = 5.0;     // seconds after hover start
  double integral_margin = 1.1;          // energy budget margin
  double lift_tolerance = 0.05;          // object height at the end [m]
};

struct MonitorReport {
  double max_storage_increase = 0.0;
  bool storage_ok = true;
  double max_passivity_excess = -1.0;
  bool passivity_ok = true;
  double hover_speed_after_deadline = 0.0;
  bool hover_speed_ok = true;
  double hover_speed_integral = 0.0;
  double hover_energy_budget = 0.0;
  bool hover_integral_ok = true;
  double object_final_z = 0.0;
  double lift_target_z = 0.0;
  bool lift_ok = true;
  bool completed = true;
  bool all_ok = true;
};

/// Evaluates the runtime monitors of a finished run against the pinned
/// thresholds. Storage monotonicity is checked per AM inside the free-flight
/// windows; the passivity residual inside the frozen-setpoint windows; the
/// convergence bound over the hover window.
inline MonitorReport evaluate_monitors(const Simulation& sim,
                                       const MonitorThresholds& th = {}) {
  MonitorReport rep;
  const auto& mons = sim.monitors();
  const auto& sc = sim.scenario();
  const double dt = sim.params().dt;
  rep.completed = !sim.diverged();

  for (size_t k = 0; k + 1 < mons.size(); ++k) {
    const auto& a = mons[k];
    const auto& b = mons[k + 1];
    if (a.in_storage_window && b.in_storage_window && !a.any_fault && !b.any_fault) {
      for (size_t i = 0; i < a.S_am.size(); ++i) {
        rep.max_storage_increase =
            std::max(rep.max_storage_increase, b.S_am[i] - a.S_am[i]);
      }
    }
    if (a.in_passivity_window && b.in_passivity_window && !a.any_fault &&
        !b.any_fault) {
      for (size_t i = 0; i < a.S_am.size(); ++i) {
        const double excess =
            a.residual[i] - th.passivity_tol * (1.0 + std::abs(a.yF[i]));
        rep.max_passivity_excess = std::max(rep.max_passivity_excess, excess);
      }
    }
  }
  rep.storage_ok = rep.max_storage_increase <= th.storage_increase;
  rep.passivity_ok = rep.max_passivity_excess <= 0.0;

  if (sc.hover_window) {
    const Window w = *sc.hover_window;
    double S_tot_start = 0.0;
    bool started = false;
    const double deadline = w.t0 + th.hover_speed_deadline;
    for (const auto& m : mons) {
      if (!w.contains(m.t)) continue;
      if (!started) {
        S_tot_start = m.S_tot;
        started = true;
      }
      rep.hover_speed_integral += m.ybar_speed * m.ybar_speed * dt;
      if (m.t >= deadline) {
        rep.hover_speed_after_deadline =
            std::max(rep.hover_speed_after_deadline, m.ybar_speed);
      }
    }
    const double lam =
        sim.controller(0).gains().lambda_min_Dy;
    rep.hover_energy_budget = S_tot_start / lam * th.integral_margin;
    rep.hover_speed_ok = rep.hover_speed_after_deadline < th.hover_speed;
    rep.hover_integral_ok = rep.hover_speed_integral <= rep.hover_energy_budget;
  }

  if (sim.object()) {
    rep.object_final_z = sim.object()->p.z();
    rep.lift_target_z = sc.lift_target_z;
    rep.lift_ok = std::abs(rep.object_final_z - rep.lift_target_z) <= th.lift_tolerance;
  }

  rep.all_ok = rep.completed && rep.storage_ok && rep.passivity_ok &&
               rep.hover_speed_ok && rep.hover_integral_ok && rep.lift_ok;
  return rep;
}

}  // namespace am
