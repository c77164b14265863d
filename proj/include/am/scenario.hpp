#pragma once

#include "am/control.hpp"
#include "am/math.hpp"
#include "am/model.hpp"
#include "am/world.hpp"

#include <optional>
#include <string>
#include <vector>

namespace am {

/// Piecewise polynomial reference: an initial hold, then ordered move segments
/// with zero boundary velocity/acceleration; holds between and after moves.
class PiecewiseSmooth {
 public:
  explicit PiecewiseSmooth(VecX initial = VecX()) : initial_(std::move(initial)) {}

  void set_initial(const VecX& v) { initial_ = v; }

  void move_to(double t0, double t1, const VecX& target) {
    SmoothSegment seg;
    seg.t0 = t0;
    seg.t1 = t1;
    seg.start = segs_.empty() ? initial_ : segs_.back().end;
    seg.end = target;
    if (!segs_.empty() && t0 < segs_.back().t1) {
      throw std::invalid_argument("piecewise reference: overlapping segments");
    }
    segs_.push_back(seg);
  }

  void eval(double t, VecX& p, VecX& v, VecX& a) const {
    v = VecX::Zero(initial_.size());
    a = VecX::Zero(initial_.size());
    p = initial_;
    for (const auto& seg : segs_) {
      if (t < seg.t0) {
        return;
      }
      if (t <= seg.t1) {
        seg.eval(t, p, v, a);
        return;
      }
      p = seg.end;
    }
  }

  /// True when every segment has finished or none covers t (zero rate).
  bool stationary_at(double t) const {
    for (const auto& seg : segs_) {
      if (t > seg.t0 && t < seg.t1) return false;
    }
    return true;
  }

 private:
  VecX initial_;
  std::vector<SmoothSegment> segs_;
};

struct Phase {
  std::string name;
  double t_start = 0.0;
  double t_end = 0.0;
};

/// Per-AM scenario plan: task frame, heading, initial state and the two
/// reference channels (desired base position; task setpoint).
struct AmPlan {
  Mat3 R_t = Mat3::Identity();
  Vec3 b1d = Vec3::UnitX();
  AmState initial;
  Vec3 com_offset = Vec3::Zero();  // CoM setpoint = base ref + this offset
  PiecewiseSmooth base_ref;       // desired base position (3)
  PiecewiseSmooth task_ref;       // desired task value (3)

  Setpoint setpoint(double t) const {
    Setpoint sp;
    VecX p, v, a;
    base_ref.eval(t, p, v, a);
    sp.r_c_d = Vec3(p) + com_offset;
    sp.rdot_c_d = Vec3(v);
    sp.rddot_c_d = Vec3(a);
    task_ref.eval(t, sp.y_d, sp.ydot_d, sp.yddot_d);
    return sp;
  }
};

struct Window {
  double t0 = 0.0;
  double t1 = 0.0;
  bool contains(double t) const { return t >= t0 && t <= t1; }
};

/// A full scripted run: phases, per-AM plans, the object, and the time
/// windows in which each theorem monitor's hypotheses hold (frozen task
/// setpoint for the passivity bound; free flight for the storage decrease).
struct Scenario {
  std::string name;
  double duration = 5.0;
  std::vector<Phase> phases;
  std::vector<AmPlan> ams;
  std::optional<ObjectState> object;
  bool table = true;

  std::vector<Window> passivity_windows;
  std::vector<Window> storage_windows;
  std::optional<Window> hover_window;
  double lift_target_z = 0.0;

  bool in_passivity_window(double t) const {
    for (const auto& w : passivity_windows) {
      if (w.contains(t)) return true;
    }
    return false;
  }
  bool in_storage_window(double t) const {
    for (const auto& w : storage_windows) {
      if (w.contains(t)) return true;
    }
    return false;
  }

  void validate() const {
    double prev_end = 0.0;
    for (size_t i = 0; i < phases.size(); ++i) {
      if (i == 0 && phases[i].t_start != 0.0) {
        throw std::invalid_argument("scenario: phases must start at t = 0");
      }
      if (i > 0 && phases[i].t_start != prev_end) {
        throw std::invalid_argument("scenario: phases must be contiguous");
      }
      if (phases[i].t_end <= phases[i].t_start) {
        throw std::invalid_argument("scenario: empty phase " + phases[i].name);
      }
      prev_end = phases[i].t_end;
    }
  }
};

/// Geometry/timing knobs for the shipped scenario family.
struct ScenarioSpec {
  std::string name = "two_am_grasp";
  int n_ams = 2;
  double ring_radius = 0.8;
  double standoff = 0.03;
  double grasp_depth = 0.04;
  double lift_height = 0.3;
  double approach_start = 0.2;
  double approach_end = 4.2;
  double grasp_start = 5.0;
  double grasp_move_duration = 1.0;
  double lift_start = 10.0;
  double lift_duration = 3.0;
  double hover_start = 13.0;
  double duration = 20.0;
  double settle_margin = 0.5;
  double object_mass = 1.0;
  Vec3 object_half_extents = Vec3(0.1, 0.1, 0.1);
  Mat3 object_inertia = Mat3::Zero();  // zero means derive from the box
  double contact_k_n = 5000.0;         // used to pre-settle the object on the table
};

namespace detail {

struct GraspSlot {
  Vec3 normal;       // outward face normal, world
  Vec3 contact;      // contact point on the face, world
  Mat3 R_t;          // task frame (yaw only, x toward the object)
};

/// Distributes n AMs over the four side faces of the box, spreading multiple
/// contacts along a face so they do not coincide.
inline std::vector<GraspSlot> grasp_slots(int n_ams, const Vec3& obj_center,
                                          const Vec3& half) {
  const Vec3 normals[4] = {Vec3::UnitX(), -Vec3::UnitX(), Vec3::UnitY(), -Vec3::UnitY()};
  std::vector<int> counts(4, n_ams / 4);
  for (int i = 0; i < n_ams % 4; ++i) counts[i] += 1;
  std::vector<GraspSlot> slots;
  for (int f = 0; f < 4; ++f) {
    const Vec3 n = normals[f];
    const Vec3 lateral = Vec3::UnitZ().cross(n);
    const double face_half = (f < 2) ? half.y() : half.x();
    const double depth_half = (f < 2) ? half.x() : half.y();
    for (int k = 0; k < counts[f]; ++k) {
      const double frac =
          (counts[f] == 1) ? 0.0
                           : -0.6 + 1.2 * static_cast<double>(k) / (counts[f] - 1);
      GraspSlot s;
      s.normal = n;
      s.contact = obj_center + depth_half * n + frac * face_half * lateral;
      const Vec3 x_t = -n;
      const double yaw = std::atan2(x_t.y(), x_t.x());
      s.R_t = rot_z(yaw);
      slots.push_back(s);
    }
  }
  return slots;
}

}  // namespace detail

/// Builds the shipped scenarios. `free_flight` is the grasp approach without
/// an object; the grasp scenarios run approach / grasp / lift / hover with
/// task setpoints frozen outside the commanded moves, so the passivity
/// monitor windows sit where the underlying assumptions hold.
inline Scenario build_scenario(const MultibodyModel& model, const VecX& nominal_q,
                               const ScenarioSpec& spec) {
  const bool free_flight = (spec.name == "free_flight");
  Scenario sc;
  sc.name = spec.name;

  // End-effector offset from the base at the nominal arm configuration.
  AmState nominal = AmState::rest(model);
  nominal.q = nominal_q;
  const Pose ee_nom = ee_pose(model, nominal);
  const Vec3 arm_offset = ee_nom.p;  // base frame == world at nominal
  const Vec3 r_bc_nominal = com_quantities(model, nominal).r_bc;

  ObjectState obj;
  obj.mass = spec.object_mass;
  obj.half_extents = spec.object_half_extents;
  obj.inertia = (spec.object_inertia.norm() > 0.0)
                    ? spec.object_inertia
                    : ObjectState::box_inertia(obj.mass, obj.half_extents);
  // Resting on the table, pre-settled into the penalty springs.
  obj.p = Vec3(0.0, 0.0,
               obj.half_extents.z() - obj.mass * model.gravity / (4.0 * spec.contact_k_n));

  const auto slots = detail::grasp_slots(spec.n_ams, obj.p, obj.half_extents);

  for (const auto& slot : slots) {
    AmPlan plan;
    plan.R_t = slot.R_t;
    plan.b1d = -slot.normal;
    plan.com_offset = slot.R_t * r_bc_nominal;

    const Vec3 ee_world_offset = slot.R_t * arm_offset;
    const Vec3 pregrasp_ee = slot.contact + spec.standoff * slot.normal;
    const Vec3 grasp_ee = slot.contact - spec.grasp_depth * slot.normal;
    const Vec3 pregrasp_base = pregrasp_ee - ee_world_offset;
    Vec3 start_base = slot.contact + spec.ring_radius * slot.normal - ee_world_offset;
    start_base.z() = pregrasp_base.z();

    plan.initial.p_b = start_base;
    plan.initial.R_b = slot.R_t;
    plan.initial.q = nominal_q;
    plan.initial.V = VecX::Zero(model.dof());

    auto task_of_ee = [&](const Vec3& ee) {
      return Vec3(slot.R_t.col(0).dot(ee), ee.z(), 0.0);
    };

    plan.base_ref.set_initial(start_base);
    plan.base_ref.move_to(spec.approach_start, spec.approach_end, pregrasp_base);
    plan.task_ref.set_initial(task_of_ee(start_base + ee_world_offset));
    plan.task_ref.move_to(spec.approach_start, spec.approach_end, task_of_ee(pregrasp_ee));

    if (!free_flight) {
      plan.task_ref.move_to(spec.grasp_start, spec.grasp_start + spec.grasp_move_duration,
                            task_of_ee(grasp_ee));
      Vec3 lifted_base = pregrasp_base;
      lifted_base.z() += spec.lift_height;
      plan.base_ref.move_to(spec.lift_start, spec.lift_start + spec.lift_duration,
                            lifted_base);
      Vec3 lifted_ee = grasp_ee;
      lifted_ee.z() += spec.lift_height;
      plan.task_ref.move_to(spec.lift_start, spec.lift_start + spec.lift_duration,
                            task_of_ee(lifted_ee));
    }
    sc.ams.push_back(std::move(plan));
  }

  if (free_flight) {
    sc.duration = std::max(5.0, spec.approach_end + 0.8);
    sc.phases = {{"approach", 0.0, sc.duration}};
    sc.storage_windows = {{0.0, sc.duration}};
    sc.object.reset();
    sc.table = false;
  } else {
    sc.duration = spec.duration;
    sc.phases = {{"approach", 0.0, spec.grasp_start},
                 {"grasp", spec.grasp_start, spec.lift_start},
                 {"lift", spec.lift_start, spec.hover_start},
                 {"hover", spec.hover_start, spec.duration}};
    sc.object = obj;
    sc.table = true;
    sc.storage_windows = {{0.0, spec.grasp_start - 1e-9}};
    sc.passivity_windows = {
        {spec.grasp_start + spec.grasp_move_duration + spec.settle_margin, spec.lift_start},
        {spec.hover_start + spec.settle_margin, spec.duration}};
    sc.hover_window = Window{spec.hover_start, spec.duration};
    sc.lift_target_z = obj.p.z() + spec.lift_height;
  }
  sc.validate();
  return sc;
}

}  // namespace am
