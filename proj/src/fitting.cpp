#include "bodykit/fitting.hpp"

#include <json.hpp>

#include "bodykit/errors.hpp"
#include "bodykit/metrics.hpp"

namespace bodykit {

namespace {

using nlohmann::json;

std::array<Axis, 3> root_order(const BodyModel& model) {
  const DofSpec& root = model.dofs()[0];
  if (root.axes.size() != 3) throw ConfigError("root joint needs three DOFs to carry a global orientation");
  return {root.axes[0], root.axes[1], root.axes[2]};
}

const char* pose_name(StageSelection::Pose p) {
  switch (p) {
    case StageSelection::Pose::None: return "none";
    case StageSelection::Pose::All: return "all";
    case StageSelection::Pose::NonRoot: return "non_root";
    case StageSelection::Pose::Group: return "group";
    case StageSelection::Pose::Joints: return "joints";
  }
  return "all";
}

}  // namespace

Vec3d axis_angle_to_euler(const BodyModel& model, const Vec3d& axis_angle) {
  return matrix_to_euler(root_order(model), axis_angle_to_matrix(axis_angle));
}

FitSchedule FitSchedule::defaults() {
  FitSchedule s;
  FitStage upper{"upper_limb", {}, 200, 1e-2, 1e-8, 10.0};
  upper.free.pose = StageSelection::Pose::Group;
  upper.free.group = "upper_limb";
  FitStage body{"full_body_fixed_root", {}, 400, 1e-2, 1e-8, 10.0};
  body.free.pose = StageSelection::Pose::NonRoot;
  FitStage fine{"fine_tune", {}, 400, 1e-2, 1e-8, 10.0};
  fine.free.pose = StageSelection::Pose::All;
  fine.free.extrinsics = true;
  s.stages = {upper, body, fine};
  return s;
}

void FitSchedule::validate() const {
  if (stages.empty()) throw ConfigError("fit schedule has no stages");
  for (const auto& st : stages) {
    if (st.max_iters < 1) throw ConfigError("stage '" + st.name + "': max_iters must be >= 1");
    if (!(st.tolerance > 0.0)) throw ConfigError("stage '" + st.name + "': tolerance must be > 0");
    if (!(st.step_size > 0.0)) throw ConfigError("stage '" + st.name + "': step_size must be > 0");
    if (!(st.limit_penalty_weight >= 0.0))
      throw ConfigError("stage '" + st.name + "': limit_penalty_weight must be >= 0");
  }
}

FitSchedule FitSchedule::from_json(const std::string& text) {
  FitSchedule s;
  try {
    const json j = json::parse(text);
    s.freeze_global = j.value("freeze_global", true);
    for (const auto& js : j.at("stages")) {
      FitStage st;
      st.name = js.value("name", "stage" + std::to_string(s.stages.size()));
      st.max_iters = js.value("max_iters", st.max_iters);
      st.step_size = js.value("step_size", st.step_size);
      st.tolerance = js.value("tolerance", st.tolerance);
      st.limit_penalty_weight = js.value("limit_penalty_weight", st.limit_penalty_weight);
      const json free = js.value("free", json::object());
      const json pose = free.value("pose", json("all"));
      if (pose.is_string()) {
        const auto p = pose.get<std::string>();
        if (p == "all") st.free.pose = StageSelection::Pose::All;
        else if (p == "none") st.free.pose = StageSelection::Pose::None;
        else if (p == "non_root") st.free.pose = StageSelection::Pose::NonRoot;
        else throw ConfigError("stage '" + st.name + "': unknown pose selection '" + p + "'");
      } else if (pose.is_object() && pose.contains("group")) {
        st.free.pose = StageSelection::Pose::Group;
        st.free.group = pose["group"].get<std::string>();
      } else if (pose.is_array()) {
        st.free.pose = StageSelection::Pose::Joints;
        st.free.joints = pose.get<std::vector<std::size_t>>();
      } else {
        throw ConfigError("stage '" + st.name + "': pose selection must be a string, {\"group\":...} or a joint list");
      }
      st.free.beta = free.value("beta", true);
      st.free.extrinsics = free.value("extrinsics", false);
      st.free.unfreeze_root = free.value("unfreeze_root", false);
      s.stages.push_back(std::move(st));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
  s.validate();
  return s;
}

std::string FitSchedule::to_json() const {
  json j;
  j["freeze_global"] = freeze_global;
  j["stages"] = json::array();
  for (const auto& st : stages) {
    json pose;
    if (st.free.pose == StageSelection::Pose::Group) pose = {{"group", st.free.group}};
    else if (st.free.pose == StageSelection::Pose::Joints) pose = st.free.joints;
    else pose = pose_name(st.free.pose);
    j["stages"].push_back({{"name", st.name},
                           {"max_iters", st.max_iters},
                           {"step_size", st.step_size},
                           {"tolerance", st.tolerance},
                           {"limit_penalty_weight", st.limit_penalty_weight},
                           {"free",
                            {{"pose", pose},
                             {"beta", st.free.beta},
                             {"extrinsics", st.free.extrinsics},
                             {"unfreeze_root", st.free.unfreeze_root}}}});
  }
  return j.dump(2);
}

std::vector<bool> stage_mask(const BodyModel& model, const FitStage& stage, bool freeze_root) {
  const ParamLayout layout(model);
  std::vector<bool> mask(layout.size(), false);
  const auto& sel = stage.free;
  auto free_joint = [&](std::size_t j) {
    if (j >= model.num_joints()) throw ConfigError("stage '" + stage.name + "': joint index out of range");
    for (std::size_t a = 0; a < model.dofs()[j].axes.size(); ++a) mask[model.dof_offset(j) + a] = true;
  };
  switch (sel.pose) {
    case StageSelection::Pose::None:
      break;
    case StageSelection::Pose::All:
      for (std::size_t j = 0; j < model.num_joints(); ++j) free_joint(j);
      break;
    case StageSelection::Pose::NonRoot:
      for (std::size_t j = 1; j < model.num_joints(); ++j) free_joint(j);
      break;
    case StageSelection::Pose::Group:
      for (std::size_t i : model.group_pose_indices(sel.group)) mask[i] = true;
      break;
    case StageSelection::Pose::Joints:
      for (std::size_t j : sel.joints) free_joint(j);
      break;
  }
  if (freeze_root && !sel.unfreeze_root)
    for (std::size_t a = 0; a < model.dofs()[0].axes.size(); ++a) mask[model.dof_offset(0) + a] = false;
  if (sel.beta)
    for (std::size_t b = 0; b < layout.shape_dim; ++b) mask[layout.beta_offset() + b] = true;
  if (sel.extrinsics)
    for (std::size_t c = 0; c < 3; ++c) mask[layout.pi_offset() + c] = true;
  return mask;
}

double mesh_distance(const BodyModel& model, const ParamSet& params, const Mesh& target,
                     double limit_penalty_weight) {
  check_params(model, params);
  if (target.layer != Layer::Skin) throw ShapeError("mesh distance targets the skin layer");
  if (target.vertices.size() != model.num_skin_vertices())
    throw ShapeError("target has " + std::to_string(target.vertices.size()) + " vertices, model has " +
                     std::to_string(model.num_skin_vertices()));
  return mesh_distance_t<double>(model, params.theta.values, params.beta.values, target.vertices,
                                 limit_penalty_weight);
}

Mesh posed_skin(const BodyModel& model, const ParamSet& params) {
  check_params(model, params);
  auto body = kin::pose_body<double>(model, params.theta.values, params.beta.values);
  return Mesh{std::move(body.skin), Layer::Skin};
}

FitResult fit_model_to_mesh(const BodyModel& model, const Mesh& target, const ParamSet& init,
                            const FitSchedule& schedule, const std::optional<Vec3d>& source_global_orient) {
  schedule.validate();
  check_params(model, init);
  if (target.layer != Layer::Skin || target.vertices.size() != model.num_skin_vertices())
    throw ShapeError("fit target must be a skin mesh with the model's vertex count");

  const ParamLayout layout(model);
  std::vector<double> x = layout.flatten(init);
  bool freeze_root = false;
  if (source_global_orient) {
    const Vec3d euler = axis_angle_to_euler(model, *source_global_orient);
    for (int a = 0; a < 3; ++a) x[model.dof_offset(0) + static_cast<std::size_t>(a)] = euler[a];
    freeze_root = schedule.freeze_global;
  }

  FitResult out;
  for (const FitStage& stage : schedule.stages) {
    const double penalty = stage.limit_penalty_weight;
    const auto objective = make_objective([&](auto params) {
      using T = typename decltype(params)::value_type;
      return mesh_distance_t<T>(model, layout.theta(params), layout.beta(params), target.vertices, penalty);
    });
    const auto mask = stage_mask(model, stage, freeze_root);
    MinimizeResult r = minimize(objective, x, stage.settings(), mask);
    x = std::move(r.x);
    StageReport rep;
    rep.name = stage.name;
    rep.objective = r.trace.back();
    rep.iterations = r.iterations;
    rep.stop_reason = r.stop_reason;
    rep.pve = pve(posed_skin(model, layout.unflatten(x)), target) / kMetersToMillimeters;
    out.stages.push_back(std::move(rep));
  }
  out.params = layout.unflatten(x);
  out.params.theta = clamp_pose(model, out.params.theta);
  out.pve = pve(posed_skin(model, out.params), target) / kMetersToMillimeters;
  return out;
}

}  // namespace bodykit
