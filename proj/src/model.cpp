#include "dnea/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <json.hpp>

namespace dnea {

using nlohmann::json;

std::string_view to_string(JointKind kind) {
  return kind == JointKind::kRevolute ? "revolute" : "prismatic";
}

JointKind joint_kind_from_string(std::string_view name) {
  if (name == "revolute") return JointKind::kRevolute;
  if (name == "prismatic") return JointKind::kPrismatic;
  throw ModelError("unknown joint kind '" + std::string(name) + "'");
}

Eigen::Vector3d rpy_from_rotation(const Eigen::Matrix3d& r) {
  const double sb = std::clamp(-r(2, 0), -1.0, 1.0);
  const double pitch = std::asin(sb);
  if (std::abs(std::cos(pitch)) < 1e-9) {
    // gimbal lock: only yaw - roll (or yaw + roll) is defined
    return {0.0, pitch, std::atan2(-r(0, 1), r(1, 1))};
  }
  return {std::atan2(r(2, 1), r(2, 2)), pitch, std::atan2(r(1, 0), r(0, 0))};
}

LinkParams<double> inertial_virtual_params(const PhysicalBody& body) {
  if (!(body.mass >= 0.0)) throw ModelError("inertial_virtual_params: negative mass");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(
      0.5 * (body.inertia_com + body.inertia_com.transpose()));
  Eigen::Matrix3d axes = eig.eigenvectors();
  if (axes.determinant() < 0.0) axes.col(2) *= -1.0;
  const Eigen::Vector3d j = eig.eigenvalues();
  const double scale = std::max(1.0, j.cwiseAbs().maxCoeff());
  auto moment = [&](double a, double b, double c) {
    const double l = 0.5 * (b + c - a);
    if (l < -1e-9 * scale) throw ModelError("inertial_virtual_params: triangle inequality violated");
    return std::sqrt(std::max(l, 0.0));
  };
  LinkParams<double> p;
  p.sqrt_moments = {moment(j[0], j[1], j[2]), moment(j[1], j[0], j[2]), moment(j[2], j[0], j[1])};
  p.sqrt_mass = std::sqrt(body.mass);
  p.inertia_rpy = rpy_from_rotation(axes);
  p.com = body.com;
  return p;
}

PhysicalBody physical_body(const LinkParams<double>& p) {
  PhysicalBody b;
  b.mass = p.sqrt_mass * p.sqrt_mass;
  b.com = p.com;
  const Eigen::Matrix3d rj = rotation_from_rpy(p.inertia_rpy);
  b.inertia_com = rj * principal_inertia(p.sqrt_moments) * rj.transpose();
  return b;
}

bool PlausibilityReport::plausible(double tol) const {
  return mass >= 0.0 && principal.minCoeff() >= -tol && triangle_slack >= -tol &&
         min_spatial_eigenvalue >= -1e-10 * std::max(1.0, mass);
}

PlausibilityReport check_plausibility(const LinkParams<double>& p) {
  PlausibilityReport r;
  r.mass = p.sqrt_mass * p.sqrt_mass;
  r.principal = principal_inertia(p.sqrt_moments).diagonal();
  const auto& j = r.principal;
  r.triangle_slack = std::min({j[1] + j[2] - j[0], j[0] + j[2] - j[1], j[0] + j[1] - j[2]});
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(link_inertia(p).matrix(),
                                                                 Eigen::EigenvaluesOnly);
  r.min_spatial_eigenvalue = eig.eigenvalues().minCoeff();
  return r;
}

void RobotModel::validate() const {
  int roots = 0;
  for (std::size_t i = 0; i < links.size(); ++i) {
    const int p = links[i].parent;
    if (p < 0) {
      ++roots;
    } else if (p >= static_cast<int>(i)) {
      throw ModelError("link '" + links[i].name + "' has parent index " + std::to_string(p) +
                       " not preceding it");
    }
  }
  if (!links.empty() && roots != 1) {
    throw ModelError("model must have exactly one root link, found " + std::to_string(roots));
  }
  if (actuator.dof != dof()) {
    throw ModelError("actuator covers " + std::to_string(actuator.dof) + " joints, model has " +
                     std::to_string(dof()));
  }
  if (actuator.params.size() != actuator.parameter_count()) {
    throw ModelError("actuator parameter vector has wrong length");
  }
}

Eigen::VectorXd RobotModel::link_parameters() const {
  Eigen::VectorXd v(kLinkParamCount * dof());
  for (int i = 0; i < dof(); ++i) {
    links[static_cast<std::size_t>(i)].params.pack(
        std::span<double>(v.data() + i * kLinkParamCount, kLinkParamCount));
  }
  return v;
}

void RobotModel::set_link_parameters(const Eigen::VectorXd& v) {
  if (v.size() != kLinkParamCount * dof()) throw ModelError("set_link_parameters: wrong length");
  for (int i = 0; i < dof(); ++i) {
    links[static_cast<std::size_t>(i)].params = LinkParams<double>::unpack(
        std::span<const double>(v.data() + i * kLinkParamCount, kLinkParamCount));
  }
}

BodyTree<double> instantiate(const RobotModel& model) {
  const Eigen::VectorXd v = model.link_parameters();
  return instantiate<double>(model, std::span<const double>(v.data(), v.size()));
}

void randomize_link_parameters(RobotModel& model, std::uint64_t seed, bool randomize_kinematics) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mass(0.1, 1.0), moments(0.01, 0.3), small(-0.1, 0.1);
  for (auto& link : model.links) {
    auto& p = link.params;
    if (randomize_kinematics) {
      for (int i = 0; i < 3; ++i) p.rpy[i] = small(rng);
      for (int i = 0; i < 3; ++i) p.offset[i] = small(rng);
    }
    for (int i = 0; i < 3; ++i) p.sqrt_moments[i] = moments(rng);
    p.sqrt_mass = mass(rng);
    for (int i = 0; i < 3; ++i) p.inertia_rpy[i] = small(rng);
    for (int i = 0; i < 3; ++i) p.com[i] = small(rng);
  }
}

namespace {

json vec_json(const Eigen::Vector3d& v) { return json::array({v[0], v[1], v[2]}); }

Eigen::Vector3d vec3_from(const json& j, const char* key) {
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) {
    throw ModelError(std::string("field '") + key + "' must be an array of 3 numbers");
  }
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

json to_json(const RobotModel& m) {
  json j;
  j["name"] = m.name;
  j["gravity"] = vec_json(m.gravity);
  j["kinematics_known"] = m.kinematics_known;
  json act;
  act["kind"] = std::string(to_string(m.actuator.kind));
  act["hidden"] = m.actuator.hidden;
  act["params"] = std::vector<double>(m.actuator.params.data(),
                                      m.actuator.params.data() + m.actuator.params.size());
  j["actuator"] = act;
  json links = json::array();
  for (const auto& l : m.links) {
    json lj;
    lj["name"] = l.name;
    lj["parent"] = l.parent;
    lj["joint"] = std::string(to_string(l.joint));
    lj["rpy"] = vec_json(l.params.rpy);
    lj["offset"] = vec_json(l.params.offset);
    lj["sqrt_moments"] = vec_json(l.params.sqrt_moments);
    lj["sqrt_mass"] = l.params.sqrt_mass;
    lj["inertia_rpy"] = vec_json(l.params.inertia_rpy);
    lj["com"] = vec_json(l.params.com);
    lj["freeze_kinematics"] = l.freeze_kinematics;
    lj["freeze_inertia"] = l.freeze_inertia;
    links.push_back(lj);
  }
  j["links"] = links;
  return j;
}

RobotModel from_json(const json& j) {
  RobotModel m;
  m.name = j.value("name", "robot");
  if (j.contains("gravity")) m.gravity = vec3_from(j, "gravity");
  m.kinematics_known = j.value("kinematics_known", true);
  for (const auto& lj : j.at("links")) {
    Link l;
    l.name = lj.value("name", "link" + std::to_string(m.links.size()));
    l.parent = lj.value("parent", static_cast<int>(m.links.size()) - 1);
    l.joint = joint_kind_from_string(lj.at("joint").get<std::string>());
    l.params.rpy = vec3_from(lj, "rpy");
    l.params.offset = vec3_from(lj, "offset");
    l.params.sqrt_moments = vec3_from(lj, "sqrt_moments");
    l.params.sqrt_mass = lj.at("sqrt_mass").get<double>();
    l.params.inertia_rpy = vec3_from(lj, "inertia_rpy");
    l.params.com = vec3_from(lj, "com");
    l.freeze_kinematics = lj.value("freeze_kinematics", true);
    l.freeze_inertia = lj.value("freeze_inertia", false);
    m.links.push_back(std::move(l));
  }
  const int dof = m.dof();
  if (j.contains("actuator")) {
    const auto& a = j.at("actuator");
    m.actuator.kind = actuator_kind_from_string(a.value("kind", "identity"));
    m.actuator.dof = dof;
    if (a.contains("hidden")) m.actuator.hidden = a.at("hidden").get<std::vector<int>>();
    const auto p = a.value("params", std::vector<double>{});
    m.actuator.params = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
  } else {
    m.actuator = ActuatorModel::identity(dof);
  }
  m.validate();
  return m;
}

}  // namespace

std::string model_to_string(const RobotModel& model) { return to_json(model).dump(2) + "\n"; }

RobotModel model_from_string(const std::string& text) {
  try {
    return from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw ModelError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const RobotModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ModelError("cannot write model file " + path.string());
  out << model_to_string(model);
}

RobotModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot read model file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_string(ss.str());
}

}  // namespace dnea
