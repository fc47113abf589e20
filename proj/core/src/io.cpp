#include "lpvsyn/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace lpvsyn::io {
namespace {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw std::invalid_argument(what + ": expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  if (!j[0].is_array()) throw std::invalid_argument(what + ": expected nested row arrays");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) {
      throw std::invalid_argument(what + ": ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw std::invalid_argument(what + ": expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j[static_cast<size_t>(i)].get<double>();
  return v;
}

json polytope_json(const ParamPolytope& p) {
  json j;
  json verts = json::array();
  for (const auto& v : p.vertices) verts.push_back(vector_to_json(v));
  j["vertices"] = verts;
  return j;
}

ParamPolytope polytope_from(const json& j) {
  ParamPolytope p;
  for (const auto& v : j.at("vertices")) p.vertices.push_back(vector_from_json(v, "vertex"));
  p.validate();
  return p;
}

json base_certificate_json(const StabilizationCertificate& cert) {
  json j;
  j["mode"] = cert.domain == TimeDomain::kContinuous ? "ct" : "dt";
  j["P"] = matrix_to_json(cert.P);
  json ks = json::array(), ss = json::array();
  for (const auto& k : cert.K_list) ks.push_back(matrix_to_json(k));
  for (const auto& s : cert.S_list) ss.push_back(matrix_to_json(s));
  j["K_list"] = ks;
  j["S_list"] = ss;
  j["alpha"] = vector_to_json(cert.alpha);
  j["beta"] = vector_to_json(cert.beta);
  j["residuals"] = cert.vertex_residuals;
  j["polytope"] = polytope_json(cert.polytope);
  return j;
}

StabilizationCertificate base_certificate_from(const json& j) {
  StabilizationCertificate cert;
  const std::string mode = j.at("mode").get<std::string>();
  cert.domain = mode == "ct" ? TimeDomain::kContinuous : TimeDomain::kDiscrete;
  cert.P = matrix_from_json(j.at("P"), "P");
  for (const auto& k : j.at("K_list")) cert.K_list.push_back(matrix_from_json(k, "K"));
  if (j.contains("S_list")) {
    for (const auto& s : j.at("S_list")) cert.S_list.push_back(matrix_from_json(s, "S"));
  }
  cert.alpha = vector_from_json(j.at("alpha"), "alpha");
  cert.beta = vector_from_json(j.at("beta"), "beta");
  if (j.contains("residuals")) {
    cert.vertex_residuals = j.at("residuals").get<std::vector<double>>();
  }
  cert.polytope = polytope_from(j.at("polytope"));
  return cert;
}

}  // namespace

std::string plant_to_json(const LpvaPlant& plant) {
  json j;
  j["domain"] = to_string(plant.domain);
  json as = json::array();
  for (const auto& a : plant.A_terms) as.push_back(matrix_to_json(a));
  j["A_list"] = as;
  j["B"] = matrix_to_json(plant.B);
  return j.dump(2);
}

LpvaPlant plant_from_json(const std::string& text) {
  const json j = json::parse(text);
  LpvaPlant p;
  p.domain = time_domain_from_string(j.at("domain").get<std::string>());
  for (const auto& a : j.at("A_list")) p.A_terms.push_back(matrix_from_json(a, "A term"));
  p.B = matrix_from_json(j.at("B"), "B");
  p.validate();
  return p;
}

std::string polytope_to_json(const ParamPolytope& polytope) {
  return polytope_json(polytope).dump(2);
}

ParamPolytope polytope_from_json(const std::string& text) {
  return polytope_from(json::parse(text));
}

std::string controller_to_json(const GainScheduledController& controller) {
  json j;
  j["P"] = matrix_to_json(controller.P);
  json ks = json::array();
  for (const auto& k : controller.gains) ks.push_back(matrix_to_json(k));
  j["K_list"] = ks;
  j["polytope"] = polytope_json(controller.polytope);
  return j.dump(2);
}

GainScheduledController controller_from_json(const std::string& text) {
  const json j = json::parse(text);
  GainScheduledController c;
  c.P = matrix_from_json(j.at("P"), "P");
  for (const auto& k : j.at("K_list")) c.gains.push_back(matrix_from_json(k, "gain"));
  c.polytope = polytope_from(j.at("polytope"));
  c.validate();
  return c;
}

std::string record_to_json(const DataRecord& record) {
  json j;
  j["domain"] = to_string(record.domain);
  j["T"] = record.num_samples();
  j["X_minus"] = matrix_to_json(record.X_minus);
  j["U"] = matrix_to_json(record.U);
  j["Theta"] = matrix_to_json(record.Theta);
  j["X_delta"] = matrix_to_json(record.X_delta);
  return j.dump(2);
}

DataRecord record_from_json(const std::string& text) {
  const json j = json::parse(text);
  DataRecord r;
  r.domain = time_domain_from_string(j.at("domain").get<std::string>());
  r.X_minus = matrix_from_json(j.at("X_minus"), "X_minus");
  r.U = matrix_from_json(j.at("U"), "U");
  r.Theta = matrix_from_json(j.at("Theta"), "Theta");
  r.X_delta = matrix_from_json(j.at("X_delta"), "X_delta");
  if (j.contains("T") && j.at("T").get<Eigen::Index>() != r.num_samples()) {
    throw std::invalid_argument("record: T field disagrees with matrix width");
  }
  r.validate();
  return r;
}

std::string bound_to_json(const NoiseBound& bound) {
  json j;
  j["Phi11"] = matrix_to_json(bound.Phi11);
  j["Phi12"] = matrix_to_json(bound.Phi12);
  j["Phi22"] = matrix_to_json(bound.Phi22);
  return j.dump(2);
}

NoiseBound bound_from_json(const std::string& text) {
  const json j = json::parse(text);
  NoiseBound b;
  b.Phi11 = matrix_from_json(j.at("Phi11"), "Phi11");
  b.Phi12 = matrix_from_json(j.at("Phi12"), "Phi12");
  b.Phi22 = matrix_from_json(j.at("Phi22"), "Phi22");
  b.validate();
  return b;
}

std::string certificate_to_json(const StabilizationCertificate& cert) {
  return base_certificate_json(cert).dump(2);
}

std::string certificate_to_json(const H2Certificate& cert) {
  json j = base_certificate_json(cert.base);
  j["Z"] = matrix_to_json(cert.Z);
  j["gamma"] = cert.gamma;
  return j.dump(2);
}

StabilizationCertificate certificate_from_json(const std::string& text) {
  return base_certificate_from(json::parse(text));
}

bool certificate_json_has_h2(const std::string& text) {
  return json::parse(text).contains("gamma");
}

H2Certificate h2_certificate_from_json(const std::string& text) {
  const json j = json::parse(text);
  H2Certificate cert;
  cert.base = base_certificate_from(j);
  cert.Z = matrix_from_json(j.at("Z"), "Z");
  cert.gamma = j.at("gamma").get<double>();
  return cert;
}

std::string trajectory_to_csv(const StateTrajectory& trajectory, const ParamTrajectory& params) {
  std::ostringstream out;
  const Eigen::Index n = trajectory.states.empty() ? 0 : trajectory.states.front().size();
  const Eigen::Index m = trajectory.inputs.empty() ? 0 : trajectory.inputs.front().size();
  const Eigen::Index l = params.values.empty() ? 0 : params.values.front().size();
  out << "t";
  for (Eigen::Index i = 1; i <= n; ++i) out << ",x" << i;
  for (Eigen::Index i = 1; i <= m; ++i) out << ",u" << i;
  for (Eigen::Index i = 1; i <= l; ++i) out << ",theta" << i;
  out << "\n";
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    out << buf;
  };
  for (size_t k = 0; k < trajectory.times.size(); ++k) {
    put(trajectory.times[k]);
    for (Eigen::Index i = 0; i < n; ++i) {
      out << ",";
      put(trajectory.states[k][i]);
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      out << ",";
      put(trajectory.inputs[k][i]);
    }
    const Eigen::VectorXd& theta = params.at(trajectory.times[k]);
    for (Eigen::Index i = 0; i < l; ++i) {
      out << ",";
      put(theta[i]);
    }
    out << "\n";
  }
  return out.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << content;
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace lpvsyn::io
