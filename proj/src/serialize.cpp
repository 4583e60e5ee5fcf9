#include "prefgp/serialize.hpp"

#include <fstream>

#include <json.hpp>

namespace prefgp {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "prefgp-model";
constexpr int kVersion = 1;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data(m.data(), m.data() + m.size());  // column-major
  j["data"] = std::move(data);
  return j;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const std::vector<double> data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw LoadError("model file: matrix data length mismatch");
  }
  Eigen::MatrixXd m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const json& j) {
  const std::vector<double> data = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(data.data(),
                                           static_cast<Eigen::Index>(data.size()));
}

json kernel_to_json(const KernelConfig& k) {
  json j;
  j["family"] = kernel_family_name(k.family);
  j["length_scales"] = vector_to_json(k.length_scales);
  j["jitter"] = k.jitter;
  return j;
}

KernelConfig kernel_from_json(const json& j) {
  KernelConfig k;
  k.family = kernel_family_from_name(j.at("family").get<std::string>());
  k.length_scales = vector_from_json(j.at("length_scales"));
  k.jitter = j.at("jitter").get<double>();
  return k;
}

json gppl_to_json(const GpplState& st) {
  json j;
  j["kernel"] = kernel_to_json(st.kernel);
  j["inducing"] = matrix_to_json(st.inducing);
  j["f_hat_m"] = vector_to_json(st.f_hat_m);
  j["S"] = matrix_to_json(st.S);
  j["S_inv"] = matrix_to_json(st.S_inv);
  j["alpha0"] = st.alpha0;
  j["beta0"] = st.beta0;
  j["alpha"] = st.alpha;
  j["beta"] = st.beta;
  j["gamma"] = st.gamma;
  j["lambda"] = st.lambda;
  j["K_mm"] = matrix_to_json(st.K_mm);
  j["K_inv"] = matrix_to_json(st.K_inv);
  j["log_det_K"] = st.log_det_K;
  j["iteration"] = st.iteration;
  j["elbo_trace"] = st.elbo_trace;
  return j;
}

GpplState gppl_from_json(const json& j) {
  GpplState st;
  st.kernel = kernel_from_json(j.at("kernel"));
  st.inducing = matrix_from_json(j.at("inducing"));
  st.f_hat_m = vector_from_json(j.at("f_hat_m"));
  st.S = matrix_from_json(j.at("S"));
  st.S_inv = matrix_from_json(j.at("S_inv"));
  st.alpha0 = j.at("alpha0").get<double>();
  st.beta0 = j.at("beta0").get<double>();
  st.alpha = j.at("alpha").get<double>();
  st.beta = j.at("beta").get<double>();
  st.gamma = j.at("gamma").get<double>();
  st.lambda = j.at("lambda").get<double>();
  st.K_mm = matrix_from_json(j.at("K_mm"));
  st.K_inv = matrix_from_json(j.at("K_inv"));
  st.log_det_K = j.at("log_det_K").get<double>();
  st.iteration = j.at("iteration").get<int>();
  st.elbo_trace = j.at("elbo_trace").get<std::vector<double>>();
  return st;
}

json factor_to_json(const CrowdFactor& f) {
  json j;
  j["mean"] = vector_to_json(f.mean);
  j["cov"] = matrix_to_json(f.cov);
  j["cov_inv"] = matrix_to_json(f.cov_inv);
  j["alpha0"] = f.alpha0;
  j["beta0"] = f.beta0;
  j["alpha"] = f.alpha;
  j["beta"] = f.beta;
  return j;
}

CrowdFactor factor_from_json(const json& j) {
  CrowdFactor f;
  f.mean = vector_from_json(j.at("mean"));
  f.cov = matrix_from_json(j.at("cov"));
  f.cov_inv = matrix_from_json(j.at("cov_inv"));
  f.alpha0 = j.at("alpha0").get<double>();
  f.beta0 = j.at("beta0").get<double>();
  f.alpha = j.at("alpha").get<double>();
  f.beta = j.at("beta").get<double>();
  return f;
}

json crowd_to_json(const CrowdState& st) {
  json j;
  j["item_kernel"] = kernel_to_json(st.item_kernel);
  j["user_kernel"] = kernel_to_json(st.user_kernel);
  j["item_inducing"] = matrix_to_json(st.item_inducing);
  j["user_inducing"] = matrix_to_json(st.user_inducing);
  j["num_users"] = st.num_users;
  j["user_kernel_split"] = st.user_kernel_split;
  j["consensus"] = factor_to_json(st.consensus);
  json vs = json::array();
  for (const CrowdFactor& f : st.item_components) vs.push_back(factor_to_json(f));
  j["item_components"] = std::move(vs);
  json wsj = json::array();
  for (const CrowdFactor& f : st.user_components) wsj.push_back(factor_to_json(f));
  j["user_components"] = std::move(wsj);
  j["gamma"] = st.gamma;
  j["lambda"] = st.lambda;
  j["K_mm"] = matrix_to_json(st.K_mm);
  j["K_inv"] = matrix_to_json(st.K_inv);
  j["log_det_K"] = st.log_det_K;
  j["L_mm"] = matrix_to_json(st.L_mm);
  j["L_inv"] = matrix_to_json(st.L_inv);
  j["log_det_L"] = st.log_det_L;
  j["iteration"] = st.iteration;
  j["elbo_trace"] = st.elbo_trace;
  return j;
}

CrowdState crowd_from_json(const json& j) {
  CrowdState st;
  st.item_kernel = kernel_from_json(j.at("item_kernel"));
  st.user_kernel = kernel_from_json(j.at("user_kernel"));
  st.item_inducing = matrix_from_json(j.at("item_inducing"));
  st.user_inducing = matrix_from_json(j.at("user_inducing"));
  st.num_users = j.at("num_users").get<int>();
  st.user_kernel_split = j.at("user_kernel_split").get<int>();
  st.consensus = factor_from_json(j.at("consensus"));
  for (const json& f : j.at("item_components")) {
    st.item_components.push_back(factor_from_json(f));
  }
  for (const json& f : j.at("user_components")) {
    st.user_components.push_back(factor_from_json(f));
  }
  st.gamma = j.at("gamma").get<double>();
  st.lambda = j.at("lambda").get<double>();
  st.K_mm = matrix_from_json(j.at("K_mm"));
  st.K_inv = matrix_from_json(j.at("K_inv"));
  st.log_det_K = j.at("log_det_K").get<double>();
  st.L_mm = matrix_from_json(j.at("L_mm"));
  st.L_inv = matrix_from_json(j.at("L_inv"));
  st.log_det_L = j.at("log_det_L").get<double>();
  st.iteration = j.at("iteration").get<int>();
  st.elbo_trace = j.at("elbo_trace").get<std::vector<double>>();
  return st;
}

void write_container(const json& body, const std::string& type,
                     const std::string& path) {
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["type"] = type;
  j["model"] = body;
  std::ofstream out(path);
  if (!out) throw LoadError("cannot open model file for writing: " + path);
  out << j.dump();
  if (!out) throw LoadError("failed writing model file: " + path);
}

json read_container(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open model file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw LoadError("model file " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object() || j.value("format", "") != kFormat) {
    throw LoadError("model file " + path + " is not a prefgp model container");
  }
  if (j.value("version", -1) != kVersion) {
    throw LoadError("model file " + path + " has unsupported version");
  }
  return j;
}

}  // namespace

void save_model(const GpplState& state, const std::string& path) {
  write_container(gppl_to_json(state), "gppl", path);
}

void save_model(const CrowdState& state, const std::string& path) {
  write_container(crowd_to_json(state), "crowd", path);
}

void save_model(const std::vector<GpplState>& per_user,
                const std::string& path) {
  json arr = json::array();
  for (const GpplState& st : per_user) arr.push_back(gppl_to_json(st));
  write_container(arr, "gppl-per-user", path);
}

ModelKind peek_model_kind(const std::string& path) {
  const json j = read_container(path);
  const std::string type = j.value("type", "");
  if (type == "gppl") return ModelKind::Gppl;
  if (type == "crowd") return ModelKind::Crowd;
  if (type == "gppl-per-user") return ModelKind::GpplPerUser;
  throw LoadError("model file " + path + " has unknown type: " + type);
}

GpplState load_gppl(const std::string& path) {
  const json j = read_container(path);
  if (j.value("type", "") != "gppl") {
    throw LoadError("model file " + path + " does not hold a gppl model");
  }
  try {
    return gppl_from_json(j.at("model"));
  } catch (const json::exception& e) {
    throw LoadError("model file " + path + " is malformed: " + e.what());
  }
}

CrowdState load_crowd(const std::string& path) {
  const json j = read_container(path);
  if (j.value("type", "") != "crowd") {
    throw LoadError("model file " + path + " does not hold a crowd model");
  }
  try {
    return crowd_from_json(j.at("model"));
  } catch (const json::exception& e) {
    throw LoadError("model file " + path + " is malformed: " + e.what());
  }
}

std::vector<GpplState> load_gppl_per_user(const std::string& path) {
  const json j = read_container(path);
  if (j.value("type", "") != "gppl-per-user") {
    throw LoadError("model file " + path +
                    " does not hold a gppl-per-user model");
  }
  try {
    std::vector<GpplState> out;
    for (const json& m : j.at("model")) out.push_back(gppl_from_json(m));
    return out;
  } catch (const json::exception& e) {
    throw LoadError("model file " + path + " is malformed: " + e.what());
  }
}

}  // namespace prefgp
