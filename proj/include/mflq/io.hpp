#pragma once

#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mflq/model.hpp"
#include "mflq/ode.hpp"

namespace mflq {

using json = nlohmann::json;

/// 17 significant digits, locale independent.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string csv_header(Index rows, Index cols) {
  std::string h = "t";
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) h += ",m_" + std::to_string(i) + "_" + std::to_string(j);
  return h;
}

/// One row per grid node, t ascending, entries row-major.
inline std::string trajectory_csv(const MatrixTrajectory& traj) {
  if (traj.empty()) throw Error(ErrorKind::InvalidArgument, "cannot export an empty trajectory");
  std::string out = csv_header(traj.rows(), traj.cols()) + "\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const MatrixXd& m = traj.value(k);
    out += format_double(traj.grid()[k]);
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) out += "," + format_double(m(i, j));
    out += "\n";
  }
  return out;
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

inline std::string table_csv(const Table& t) {
  std::string out;
  for (std::size_t j = 0; j < t.columns.size(); ++j) out += (j ? "," : "") + t.columns[j];
  out += "\n";
  for (const auto& row : t.rows) {
    if (row.size() != t.columns.size()) throw Error(ErrorKind::DimensionMismatch, "table row has wrong width");
    for (std::size_t j = 0; j < row.size(); ++j) out += (j ? "," : "") + format_double(row[j]);
    out += "\n";
  }
  return out;
}

inline Table parse_csv(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ConfigError, "empty CSV");
  std::stringstream hs(line);
  for (std::string c; std::getline(hs, c, ',');) t.columns.push_back(c);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) {
      double v = 0;
      auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size())
        throw Error(ErrorKind::ConfigError, "bad CSV number '" + c + "'");
      row.push_back(v);
    }
    if (row.size() != t.columns.size()) throw Error(ErrorKind::ConfigError, "CSV row has wrong width");
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::ConfigError, "cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw Error(ErrorKind::ConfigError, "write to '" + path + "' failed");
}

inline std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::ConfigError, "cannot open '" + path + "'");
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

// ---- JSON model configs ----------------------------------------------------

inline json matrix_to_json(const MatrixXd& m) {
  json a = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(std::move(row));
  }
  return a;
}

inline json vector_to_json(const VectorXd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

namespace detail {

inline double json_number(const json& v, const std::string& what) {
  if (!v.is_number()) throw Error(ErrorKind::ConfigError, what + " must be a number");
  return v.get<double>();
}

}  // namespace detail

inline MatrixXd matrix_from_json(const json& a, Index rows, Index cols, const std::string& key) {
  if (!a.is_array() || static_cast<Index>(a.size()) != rows)
    throw Error(ErrorKind::ConfigError, key + " must be an array of " + std::to_string(rows) + " rows");
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = a[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      throw Error(ErrorKind::ConfigError, key + " rows must have " + std::to_string(cols) + " entries");
    for (Index j = 0; j < cols; ++j)
      m(i, j) = detail::json_number(row[static_cast<std::size_t>(j)], key);
  }
  return m;
}

inline VectorXd vector_from_json(const json& a, Index n, const std::string& key) {
  if (!a.is_array() || static_cast<Index>(a.size()) != n)
    throw Error(ErrorKind::ConfigError, key + " must be an array of length " + std::to_string(n));
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = detail::json_number(a[static_cast<std::size_t>(i)], key);
  return v;
}

/// A model config: parameters plus the optional terminal linear weight and
/// initial law. Missing law fields default to mu0 = 1, Sigma0 = 0.
struct Config {
  ModelParams params;
  std::optional<VectorXd> K;
  InitialLaw law;
};

inline json model_to_json(const ModelParams& p) {
  json j;
  j["n"] = p.n;
  j["n1"] = p.n1;
  j["A"] = matrix_to_json(p.A);
  j["B"] = matrix_to_json(p.B);
  j["B0"] = matrix_to_json(p.B0);
  j["B1"] = matrix_to_json(p.B1);
  j["D"] = matrix_to_json(p.D);
  j["D0"] = matrix_to_json(p.D0);
  j["G"] = matrix_to_json(p.G);
  j["Gamma"] = matrix_to_json(p.Gamma);
  j["GammaF"] = matrix_to_json(p.GammaF);
  j["Q"] = matrix_to_json(p.Q);
  j["R"] = matrix_to_json(p.R);
  j["QF"] = matrix_to_json(p.QF);
  j["T"] = p.T;
  return j;
}

inline json config_to_json(const Config& c) {
  json j = model_to_json(c.params);
  if (c.K) j["K"] = vector_to_json(*c.K);
  j["mu0"] = vector_to_json(c.law.mu0);
  j["Sigma0"] = matrix_to_json(c.law.sigma0);
  return j;
}

inline Config config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::ConfigError, "config must be a JSON object");
  for (const char* key : {"n", "n1", "A", "B", "B0", "B1", "D", "D0", "G", "Gamma", "GammaF", "Q", "R", "QF", "T"})
    if (!j.contains(key)) throw Error(ErrorKind::ConfigError, std::string("missing key '") + key + "'");
  if (!j["n"].is_number_integer() || !j["n1"].is_number_integer() || j["n"].get<long>() <= 0 ||
      j["n1"].get<long>() <= 0)
    throw Error(ErrorKind::ConfigError, "n and n1 must be positive integers");
  Config c;
  ModelParams& p = c.params;
  p.n = j["n"].get<Index>();
  p.n1 = j["n1"].get<Index>();
  const Index n = p.n, n1 = p.n1;
  p.A = matrix_from_json(j["A"], n, n, "A");
  p.B = matrix_from_json(j["B"], n, n1, "B");
  p.B0 = matrix_from_json(j["B0"], n, n1, "B0");
  p.B1 = matrix_from_json(j["B1"], n, n1, "B1");
  p.D = matrix_from_json(j["D"], n, 1, "D");
  p.D0 = matrix_from_json(j["D0"], n, 1, "D0");
  p.G = matrix_from_json(j["G"], n, n, "G");
  p.Gamma = matrix_from_json(j["Gamma"], n, n, "Gamma");
  p.GammaF = matrix_from_json(j["GammaF"], n, n, "GammaF");
  p.Q = matrix_from_json(j["Q"], n, n, "Q");
  p.R = matrix_from_json(j["R"], n1, n1, "R");
  p.QF = matrix_from_json(j["QF"], n, n, "QF");
  p.T = detail::json_number(j["T"], "T");
  if (j.contains("K")) c.K = vector_from_json(j["K"], n, "K");
  c.law = deterministic_law(j.contains("mu0") ? vector_from_json(j["mu0"], n, "mu0") : VectorXd::Ones(n));
  if (j.contains("Sigma0")) c.law.sigma0 = matrix_from_json(j["Sigma0"], n, n, "Sigma0");
  return c;
}

inline Config parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ConfigError, std::string("invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

inline Config load_config(const std::string& path) { return parse_config(read_text(path)); }

inline Config preset_config(const std::string& name) {
  Config c;
  c.params = scalar_model(name);
  const VectorXd K = preset_terminal_linear(name, c.params.n);
  if (!K.isZero(0)) c.K = K;
  c.law = deterministic_law(VectorXd::Ones(c.params.n));
  return c;
}

}  // namespace mflq
