#include "drugqml/serialize.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace drugqml::io {

namespace {

// Arrays above this size are stored as base64 of little-endian IEEE doubles:
// still exact, about a third of the text size and much faster to parse.
constexpr size_t kPackThreshold = 4096;
constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string pack_doubles(const std::vector<double>& d) {
  std::string bytes(d.size() * 8, '\0');
  for (size_t i = 0; i < d.size(); ++i) {
    std::uint64_t u;
    std::memcpy(&u, &d[i], 8);
    for (size_t k = 0; k < 8; ++k) bytes[i * 8 + k] = char((u >> (8 * k)) & 0xff);
  }
  std::string out((bytes.size() + 2) / 3 * 4, '=');
  size_t o = 0;
  for (size_t i = 0; i < bytes.size(); i += 3) {
    const size_t n = std::min<size_t>(3, bytes.size() - i);
    std::uint32_t v = 0;
    for (size_t k = 0; k < 3; ++k) v = (v << 8) | (k < n ? std::uint8_t(bytes[i + k]) : 0u);
    for (size_t k = 0; k <= n; ++k) out[o + k] = kB64[(v >> (18 - 6 * k)) & 63];
    o += 4;
  }
  return out;
}

std::vector<double> unpack_doubles(const std::string& s) {
  static const auto table = [] {
    std::array<int, 256> t;
    t.fill(-1);
    for (int i = 0; i < 64; ++i) t[std::uint8_t(kB64[i])] = i;
    return t;
  }();
  if (s.size() % 4 != 0) throw DataError("packed array: bad base64 length");
  size_t pad = 0;
  while (pad < 2 && pad < s.size() && s[s.size() - 1 - pad] == '=') ++pad;
  const size_t n_bytes = s.size() / 4 * 3 - pad;
  if (n_bytes % 8 != 0) throw DataError("packed array: byte count is not a multiple of 8");
  std::string bytes(n_bytes, '\0');
  size_t o = 0;
  for (size_t i = 0; i < s.size(); i += 4) {
    std::uint32_t v = 0;
    for (size_t k = 0; k < 4; ++k) {
      const bool is_pad = i + k >= s.size() - pad;
      const int c = is_pad ? 0 : table[std::uint8_t(s[i + k])];
      if (c < 0) throw DataError("packed array: bad base64 character");
      v = (v << 6) | std::uint32_t(c);
    }
    for (size_t k = 0; k < 3 && o < n_bytes; ++k) bytes[o++] = char((v >> (16 - 8 * k)) & 0xff);
  }
  std::vector<double> d(n_bytes / 8);
  for (size_t i = 0; i < d.size(); ++i) {
    std::uint64_t u = 0;
    for (size_t k = 8; k-- > 0;) u = (u << 8) | std::uint8_t(bytes[i * 8 + k]);
    std::memcpy(&d[i], &u, 8);
  }
  return d;
}

}  // namespace

Json to_json(const Eigen::VectorXd& v) {
  std::vector<double> d(v.data(), v.data() + v.size());
  if (d.size() > kPackThreshold) return Json{{"size", v.size()}, {"f64le", pack_doubles(d)}};
  return Json(d);
}

Json to_json(const Eigen::MatrixXd& m) {
  // Row-major so the file reads naturally.
  std::vector<double> data;
  data.reserve(size_t(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  if (data.size() > kPackThreshold) return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"f64le", pack_doubles(data)}};
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::VectorXd vector_from_json(const Json& j) {
  std::vector<double> d;
  if (j.is_object()) {
    d = unpack_doubles(j.at("f64le").get<std::string>());
    if (Eigen::Index(d.size()) != j.at("size").get<Eigen::Index>()) throw DataError("vector: size mismatch");
  } else {
    d = j.get<std::vector<double>>();
  }
  return Eigen::Map<const Eigen::VectorXd>(d.data(), Eigen::Index(d.size()));
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
  const auto d = j.contains("f64le") ? unpack_doubles(j.at("f64le").get<std::string>())
                                     : j.at("data").get<std::vector<double>>();
  if (Eigen::Index(d.size()) != rows * cols) throw DataError("matrix: data length does not match shape");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = d[size_t(r * cols + c)];
  return m;
}

Json to_json(const nn::Mlp& mlp) {
  Json layers = Json::array();
  for (const auto& l : mlp.layers()) {
    Json jl{{"activation", nn::activation_name(l.activation)},
            {"spectral_norm", l.spectral_norm},
            {"sn_iterations", l.sn_iterations},
            {"weight", to_json(l.weight)},
            {"bias", to_json(l.bias)}};
    if (l.spectral_norm) {
      jl["sn_u"] = to_json(l.sn_u);
      jl["sn_v"] = to_json(l.sn_v);
    }
    layers.push_back(std::move(jl));
  }
  return Json{{"layers", layers}};
}

nn::Mlp mlp_from_json(const Json& j) {
  const auto& jl = j.at("layers");
  if (!jl.is_array() || jl.empty()) throw DataError("mlp: no layers");
  std::vector<int> dims;
  std::vector<nn::DenseLayer> layers;
  for (const auto& l : jl) {
    nn::DenseLayer d;
    d.weight = matrix_from_json(l.at("weight"));
    d.bias = vector_from_json(l.at("bias"));
    if (d.bias.size() != d.weight.rows()) throw DataError("mlp: bias length does not match weight rows");
    if (!dims.empty() && dims.back() != d.in()) throw DataError("mlp: layer shapes do not chain");
    if (dims.empty()) dims.push_back(d.in());
    dims.push_back(d.out());
    d.activation = nn::activation_from_name(l.at("activation").get<std::string>());
    d.spectral_norm = l.at("spectral_norm").get<bool>();
    d.sn_iterations = l.at("sn_iterations").get<int>();
    if (d.spectral_norm) {
      d.sn_u = vector_from_json(l.at("sn_u"));
      d.sn_v = vector_from_json(l.at("sn_v"));
    }
    layers.push_back(std::move(d));
  }
  nn::Mlp mlp(dims, layers.front().activation, layers.back().activation);
  for (size_t i = 0; i < layers.size(); ++i) {
    auto& dst = mlp.layers()[i];
    dst.weight = layers[i].weight;
    dst.bias = layers[i].bias;
    dst.activation = layers[i].activation;
    dst.spectral_norm = layers[i].spectral_norm;
    dst.sn_iterations = layers[i].sn_iterations;
    dst.sn_u = layers[i].sn_u;
    dst.sn_v = layers[i].sn_v;
  }
  mlp.zero_grad();
  return mlp;
}

Json to_json(const nn::AdamState& s) {
  Json m = Json::array(), v = Json::array();
  for (const auto& x : s.m) m.push_back(to_json(x));
  for (const auto& x : s.v) v.push_back(to_json(x));
  return Json{{"step", s.step}, {"beta1", s.beta1}, {"beta2", s.beta2}, {"eps", s.eps}, {"m", m}, {"v", v}};
}

nn::AdamState adam_from_json(const Json& j) {
  nn::AdamState s;
  s.step = j.at("step").get<long>();
  s.beta1 = j.at("beta1").get<double>();
  s.beta2 = j.at("beta2").get<double>();
  s.eps = j.at("eps").get<double>();
  for (const auto& x : j.at("m")) s.m.push_back(vector_from_json(x));
  for (const auto& x : j.at("v")) s.v.push_back(vector_from_json(x));
  if (s.m.size() != s.v.size()) throw DataError("adam: moment lists differ in length");
  return s;
}

Json to_json(const qsim::ParamCircuit& c) {
  Json gates = Json::array();
  for (const auto& g : c.gates) {
    Json jg{{"kind", qsim::gate_name(g.kind)}, {"target", g.target}};
    if (g.control) jg["control"] = *g.control;
    if (g.param_slot) jg["slot"] = *g.param_slot;
    gates.push_back(std::move(jg));
  }
  return Json{{"type", "param"},
              {"n_qubits", c.n_qubits},
              {"n_layers", c.n_layers},
              {"n_params", c.n_params},
              {"gates", gates}};
}

Json to_json(const qsim::Circuit& c) {
  if (const auto* p = std::get_if<qsim::ParamCircuit>(&c)) return to_json(*p);
  Json subs = Json::array();
  for (const auto& s : std::get<qsim::PatchedCircuit>(c).sub_circuits) subs.push_back(to_json(s));
  return Json{{"type", "patched"}, {"sub_circuits", subs}};
}

namespace {

qsim::ParamCircuit param_circuit_from_json(const Json& j) {
  qsim::ParamCircuit c;
  c.n_qubits = j.at("n_qubits").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.n_params = j.at("n_params").get<int>();
  for (const auto& jg : j.at("gates")) {
    qsim::Gate g;
    g.kind = qsim::gate_kind_from_name(jg.at("kind").get<std::string>());
    g.target = jg.at("target").get<int>();
    if (jg.contains("control")) g.control = jg["control"].get<int>();
    if (jg.contains("slot")) g.param_slot = jg["slot"].get<int>();
    c.gates.push_back(g);
  }
  return c;
}

}  // namespace

qsim::Circuit circuit_from_json(const Json& j) {
  try {
    const auto type = j.at("type").get<std::string>();
    qsim::Circuit out;
    if (type == "param") {
      out = param_circuit_from_json(j);
    } else if (type == "patched") {
      qsim::PatchedCircuit p;
      for (const auto& s : j.at("sub_circuits")) p.sub_circuits.push_back(param_circuit_from_json(s));
      out = std::move(p);
    } else {
      throw DataError("circuit: unknown type '" + type + "'");
    }
    std::visit([](const auto& c) { c.validate(); }, out);
    return out;
  } catch (const ContractError& e) {
    throw DataError(std::string("circuit: ") + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  const auto tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << text;
    if (!out) throw DataError("write failed: " + path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, p, ec);
  if (ec) throw DataError("cannot write " + path + ": " + ec.message());
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json_file(const std::string& path, const Json& j) { write_text_file(path, j.dump(1) + "\n"); }

Json read_json_file(const std::string& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const Json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace drugqml::io
