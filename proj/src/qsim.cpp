#include "drugqml/qsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace drugqml::qsim {

namespace {

constexpr double kPi = std::numbers::pi;

std::string qubit_msg(const char* what, int idx, int n) {
  return std::string(what) + " " + std::to_string(idx) + " out of range for " + std::to_string(n) +
         " qubits";
}

}  // namespace

const char* gate_name(GateKind kind) {
  switch (kind) {
    case GateKind::H: return "H";
    case GateKind::RX: return "RX";
    case GateKind::RY: return "RY";
    case GateKind::RZ: return "RZ";
    case GateKind::CNOT: return "CNOT";
    case GateKind::CZ: return "CZ";
    case GateKind::CRY: return "CRY";
  }
  return "?";
}

GateKind gate_kind_from_name(const std::string& name) {
  for (GateKind k : {GateKind::H, GateKind::RX, GateKind::RY, GateKind::RZ, GateKind::CNOT,
                     GateKind::CZ, GateKind::CRY})
    if (name == gate_name(k)) return k;
  throw ContractError("unknown gate kind '" + name + "'");
}

bool is_parameterized(GateKind kind) {
  return kind == GateKind::RX || kind == GateKind::RY || kind == GateKind::RZ ||
         kind == GateKind::CRY;
}

bool is_controlled(GateKind kind) {
  return kind == GateKind::CNOT || kind == GateKind::CZ || kind == GateKind::CRY;
}

void validate_gate(const Gate& g, int n_qubits, int n_params) {
  if (g.target < 0 || g.target >= n_qubits) throw ContractError(qubit_msg("target", g.target, n_qubits));
  if (is_controlled(g.kind)) {
    if (!g.control) throw ContractError(std::string(gate_name(g.kind)) + " requires a control qubit");
    if (*g.control < 0 || *g.control >= n_qubits)
      throw ContractError(qubit_msg("control", *g.control, n_qubits));
    if (*g.control == g.target) throw ContractError("control and target must differ");
  } else if (g.control) {
    throw ContractError(std::string(gate_name(g.kind)) + " takes no control qubit");
  }
  if (is_parameterized(g.kind)) {
    if (!g.param_slot) throw ContractError(std::string(gate_name(g.kind)) + " requires a parameter slot");
    if (*g.param_slot < 0 || *g.param_slot >= n_params)
      throw ContractError("parameter slot " + std::to_string(*g.param_slot) + " out of range for " +
                          std::to_string(n_params) + " parameters");
  } else if (g.param_slot) {
    throw ContractError(std::string(gate_name(g.kind)) + " takes no parameter");
  }
}

void ParamCircuit::validate() const {
  require(n_qubits >= 1 && n_qubits <= kMaxQubits, "ParamCircuit: qubit count out of range");
  require(n_params >= 0, "ParamCircuit: negative parameter count");
  std::vector<int> uses(n_params, 0);
  for (const Gate& g : gates) {
    validate_gate(g, n_qubits, n_params);
    if (g.param_slot) ++uses[*g.param_slot];
  }
  for (int k = 0; k < n_params; ++k)
    if (uses[k] != 1)
      throw ContractError("parameter slot " + std::to_string(k) + " referenced " +
                          std::to_string(uses[k]) + " times (expected exactly once)");
}

int PatchedCircuit::n_qubits() const {
  int n = 0;
  for (const auto& c : sub_circuits) n += c.n_qubits;
  return n;
}

int PatchedCircuit::n_params() const {
  int n = 0;
  for (const auto& c : sub_circuits) n += c.n_params;
  return n;
}

void PatchedCircuit::validate() const {
  require(!sub_circuits.empty(), "PatchedCircuit: no sub-circuits");
  for (const auto& c : sub_circuits) c.validate();
}

int n_qubits(const Circuit& c) {
  return std::visit(
      [](const auto& x) {
        if constexpr (std::is_same_v<std::decay_t<decltype(x)>, ParamCircuit>)
          return x.n_qubits;
        else
          return x.n_qubits();
      },
      c);
}

int n_params(const Circuit& c) {
  return std::visit(
      [](const auto& x) {
        if constexpr (std::is_same_v<std::decay_t<decltype(x)>, ParamCircuit>)
          return x.n_params;
        else
          return x.n_params();
      },
      c);
}

namespace {

// Gate already validated against the register and parameter vector.
void apply_unchecked(StateVector& state, const Gate& g, VectorRef params) {
  const double theta = g.param_slot ? params(*g.param_slot) : 0.0;
  switch (g.kind) {
    case GateKind::H: apply_single(state, hadamard<double>(), g.target); break;
    case GateKind::RX: apply_single(state, rx(theta), g.target); break;
    case GateKind::RY: apply_single_real(state, ry_real(theta), g.target); break;
    case GateKind::RZ: apply_single(state, rz(theta), g.target); break;
    case GateKind::CNOT: apply_cnot(state, *g.control, g.target); break;
    case GateKind::CZ: apply_cz(state, *g.control, g.target); break;
    case GateKind::CRY: apply_single_real(state, ry_real(theta), g.target, *g.control); break;
  }
}

}  // namespace

void apply_gate_inplace(StateVector& state, const Gate& g, VectorRef params) {
  validate_gate(g, state.n_qubits(), static_cast<int>(params.size()));
  apply_unchecked(state, g, params);
}

StateVector apply_gate(StateVector state, const Gate& gate, VectorRef params) {
  apply_gate_inplace(state, gate, params);
  return state;
}

void apply_gates_inplace(StateVector& state, const std::vector<Gate>& gates, VectorRef params) {
  for (const Gate& g : gates) apply_gate_inplace(state, g, params);
}

StateVector simulate(const ParamCircuit& circuit, VectorRef params, VectorRef init_angles) {
  if (params.size() != circuit.n_params)
    throw ContractError("run_circuit: expected " + std::to_string(circuit.n_params) +
                        " parameters, got " + std::to_string(params.size()));
  if (init_angles.size() != circuit.n_qubits)
    throw ContractError("run_circuit: expected " + std::to_string(circuit.n_qubits) +
                        " init angles, got " + std::to_string(init_angles.size()));
  StateVector state(circuit.n_qubits);
  for (int q = 0; q < circuit.n_qubits; ++q) apply_single_real(state, ry_real(init_angles(q)), q);
  apply_gates_inplace(state, circuit.gates, params);
  return state;
}

Vector run_circuit(const ParamCircuit& circuit, VectorRef params, VectorRef init_angles) {
  return expectation_z_all(simulate(circuit, params, init_angles));
}

Vector run_circuit(const PatchedCircuit& circuit, VectorRef params, VectorRef init_angles) {
  if (params.size() != circuit.n_params())
    throw ContractError("run_circuit: expected " + std::to_string(circuit.n_params()) +
                        " parameters, got " + std::to_string(params.size()));
  if (init_angles.size() != circuit.n_qubits())
    throw ContractError("run_circuit: expected " + std::to_string(circuit.n_qubits()) +
                        " init angles, got " + std::to_string(init_angles.size()));
  Vector out(circuit.n_qubits());
  int q0 = 0, p0 = 0;
  for (const auto& sub : circuit.sub_circuits) {
    out.segment(q0, sub.n_qubits) =
        run_circuit(sub, params.segment(p0, sub.n_params), init_angles.segment(q0, sub.n_qubits));
    q0 += sub.n_qubits;
    p0 += sub.n_params;
  }
  return out;
}

Vector run_circuit(const Circuit& circuit, VectorRef params, VectorRef init_angles) {
  return std::visit([&](const auto& c) { return run_circuit(c, params, init_angles); }, circuit);
}

Eigen::MatrixXd param_shift_grad(const ParamCircuit& circuit, VectorRef params, VectorRef init_angles) {
  std::vector<int> all(circuit.n_params);
  for (int k = 0; k < circuit.n_params; ++k) all[k] = k;
  return param_shift_grad(circuit, params, init_angles, all);
}

namespace {

// Circuits of real rotations and permutations keep real amplitudes from a
// real start state, so the shift evaluations can skip the imaginary parts.
struct RealState {
  int n_qubits;
  Vector amps;
};

bool is_real_gate(GateKind k) {
  return k == GateKind::H || k == GateKind::RY || k == GateKind::CRY || k == GateKind::CNOT || k == GateKind::CZ;
}

void apply_real_pair(Vector& a, double u00, double u01, double u10, double u11, int target, int control) {
  const Eigen::Index tmask = Eigen::Index{1} << target;
  const Eigen::Index cmask = control >= 0 ? (Eigen::Index{1} << control) : 0;
  for (Eigen::Index base = 0; base < a.size(); base += 2 * tmask)
    for (Eigen::Index i = base; i < base + tmask; ++i) {
      if ((i & cmask) != cmask) continue;
      const Eigen::Index j = i | tmask;
      const double x = a(i), y = a(j);
      a(i) = u00 * x + u01 * y;
      a(j) = u10 * x + u11 * y;
    }
}

void apply_unchecked(RealState& state, const Gate& g, VectorRef params) {
  auto& a = state.amps;
  const double theta = g.param_slot ? params(*g.param_slot) : 0.0;
  switch (g.kind) {
    case GateKind::H: {
      const double r = 1.0 / std::sqrt(2.0);
      apply_real_pair(a, r, r, r, -r, g.target, -1);
      break;
    }
    case GateKind::RY:
    case GateKind::CRY: {
      const double c = std::cos(theta / 2), sn = std::sin(theta / 2);
      apply_real_pair(a, c, -sn, sn, c, g.target, g.kind == GateKind::CRY ? *g.control : -1);
      break;
    }
    case GateKind::CNOT: {
      const Eigen::Index tmask = Eigen::Index{1} << g.target, cmask = Eigen::Index{1} << *g.control;
      for (Eigen::Index base = 0; base < a.size(); base += 2 * tmask)
        for (Eigen::Index i = base; i < base + tmask; ++i)
          if (i & cmask) std::swap(a(i), a(i | tmask));
      break;
    }
    case GateKind::CZ: {
      const Eigen::Index both = (Eigen::Index{1} << g.target) | (Eigen::Index{1} << *g.control);
      for (Eigen::Index i = 0; i < a.size(); ++i)
        if ((i & both) == both) a(i) = -a(i);
      break;
    }
    default:
      throw ContractError("param_shift_grad: complex gate in real simulation");
  }
}

Vector expectations(const StateVector& s) { return expectation_z_all(s); }

Vector expectations(const RealState& s) {
  Vector out = Vector::Zero(s.n_qubits);
  for (Eigen::Index i = 0; i < s.amps.size(); ++i) {
    const double p = s.amps(i) * s.amps(i);
    for (int q = 0; q < s.n_qubits; ++q) out(q) += ((i >> q) & 1) ? -p : p;
  }
  return out;
}

// Walk the gates once, keeping the state before the current gate; each
// shifted evaluation only replays the suffix. A slot driving several gates
// gets one shift term per occurrence (product rule).
template <typename State>
Eigen::MatrixXd shift_walk(const ParamCircuit& circuit, VectorRef params, State prefix,
                           const std::vector<int>& column, Eigen::Index n_cols) {
  const double half_pi = kPi / 2;
  const double c_plus = (std::sqrt(2.0) + 1.0) / (4.0 * std::sqrt(2.0));
  const double c_minus = (std::sqrt(2.0) - 1.0) / (4.0 * std::sqrt(2.0));
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(circuit.n_qubits, n_cols);
  Vector shifted = params;
  for (size_t g = 0; g < circuit.gates.size(); ++g) {
    const Gate& gate = circuit.gates[g];
    const int k = gate.param_slot.value_or(-1);
    if (k >= 0 && column[k] >= 0 && is_parameterized(gate.kind)) {
      const int i = column[k];
      auto eval_at = [&](double delta) {
        State s = prefix;
        shifted(k) = params(k) + delta;
        apply_unchecked(s, gate, shifted);
        shifted(k) = params(k);
        for (size_t h = g + 1; h < circuit.gates.size(); ++h) apply_unchecked(s, circuit.gates[h], params);
        return expectations(s);
      };
      if (gate.kind == GateKind::CRY) {
        jac.col(i) += c_plus * (eval_at(half_pi) - eval_at(-half_pi)) -
                      c_minus * (eval_at(3 * half_pi) - eval_at(-3 * half_pi));
      } else {
        jac.col(i) += 0.5 * (eval_at(half_pi) - eval_at(-half_pi));
      }
    }
    apply_unchecked(prefix, gate, params);
  }
  return jac;
}

}  // namespace

Eigen::MatrixXd param_shift_grad(const ParamCircuit& circuit, VectorRef params, VectorRef init_angles,
                                 const std::vector<int>& slots) {
  if (params.size() != circuit.n_params || init_angles.size() != circuit.n_qubits)
    throw ContractError("param_shift_grad: expected " + std::to_string(circuit.n_params) + " parameters and " +
                        std::to_string(circuit.n_qubits) + " init angles");
  for (int k : slots) require(k >= 0 && k < circuit.n_params, "param_shift_grad: slot out of range");
  bool real = true;
  for (const Gate& g : circuit.gates) {
    validate_gate(g, circuit.n_qubits, circuit.n_params);
    real = real && is_real_gate(g.kind);
  }
  std::vector<int> column(circuit.n_params, -1);
  for (size_t i = 0; i < slots.size(); ++i) column[slots[i]] = int(i);
  const auto n_cols = Eigen::Index(slots.size());

  StateVector prefix(circuit.n_qubits);
  for (int q = 0; q < circuit.n_qubits; ++q) apply_single_real(prefix, ry_real(init_angles(q)), q);
  if (!real) return shift_walk(circuit, params, prefix, column, n_cols);
  RealState rs{circuit.n_qubits, Vector(prefix.dim())};
  for (Eigen::Index i = 0; i < prefix.dim(); ++i) rs.amps(i) = prefix.amplitudes()(i).real();
  return shift_walk(circuit, params, rs, column, n_cols);
}

Eigen::MatrixXd param_shift_grad(const PatchedCircuit& circuit, VectorRef params,
                                 VectorRef init_angles) {
  require(params.size() == circuit.n_params(), "param_shift_grad: parameter length mismatch");
  require(init_angles.size() == circuit.n_qubits(), "param_shift_grad: init angle length mismatch");
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(circuit.n_qubits(), circuit.n_params());
  int q0 = 0, p0 = 0;
  for (const auto& sub : circuit.sub_circuits) {
    jac.block(q0, p0, sub.n_qubits, sub.n_params) = param_shift_grad(
        sub, params.segment(p0, sub.n_params), init_angles.segment(q0, sub.n_qubits));
    q0 += sub.n_qubits;
    p0 += sub.n_params;
  }
  return jac;
}

Eigen::MatrixXd param_shift_grad(const Circuit& circuit, VectorRef params, VectorRef init_angles) {
  return std::visit([&](const auto& c) { return param_shift_grad(c, params, init_angles); }, circuit);
}

ParamCircuit build_qgan_ansatz(int n_qubits, int n_layers) {
  require(n_qubits >= 2, "build_qgan_ansatz: need at least 2 qubits");
  require(n_layers >= 1, "build_qgan_ansatz: need at least 1 layer");
  require(n_qubits <= kMaxQubits, "build_qgan_ansatz: too many qubits");
  ParamCircuit c;
  c.n_qubits = n_qubits;
  c.n_layers = n_layers;
  int slot = 0;
  for (int l = 0; l < n_layers; ++l) {
    for (int q = 0; q < n_qubits; ++q) c.gates.push_back({GateKind::RY, q, std::nullopt, slot++});
    for (int q = 0; q + 1 < n_qubits; ++q) c.gates.push_back({GateKind::CRY, q + 1, q, slot++});
  }
  c.n_params = slot;
  return c;
}

PatchedCircuit build_patched_ansatz(int n_qubits, int n_patches, int n_layers) {
  require(n_patches >= 1 && n_qubits % n_patches == 0,
          "build_patched_ansatz: qubit count must divide evenly into patches");
  PatchedCircuit p;
  for (int i = 0; i < n_patches; ++i) p.sub_circuits.push_back(build_qgan_ansatz(n_qubits / n_patches, n_layers));
  return p;
}

BoundCircuit random_circuit(std::uint64_t seed, int n_qubits, int depth) {
  require(depth >= 1, "random_circuit: depth must be >= 1");
  require(n_qubits >= 1 && n_qubits <= kMaxQubits, "random_circuit: qubit count out of range");
  Rng rng(seed);
  BoundCircuit out;
  out.circuit.n_qubits = n_qubits;
  out.circuit.n_layers = depth;
  std::vector<double> angles;
  const GateKind kinds[] = {GateKind::RX, GateKind::RY, GateKind::RZ, GateKind::CNOT};
  const std::uint64_t n_kinds = n_qubits >= 2 ? 4 : 3;
  for (int d = 0; d < depth; ++d) {
    for (int q = 0; q < n_qubits; ++q) {
      const GateKind kind = kinds[rng.index(n_kinds)];
      if (kind == GateKind::CNOT) {
        int other = static_cast<int>(rng.index(n_qubits - 1));
        if (other >= q) ++other;
        out.circuit.gates.push_back({GateKind::CNOT, other, q, std::nullopt});
      } else {
        const int slot = static_cast<int>(angles.size());
        angles.push_back(rng.uniform(0.0, 2 * kPi));
        out.circuit.gates.push_back({kind, q, std::nullopt, slot});
      }
    }
  }
  out.circuit.n_params = static_cast<int>(angles.size());
  out.params = Eigen::Map<Vector>(angles.data(), static_cast<Eigen::Index>(angles.size()));
  return out;
}

}  // namespace drugqml::qsim
