#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "drugqml/common.hpp"

namespace drugqml::qsim {

inline constexpr int kMaxQubits = 20;

/// Dense statevector over n qubits. Qubit q is bit q of the basis index, so
/// the ket |q0 q1 ...> = |10> is basis index 1.
template <typename Scalar = double>
class BasicStateVector {
 public:
  using RealScalar = Scalar;
  using Complex = std::complex<Scalar>;
  using Amplitudes = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;

  explicit BasicStateVector(int n_qubits) : n_qubits_(n_qubits) {
    require(n_qubits >= 1, "StateVector: need at least one qubit");
    if (n_qubits > kMaxQubits)
      throw ContractError("StateVector: " + std::to_string(n_qubits) +
                          " qubits exceeds the dense-simulation cap of " +
                          std::to_string(kMaxQubits));
    amps_ = Amplitudes::Zero(Eigen::Index{1} << n_qubits);
    amps_(0) = Complex(1);
  }

  BasicStateVector(int n_qubits, Amplitudes amps) : BasicStateVector(n_qubits) {
    require(amps.size() == amps_.size(), "StateVector: amplitude length must be 2^n");
    amps_ = std::move(amps);
  }

  static BasicStateVector basis(int n_qubits, std::uint64_t index) {
    BasicStateVector s(n_qubits);
    require(index < static_cast<std::uint64_t>(s.dim()), "StateVector: basis index out of range");
    s.amps_(0) = Complex(0);
    s.amps_(static_cast<Eigen::Index>(index)) = Complex(1);
    return s;
  }

  int n_qubits() const { return n_qubits_; }
  Eigen::Index dim() const { return amps_.size(); }
  const Amplitudes& amplitudes() const { return amps_; }
  Amplitudes& amplitudes() { return amps_; }
  Scalar norm_squared() const { return amps_.squaredNorm(); }

 private:
  int n_qubits_;
  Amplitudes amps_;
};

using StateVector = BasicStateVector<double>;

template <typename Scalar>
using Mat2 = Eigen::Matrix<std::complex<Scalar>, 2, 2>;

/// Applies a 2x2 unitary to `target`, optionally conditioned on `control`.
template <typename Scalar>
void apply_single(BasicStateVector<Scalar>& state, const Mat2<Scalar>& u, int target,
                  int control = -1) {
  auto& a = state.amplitudes();
  const Eigen::Index tmask = Eigen::Index{1} << target;
  const Eigen::Index cmask = control >= 0 ? (Eigen::Index{1} << control) : 0;
  for (Eigen::Index base = 0; base < a.size(); base += 2 * tmask)
    for (Eigen::Index i = base; i < base + tmask; ++i) {
      if ((i & cmask) != cmask) continue;
      const Eigen::Index j = i | tmask;
      const auto x = a(i), y = a(j);
      a(i) = u(0, 0) * x + u(0, 1) * y;
      a(j) = u(1, 0) * x + u(1, 1) * y;
    }
}

/// Same for a real 2x2 matrix (RY, H): half the multiplications.
template <typename Scalar>
void apply_single_real(BasicStateVector<Scalar>& state, const Eigen::Matrix<Scalar, 2, 2>& u, int target,
                       int control = -1) {
  auto& a = state.amplitudes();
  const Eigen::Index tmask = Eigen::Index{1} << target;
  const Eigen::Index cmask = control >= 0 ? (Eigen::Index{1} << control) : 0;
  for (Eigen::Index base = 0; base < a.size(); base += 2 * tmask)
    for (Eigen::Index i = base; i < base + tmask; ++i) {
      if ((i & cmask) != cmask) continue;
      const Eigen::Index j = i | tmask;
      const auto x = a(i), y = a(j);
      a(i) = u(0, 0) * x + u(0, 1) * y;
      a(j) = u(1, 0) * x + u(1, 1) * y;
    }
}

template <typename Scalar>
void apply_cnot(BasicStateVector<Scalar>& state, int control, int target) {
  auto& a = state.amplitudes();
  const Eigen::Index tmask = Eigen::Index{1} << target;
  const Eigen::Index cmask = Eigen::Index{1} << control;
  for (Eigen::Index base = 0; base < a.size(); base += 2 * tmask)
    for (Eigen::Index i = base; i < base + tmask; ++i)
      if (i & cmask) std::swap(a(i), a(i | tmask));
}

template <typename Scalar>
void apply_cz(BasicStateVector<Scalar>& state, int control, int target) {
  auto& a = state.amplitudes();
  const Eigen::Index both = (Eigen::Index{1} << target) | (Eigen::Index{1} << control);
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if ((i & both) == both) a(i) = -a(i);
}

template <typename Scalar>
Mat2<Scalar> hadamard() {
  const Scalar r = Scalar(1) / std::sqrt(Scalar(2));
  Mat2<Scalar> m;
  m << r, r, r, -r;
  return m;
}

template <typename Scalar>
Mat2<Scalar> rx(Scalar theta) {
  const Scalar c = std::cos(theta / 2), s = std::sin(theta / 2);
  const std::complex<Scalar> mis(0, -s);
  Mat2<Scalar> m;
  m << c, mis, mis, c;
  return m;
}

template <typename Scalar>
Mat2<Scalar> ry(Scalar theta) {
  const Scalar c = std::cos(theta / 2), s = std::sin(theta / 2);
  Mat2<Scalar> m;
  m << c, -s, s, c;
  return m;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 2> ry_real(Scalar theta) {
  const Scalar c = std::cos(theta / 2), s = std::sin(theta / 2);
  Eigen::Matrix<Scalar, 2, 2> m;
  m << c, -s, s, c;
  return m;
}

template <typename Scalar>
Mat2<Scalar> rz(Scalar theta) {
  Mat2<Scalar> m;
  m << std::polar(Scalar(1), -theta / 2), Scalar(0), Scalar(0), std::polar(Scalar(1), theta / 2);
  return m;
}

/// <Z_q> = sum_b (-1)^{bit_q(b)} |amp_b|^2.
template <typename Scalar>
Scalar expectation_z(const BasicStateVector<Scalar>& state, int qubit) {
  require(qubit >= 0 && qubit < state.n_qubits(), "expectation_z: qubit index out of range");
  const auto& a = state.amplitudes();
  const Eigen::Index mask = Eigen::Index{1} << qubit;
  Scalar acc(0);
  for (Eigen::Index i = 0; i < a.size(); ++i) acc += (i & mask) ? -std::norm(a(i)) : std::norm(a(i));
  return acc;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> expectation_z_all(const BasicStateVector<Scalar>& state) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out =
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(state.n_qubits());
  const auto& a = state.amplitudes();
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const Scalar p = std::norm(a(i));
    for (int q = 0; q < state.n_qubits(); ++q) out(q) += ((i >> q) & 1) ? -p : p;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gates and circuits

enum class GateKind { H, RX, RY, RZ, CNOT, CZ, CRY };

const char* gate_name(GateKind kind);
GateKind gate_kind_from_name(const std::string& name);
bool is_parameterized(GateKind kind);
bool is_controlled(GateKind kind);

struct Gate {
  GateKind kind = GateKind::H;
  int target = 0;
  std::optional<int> control;
  std::optional<int> param_slot;

  friend bool operator==(const Gate&, const Gate&) = default;
};

/// Throws ContractError if the gate violates its structural invariants for
/// a register of `n_qubits` and a parameter vector of length `n_params`.
void validate_gate(const Gate& gate, int n_qubits, int n_params);

struct ParamCircuit {
  int n_qubits = 0;
  int n_layers = 0;
  std::vector<Gate> gates;
  int n_params = 0;

  /// Every gate valid and every slot in [0, n_params) referenced exactly once.
  void validate() const;
  friend bool operator==(const ParamCircuit&, const ParamCircuit&) = default;
};

/// Independent sub-circuits on consecutive qubit ranges; the parameter vector
/// is the concatenation of the sub-circuit parameter vectors.
struct PatchedCircuit {
  std::vector<ParamCircuit> sub_circuits;

  int n_qubits() const;
  int n_params() const;
  void validate() const;
  friend bool operator==(const PatchedCircuit&, const PatchedCircuit&) = default;
};

using Circuit = std::variant<ParamCircuit, PatchedCircuit>;

int n_qubits(const Circuit& c);
int n_params(const Circuit& c);

/// A circuit together with fixed (non-trainable) values for all its slots.
struct BoundCircuit {
  ParamCircuit circuit;
  Eigen::VectorXd params;
};

using Vector = Eigen::VectorXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

void apply_gate_inplace(StateVector& state, const Gate& gate, VectorRef params);
StateVector apply_gate(StateVector state, const Gate& gate, VectorRef params);
void apply_gates_inplace(StateVector& state, const std::vector<Gate>& gates, VectorRef params);

/// |0...0> -> RY(init_angles[i]) on every qubit -> circuit gates.
StateVector simulate(const ParamCircuit& circuit, VectorRef params, VectorRef init_angles);

/// Z expectation of every qubit after `simulate`. For patched circuits each
/// sub-circuit is simulated on its own register and the results concatenated.
Vector run_circuit(const ParamCircuit& circuit, VectorRef params, VectorRef init_angles);
Vector run_circuit(const PatchedCircuit& circuit, VectorRef params, VectorRef init_angles);
Vector run_circuit(const Circuit& circuit, VectorRef params, VectorRef init_angles);

/// d<Z_q>/d(theta_k) as an (n_qubits x n_params) matrix. Single-qubit
/// rotations use the two-term shift rule; CRY uses the four-term rule since
/// its generator has three distinct eigenvalues.
Eigen::MatrixXd param_shift_grad(const ParamCircuit& circuit, VectorRef params, VectorRef init_angles);
/// Columns for the listed slots only.
Eigen::MatrixXd param_shift_grad(const ParamCircuit& circuit, VectorRef params, VectorRef init_angles,
                                 const std::vector<int>& slots);
Eigen::MatrixXd param_shift_grad(const PatchedCircuit& circuit, VectorRef params,
                                 VectorRef init_angles);
Eigen::MatrixXd param_shift_grad(const Circuit& circuit, VectorRef params, VectorRef init_angles);

/// Per layer: RY on every qubit, then CRY(i, i+1) down the chain.
/// L * (2N - 1) parameters.
ParamCircuit build_qgan_ansatz(int n_qubits, int n_layers);

/// Patched generator: `n_patches` equal sub-circuits, each a QGAN ansatz.
PatchedCircuit build_patched_ansatz(int n_qubits, int n_patches, int n_layers);

/// Seeded random circuit over {RX, RY, RZ, CNOT}; `depth` gates per qubit
/// slot, angles uniform in [0, 2pi).
BoundCircuit random_circuit(std::uint64_t seed, int n_qubits, int depth);

}  // namespace drugqml::qsim
