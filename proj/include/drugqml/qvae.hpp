#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drugqml/datasets.hpp"
#include "drugqml/molgraph.hpp"
#include "drugqml/nn.hpp"
#include "drugqml/qsim.hpp"
#include "drugqml/serialize.hpp"

namespace drugqml::qvae {

using nn::Matrix;
using nn::Vector;

inline constexpr int kLatent = 32;
inline constexpr int kGroupQubits = 8;
inline constexpr int kGroups = kLatent / kGroupQubits;

enum class QuantumKind { ClassicalNone, AngleEmbed, DataReupload };

struct QuantumLayerVariant {
  QuantumKind kind = QuantumKind::ClassicalNone;
  bool normalized = false;  // ignored by ClassicalNone
  int n_qubits = kGroupQubits;
  int reupload_rounds = 4;  // DataReupload only

  friend bool operator==(const QuantumLayerVariant&, const QuantumLayerVariant&) = default;
};

// classical_none, angle_embed, data_reupload, with a "_normalized" suffix.
std::string variant_name(const QuantumLayerVariant& v);
QuantumLayerVariant variant_from_name(const std::string& s);  // ConfigError
// classical_none, angle_embed, data_reupload, data_reupload_normalized.
std::vector<QuantumLayerVariant> comparison_variants();

/// Latent transform between the reparameterised sample and the decoder,
/// batched over columns. The 32 latents are split into 4 groups of 8 qubits
/// that share one circuit template.
///
/// angle_embed:   RY(pi tanh z_i), then a frozen RY layer and a CNOT ring.
/// data_reupload: rounds x [RY(w_ri pi tanh z_i + b_ri), CNOT ring].
/// normalized:    (y - running_mean) / sqrt(running_var + eps); in training
///                mode the running statistics are updated from the batch
///                first. The statistics are constants for backprop.
class QuantumLayer {
 public:
  QuantumLayer() = default;
  QuantumLayer(const QuantumLayerVariant& v, std::uint64_t seed);

  Matrix forward(const Matrix& z, bool training = false, int threads = 1);
  // dL/dz for the last forward; accumulates grad_w and grad_b.
  Matrix backward(const Matrix& grad_out, int threads = 1);
  void zero_grad();
  std::vector<nn::ParamRef> parameters(const std::string& prefix);

  /// Parameter vector for one group's circuit given its 8 latents.
  Vector circuit_params(const Eigen::Ref<const Vector>& z_group, int group) const;

  const QuantumLayerVariant& variant() const { return variant_; }
  const qsim::ParamCircuit& circuit() const { return circuit_; }
  int n_encoding_slots() const { return int(enc_slots_.size()); }

  static constexpr double kMomentum = 0.9;
  static constexpr double kEps = 1e-5;

  Vector entangler;  // angle_embed frozen angles, shared by all groups
  Matrix w, b;       // rounds x 32 (data_reupload)
  Matrix grad_w, grad_b;
  Vector running_mean, running_var;
  long stat_updates = 0;

 private:
  QuantumLayerVariant variant_;
  qsim::ParamCircuit circuit_;
  std::vector<int> enc_slots_;
  Matrix z_, raw_;
};

/// Ligand VAE over the flattened large-mode one-hot graph.
///   encoder: 5344 -> 512 -> 128 -> 64 (mu ; logvar), leaky ReLU
///   decoder: 32 -> 128 -> 512 -> 32*7 + 32*32*5 logits, leaky ReLU
/// Every dense layer is spectrally normalised.
struct LigandVae {
  nn::Mlp encoder;
  nn::Mlp decoder;
  QuantumLayer quantum;
};

int input_dim();   // 5344
int atom_dim();    // 32 * 7
int output_dim();  // == input_dim()

/// Classical weights depend only on the seed, so every variant built from the
/// same seed starts from identical encoder/decoder weights.
LigandVae make_vae(const QuantumLayerVariant& v, std::uint64_t seed);

inline constexpr double kLogvarClamp = 10.0;

struct Encoded {
  Vector mu, logvar;
};

// ContractError unless mol is a large-mode (32-slot) graph.
Encoded encode(LigandVae& vae, const mol::MoleculeGraph& mol);
Vector reparameterize(const Vector& mu, const Vector& logvar, const Vector& noise);
// Evaluation mode: running statistics are used, not updated.
Vector quantum_latent_transform(QuantumLayer& layer, const Vector& z);

struct Decoded {
  Matrix atom_logits;  // 32 x 7
  Matrix bond_logits;  // (32*32) x 5, symmetrised over (i, j) / (j, i)
};

Decoded decode(LigandVae& vae, const Vector& z);

struct Elbo {
  double total = 0.0, recon = 0.0, kl = 0.0;
};

/// recon = mean atom CE over the 32 slots + mean bond CE over the i < j
/// pairs; kl = 1/2 sum(mu^2 + exp(logvar) - 1 - logvar).
Elbo elbo_loss(LigandVae& vae, const mol::MoleculeGraph& mol, const Vector& noise);

/// Batch mean of the ELBO terms for one-hot columns x and noise columns. With
/// accumulate, gradients of the mean total are added to all parameters. Only
/// training passes advance the running statistics and the spectral-norm
/// power iteration; the other ops here are pure.
Elbo batch_elbo(LigandVae& vae, const Matrix& x, const Matrix& noise, bool training, bool accumulate,
                int threads = 1);

std::vector<nn::ParamRef> parameters(LigandVae& vae);

struct VaeConfig {
  std::vector<QuantumLayerVariant> variants = comparison_variants();
  int epochs = 100;
  int batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  int checkpoint_every = 10;
  int threads = 0;

  void validate() const;  // ConfigError
};

struct VaeRecord {
  std::string variant;
  int epoch = 0;
  double total = 0.0, recon = 0.0, kl = 0.0;  // sample means over the epoch's minibatches
};

/// Variants train one after another; data order and noise depend only on
/// (seed, epoch, step), so every variant sees the same stream.
struct VaeState {
  VaeConfig cfg;
  int variant_index = 0;
  int next_epoch = 0;
  LigandVae vae;
  nn::AdamState adam;
  std::vector<VaeRecord> records;
};

VaeState init_vae(const VaeConfig& cfg);

/// Same checkpoint and epoch_budget contract as quanv::train_pipeline.
VaeState train_vae_comparison(VaeState state, const data::MoleculeDataset& ds, const std::string& out_dir = "",
                              int epoch_budget = -1);

io::Json checkpoint_to_json(const VaeState& s);
VaeState checkpoint_from_json(const io::Json& j);
io::Json config_to_json(const VaeConfig& c);
VaeConfig config_from_json(const io::Json& j);

}  // namespace drugqml::qvae
