#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "drugqml/datasets.hpp"
#include "drugqml/molgraph.hpp"
#include "drugqml/nn.hpp"
#include "drugqml/qsim.hpp"
#include "drugqml/serialize.hpp"

namespace drugqml::qgan {

using nn::Matrix;
using nn::Vector;

struct GeneratorSpec {
  int n_qubits = 8;
  int n_layers = 1;
  int n_patches = 1;  // 1 = monolithic
  mol::Mode mode = mol::Mode::Small;
};

// Flattened graph layout shared by the head output, the relaxed encoding and
// mol::one_hot: [atoms (n * |A|) ; bonds (n^2 * |B|)].
int atom_dim(mol::Mode mode);
int graph_dim(mol::Mode mode);

/// Quantum circuit -> Z expectations -> classical head -> graph logits.
struct HybridGenerator {
  GeneratorSpec spec;
  qsim::Circuit circuit;
  Vector params;
  Vector grad;  // d(loss)/d(params), filled by generator_backward
  nn::Mlp head;

  std::vector<nn::ParamRef> parameters();
};

HybridGenerator make_generator(const GeneratorSpec& spec, std::uint64_t seed);
// graph_dim -> 128 -> 64 -> 1, tanh hidden, linear output (Wasserstein critic).
nn::Mlp make_discriminator(mol::Mode mode, std::uint64_t seed);

struct GeneratedBatch {
  Matrix init_angles;  // n_qubits x batch
  Matrix features;     // n_qubits x batch
  Matrix logits;       // graph_dim x batch (raw head output)
  Matrix relaxed;      // graph_dim x batch (softmax relaxation)
  std::vector<mol::MoleculeGraph> molecules;
};

/// Noise angles ~ U[-pi, pi]^N per item, drawn from `seed`.
GeneratedBatch generate_batch(HybridGenerator& gen, int batch, std::uint64_t seed, int threads = 1);
GeneratedBatch generate_from_angles(HybridGenerator& gen, const Matrix& init_angles, int threads = 1);

/// Per-slot softmax over atom channels; bond logits are symmetrised and
/// softmaxed per pair; diagonal pinned to the no-bond one-hot.
Matrix relax_logits(const Matrix& logits, mol::Mode mode);
Matrix relax_backward(const Matrix& relaxed, const Matrix& grad_relaxed, mol::Mode mode);
/// Argmax decode of each column (bond logits symmetrised first).
std::vector<mol::MoleculeGraph> decode_logits(const Matrix& logits, mol::Mode mode);
Matrix one_hot_batch(const std::vector<mol::MoleculeGraph>& mols, mol::Mode mode);

struct WganLosses {
  double d_loss = 0.0;
  double g_loss = 0.0;
  double gp = 0.0;
};

/// d_loss = mean D(fake) - mean D(real) + gp_lambda * GP, GP at per-item
/// interpolates eps*real + (1-eps)*fake. With accumulate_grads the critic
/// parameter gradients of d_loss are added to the layer accumulators.
WganLosses wgan_losses(nn::Mlp& d, const Matrix& real, const Matrix& fake, double gp_lambda, std::uint64_t seed,
                       bool accumulate_grads = false);

/// g_loss = -mean D(relaxed fake). Fills gen.grad (parameter-shift Jacobian
/// chained with head backprop) and accumulates head gradients. Returns g_loss.
double generator_backward(HybridGenerator& gen, nn::Mlp& d, const GeneratedBatch& batch, int threads = 1);

struct GanTrainConfig {
  double lr0 = 1e-4;
  int decay_start = 3000;
  int decay_span = 2000;
  int max_epochs = 5000;
  int batch_size = 32;
  double gp_lambda = 10.0;
  int n_critic = 5;
  int fd_patience = 500;
  std::uint64_t seed = 0;
  int steps_per_epoch = 0;  // generator steps; 0 = ceil(dataset / batch)
  int fd_samples = 256;
  int checkpoint_every = 10;
  int threads = 0;

  void validate() const;  // ConfigError
};

double lr_schedule(const GanTrainConfig& cfg, int epoch);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double fd = 0.0;
  double validity_fraction = 0.0;
  double druglike_mean = 0.0;
  double logp_mean = 0.0;
  double sa_mean = 0.0;
  double d_loss = 0.0;
  double g_loss = 0.0;
};

/// FD non-improvement patience.
struct EarlyStopper {
  int patience = 500;
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int since_best = 0;

  // Returns true when training should stop after this epoch.
  bool update(int epoch, double fd);
};

struct ParamCount {
  long quantum = 0;
  long classical = 0;
};

ParamCount count_generator_params(const HybridGenerator& gen);
/// Fully classical reference generator (latent 32 -> 128 -> 256 -> 512 ->
/// graph logits) used for the reduction ratio.
long baseline_generator_params(mol::Mode mode);
double parameter_reduction(const HybridGenerator& gen);

struct GanState {
  GanTrainConfig cfg;
  HybridGenerator gen;
  nn::Mlp disc;
  nn::AdamState adam_gen, adam_disc;
  int next_epoch = 0;
  EarlyStopper stopper;
  std::vector<EpochRecord> records;
  std::string stop_reason;
};

GanState init_gan(const GanTrainConfig& cfg, const GeneratorSpec& spec);

struct GanResult {
  GanState last;
  std::optional<GanState> best;
};

/// Runs epochs [state.next_epoch, cfg.max_epochs) or until early stop. With a
/// non-empty out_dir, checkpoint_last.json / checkpoint_best.json are written
/// there (last every cfg.checkpoint_every epochs and at the end). A
/// non-negative epoch_budget stops after that many epochs with stop_reason
/// "epoch_budget", writing checkpoints for a later resume.
GanResult train_qgan(GanState state, const data::MoleculeDataset& dataset, const std::string& out_dir = "",
                     int epoch_budget = -1);

io::Json checkpoint_to_json(const GanState& s);
GanState checkpoint_from_json(const io::Json& j);

io::Json config_to_json(const GanTrainConfig& cfg);
// Missing keys keep their defaults; type errors -> ConfigError.
GanTrainConfig config_from_json(const io::Json& j);
io::Json spec_to_json(const GeneratorSpec& spec);
GeneratorSpec spec_from_json(const io::Json& j);

}  // namespace drugqml::qgan
