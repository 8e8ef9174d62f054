#include "drugqml/qvae.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <utility>

namespace drugqml::qvae {

namespace {

enum : std::uint64_t { kTagEncoder = 21, kTagDecoder = 22, kTagQuantum = 23, kTagShuffle = 24, kTagNoise = 25 };

constexpr double kPi = std::numbers::pi;
constexpr int kSlots = 32;
constexpr int kAtomTypes = 7;
constexpr int kBondTypes = mol::BondAlphabet::kSize;
constexpr int kPairs = kSlots * (kSlots - 1) / 2;

void add_ring(qsim::ParamCircuit& c) {
  for (int q = 0; q < c.n_qubits; ++q)
    c.gates.push_back({qsim::GateKind::CNOT, (q + 1) % c.n_qubits, q, std::nullopt});
}

void add_ry_layer(qsim::ParamCircuit& c) {
  for (int q = 0; q < c.n_qubits; ++q) c.gates.push_back({qsim::GateKind::RY, q, std::nullopt, c.n_params++});
}

// -sum(target * log softmax(logits)) and the softmax itself.
double softmax_ce(const Eigen::Ref<const Vector>& logits, const Eigen::Ref<const Vector>& target, Vector& prob) {
  const double m = logits.maxCoeff();
  prob = (logits.array() - m).exp().matrix();
  const double s = prob.sum();
  prob /= s;
  const double lse = m + std::log(s);
  return -(target.array() * (logits.array() - lse)).sum();
}

nn::Mlp make_mlp(const std::vector<int>& dims, std::uint64_t seed) {
  nn::Mlp m(dims, nn::Activation::LeakyRelu, nn::Activation::None, true);
  Rng rng(seed);
  m.init(rng);
  // Converge the singular vectors once; afterwards one power step per
  // training forward tracks the slowly moving weights.
  for (auto& l : m.layers()) {
    nn::spectral_normalize(l.weight, 30, l.sn_u, l.sn_v);
    l.sn_iterations = 1;
  }
  return m;
}

// Inference passes reuse the stored singular vectors so they are pure.
class SnFreeze {
 public:
  SnFreeze(LigandVae& vae, bool active) {
    if (!active) return;
    for (auto* m : {&vae.encoder, &vae.decoder})
      for (auto& l : m->layers()) {
        layers_.push_back({&l, l.freeze_sn_vectors});
        l.freeze_sn_vectors = true;
      }
  }
  ~SnFreeze() {
    for (auto& [l, was] : layers_) l->freeze_sn_vectors = was;
  }
  SnFreeze(const SnFreeze&) = delete;
  SnFreeze& operator=(const SnFreeze&) = delete;

 private:
  std::vector<std::pair<nn::DenseLayer*, bool>> layers_;
};

}  // namespace

std::string variant_name(const QuantumLayerVariant& v) {
  switch (v.kind) {
    case QuantumKind::ClassicalNone: return "classical_none";
    case QuantumKind::AngleEmbed: return v.normalized ? "angle_embed_normalized" : "angle_embed";
    case QuantumKind::DataReupload: return v.normalized ? "data_reupload_normalized" : "data_reupload";
  }
  return "";
}

QuantumLayerVariant variant_from_name(const std::string& s) {
  QuantumLayerVariant v;
  std::string base = s;
  const std::string suffix = "_normalized";
  if (base.size() > suffix.size() && base.ends_with(suffix)) {
    v.normalized = true;
    base.resize(base.size() - suffix.size());
  }
  if (base == "classical_none" && !v.normalized) v.kind = QuantumKind::ClassicalNone;
  else if (base == "angle_embed") v.kind = QuantumKind::AngleEmbed;
  else if (base == "data_reupload") v.kind = QuantumKind::DataReupload;
  else throw ConfigError("unknown qvae variant '" + s + "'");
  return v;
}

std::vector<QuantumLayerVariant> comparison_variants() {
  return {{QuantumKind::ClassicalNone, false},
          {QuantumKind::AngleEmbed, false},
          {QuantumKind::DataReupload, false},
          {QuantumKind::DataReupload, true}};
}

// ---------------------------------------------------------------------------

QuantumLayer::QuantumLayer(const QuantumLayerVariant& v, std::uint64_t seed) : variant_(v) {
  require(v.n_qubits == kGroupQubits, "QuantumLayer: n_qubits must be 8");
  require(v.reupload_rounds >= 1, "QuantumLayer: reupload_rounds must be >= 1");
  if (v.kind == QuantumKind::ClassicalNone) {
    variant_.normalized = false;
    return;
  }
  circuit_.n_qubits = kGroupQubits;
  circuit_.n_layers = 1;
  if (v.kind == QuantumKind::AngleEmbed) {
    add_ry_layer(circuit_);
    for (int q = 0; q < kGroupQubits; ++q) enc_slots_.push_back(q);
    add_ry_layer(circuit_);
    add_ring(circuit_);
    Rng rng(seed);
    entangler.resize(kGroupQubits);
    for (int q = 0; q < kGroupQubits; ++q) entangler(q) = rng.uniform(0.0, 2.0 * kPi);
  } else {
    circuit_.n_layers = v.reupload_rounds;
    for (int r = 0; r < v.reupload_rounds; ++r) {
      add_ry_layer(circuit_);
      add_ring(circuit_);
    }
    for (int s = 0; s < circuit_.n_params; ++s) enc_slots_.push_back(s);
    w = Matrix::Ones(v.reupload_rounds, kLatent);
    b = Matrix::Zero(v.reupload_rounds, kLatent);
  }
  circuit_.validate();
  if (v.normalized) {
    running_mean = Vector::Zero(kLatent);
    running_var = Vector::Ones(kLatent);
  }
  zero_grad();
}

Vector QuantumLayer::circuit_params(const Eigen::Ref<const Vector>& z_group, int group) const {
  require(z_group.size() == kGroupQubits, "QuantumLayer: group must have 8 latents");
  require(group >= 0 && group < kGroups, "QuantumLayer: group out of range");
  Vector p(circuit_.n_params);
  if (variant_.kind == QuantumKind::AngleEmbed) {
    for (int q = 0; q < kGroupQubits; ++q) {
      p(q) = kPi * std::tanh(z_group(q));
      p(kGroupQubits + q) = entangler(q);
    }
  } else if (variant_.kind == QuantumKind::DataReupload) {
    for (int r = 0; r < variant_.reupload_rounds; ++r)
      for (int q = 0; q < kGroupQubits; ++q) {
        const int f = group * kGroupQubits + q;
        p(r * kGroupQubits + q) = w(r, f) * kPi * std::tanh(z_group(q)) + b(r, f);
      }
  }
  return p;
}

Matrix QuantumLayer::forward(const Matrix& z, bool training, int threads) {
  if (z.rows() != kLatent)
    throw ContractError("quantum_latent_transform: expected 32 latents, got " + std::to_string(z.rows()));
  z_ = z;
  if (variant_.kind == QuantumKind::ClassicalNone) return z;

  const int batch = int(z.cols());
  raw_.resize(kLatent, batch);
  const Vector init = Vector::Zero(kGroupQubits);
  parallel_for(batch * kGroups, threads, [&](int t) {
    const int col = t / kGroups, g = t % kGroups;
    const Vector zg = z.block(g * kGroupQubits, col, kGroupQubits, 1);
    raw_.block(g * kGroupQubits, col, kGroupQubits, 1) = qsim::run_circuit(circuit_, circuit_params(zg, g), init);
  });
  if (!variant_.normalized) return raw_;

  if (training) {
    const Vector mean = raw_.rowwise().mean();
    running_mean = kMomentum * running_mean + (1.0 - kMomentum) * mean;
    // A single column carries no spread information.
    if (batch >= 2) {
      const Vector var = (raw_.colwise() - mean).array().square().rowwise().mean();
      running_var = kMomentum * running_var + (1.0 - kMomentum) * var;
    }
    ++stat_updates;
  }
  const Vector inv = (running_var.array() + kEps).rsqrt().matrix();
  return ((raw_.colwise() - running_mean).array().colwise() * inv.array()).matrix();
}

Matrix QuantumLayer::backward(const Matrix& grad_out, int threads) {
  require(grad_out.rows() == kLatent && grad_out.cols() == z_.cols(), "QuantumLayer: gradient shape mismatch");
  if (variant_.kind == QuantumKind::ClassicalNone) return grad_out;

  Matrix gy = grad_out;
  if (variant_.normalized) gy.array().colwise() *= (running_var.array() + kEps).rsqrt();

  const int batch = int(z_.cols());
  const int rounds = variant_.kind == QuantumKind::DataReupload ? variant_.reupload_rounds : 0;
  const Vector init = Vector::Zero(kGroupQubits);
  Matrix dz(kLatent, batch);
  // Per-task weight gradients, reduced in task order afterwards.
  std::vector<Matrix> dw(size_t(batch) * kGroups), db(size_t(batch) * kGroups);
  parallel_for(batch * kGroups, threads, [&](int t) {
    const int col = t / kGroups, g = t % kGroups;
    const Vector zg = z_.block(g * kGroupQubits, col, kGroupQubits, 1);
    const Eigen::MatrixXd jac = qsim::param_shift_grad(circuit_, circuit_params(zg, g), init, enc_slots_);
    const Vector ga = jac.transpose() * gy.block(g * kGroupQubits, col, kGroupQubits, 1);
    const Vector th = zg.array().tanh().matrix();
    const Vector dtanh = kPi * (1.0 - th.array().square());
    if (variant_.kind == QuantumKind::AngleEmbed) {
      dz.block(g * kGroupQubits, col, kGroupQubits, 1) = (ga.array() * dtanh.array()).matrix();
      return;
    }
    Matrix& w_t = dw[size_t(t)];
    Matrix& b_t = db[size_t(t)];
    w_t.resize(rounds, kGroupQubits);
    b_t.resize(rounds, kGroupQubits);
    Vector d = Vector::Zero(kGroupQubits);
    for (int r = 0; r < rounds; ++r)
      for (int q = 0; q < kGroupQubits; ++q) {
        const double a = ga(r * kGroupQubits + q);
        w_t(r, q) = a * kPi * th(q);
        b_t(r, q) = a;
        d(q) += a * w(r, g * kGroupQubits + q) * dtanh(q);
      }
    dz.block(g * kGroupQubits, col, kGroupQubits, 1) = d;
  });
  if (rounds > 0) {
    for (int t = 0; t < batch * kGroups; ++t) {
      const int g = t % kGroups;
      grad_w.middleCols(g * kGroupQubits, kGroupQubits) += dw[size_t(t)];
      grad_b.middleCols(g * kGroupQubits, kGroupQubits) += db[size_t(t)];
    }
  }
  return dz;
}

void QuantumLayer::zero_grad() {
  grad_w.setZero(w.rows(), w.cols());
  grad_b.setZero(b.rows(), b.cols());
}

std::vector<nn::ParamRef> QuantumLayer::parameters(const std::string& prefix) {
  if (variant_.kind != QuantumKind::DataReupload) return {};
  return {{prefix + ".w", w.data(), grad_w.data(), w.size()}, {prefix + ".b", b.data(), grad_b.data(), b.size()}};
}

// ---------------------------------------------------------------------------

int atom_dim() { return kSlots * kAtomTypes; }
int input_dim() { return atom_dim() + kSlots * kSlots * kBondTypes; }
int output_dim() { return input_dim(); }

LigandVae make_vae(const QuantumLayerVariant& v, std::uint64_t seed) {
  LigandVae vae;
  vae.encoder = make_mlp({input_dim(), 512, 128, 2 * kLatent}, derive_seed(seed, kTagEncoder));
  vae.decoder = make_mlp({kLatent, 128, 512, output_dim()}, derive_seed(seed, kTagDecoder));
  vae.quantum = QuantumLayer(v, derive_seed(seed, kTagQuantum));
  return vae;
}

std::vector<nn::ParamRef> parameters(LigandVae& vae) {
  auto p = vae.encoder.parameters("vae.encoder");
  for (auto& r : vae.decoder.parameters("vae.decoder")) p.push_back(r);
  for (auto& r : vae.quantum.parameters("vae.quantum")) p.push_back(r);
  return p;
}

namespace {

Vector molecule_column(const mol::MoleculeGraph& m) {
  require(m.max_atoms() == kSlots, "qvae: molecule must be a large-mode graph (32 slots)");
  return mol::one_hot(m, mol::Mode::Large);
}

Matrix clamp_logvar(const Matrix& raw) { return raw.cwiseMax(-kLogvarClamp).cwiseMin(kLogvarClamp); }

}  // namespace

Encoded encode(LigandVae& vae, const mol::MoleculeGraph& m) {
  SnFreeze freeze(vae, true);
  const Matrix h = vae.encoder.forward(molecule_column(m));
  return {h.col(0).head(kLatent), clamp_logvar(h.col(0).tail(kLatent))};
}

Vector reparameterize(const Vector& mu, const Vector& logvar, const Vector& noise) {
  require(mu.size() == kLatent && logvar.size() == kLatent && noise.size() == kLatent,
          "reparameterize: vectors must have length 32");
  return mu + ((0.5 * logvar.array()).exp() * noise.array()).matrix();
}

Vector quantum_latent_transform(QuantumLayer& layer, const Vector& z) {
  if (z.size() != kLatent)
    throw ContractError("quantum_latent_transform: expected 32 latents, got " + std::to_string(z.size()));
  return layer.forward(z, false).col(0);
}

Decoded decode(LigandVae& vae, const Vector& z) {
  require(z.size() == kLatent, "decode: latent must have length 32");
  SnFreeze freeze(vae, true);
  const Vector out = vae.decoder.forward(z).col(0);
  Decoded d;
  d.atom_logits.resize(kSlots, kAtomTypes);
  for (int i = 0; i < kSlots; ++i) d.atom_logits.row(i) = out.segment(i * kAtomTypes, kAtomTypes).transpose();
  d.bond_logits.resize(kSlots * kSlots, kBondTypes);
  const int off = atom_dim();
  for (int i = 0; i < kSlots; ++i)
    for (int j = 0; j < kSlots; ++j) {
      const auto a = out.segment(off + (i * kSlots + j) * kBondTypes, kBondTypes);
      const auto t = out.segment(off + (j * kSlots + i) * kBondTypes, kBondTypes);
      d.bond_logits.row(i * kSlots + j) = (0.5 * (a + t)).transpose();
    }
  return d;
}

Elbo batch_elbo(LigandVae& vae, const Matrix& x, const Matrix& noise, bool training, bool accumulate, int threads) {
  require(x.rows() == input_dim(), "batch_elbo: input must be large-mode one-hot columns");
  require(noise.rows() == kLatent && noise.cols() == x.cols(), "batch_elbo: noise shape mismatch");
  const int batch = int(x.cols());
  require(batch >= 1, "batch_elbo: empty batch");
  SnFreeze freeze(vae, !training);

  const Matrix h = vae.encoder.forward(x);
  const Matrix mu = h.topRows(kLatent);
  const Matrix raw_lv = h.bottomRows(kLatent);
  const Matrix lv = clamp_logvar(raw_lv);
  const Matrix sd = (0.5 * lv.array()).exp().matrix();
  const Matrix z = mu + (sd.array() * noise.array()).matrix();
  const Matrix q = vae.quantum.forward(z, training, threads);
  const Matrix out = vae.decoder.forward(q);

  Matrix dout = accumulate ? Matrix::Zero(out.rows(), batch) : Matrix();
  const int off = atom_dim();
  Elbo e;
  Vector prob;
  for (int c = 0; c < batch; ++c) {
    double atom_ce = 0.0, bond_ce = 0.0;
    for (int i = 0; i < kSlots; ++i) {
      const int r = i * kAtomTypes;
      atom_ce += softmax_ce(out.col(c).segment(r, kAtomTypes), x.col(c).segment(r, kAtomTypes), prob);
      if (accumulate)
        dout.col(c).segment(r, kAtomTypes) = (prob - x.col(c).segment(r, kAtomTypes)) / (double(kSlots) * batch);
    }
    for (int i = 0; i < kSlots; ++i)
      for (int j = i + 1; j < kSlots; ++j) {
        const int rij = off + (i * kSlots + j) * kBondTypes, rji = off + (j * kSlots + i) * kBondTypes;
        const Vector s = 0.5 * (out.col(c).segment(rij, kBondTypes) + out.col(c).segment(rji, kBondTypes));
        bond_ce += softmax_ce(s, x.col(c).segment(rij, kBondTypes), prob);
        if (accumulate) {
          const Vector d = (prob - x.col(c).segment(rij, kBondTypes)) / (2.0 * kPairs * batch);
          dout.col(c).segment(rij, kBondTypes) += d;
          dout.col(c).segment(rji, kBondTypes) += d;
        }
      }
    e.recon += atom_ce / kSlots + bond_ce / kPairs;
    e.kl += 0.5 * (mu.col(c).array().square() + lv.col(c).array().exp() - 1.0 - lv.col(c).array()).sum();
  }
  e.recon /= batch;
  e.kl /= batch;
  e.total = e.recon + e.kl;
  if (!std::isfinite(e.total)) throw NumericalError("qvae: non-finite loss");

  if (accumulate) {
    const Matrix dq = vae.decoder.backward(dout);
    const Matrix dz = vae.quantum.backward(dq, threads);
    Matrix dh(2 * kLatent, batch);
    dh.topRows(kLatent) = dz + mu / double(batch);
    Matrix dlv = (dz.array() * noise.array() * sd.array() * 0.5).matrix() +
                 (0.5 / batch) * (lv.array().exp() - 1.0).matrix();
    for (Eigen::Index k = 0; k < dlv.size(); ++k)
      if (std::abs(raw_lv(k)) > kLogvarClamp) dlv(k) = 0.0;
    dh.bottomRows(kLatent) = dlv;
    vae.encoder.backward(dh, false);
  }
  return e;
}

Elbo elbo_loss(LigandVae& vae, const mol::MoleculeGraph& m, const Vector& noise) {
  require(noise.size() == kLatent, "elbo_loss: noise must have length 32");
  return batch_elbo(vae, molecule_column(m), noise, false, false);
}

// ---------------------------------------------------------------------------

void VaeConfig::validate() const {
  if (variants.empty()) throw ConfigError("qvae: variants must not be empty");
  if (epochs < 1) throw ConfigError("qvae: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("qvae: batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("qvae: lr must be positive");
  if (checkpoint_every < 1) throw ConfigError("qvae: checkpoint_every must be >= 1");
  if (threads < 0) throw ConfigError("qvae: threads must be >= 0");
  for (const auto& v : variants) {
    if (v.n_qubits != kGroupQubits) throw ConfigError("qvae: n_qubits must be 8");
    if (v.reupload_rounds < 1) throw ConfigError("qvae: reupload_rounds must be >= 1");
  }
}

VaeState init_vae(const VaeConfig& cfg) {
  cfg.validate();
  VaeState s;
  s.cfg = cfg;
  s.vae = make_vae(cfg.variants.front(), cfg.seed);
  return s;
}

VaeState train_vae_comparison(VaeState state, const data::MoleculeDataset& ds, const std::string& out_dir,
                              int epoch_budget) {
  const auto& cfg = state.cfg;
  cfg.validate();
  if (ds.mode != mol::Mode::Large) throw DataError("qvae: dataset must be large mode");
  if (ds.molecules.empty()) throw DataError("qvae: empty dataset");
  const int n = int(ds.molecules.size());
  const int threads = resolve_threads(cfg.threads);
  Matrix x(input_dim(), n);
  for (int i = 0; i < n; ++i) x.col(i) = molecule_column(ds.molecules[size_t(i)]);

  auto write = [&] {
    if (!out_dir.empty())
      io::write_json_file((std::filesystem::path(out_dir) / "checkpoint_last.json").string(), checkpoint_to_json(state));
  };
  const int n_variants = int(cfg.variants.size());

  for (int ran = 0; state.variant_index < n_variants; ++ran) {
    if (epoch_budget >= 0 && ran >= epoch_budget) {
      write();
      break;
    }
    if (state.next_epoch >= cfg.epochs) {
      if (state.variant_index + 1 >= n_variants) break;
      ++state.variant_index;
      state.next_epoch = 0;
      state.vae = make_vae(cfg.variants[size_t(state.variant_index)], cfg.seed);
      state.adam = nn::AdamState{};
      --ran;
      continue;
    }
    const int epoch = state.next_epoch;
    const auto& variant = cfg.variants[size_t(state.variant_index)];

    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[size_t(i)] = i;
    Rng shuffle(derive_seed(cfg.seed, kTagShuffle, std::uint64_t(epoch)));
    for (int i = n - 1; i > 0; --i) std::swap(order[size_t(i)], order[shuffle.index(std::uint64_t(i + 1))]);

    Elbo sum;
    for (int start = 0, step = 0; start < n; start += cfg.batch_size, ++step) {
      const int bsz = std::min(n - start, cfg.batch_size);
      Matrix xb(input_dim(), bsz), noise(kLatent, bsz);
      for (int j = 0; j < bsz; ++j) xb.col(j) = x.col(order[size_t(start + j)]);
      Rng rng(derive_seed(cfg.seed, kTagNoise, std::uint64_t(epoch), std::uint64_t(step)));
      for (Eigen::Index k = 0; k < noise.size(); ++k) noise(k) = rng.normal();

      state.vae.encoder.zero_grad();
      state.vae.decoder.zero_grad();
      state.vae.quantum.zero_grad();
      const Elbo e = batch_elbo(state.vae, xb, noise, true, true, threads);
      nn::adam_step(state.adam, parameters(state.vae), cfg.lr);
      sum.total += e.total * bsz;
      sum.recon += e.recon * bsz;
      sum.kl += e.kl * bsz;
    }
    state.records.push_back({variant_name(variant), epoch, sum.total / n, sum.recon / n, sum.kl / n});
    state.next_epoch = epoch + 1;
    if (state.next_epoch % cfg.checkpoint_every == 0 || state.next_epoch == cfg.epochs) write();
  }
  return state;
}

// ---------------------------------------------------------------------------

io::Json config_to_json(const VaeConfig& c) {
  io::Json names = io::Json::array();
  for (const auto& v : c.variants) names.push_back(variant_name(v));
  const int rounds = c.variants.empty() ? 4 : c.variants.front().reupload_rounds;
  return io::Json{{"variants", names},     {"epochs", c.epochs},
                  {"batch_size", c.batch_size}, {"lr", c.lr},
                  {"seed", c.seed},         {"reupload_rounds", rounds},
                  {"checkpoint_every", c.checkpoint_every}, {"threads", c.threads}};
}

VaeConfig config_from_json(const io::Json& j) {
  VaeConfig c;
  try {
    int rounds = 4;
    if (j.contains("reupload_rounds")) rounds = j["reupload_rounds"].get<int>();
    if (j.contains("variants")) {
      c.variants.clear();
      for (const auto& s : j["variants"]) c.variants.push_back(variant_from_name(s.get<std::string>()));
    }
    for (auto& v : c.variants) v.reupload_rounds = rounds;
    if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
    if (j.contains("lr")) c.lr = j["lr"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("checkpoint_every")) c.checkpoint_every = j["checkpoint_every"].get<int>();
    if (j.contains("threads")) c.threads = j["threads"].get<int>();
  } catch (const io::Json::exception& e) {
    throw ConfigError(std::string("qvae: ") + e.what());
  }
  return c;
}

io::Json checkpoint_to_json(const VaeState& s) {
  io::Json records = io::Json::array();
  for (const auto& r : s.records)
    records.push_back(
        {{"variant", r.variant}, {"epoch", r.epoch}, {"total", r.total}, {"recon", r.recon}, {"kl", r.kl}});
  const auto& q = s.vae.quantum;
  io::Json quantum{{"variant", variant_name(q.variant())}, {"stat_updates", q.stat_updates}};
  if (q.variant().kind != QuantumKind::ClassicalNone) quantum["circuit"] = io::to_json(q.circuit());
  if (q.variant().kind == QuantumKind::DataReupload) {
    quantum["w"] = io::to_json(q.w);
    quantum["b"] = io::to_json(q.b);
  }
  if (q.variant().normalized) {
    quantum["running_mean"] = io::to_json(q.running_mean);
    quantum["running_var"] = io::to_json(q.running_var);
  }
  return io::Json{{"format_version", 1},
                  {"command", "qvae"},
                  {"config", config_to_json(s.cfg)},
                  {"variant_index", s.variant_index},
                  {"next_epoch", s.next_epoch},
                  {"encoder", io::to_json(s.vae.encoder)},
                  {"decoder", io::to_json(s.vae.decoder)},
                  {"quantum", quantum},
                  {"adam", io::to_json(s.adam)},
                  {"records", records}};
}

VaeState checkpoint_from_json(const io::Json& j) {
  try {
    if (j.at("format_version").get<int>() != 1 || j.at("command").get<std::string>() != "qvae")
      throw DataError("checkpoint: not a version-1 qvae checkpoint");
    VaeState s;
    s.cfg = config_from_json(j.at("config"));
    s.variant_index = j.at("variant_index").get<int>();
    if (s.variant_index < 0 || s.variant_index >= int(s.cfg.variants.size()))
      throw DataError("checkpoint: variant_index out of range");
    s.next_epoch = j.at("next_epoch").get<int>();
    s.vae = make_vae(s.cfg.variants[size_t(s.variant_index)], s.cfg.seed);
    s.vae.encoder = io::mlp_from_json(j.at("encoder"));
    s.vae.decoder = io::mlp_from_json(j.at("decoder"));
    if (s.vae.encoder.in() != input_dim() || s.vae.encoder.out() != 2 * kLatent || s.vae.decoder.in() != kLatent ||
        s.vae.decoder.out() != output_dim())
      throw DataError("checkpoint: VAE shape mismatch");
    auto& q = s.vae.quantum;
    const auto& jq = j.at("quantum");
    if (jq.at("variant").get<std::string>() != variant_name(q.variant()))
      throw DataError("checkpoint: quantum variant mismatch");
    q.stat_updates = jq.at("stat_updates").get<long>();
    auto load = [&](const char* key, auto& dst) {
      using T = std::decay_t<decltype(dst)>;
      T v;
      if constexpr (std::is_same_v<T, Matrix>) v = io::matrix_from_json(jq.at(key));
      else v = io::vector_from_json(jq.at(key));
      if (v.rows() != dst.rows() || v.cols() != dst.cols()) throw DataError(std::string("checkpoint: shape of ") + key);
      dst = v;
    };
    if (q.variant().kind == QuantumKind::DataReupload) {
      load("w", q.w);
      load("b", q.b);
    }
    if (q.variant().normalized) {
      load("running_mean", q.running_mean);
      load("running_var", q.running_var);
    }
    s.adam = io::adam_from_json(j.at("adam"));
    for (const auto& r : j.at("records"))
      s.records.push_back({r.at("variant").get<std::string>(), r.at("epoch").get<int>(), r.at("total").get<double>(),
                           r.at("recon").get<double>(), r.at("kl").get<double>()});
    return s;
  } catch (const io::Json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace drugqml::qvae
