#include "drugqml/qgan.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "drugqml/metrics.hpp"

namespace drugqml::qgan {

namespace {

constexpr double kPi = std::numbers::pi;

// Stream tags for derive_seed so every draw in training is addressable by
// (epoch, step, purpose).
enum : std::uint64_t { kTagCritic = 1, kTagGen = 2, kTagFdReal = 3, kTagFdGen = 4, kTagInit = 5 };

int slots(mol::Mode m) { return mol::max_atoms_for(m); }
int n_atom_ch(mol::Mode m) { return mol::AtomAlphabet::for_mode(m).size(); }
constexpr int kB = mol::BondAlphabet::kSize;

// Softmax of a short segment, in place, numerically shifted.
template <typename Seg>
void softmax_inplace(Seg&& s) {
  const double mx = s.maxCoeff();
  s = (s.array() - mx).exp().matrix();
  s /= s.sum();
}

}  // namespace

int atom_dim(mol::Mode mode) { return slots(mode) * n_atom_ch(mode); }
int graph_dim(mol::Mode mode) { return atom_dim(mode) + slots(mode) * slots(mode) * kB; }

std::vector<nn::ParamRef> HybridGenerator::parameters() {
  if (grad.size() != params.size()) grad = Vector::Zero(params.size());
  std::vector<nn::ParamRef> out{{"gen.circuit", params.data(), grad.data(), params.size()}};
  for (auto& p : head.parameters("gen.head")) out.push_back(p);
  return out;
}

HybridGenerator make_generator(const GeneratorSpec& spec, std::uint64_t seed) {
  require(spec.n_qubits >= 1 && spec.n_layers >= 1 && spec.n_patches >= 1, "make_generator: sizes must be positive");
  HybridGenerator g;
  g.spec = spec;
  if (spec.n_patches == 1)
    g.circuit = qsim::build_qgan_ansatz(spec.n_qubits, spec.n_layers);
  else
    g.circuit = qsim::build_patched_ansatz(spec.n_qubits, spec.n_patches, spec.n_layers);
  Rng rng(derive_seed(seed, kTagInit, 1));
  g.params.resize(qsim::n_params(g.circuit));
  for (Eigen::Index i = 0; i < g.params.size(); ++i) g.params(i) = rng.uniform(-kPi, kPi);
  g.grad = Vector::Zero(g.params.size());
  g.head = nn::Mlp({spec.n_qubits, 64, 128, graph_dim(spec.mode)}, nn::Activation::Tanh, nn::Activation::None);
  Rng hr(derive_seed(seed, kTagInit, 2));
  g.head.init(hr);
  return g;
}

nn::Mlp make_discriminator(mol::Mode mode, std::uint64_t seed) {
  nn::Mlp d({graph_dim(mode), 128, 64, 1}, nn::Activation::Tanh, nn::Activation::None);
  Rng rng(derive_seed(seed, kTagInit, 3));
  d.init(rng);
  return d;
}

Matrix relax_logits(const Matrix& logits, mol::Mode mode) {
  const int n = slots(mode), a = n_atom_ch(mode);
  require(logits.rows() == graph_dim(mode), "relax_logits: wrong logit count");
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    auto col = out.col(c);
    const auto in = logits.col(c);
    for (int i = 0; i < n; ++i) {
      col.segment(i * a, a) = in.segment(i * a, a);
      softmax_inplace(col.segment(i * a, a));
    }
    const int off = n * a;
    for (int i = 0; i < n; ++i) {
      auto diag = col.segment(off + (i * n + i) * kB, kB);
      diag.setZero();
      diag(0) = 1.0;
      for (int j = i + 1; j < n; ++j) {
        Vector s = 0.5 * (in.segment(off + (i * n + j) * kB, kB) + in.segment(off + (j * n + i) * kB, kB));
        softmax_inplace(s);
        col.segment(off + (i * n + j) * kB, kB) = s;
        col.segment(off + (j * n + i) * kB, kB) = s;
      }
    }
  }
  return out;
}

Matrix relax_backward(const Matrix& relaxed, const Matrix& grad_relaxed, mol::Mode mode) {
  const int n = slots(mode), a = n_atom_ch(mode);
  Matrix out = Matrix::Zero(relaxed.rows(), relaxed.cols());
  for (Eigen::Index c = 0; c < relaxed.cols(); ++c) {
    const auto s = relaxed.col(c);
    const auto g = grad_relaxed.col(c);
    auto d = out.col(c);
    for (int i = 0; i < n; ++i) {
      const auto si = s.segment(i * a, a);
      const auto gi = g.segment(i * a, a);
      d.segment(i * a, a) = si.cwiseProduct((gi.array() - si.dot(gi)).matrix());
    }
    const int off = n * a;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const auto sij = s.segment(off + (i * n + j) * kB, kB);
        const Vector gs = g.segment(off + (i * n + j) * kB, kB) + g.segment(off + (j * n + i) * kB, kB);
        const Vector dsym = sij.cwiseProduct((gs.array() - sij.dot(gs)).matrix());
        d.segment(off + (i * n + j) * kB, kB) = 0.5 * dsym;
        d.segment(off + (j * n + i) * kB, kB) = 0.5 * dsym;
      }
  }
  return out;
}

std::vector<mol::MoleculeGraph> decode_logits(const Matrix& logits, mol::Mode mode) {
  const int n = slots(mode), a = n_atom_ch(mode);
  require(logits.rows() == graph_dim(mode), "decode_logits: wrong logit count");
  std::vector<mol::MoleculeGraph> out;
  out.reserve(logits.cols());
  Eigen::MatrixXd atoms(n, a), bonds(n * n, kB);
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const auto in = logits.col(c);
    for (int i = 0; i < n; ++i) atoms.row(i) = in.segment(i * a, a).transpose();
    const int off = n * a;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        bonds.row(i * n + j) =
            0.5 * (in.segment(off + (i * n + j) * kB, kB) + in.segment(off + (j * n + i) * kB, kB)).transpose();
    out.push_back(mol::decode_graph(atoms, bonds, mode));
  }
  return out;
}

Matrix one_hot_batch(const std::vector<mol::MoleculeGraph>& mols, mol::Mode mode) {
  Matrix out(graph_dim(mode), Eigen::Index(mols.size()));
  for (size_t i = 0; i < mols.size(); ++i) out.col(Eigen::Index(i)) = mol::one_hot(mols[i], mode);
  return out;
}

GeneratedBatch generate_from_angles(HybridGenerator& gen, const Matrix& init_angles, int threads) {
  const int nq = gen.spec.n_qubits;
  require(init_angles.rows() == nq && init_angles.cols() >= 1, "generate: init_angles must be n_qubits x batch");
  GeneratedBatch b;
  b.init_angles = init_angles;
  b.features.resize(nq, init_angles.cols());
  parallel_for(int(init_angles.cols()), threads, [&](int i) {
    b.features.col(i) = qsim::run_circuit(gen.circuit, gen.params, init_angles.col(i));
  });
  b.logits = gen.head.forward(b.features);
  b.relaxed = relax_logits(b.logits, gen.spec.mode);
  b.molecules = decode_logits(b.logits, gen.spec.mode);
  return b;
}

GeneratedBatch generate_batch(HybridGenerator& gen, int batch, std::uint64_t seed, int threads) {
  require(batch >= 1, "generate_batch: batch must be >= 1");
  Rng rng(seed);
  Matrix angles(gen.spec.n_qubits, batch);
  for (int c = 0; c < batch; ++c)
    for (int q = 0; q < gen.spec.n_qubits; ++q) angles(q, c) = rng.uniform(-kPi, kPi);
  return generate_from_angles(gen, angles, threads);
}

WganLosses wgan_losses(nn::Mlp& d, const Matrix& real, const Matrix& fake, double gp_lambda, std::uint64_t seed,
                       bool accumulate_grads) {
  require(real.cols() == fake.cols() && real.rows() == fake.rows() && real.cols() >= 1,
          "wgan_losses: real and fake batches must have equal shapes");
  const double bsz = double(real.cols());
  WganLosses out;
  const Matrix df = d.forward(fake);
  if (accumulate_grads) d.backward(Matrix::Constant(1, fake.cols(), 1.0 / bsz));
  const Matrix dr = d.forward(real);
  if (accumulate_grads) d.backward(Matrix::Constant(1, real.cols(), -1.0 / bsz));
  Rng rng(seed);
  Matrix xhat(real.rows(), real.cols());
  for (Eigen::Index c = 0; c < real.cols(); ++c) {
    const double eps = rng.uniform();
    xhat.col(c) = eps * real.col(c) + (1.0 - eps) * fake.col(c);
  }
  out.gp = d.gradient_penalty(xhat, accumulate_grads ? gp_lambda : 0.0);
  out.g_loss = -df.mean();
  out.d_loss = df.mean() - dr.mean() + gp_lambda * out.gp;
  return out;
}

double generator_backward(HybridGenerator& gen, nn::Mlp& d, const GeneratedBatch& batch, int threads) {
  const Eigen::Index bsz = batch.features.cols();
  const Matrix score = d.forward(batch.relaxed);
  const double g_loss = -score.mean();
  const Matrix g_relaxed = d.backward(Matrix::Constant(1, bsz, -1.0 / double(bsz)));
  const Matrix g_logits = relax_backward(batch.relaxed, g_relaxed, gen.spec.mode);
  gen.head.forward(batch.features);
  const Matrix g_feat = gen.head.backward(g_logits);

  std::vector<Vector> per_item(bsz);
  parallel_for(int(bsz), threads, [&](int i) {
    const Matrix jac = qsim::param_shift_grad(gen.circuit, gen.params, batch.init_angles.col(i));
    per_item[i] = jac.transpose() * g_feat.col(i);
  });
  if (gen.grad.size() != gen.params.size()) gen.grad = Vector::Zero(gen.params.size());
  for (const auto& v : per_item) gen.grad += v;
  return g_loss;
}

void GanTrainConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("qgan: " + what);
  };
  need(lr0 > 0, "lr0 must be positive");
  need(decay_start >= 0, "decay_start must be >= 0");
  need(decay_span > 0, "decay_span must be positive");
  need(max_epochs > 0, "max_epochs must be positive");
  need(batch_size > 0, "batch_size must be positive");
  need(gp_lambda >= 0, "gp_lambda must be >= 0");
  need(n_critic > 0, "n_critic must be positive");
  need(fd_patience > 0, "fd_patience must be positive");
  need(steps_per_epoch >= 0, "steps_per_epoch must be >= 0");
  need(fd_samples >= 2, "fd_samples must be >= 2");
  need(checkpoint_every > 0, "checkpoint_every must be positive");
  need(threads >= 0, "threads must be >= 0");
}

double lr_schedule(const GanTrainConfig& cfg, int epoch) {
  if (epoch < cfg.decay_start) return cfg.lr0;
  const double frac = double(epoch - cfg.decay_start) / double(cfg.decay_span);
  return cfg.lr0 * std::max(0.0, 1.0 - frac);
}

bool EarlyStopper::update(int epoch, double fd) {
  if (fd < best) {
    best = fd;
    best_epoch = epoch;
    since_best = 0;
    return false;
  }
  return ++since_best >= patience;
}

ParamCount count_generator_params(const HybridGenerator& gen) {
  return {qsim::n_params(gen.circuit), gen.head.parameter_count()};
}

long baseline_generator_params(mol::Mode mode) {
  const long dims[] = {32, 128, 256, 512, graph_dim(mode)};
  long total = 0;
  for (int i = 0; i + 1 < 5; ++i) total += dims[i] * dims[i + 1] + dims[i + 1];
  return total;
}

double parameter_reduction(const HybridGenerator& gen) {
  const auto c = count_generator_params(gen);
  return 1.0 - double(c.quantum + c.classical) / double(baseline_generator_params(gen.spec.mode));
}

GanState init_gan(const GanTrainConfig& cfg, const GeneratorSpec& spec) {
  cfg.validate();
  GanState s;
  s.cfg = cfg;
  s.gen = make_generator(spec, cfg.seed);
  s.disc = make_discriminator(spec.mode, cfg.seed);
  s.stopper.patience = cfg.fd_patience;
  return s;
}

namespace {

std::vector<int> sample_without_replacement(int n, int k, std::uint64_t seed) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  if (k >= n) return idx;
  Rng rng(seed);
  for (int i = 0; i < k; ++i) std::swap(idx[i], idx[i + int(rng.index(std::uint64_t(n - i)))]);
  idx.resize(k);
  return idx;
}

void write_checkpoints(const GanState& last, const std::optional<GanState>& best, const std::string& out_dir) {
  if (out_dir.empty()) return;
  io::write_json_file((std::filesystem::path(out_dir) / "checkpoint_last.json").string(), checkpoint_to_json(last));
  if (best)
    io::write_json_file((std::filesystem::path(out_dir) / "checkpoint_best.json").string(), checkpoint_to_json(*best));
}

}  // namespace

GanResult train_qgan(GanState state, const data::MoleculeDataset& dataset, const std::string& out_dir,
                     int epoch_budget) {
  const auto& cfg = state.cfg;
  cfg.validate();
  const mol::Mode mode = state.gen.spec.mode;
  const int n = int(dataset.molecules.size());
  if (n == 0) throw DataError("qgan: empty dataset");
  if (dataset.mode != mode) throw ConfigError("qgan: dataset mode does not match the generator");
  if (n < cfg.batch_size)
    throw ConfigError("qgan: dataset has " + std::to_string(n) + " molecules, fewer than batch_size " +
                      std::to_string(cfg.batch_size) + "; reduce batch_size");
  const int threads = resolve_threads(cfg.threads);
  const int bsz = cfg.batch_size;
  const int steps = cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch : (n + bsz - 1) / bsz;
  const int fd_n = std::min(cfg.fd_samples, n);
  const Matrix real_all = one_hot_batch(dataset.molecules, mode);

  GanResult result;
  if (state.stopper.best_epoch >= 0 && !out_dir.empty()) {
    const auto best_path = std::filesystem::path(out_dir) / "checkpoint_best.json";
    if (std::filesystem::exists(best_path)) result.best = checkpoint_from_json(io::read_json_file(best_path.string()));
  }
  state.stop_reason.clear();

  const int first_epoch = state.next_epoch;
  for (int epoch = state.next_epoch; epoch < cfg.max_epochs; ++epoch) {
    if (epoch_budget >= 0 && epoch - first_epoch >= epoch_budget) {
      state.stop_reason = "epoch_budget";
      write_checkpoints(state, result.best, out_dir);
      break;
    }
    const double lr = lr_schedule(cfg, epoch);
    double d_sum = 0.0, g_sum = 0.0;
    for (int s = 0; s < steps; ++s) {
      for (int c = 0; c < cfg.n_critic; ++c) {
        Rng rng(derive_seed(cfg.seed, kTagCritic, std::uint64_t(epoch), std::uint64_t(s * cfg.n_critic + c)));
        Matrix real(real_all.rows(), bsz);
        for (int b = 0; b < bsz; ++b) real.col(b) = real_all.col(Eigen::Index(rng.index(std::uint64_t(n))));
        const auto fake = generate_batch(state.gen, bsz, rng.next_u64(), threads);
        state.disc.zero_grad();
        const auto losses = wgan_losses(state.disc, real, fake.relaxed, cfg.gp_lambda, rng.next_u64(), true);
        nn::adam_step(state.adam_disc, state.disc.parameters("disc"), lr);
        d_sum += losses.d_loss;
      }
      const auto batch = generate_batch(state.gen, bsz, derive_seed(cfg.seed, kTagGen, std::uint64_t(epoch),
                                                                     std::uint64_t(s)),
                                        threads);
      state.gen.head.zero_grad();
      state.gen.grad.setZero();
      g_sum += generator_backward(state.gen, state.disc, batch, threads);
      nn::adam_step(state.adam_gen, state.gen.parameters(), lr);
    }

    // Evaluation on a fixed-per-epoch real sample and generated batch.
    std::vector<mol::MoleculeGraph> real_sample;
    for (int i : sample_without_replacement(n, fd_n, derive_seed(cfg.seed, kTagFdReal, std::uint64_t(epoch))))
      real_sample.push_back(dataset.molecules[i]);
    const auto gen_sample =
        generate_batch(state.gen, fd_n, derive_seed(cfg.seed, kTagFdGen, std::uint64_t(epoch)), threads).molecules;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.fd = metrics::descriptor_fd(real_sample, gen_sample);
    int valid = 0;
    for (const auto& m : gen_sample) {
      if (mol::is_valid(m).valid) ++valid;
      const auto p = mol::property_scores(m);
      rec.druglike_mean += p.druglike_proxy;
      rec.logp_mean += p.logp_proxy;
      rec.sa_mean += p.sa_proxy;
    }
    rec.validity_fraction = double(valid) / fd_n;
    rec.druglike_mean /= fd_n;
    rec.logp_mean /= fd_n;
    rec.sa_mean /= fd_n;
    rec.d_loss = d_sum / (steps * cfg.n_critic);
    rec.g_loss = g_sum / steps;
    if (!std::isfinite(rec.d_loss) || !std::isfinite(rec.g_loss) || !std::isfinite(rec.fd))
      throw NumericalError("qgan: non-finite loss at epoch " + std::to_string(epoch));
    state.records.push_back(rec);
    state.next_epoch = epoch + 1;

    const bool stop = state.stopper.update(epoch, rec.fd);
    if (state.stopper.best_epoch == epoch) result.best = state;
    if (stop) state.stop_reason = "early_stop_fd";
    else if (state.next_epoch == cfg.max_epochs) state.stop_reason = "max_epochs";
    if (stop || state.next_epoch == cfg.max_epochs || state.next_epoch % cfg.checkpoint_every == 0) {
      if (result.best) result.best->stop_reason = state.stop_reason;
      write_checkpoints(state, result.best, out_dir);
    }
    if (stop) break;
  }
  if (state.stop_reason.empty()) state.stop_reason = "max_epochs";
  result.last = std::move(state);
  return result;
}

io::Json config_to_json(const GanTrainConfig& c) {
  return io::Json{{"lr0", c.lr0},
                  {"decay_start", c.decay_start},
                  {"decay_span", c.decay_span},
                  {"max_epochs", c.max_epochs},
                  {"batch_size", c.batch_size},
                  {"gp_lambda", c.gp_lambda},
                  {"n_critic", c.n_critic},
                  {"fd_patience", c.fd_patience},
                  {"seed", c.seed},
                  {"steps_per_epoch", c.steps_per_epoch},
                  {"fd_samples", c.fd_samples},
                  {"checkpoint_every", c.checkpoint_every},
                  {"threads", c.threads}};
}

namespace {

template <typename T>
void read_key(const io::Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const io::Json::exception&) {
    throw ConfigError(std::string("qgan: bad value for '") + key + "'");
  }
}

}  // namespace

GanTrainConfig config_from_json(const io::Json& j) {
  GanTrainConfig c;
  read_key(j, "lr0", c.lr0);
  read_key(j, "decay_start", c.decay_start);
  read_key(j, "decay_span", c.decay_span);
  read_key(j, "max_epochs", c.max_epochs);
  read_key(j, "batch_size", c.batch_size);
  read_key(j, "gp_lambda", c.gp_lambda);
  read_key(j, "n_critic", c.n_critic);
  read_key(j, "fd_patience", c.fd_patience);
  read_key(j, "seed", c.seed);
  read_key(j, "steps_per_epoch", c.steps_per_epoch);
  read_key(j, "fd_samples", c.fd_samples);
  read_key(j, "checkpoint_every", c.checkpoint_every);
  read_key(j, "threads", c.threads);
  return c;
}

io::Json spec_to_json(const GeneratorSpec& s) {
  return io::Json{{"n_qubits", s.n_qubits},
                  {"n_layers", s.n_layers},
                  {"n_patches", s.n_patches},
                  {"mode", s.mode == mol::Mode::Small ? "small" : "large"}};
}

GeneratorSpec spec_from_json(const io::Json& j) {
  GeneratorSpec s;
  read_key(j, "n_qubits", s.n_qubits);
  read_key(j, "n_layers", s.n_layers);
  read_key(j, "n_patches", s.n_patches);
  std::string mode = "small";
  read_key(j, "mode", mode);
  if (mode == "small") s.mode = mol::Mode::Small;
  else if (mode == "large") s.mode = mol::Mode::Large;
  else throw ConfigError("qgan: mode must be 'small' or 'large'");
  return s;
}

namespace {

io::Json record_to_json(const EpochRecord& r) {
  return io::Json{{"epoch", r.epoch},       {"lr", r.lr},
                  {"fd", r.fd},             {"validity_fraction", r.validity_fraction},
                  {"druglike_mean", r.druglike_mean}, {"logp_mean", r.logp_mean},
                  {"sa_mean", r.sa_mean},   {"d_loss", r.d_loss},
                  {"g_loss", r.g_loss}};
}

EpochRecord record_from_json(const io::Json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.lr = j.at("lr").get<double>();
  r.fd = j.at("fd").get<double>();
  r.validity_fraction = j.at("validity_fraction").get<double>();
  r.druglike_mean = j.at("druglike_mean").get<double>();
  r.logp_mean = j.at("logp_mean").get<double>();
  r.sa_mean = j.at("sa_mean").get<double>();
  r.d_loss = j.at("d_loss").get<double>();
  r.g_loss = j.at("g_loss").get<double>();
  return r;
}

}  // namespace

io::Json checkpoint_to_json(const GanState& s) {
  io::Json records = io::Json::array();
  for (const auto& r : s.records) records.push_back(record_to_json(r));
  io::Json j{{"format_version", 1},
             {"command", "qgan"},
             {"config", config_to_json(s.cfg)},
             {"generator_spec", spec_to_json(s.gen.spec)},
             {"circuit", io::to_json(s.gen.circuit)},
             {"circuit_params", io::to_json(s.gen.params)},
             {"head", io::to_json(s.gen.head)},
             {"discriminator", io::to_json(s.disc)},
             {"adam_generator", io::to_json(s.adam_gen)},
             {"adam_discriminator", io::to_json(s.adam_disc)},
             // All draws are derived from (seed, epoch, step); the stream for
             // the next epoch is recorded for inspection.
             {"rng_state", Rng(derive_seed(s.cfg.seed, kTagCritic, std::uint64_t(s.next_epoch))).state()},
             {"next_epoch", s.next_epoch},
             {"best_fd", std::isfinite(s.stopper.best) ? io::Json(s.stopper.best) : io::Json(nullptr)},
             {"best_epoch", s.stopper.best_epoch},
             {"since_best", s.stopper.since_best},
             {"stop_reason", s.stop_reason},
             {"records", records}};
  return j;
}

GanState checkpoint_from_json(const io::Json& j) {
  try {
    if (j.at("format_version").get<int>() != 1 || j.at("command").get<std::string>() != "qgan")
      throw DataError("checkpoint: not a version-1 qgan checkpoint");
    GanState s;
    s.cfg = config_from_json(j.at("config"));
    s.gen.spec = spec_from_json(j.at("generator_spec"));
    s.gen.circuit = io::circuit_from_json(j.at("circuit"));
    s.gen.params = io::vector_from_json(j.at("circuit_params"));
    if (s.gen.params.size() != qsim::n_params(s.gen.circuit)) throw DataError("checkpoint: circuit parameter count");
    s.gen.grad = Vector::Zero(s.gen.params.size());
    s.gen.head = io::mlp_from_json(j.at("head"));
    s.disc = io::mlp_from_json(j.at("discriminator"));
    s.adam_gen = io::adam_from_json(j.at("adam_generator"));
    s.adam_disc = io::adam_from_json(j.at("adam_discriminator"));
    s.next_epoch = j.at("next_epoch").get<int>();
    s.stopper.patience = s.cfg.fd_patience;
    if (!j.at("best_fd").is_null()) s.stopper.best = j.at("best_fd").get<double>();
    s.stopper.best_epoch = j.at("best_epoch").get<int>();
    s.stopper.since_best = j.at("since_best").get<int>();
    s.stop_reason = j.at("stop_reason").get<std::string>();
    for (const auto& r : j.at("records")) s.records.push_back(record_from_json(r));
    return s;
  } catch (const io::Json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace drugqml::qgan
