#include "drugqml/quanv.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "drugqml/metrics.hpp"

namespace drugqml::quanv {

namespace {

constexpr int kPatch = 4;
constexpr int kGroup = 2;

enum : std::uint64_t { kTagProjection = 11, kTagEntangler = 12, kTagCnn = 13, kTagHead = 14, kTagSplit = 15,
                       kTagShuffle = 16 };

Eigen::Index at(const data::VoxelGrid& g, int c, int z, int y, int x) {
  const Eigen::Index d = g.dim;
  return ((Eigen::Index(c) * d + z) * d + y) * d + x;
}

void check_grid(const data::VoxelGrid& g, int patch, int stride, int group) {
  require(patch >= 1 && stride >= 1 && group >= 1, "extract_patches: sizes must be positive");
  require(g.data.size() == Eigen::Index(g.channels) * g.dim * g.dim * g.dim, "voxel grid: data size mismatch");
  if (g.dim % stride != 0 || g.dim < patch)
    throw ContractError("extract_patches: dim " + std::to_string(g.dim) + " not divisible by stride " +
                        std::to_string(stride));
  if (g.channels % group != 0)
    throw ContractError("extract_patches: " + std::to_string(g.channels) + " channels not divisible by group " +
                        std::to_string(group));
}

}  // namespace

std::vector<Patch> extract_patches(const data::VoxelGrid& grid, int patch, int stride, int channel_group) {
  check_grid(grid, patch, stride, channel_group);
  const int n = (grid.dim - patch) / stride + 1;
  std::vector<Patch> out;
  out.reserve(size_t(grid.channels / channel_group) * n * n * n);
  for (int p = 0; p < grid.channels / channel_group; ++p)
    for (int z = 0; z < n; ++z)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          Patch pt{{p, z, y, x}, Tensor({channel_group, patch, patch, patch})};
          Eigen::Index k = 0;
          for (int c = 0; c < channel_group; ++c)
            for (int dz = 0; dz < patch; ++dz)
              for (int dy = 0; dy < patch; ++dy)
                for (int dx = 0; dx < patch; ++dx)
                  pt.block.data(k++) =
                      grid.data.data(at(grid, p * channel_group + c, z * stride + dz, y * stride + dy, x * stride + dx));
          out.push_back(std::move(pt));
        }
  return out;
}

QuanvFilter make_filter(std::uint64_t seed, int prefix_depth, int patch_values) {
  require(prefix_depth >= 0 && patch_values >= 1, "make_filter: bad sizes");
  QuanvFilter f;
  f.seed = seed;
  f.prefix_depth = prefix_depth;
  const int nq = QuanvFilter::kQubits;
  auto& c = f.circuit;
  c.n_qubits = nq;
  c.n_layers = 1;
  std::vector<double> values;
  if (prefix_depth > 0) {
    const auto prefix = qsim::random_circuit(seed, nq, prefix_depth);
    c.gates = prefix.circuit.gates;
    values.assign(prefix.params.data(), prefix.params.data() + prefix.params.size());
  }
  f.encode_offset = int(values.size());
  for (int q = 0; q < nq; ++q) {
    c.gates.push_back({qsim::GateKind::RY, q, std::nullopt, int(values.size())});
    values.push_back(0.0);
  }
  Rng ent(derive_seed(seed, kTagEntangler));
  for (int q = 0; q < nq; ++q) {
    c.gates.push_back({qsim::GateKind::RY, q, std::nullopt, int(values.size())});
    values.push_back(ent.uniform(0.0, 2 * std::numbers::pi));
  }
  for (int q = 0; q < nq; ++q) c.gates.push_back({qsim::GateKind::CNOT, (q + 1) % nq, q, std::nullopt});
  c.n_params = int(values.size());
  c.validate();
  f.params = Eigen::Map<const Vector>(values.data(), Eigen::Index(values.size()));

  Rng pr(derive_seed(seed, kTagProjection));
  f.projection.resize(nq, patch_values);
  for (int r = 0; r < nq; ++r) {
    for (int k = 0; k < patch_values; ++k) f.projection(r, k) = pr.normal();
    f.projection.row(r).normalize();
  }
  return f;
}

Vector quanv_patch(const QuanvFilter& f, const Eigen::Ref<const Vector>& patch) {
  require(patch.size() == f.projection.cols(), "quanv_patch: patch size does not match the projection");
  Vector params = f.params;
  params.segment(f.encode_offset, QuanvFilter::kQubits) =
      (std::numbers::pi * (f.projection * patch).array().tanh()).matrix();
  return qsim::run_circuit(f.circuit, params, Vector::Zero(QuanvFilter::kQubits));
}

Tensor quanvolve(const data::VoxelGrid& grid, const QuanvFilter& f, int threads) {
  const auto patches = extract_patches(grid, kPatch, kPatch, kGroup);
  const int n = grid.dim / kPatch;
  Tensor out({grid.channels / kGroup, n, n, n, QuanvFilter::kQubits});
  parallel_for(int(patches.size()), threads, [&](int i) {
    out.data.segment(Eigen::Index(i) * QuanvFilter::kQubits, QuanvFilter::kQubits) =
        quanv_patch(f, patches[i].block.data);
  });
  return out;
}

nn::Conv3DLayer make_cnn(int channels, std::uint64_t seed, bool trainable) {
  nn::Conv3DLayer conv(channels, 2 * channels, kPatch, kPatch, trainable);
  Rng rng(derive_seed(seed, kTagCnn));
  conv.init(rng);
  return conv;
}

Tensor random_cnn_features(const data::VoxelGrid& grid, std::uint64_t seed) {
  auto conv = make_cnn(grid.channels, seed, false);
  return conv.forward(Tensor({grid.channels, grid.dim, grid.dim, grid.dim}, grid.data.data));
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::QuanvMlp: return "quanv_mlp";
    case Variant::RandomCnnMlp: return "random_cnn_mlp";
    case Variant::TrainableCnnMlp: return "trainable_cnn_mlp";
  }
  return "?";
}

Variant variant_from_name(const std::string& s) {
  for (auto v : {Variant::QuanvMlp, Variant::RandomCnnMlp, Variant::TrainableCnnMlp})
    if (s == variant_name(v)) return v;
  throw ConfigError("unknown quanv variant '" + s + "'");
}

std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, std::uint64_t seed) {
  require(folds >= 2, "stratified_folds: need at least 2 folds");
  const int k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<int>> by_class(k);
  for (size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0, "stratified_folds: negative label");
    by_class[labels[i]].push_back(int(i));
  }
  Rng rng(seed);
  std::vector<int> out(labels.size(), 0);
  int next = 0;
  for (auto& members : by_class) {
    for (int i = int(members.size()) - 1; i > 0; --i) std::swap(members[i], members[rng.index(std::uint64_t(i + 1))]);
    for (int idx : members) {
      out[idx] = next;
      next = (next + 1) % folds;
    }
  }
  return out;
}

void QuanvConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("quanv: " + what);
  };
  need(folds >= 2, "folds must be >= 2");
  need(epochs >= 1, "epochs must be positive");
  need(batch_size >= 1, "batch_size must be positive");
  need(lr > 0, "lr must be positive");
  need(prefix_depth >= 0, "prefix_depth must be >= 0");
  need(hidden >= 1, "hidden must be positive");
  need(checkpoint_every >= 1, "checkpoint_every must be positive");
  need(threads >= 0, "threads must be >= 0");
}

namespace {

Eigen::Index feature_count(const data::VoxelDataset& ds) {
  require(!ds.samples.empty(), "quanv: empty dataset");
  const auto& g = ds.samples.front();
  // Quanv: (C/2) * (d/4)^3 * 4; CNN: 2C * (d/4)^3 -- the same number.
  const Eigen::Index n = g.dim / kPatch;
  return Eigen::Index(2) * g.channels * n * n * n;
}

void reset_fold(QuanvState& s, int fold, const data::VoxelDataset& ds) {
  s.fold = fold;
  s.next_epoch = 0;
  s.adam = nn::AdamState{};
  s.head = nn::Mlp({int(feature_count(ds)), s.cfg.hidden, data::kNumPocketClasses}, nn::Activation::LeakyRelu,
                   nn::Activation::None);
  Rng rng(derive_seed(s.cfg.seed, kTagHead, std::uint64_t(fold)));
  s.head.init(rng);
  if (s.cfg.variant != Variant::QuanvMlp)
    s.conv = make_cnn(ds.samples.front().channels, s.cfg.seed, s.cfg.variant == Variant::TrainableCnnMlp);
}

Tensor grid_tensor(const data::VoxelGrid& g) { return Tensor({g.channels, g.dim, g.dim, g.dim}, g.data.data); }

void check_dataset(const data::VoxelDataset& ds, int folds) {
  if (ds.samples.empty()) throw DataError("quanv: empty dataset");
  std::array<int, data::kNumPocketClasses> counts{};
  const auto& first = ds.samples.front();
  for (const auto& s : ds.samples) {
    if (s.channels != first.channels || s.dim != first.dim) throw DataError("quanv: mixed grid shapes");
    if (s.label < 0 || s.label >= data::kNumPocketClasses) throw DataError("quanv: label out of range");
    ++counts[s.label];
  }
  for (int c = 0; c < data::kNumPocketClasses; ++c) {
    if (counts[c] == 0) throw DataError("quanv: class " + std::to_string(c) + " absent from dataset");
    if (counts[c] < folds)
      throw DataError("quanv: class " + std::to_string(c) + " has fewer samples than folds");
  }
}

metrics::ClassificationMetrics evaluate(nn::Mlp& head, const Matrix& x, const std::vector<int>& labels) {
  return metrics::classification_metrics(head.forward(x).transpose(), labels);
}

}  // namespace

QuanvState init_quanv(const QuanvConfig& cfg, const data::VoxelDataset& ds) {
  cfg.validate();
  check_dataset(ds, cfg.folds);
  QuanvState s;
  s.cfg = cfg;
  reset_fold(s, 0, ds);
  return s;
}

Matrix extract_features(const QuanvConfig& cfg, const data::VoxelDataset& ds, nn::Conv3DLayer* conv) {
  const Eigen::Index nf = feature_count(ds);
  Matrix x(nf, Eigen::Index(ds.samples.size()));
  const int threads = resolve_threads(cfg.threads);
  if (cfg.variant == Variant::QuanvMlp) {
    const auto f = make_filter(cfg.seed, cfg.prefix_depth, kGroup * kPatch * kPatch * kPatch);
    parallel_for(int(ds.samples.size()), threads, [&](int i) { x.col(i) = quanvolve(ds.samples[i], f).data; });
  } else {
    const nn::Conv3DLayer base = conv ? *conv : make_cnn(ds.samples.front().channels, cfg.seed, false);
    parallel_for(int(ds.samples.size()), threads, [&](int i) {
      auto local = base;
      x.col(i) = local.forward(grid_tensor(ds.samples[i])).data;
    });
  }
  return x;
}

QuanvState train_pipeline(QuanvState state, const data::VoxelDataset& ds, const std::string& out_dir,
                          int epoch_budget) {
  const auto& cfg = state.cfg;
  cfg.validate();
  check_dataset(ds, cfg.folds);
  const bool trainable = cfg.variant == Variant::TrainableCnnMlp;
  const int n = int(ds.samples.size());
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = ds.samples[i].label;
  const auto fold_of = stratified_folds(labels, cfg.folds, derive_seed(cfg.seed, kTagSplit));
  const Matrix cached = trainable ? Matrix() : extract_features(cfg, ds);
  auto write = [&] {
    if (!out_dir.empty())
      io::write_json_file((std::filesystem::path(out_dir) / "checkpoint_last.json").string(), checkpoint_to_json(state));
  };

  for (int ran = 0; state.fold < cfg.folds; ++ran) {
    if (epoch_budget >= 0 && ran >= epoch_budget) {
      write();
      break;
    }
    if (state.next_epoch >= cfg.epochs) {
      if (state.fold + 1 >= cfg.folds) break;
      reset_fold(state, state.fold + 1, ds);
      --ran;
      continue;
    }
    const int fold = state.fold, epoch = state.next_epoch;
    std::vector<int> train, val;
    for (int i = 0; i < n; ++i) (fold_of[i] == fold ? val : train).push_back(i);

    Rng rng(derive_seed(cfg.seed, kTagShuffle, std::uint64_t(fold), std::uint64_t(epoch)));
    for (int i = int(train.size()) - 1; i > 0; --i) std::swap(train[i], train[rng.index(std::uint64_t(i + 1))]);

    for (size_t start = 0; start < train.size(); start += size_t(cfg.batch_size)) {
      const int b = int(std::min(train.size() - start, size_t(cfg.batch_size)));
      Matrix xb(state.head.in(), b);
      Matrix onehot = Matrix::Zero(data::kNumPocketClasses, b);
      for (int j = 0; j < b; ++j) {
        const int idx = train[start + j];
        xb.col(j) = trainable ? state.conv.forward(grid_tensor(ds.samples[idx])).data : Vector(cached.col(idx));
        onehot(labels[idx], j) = 1.0;
      }
      const Matrix logits = state.head.forward(xb);
      Matrix prob = (logits.rowwise() - logits.colwise().maxCoeff()).array().exp().matrix();
      prob.array().rowwise() /= prob.colwise().sum().array();
      state.head.zero_grad();
      const Matrix dx = state.head.backward((prob - onehot) / double(b));
      auto params = state.head.parameters("head");
      if (trainable) {
        state.conv.grad_kernels.setZero();
        for (int j = 0; j < b; ++j) {
          const auto& g = ds.samples[train[start + j]];
          state.conv.forward(grid_tensor(g));
          Tensor go(std::vector<Eigen::Index>{state.conv.out_channels(), g.dim / kPatch, g.dim / kPatch, g.dim / kPatch},
                    dx.col(j));
          state.conv.backward(go);
        }
        params.push_back({"conv.kernels", state.conv.kernels.data(), state.conv.grad_kernels.data(),
                          state.conv.kernels.size()});
      }
      nn::adam_step(state.adam, params, cfg.lr);
    }

    const Matrix feats = trainable ? extract_features(cfg, ds, &state.conv) : cached;
    Matrix xt(feats.rows(), Eigen::Index(train.size())), xv(feats.rows(), Eigen::Index(val.size()));
    std::vector<int> lt, lv;
    std::sort(train.begin(), train.end());
    for (size_t j = 0; j < train.size(); ++j) {
      xt.col(Eigen::Index(j)) = feats.col(train[j]);
      lt.push_back(labels[train[j]]);
    }
    for (size_t j = 0; j < val.size(); ++j) {
      xv.col(Eigen::Index(j)) = feats.col(val[j]);
      lv.push_back(labels[val[j]]);
    }
    const auto mt = evaluate(state.head, xt, lt), mv = evaluate(state.head, xv, lv);
    if (!std::isfinite(mt.cross_entropy) || !std::isfinite(mv.cross_entropy))
      throw NumericalError("quanv: non-finite loss at fold " + std::to_string(fold) + " epoch " + std::to_string(epoch));
    state.records.push_back({fold, epoch, mt.cross_entropy, mv.cross_entropy, mt.accuracy, mv.accuracy});
    state.next_epoch = epoch + 1;
    const bool last = state.next_epoch == cfg.epochs && fold + 1 == cfg.folds;
    if (last || state.next_epoch % cfg.checkpoint_every == 0 || state.next_epoch == cfg.epochs) write();
  }
  return state;
}

io::Json config_to_json(const QuanvConfig& c) {
  return io::Json{{"variant", variant_name(c.variant)},
                  {"folds", c.folds},
                  {"epochs", c.epochs},
                  {"batch_size", c.batch_size},
                  {"lr", c.lr},
                  {"seed", c.seed},
                  {"prefix_depth", c.prefix_depth},
                  {"hidden", c.hidden},
                  {"checkpoint_every", c.checkpoint_every},
                  {"threads", c.threads}};
}

QuanvConfig config_from_json(const io::Json& j) {
  QuanvConfig c;
  try {
    if (j.contains("variant")) c.variant = variant_from_name(j["variant"].get<std::string>());
    if (j.contains("folds")) c.folds = j["folds"].get<int>();
    if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
    if (j.contains("lr")) c.lr = j["lr"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("prefix_depth")) c.prefix_depth = j["prefix_depth"].get<int>();
    if (j.contains("hidden")) c.hidden = j["hidden"].get<int>();
    if (j.contains("checkpoint_every")) c.checkpoint_every = j["checkpoint_every"].get<int>();
    if (j.contains("threads")) c.threads = j["threads"].get<int>();
  } catch (const io::Json::exception& e) {
    throw ConfigError(std::string("quanv: ") + e.what());
  }
  return c;
}

io::Json checkpoint_to_json(const QuanvState& s) {
  io::Json records = io::Json::array();
  for (const auto& r : s.records)
    records.push_back({{"fold", r.fold},
                       {"epoch", r.epoch},
                       {"train_loss", r.train_loss},
                       {"val_loss", r.val_loss},
                       {"train_acc", r.train_acc},
                       {"val_acc", r.val_acc}});
  io::Json j{{"format_version", 1},
             {"command", "quanv"},
             {"config", config_to_json(s.cfg)},
             {"fold", s.fold},
             {"next_epoch", s.next_epoch},
             {"head", io::to_json(s.head)},
             {"adam", io::to_json(s.adam)},
             {"records", records}};
  if (s.cfg.variant == Variant::QuanvMlp) {
    j["circuit"] = io::to_json(qsim::Circuit(make_filter(s.cfg.seed, s.cfg.prefix_depth).circuit));
  } else {
    j["conv"] = {{"in_channels", s.conv.in_channels()}, {"kernels", io::to_json(s.conv.kernels)}};
  }
  return j;
}

QuanvState checkpoint_from_json(const io::Json& j) {
  try {
    if (j.at("format_version").get<int>() != 1 || j.at("command").get<std::string>() != "quanv")
      throw DataError("checkpoint: not a version-1 quanv checkpoint");
    QuanvState s;
    s.cfg = config_from_json(j.at("config"));
    s.fold = j.at("fold").get<int>();
    s.next_epoch = j.at("next_epoch").get<int>();
    s.head = io::mlp_from_json(j.at("head"));
    s.adam = io::adam_from_json(j.at("adam"));
    if (j.contains("conv")) {
      const int c = j["conv"].at("in_channels").get<int>();
      s.conv = nn::Conv3DLayer(c, 2 * c, kPatch, kPatch, s.cfg.variant == Variant::TrainableCnnMlp);
      const Matrix k = io::matrix_from_json(j["conv"].at("kernels"));
      if (k.rows() != s.conv.kernels.rows() || k.cols() != s.conv.kernels.cols())
        throw DataError("checkpoint: conv kernel shape");
      s.conv.kernels = k;
    }
    for (const auto& r : j.at("records"))
      s.records.push_back({r.at("fold").get<int>(), r.at("epoch").get<int>(), r.at("train_loss").get<double>(),
                           r.at("val_loss").get<double>(), r.at("train_acc").get<double>(),
                           r.at("val_acc").get<double>()});
    return s;
  } catch (const io::Json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace drugqml::quanv
