#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drugqml/datasets.hpp"
#include "drugqml/nn.hpp"
#include "drugqml/qsim.hpp"
#include "drugqml/serialize.hpp"

namespace drugqml::quanv {

using nn::Matrix;
using nn::Tensor;
using nn::Vector;

struct PatchPos {
  int pair = 0, z = 0, y = 0, x = 0;
  friend bool operator==(const PatchPos&, const PatchPos&) = default;
};

struct Patch {
  PatchPos pos;
  Tensor block;  // [channel_group, patch, patch, patch]
};

/// Non-overlapping blocks in (pair, z, y, x) order.
std::vector<Patch> extract_patches(const data::VoxelGrid& grid, int patch = 4, int stride = 4,
                                   int channel_group = 2);

/// Frozen 4-qubit filter: random prefix -> RY angle encoding -> RY(w) layer
/// plus CNOT ring. Encoding angles are pi * tanh(P x) for a fixed
/// row-normalised Gaussian projection P (4 x patch values).
struct QuanvFilter {
  static constexpr int kQubits = 4;
  std::uint64_t seed = 0;
  int prefix_depth = 2;
  qsim::ParamCircuit circuit;  // prefix, encoding and entangler in one template
  Vector params;               // frozen values; encoding slots overwritten per patch
  int encode_offset = 0;       // first encoding slot
  Matrix projection;           // kQubits x patch_values
};

QuanvFilter make_filter(std::uint64_t seed, int prefix_depth = 2, int patch_values = 128);

/// 4 Z expectations for one flattened patch.
Vector quanv_patch(const QuanvFilter& f, const Eigen::Ref<const Vector>& patch);

/// Output [channels/2, dim/4, dim/4, dim/4, 4].
Tensor quanvolve(const data::VoxelGrid& grid, const QuanvFilter& f, int threads = 1);

/// Seeded conv with 2 * channels outputs, k = stride = 4, no activation.
nn::Conv3DLayer make_cnn(int channels, std::uint64_t seed, bool trainable);
Tensor random_cnn_features(const data::VoxelGrid& grid, std::uint64_t seed);

enum class Variant { QuanvMlp, RandomCnnMlp, TrainableCnnMlp };
const char* variant_name(Variant v);
Variant variant_from_name(const std::string& s);

/// Fold index per sample: shuffle within class, then deal round-robin with
/// one pointer carried across classes.
std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, std::uint64_t seed);

struct QuanvConfig {
  Variant variant = Variant::QuanvMlp;
  int folds = 2;
  int epochs = 50;
  int batch_size = 32;
  double lr = 1e-5;
  std::uint64_t seed = 0;
  int prefix_depth = 2;
  int hidden = 256;
  int checkpoint_every = 10;
  int threads = 0;

  void validate() const;  // ConfigError
};

struct FoldRecord {
  int fold = 0;
  int epoch = 0;
  double train_loss = 0.0, val_loss = 0.0;
  double train_acc = 0.0, val_acc = 0.0;
};

/// Training state; folds run sequentially, each with a freshly initialised
/// head (and kernels) derived from (seed, fold).
struct QuanvState {
  QuanvConfig cfg;
  int fold = 0;
  int next_epoch = 0;
  nn::Mlp head;
  nn::Conv3DLayer conv;  // used by the CNN variants
  nn::AdamState adam;
  std::vector<FoldRecord> records;
};

// Shapes (feature count, conv channels) come from the dataset.
QuanvState init_quanv(const QuanvConfig& cfg, const data::VoxelDataset& ds);

/// Flattened features of every sample for the frozen extractor of cfg.
Matrix extract_features(const QuanvConfig& cfg, const data::VoxelDataset& ds, nn::Conv3DLayer* conv = nullptr);

/// With a non-empty out_dir, checkpoint_last.json is written every
/// checkpoint_every epochs and at the end. A non-negative epoch_budget stops
/// after that many epochs (summed over folds) for a later resume.
QuanvState train_pipeline(QuanvState state, const data::VoxelDataset& ds, const std::string& out_dir = "",
                          int epoch_budget = -1);

io::Json checkpoint_to_json(const QuanvState& s);
QuanvState checkpoint_from_json(const io::Json& j);
io::Json config_to_json(const QuanvConfig& c);
QuanvConfig config_from_json(const io::Json& j);

}  // namespace drugqml::quanv
