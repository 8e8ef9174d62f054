#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "drugqml/molgraph.hpp"
#include "drugqml/nn.hpp"

namespace drugqml::data {

struct MoleculeDataset {
  mol::Mode mode = mol::Mode::Small;
  std::vector<mol::MoleculeGraph> molecules;
  int skipped = 0;
};

/// Every valid heavy-atom graph over {C, N, O, F} with 1..max_atoms atoms and
/// bonds in {none, single, double, triple}, one representative per
/// isomorphism class, ordered by (atom count, canonical key).
MoleculeDataset enumerate_small_molecules(int max_atoms);

/// Seeded random valid molecules (random spanning tree, occasional higher
/// bond orders and ring closures) with min_atoms..max_heavy heavy atoms.
MoleculeDataset gen_synthetic_molecules(int n, int min_atoms, int max_heavy, mol::Mode mode, std::uint64_t seed);

enum class MoleculeFormat { Jsonl, Sdf };

MoleculeDataset load_molecules(const std::string& path, MoleculeFormat format, mol::Mode mode);
MoleculeDataset parse_molecules(const std::string& text, MoleculeFormat format, mol::Mode mode);
void write_jsonl(const MoleculeDataset& ds, const std::string& path);

enum class PocketClass : std::uint8_t { Nucleotide = 0, Heme = 1, Other = 2 };
inline constexpr int kNumPocketClasses = 3;

struct VoxelGrid {
  int channels = 0;
  int dim = 0;
  nn::Tensor data;  // [channels, dim, dim, dim]
  int label = 0;
};

struct VoxelDataset {
  std::vector<VoxelGrid> samples;
  std::array<int, kNumPocketClasses> class_counts{};
};

/// Class c: Gaussian blob at a class-specific centre with a class-specific
/// per-channel intensity signature, plus N(0, 0.1^2) voxel noise. Samples are
/// interleaved by class (sample i has label i % 3).
VoxelDataset gen_synthetic_voxels(int n_per_class, int channels, int dim, std::uint64_t seed);

/// "VOXB" binary: magic, u32 version=1, u32 n_samples, u32 channels, u32 dim,
/// then per sample u8 label + channels*dim^3 little-endian f32.
void write_voxb(const VoxelDataset& ds, const std::string& path);
VoxelDataset read_voxb(const std::string& path);
std::string encode_voxb(const VoxelDataset& ds);
VoxelDataset decode_voxb(const std::string& bytes);

}  // namespace drugqml::data
