#include "drugqml/datasets.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace drugqml::data {

using mol::BondKind;
using mol::Element;
using mol::MoleculeGraph;

MoleculeDataset enumerate_small_molecules(int max_atoms) {
  if (max_atoms < 1 || max_atoms > 4) throw ContractError("enumerate_small_molecules: max_atoms must be in [1, 4]");
  const Element elems[] = {Element::C, Element::N, Element::O, Element::F};
  const int slots = mol::max_atoms_for(mol::Mode::Small);
  std::map<std::pair<int, std::string>, MoleculeGraph> unique;
  for (int k = 1; k <= max_atoms; ++k) {
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) pairs.emplace_back(i, j);
    long n_atom_assign = 1, n_bond_assign = 1;
    for (int i = 0; i < k; ++i) n_atom_assign *= 4;
    for (size_t p = 0; p < pairs.size(); ++p) n_bond_assign *= 4;
    for (long a = 0; a < n_atom_assign; ++a) {
      MoleculeGraph g(slots);
      long code = a;
      for (int i = 0; i < k; ++i, code /= 4) g.set_atom(i, elems[code % 4]);
      for (long b = 0; b < n_bond_assign; ++b) {
        long bcode = b;
        for (const auto& [i, j] : pairs) {
          g.set_bond(i, j, static_cast<BondKind>(bcode % 4));
          bcode /= 4;
        }
        if (!mol::is_valid(g).valid) continue;
        unique.emplace(std::make_pair(k, mol::canonical_key(g)), g);
      }
    }
  }
  MoleculeDataset ds;
  ds.mode = mol::Mode::Small;
  for (auto& [key, g] : unique) ds.molecules.push_back(g);
  return ds;
}

MoleculeDataset gen_synthetic_molecules(int n, int min_atoms, int max_heavy, mol::Mode mode, std::uint64_t seed) {
  require(n >= 1, "gen_synthetic_molecules: n must be >= 1");
  require(min_atoms >= 1 && min_atoms <= max_heavy && max_heavy <= mol::max_atoms_for(mode),
          "gen_synthetic_molecules: atom range invalid for mode");
  const bool large = mode == mol::Mode::Large;
  struct Choice {
    Element e;
    double w;
  };
  std::vector<Choice> choices = {{Element::C, 0.6}, {Element::N, 0.15}, {Element::O, 0.15}, {Element::F, 0.05}};
  if (large) choices.push_back({Element::S, 0.05});
  double total_w = 0;
  for (const auto& c : choices) total_w += c.w;

  MoleculeDataset ds;
  ds.mode = mode;
  Rng rng(seed);
  const int slots = mol::max_atoms_for(mode);
  while (static_cast<int>(ds.molecules.size()) < n) {
    const int target = min_atoms + static_cast<int>(rng.index(max_heavy - min_atoms + 1));
    MoleculeGraph g(slots);
    std::vector<int> used(slots, 0);
    auto capacity = [&](int i) { return mol::max_valence(g.atom(i)) - used[i]; };
    auto pick_element = [&] {
      double r = rng.uniform() * total_w;
      for (const auto& c : choices) {
        if (r < c.w) return c.e;
        r -= c.w;
      }
      return choices.back().e;
    };
    // The first atom is never F so the tree can grow.
    Element first = pick_element();
    if (first == Element::F) first = Element::C;
    g.set_atom(0, first);
    int count = 1;
    for (; count < target; ++count) {
      std::vector<int> open;
      for (int i = 0; i < count; ++i)
        if (capacity(i) >= 1) open.push_back(i);
      if (open.empty()) break;
      const int parent = open[rng.index(open.size())];
      g.set_atom(count, pick_element());
      int order = 1;
      const int cap = std::min(capacity(parent), capacity(count));
      const double r = rng.uniform();
      if (cap >= 3 && r < 0.05)
        order = 3;
      else if (cap >= 2 && r < 0.2)
        order = 2;
      g.set_bond(parent, count, static_cast<BondKind>(order));
      used[parent] += order;
      used[count] += order;
    }
    // Up to two ring closures between atoms at least two bonds apart.
    for (int ring = 0; ring < 2 && count >= 3; ++ring) {
      if (rng.uniform() >= 0.3) continue;
      const int a = static_cast<int>(rng.index(count));
      const int b = static_cast<int>(rng.index(count));
      if (a == b || g.bond(a, b) != BondKind::None || capacity(a) < 1 || capacity(b) < 1) continue;
      g.set_bond(a, b, BondKind::Single);
      ++used[a];
      ++used[b];
    }
    if (mol::is_valid(g).valid) ds.molecules.push_back(std::move(g));
  }
  return ds;
}

// ---------------------------------------------------------------------------

MoleculeDataset parse_molecules(const std::string& text, MoleculeFormat format, mol::Mode mode) {
  MoleculeDataset ds;
  ds.mode = mode;
  std::vector<MoleculeGraph> candidates;
  if (format == MoleculeFormat::Sdf) {
    auto r = mol::parse_sdf(text, mode);
    candidates = std::move(r.molecules);
    ds.skipped = r.skipped;
  } else {
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        candidates.push_back(mol::from_jsonl_line(line, mode));
      } catch (const ContractError&) {
        ++ds.skipped;
      } catch (const DataError& e) {
        throw ParseError(e.what(), line_no);
      }
    }
  }
  for (auto& m : candidates) {
    if (mol::is_valid(m).valid)
      ds.molecules.push_back(std::move(m));
    else
      ++ds.skipped;
  }
  if (ds.molecules.empty())
    throw DataError("no valid molecules found (" + std::to_string(ds.skipped) + " records skipped)");
  return ds;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << bytes;
  if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace

MoleculeDataset load_molecules(const std::string& path, MoleculeFormat format, mol::Mode mode) {
  return parse_molecules(read_file(path), format, mode);
}

void write_jsonl(const MoleculeDataset& ds, const std::string& path) {
  std::string out;
  for (const auto& m : ds.molecules) out += mol::to_jsonl_line(m) + "\n";
  write_file(path, out);
}

// ---------------------------------------------------------------------------

VoxelDataset gen_synthetic_voxels(int n_per_class, int channels, int dim, std::uint64_t seed) {
  require(n_per_class >= 1, "gen_synthetic_voxels: n_per_class must be >= 1");
  require(channels >= 1 && dim >= 1, "gen_synthetic_voxels: channels and dim must be positive");
  constexpr double kCentres[kNumPocketClasses][3] = {{0.3, 0.3, 0.3}, {0.7, 0.7, 0.3}, {0.5, 0.3, 0.7}};
  const double width = dim / 6.0;
  VoxelDataset ds;
  Rng rng(seed);
  for (int i = 0; i < n_per_class * kNumPocketClasses; ++i) {
    const int c = i % kNumPocketClasses;
    VoxelGrid g;
    g.channels = channels;
    g.dim = dim;
    g.label = c;
    g.data = nn::Tensor({channels, dim, dim, dim});
    double centre[3];
    for (int a = 0; a < 3; ++a) centre[a] = kCentres[c][a] * dim + rng.uniform(-dim / 16.0, dim / 16.0);
    Eigen::Index idx = 0;
    for (int ch = 0; ch < channels; ++ch) {
      const double amp = 0.5 + 0.5 * std::cos(2 * std::numbers::pi * (double(ch) / channels + double(c) / 3.0));
      for (int z = 0; z < dim; ++z)
        for (int y = 0; y < dim; ++y)
          for (int x = 0; x < dim; ++x) {
            const double r2 = (z - centre[0]) * (z - centre[0]) + (y - centre[1]) * (y - centre[1]) +
                              (x - centre[2]) * (x - centre[2]);
            g.data.data(idx++) = amp * std::exp(-r2 / (2 * width * width)) + 0.1 * rng.normal();
          }
    }
    ++ds.class_counts[c];
    ds.samples.push_back(std::move(g));
  }
  return ds;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, size_t& pos) {
  if (pos + 4 > in.size()) throw DataError("VOXB: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

}  // namespace

std::string encode_voxb(const VoxelDataset& ds) {
  std::string out = "VOXB";
  const int channels = ds.samples.empty() ? 0 : ds.samples.front().channels;
  const int dim = ds.samples.empty() ? 0 : ds.samples.front().dim;
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(ds.samples.size()));
  put_u32(out, static_cast<std::uint32_t>(channels));
  put_u32(out, static_cast<std::uint32_t>(dim));
  for (const auto& s : ds.samples) {
    require(s.channels == channels && s.dim == dim, "VOXB: samples must share channels and dim");
    out.push_back(static_cast<char>(s.label));
    for (Eigen::Index i = 0; i < s.data.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(float(s.data.data(i))));
  }
  return out;
}

VoxelDataset decode_voxb(const std::string& bytes) {
  if (bytes.size() < 4 || bytes.compare(0, 4, "VOXB") != 0) throw DataError("VOXB: bad magic");
  size_t pos = 4;
  const auto version = get_u32(bytes, pos);
  if (version != 1) throw DataError("VOXB: unsupported version " + std::to_string(version));
  const auto n = get_u32(bytes, pos), channels = get_u32(bytes, pos), dim = get_u32(bytes, pos);
  const std::uint64_t per = std::uint64_t(channels) * dim * dim * dim;
  if (bytes.size() - pos != n * (1 + 4 * per)) throw DataError("VOXB: payload size does not match header");
  VoxelDataset ds;
  for (std::uint32_t s = 0; s < n; ++s) {
    VoxelGrid g;
    g.channels = static_cast<int>(channels);
    g.dim = static_cast<int>(dim);
    g.label = static_cast<unsigned char>(bytes[pos++]);
    if (g.label >= kNumPocketClasses) throw DataError("VOXB: label out of range in sample " + std::to_string(s));
    g.data = nn::Tensor({g.channels, g.dim, g.dim, g.dim});
    for (std::uint64_t i = 0; i < per; ++i)
      g.data.data(static_cast<Eigen::Index>(i)) = std::bit_cast<float>(get_u32(bytes, pos));
    if (!g.data.data.allFinite()) throw DataError("VOXB: non-finite voxel in sample " + std::to_string(s));
    ++ds.class_counts[g.label];
    ds.samples.push_back(std::move(g));
  }
  return ds;
}

void write_voxb(const VoxelDataset& ds, const std::string& path) { write_file(path, encode_voxb(ds)); }

VoxelDataset read_voxb(const std::string& path) { return decode_voxb(read_file(path)); }

}  // namespace drugqml::data
