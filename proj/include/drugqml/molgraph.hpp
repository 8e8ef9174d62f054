#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drugqml/common.hpp"

namespace drugqml::mol {

enum class Element : std::uint8_t { None, C, N, O, S, F, X };
enum class BondKind : std::uint8_t { None, Single, Double, Triple, Aromatic };
enum class Mode { Small, Large };

const char* element_symbol(Element e);
// "C", "N", ...; "*" and "X" both map to X. Throws ContractError otherwise.
Element element_from_symbol(const std::string& s);
const char* bond_name(BondKind b);
BondKind bond_from_name(const std::string& s);
double bond_order(BondKind b);
int max_valence(Element e);

struct AtomAlphabet {
  std::vector<Element> symbols;  // symbols[0] == Element::None

  static const AtomAlphabet& small();  // {0, C, N, O, F}
  static const AtomAlphabet& large();  // {0, C, N, O, S, F, X}
  static const AtomAlphabet& for_mode(Mode m);
  int size() const { return static_cast<int>(symbols.size()); }
  // -1 if absent.
  int index_of(Element e) const;
};

struct BondAlphabet {
  static constexpr int kSize = 5;  // {0, SINGLE, DOUBLE, TRIPLE, AROMATIC}
  static BondKind kind(int channel) { return static_cast<BondKind>(channel); }
  static int channel(BondKind b) { return static_cast<int>(b); }
};

int max_atoms_for(Mode m);  // 9 (QM9 heavy atoms) or 32

/// Typed atom vector plus symmetric typed bond matrix over a fixed number of
/// atom slots. Hydrogens are implicit.
class MoleculeGraph {
 public:
  MoleculeGraph() = default;
  explicit MoleculeGraph(int max_atoms);

  int max_atoms() const { return n_; }
  Element atom(int i) const { return atoms_[i]; }
  void set_atom(int i, Element e);
  BondKind bond(int i, int j) const { return bonds_[static_cast<size_t>(i) * n_ + j]; }
  // Sets (i,j) and (j,i). i != j.
  void set_bond(int i, int j, BondKind b);

  const std::vector<Element>& atoms() const { return atoms_; }
  int heavy_atom_count() const;
  int bond_count() const;

  // Symmetric, empty diagonal, no bond touching an empty slot.
  bool structurally_sound() const;

  friend bool operator==(const MoleculeGraph&, const MoleculeGraph&) = default;

 private:
  int n_ = 0;
  std::vector<Element> atoms_;
  std::vector<BondKind> bonds_;
};

/// Argmax decode. atom_logits: max_atoms x |A|; bond_logits: (max_atoms^2) x
/// |B| with row i * max_atoms + j. Only the upper triangle is read.
MoleculeGraph decode_graph(const Eigen::MatrixXd& atom_logits, const Eigen::MatrixXd& bond_logits,
                           Mode mode);

struct Validity {
  bool valid = false;
  std::string reason;
};

Validity is_valid(const MoleculeGraph& mol);

/// Cycle rank over the non-empty subgraph: bonds - atoms + components.
int count_rings(const MoleculeGraph& mol);

/// Heuristic stand-ins for logP, drug-likeness and synthetic accessibility.
/// Fixed constants; not RDKit descriptors.
struct PropertyScores {
  double logp_proxy = 0.0;
  double druglike_proxy = 0.0;
  double sa_proxy = 0.0;
};

PropertyScores property_scores(const MoleculeGraph& mol);

/// Deterministic DFS SMILES (lowest index root, neighbours in index order,
/// ring closures numbered in discovery order). Throws ContractError for
/// invalid molecules.
std::string to_smiles(const MoleculeGraph& mol);

/// One-hot encoding [atoms (max_atoms*|A|) ; bonds (max_atoms^2*|B|)].
Eigen::VectorXd one_hot(const MoleculeGraph& mol, Mode mode);

struct SdfResult {
  std::vector<MoleculeGraph> molecules;
  int skipped = 0;
};

/// V2000 connection-table subset. Explicit hydrogens are dropped; in large
/// mode unknown elements map to X, in small mode such records are skipped.
SdfResult parse_sdf(const std::string& text, Mode mode);

/// {"atoms": ["C","O"], "bonds": [[0,1,"DOUBLE"]]}
std::string to_jsonl_line(const MoleculeGraph& mol);
MoleculeGraph from_jsonl_line(const std::string& line, Mode mode);

/// Canonical key under all atom permutations (exhaustive; small graphs only).
std::string canonical_key(const MoleculeGraph& mol);

}  // namespace drugqml::mol
