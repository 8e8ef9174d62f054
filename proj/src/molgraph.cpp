#include "drugqml/molgraph.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace drugqml::mol {

const char* element_symbol(Element e) {
  switch (e) {
    case Element::None: return "";
    case Element::C: return "C";
    case Element::N: return "N";
    case Element::O: return "O";
    case Element::S: return "S";
    case Element::F: return "F";
    case Element::X: return "X";
  }
  return "?";
}

Element element_from_symbol(const std::string& s) {
  if (s == "C") return Element::C;
  if (s == "N") return Element::N;
  if (s == "O") return Element::O;
  if (s == "S") return Element::S;
  if (s == "F") return Element::F;
  if (s == "X" || s == "*") return Element::X;
  throw ContractError("unknown element symbol '" + s + "'");
}

const char* bond_name(BondKind b) {
  switch (b) {
    case BondKind::None: return "NONE";
    case BondKind::Single: return "SINGLE";
    case BondKind::Double: return "DOUBLE";
    case BondKind::Triple: return "TRIPLE";
    case BondKind::Aromatic: return "AROMATIC";
  }
  return "?";
}

BondKind bond_from_name(const std::string& s) {
  for (BondKind b : {BondKind::None, BondKind::Single, BondKind::Double, BondKind::Triple, BondKind::Aromatic})
    if (s == bond_name(b)) return b;
  throw ContractError("unknown bond kind '" + s + "'");
}

double bond_order(BondKind b) {
  switch (b) {
    case BondKind::None: return 0.0;
    case BondKind::Single: return 1.0;
    case BondKind::Double: return 2.0;
    case BondKind::Triple: return 3.0;
    case BondKind::Aromatic: return 1.5;
  }
  return 0.0;
}

int max_valence(Element e) {
  switch (e) {
    case Element::None: return 0;
    case Element::C: return 4;
    case Element::N: return 3;
    case Element::O: return 2;
    case Element::S: return 6;
    case Element::F: return 1;
    case Element::X: return 1;
  }
  return 0;
}

const AtomAlphabet& AtomAlphabet::small() {
  static const AtomAlphabet a{{Element::None, Element::C, Element::N, Element::O, Element::F}};
  return a;
}

const AtomAlphabet& AtomAlphabet::large() {
  static const AtomAlphabet a{
      {Element::None, Element::C, Element::N, Element::O, Element::S, Element::F, Element::X}};
  return a;
}

const AtomAlphabet& AtomAlphabet::for_mode(Mode m) { return m == Mode::Small ? small() : large(); }

int AtomAlphabet::index_of(Element e) const {
  auto it = std::find(symbols.begin(), symbols.end(), e);
  return it == symbols.end() ? -1 : static_cast<int>(it - symbols.begin());
}

int max_atoms_for(Mode m) { return m == Mode::Small ? 9 : 32; }

// ---------------------------------------------------------------------------

MoleculeGraph::MoleculeGraph(int max_atoms)
    : n_(max_atoms),
      atoms_(max_atoms, Element::None),
      bonds_(static_cast<size_t>(max_atoms) * max_atoms, BondKind::None) {
  require(max_atoms >= 1, "MoleculeGraph: max_atoms must be >= 1");
}

void MoleculeGraph::set_atom(int i, Element e) {
  require(i >= 0 && i < n_, "MoleculeGraph: atom index out of range");
  atoms_[i] = e;
}

void MoleculeGraph::set_bond(int i, int j, BondKind b) {
  require(i >= 0 && i < n_ && j >= 0 && j < n_, "MoleculeGraph: bond index out of range");
  require(i != j, "MoleculeGraph: self bonds are not allowed");
  bonds_[static_cast<size_t>(i) * n_ + j] = b;
  bonds_[static_cast<size_t>(j) * n_ + i] = b;
}

int MoleculeGraph::heavy_atom_count() const {
  return static_cast<int>(std::count_if(atoms_.begin(), atoms_.end(), [](Element e) { return e != Element::None; }));
}

int MoleculeGraph::bond_count() const {
  int n = 0;
  for (int i = 0; i < n_; ++i)
    for (int j = i + 1; j < n_; ++j) n += bond(i, j) != BondKind::None;
  return n;
}

bool MoleculeGraph::structurally_sound() const {
  for (int i = 0; i < n_; ++i) {
    if (bond(i, i) != BondKind::None) return false;
    for (int j = 0; j < n_; ++j) {
      if (bond(i, j) != bond(j, i)) return false;
      if (bond(i, j) != BondKind::None && (atoms_[i] == Element::None || atoms_[j] == Element::None))
        return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

namespace {

int argmax_row(const Eigen::MatrixXd& m, Eigen::Index row) {
  int best = 0;
  for (Eigen::Index c = 1; c < m.cols(); ++c)
    if (m(row, c) > m(row, best)) best = static_cast<int>(c);
  return best;
}

// Component count over non-empty atoms.
int components(const MoleculeGraph& mol, std::vector<int>* label = nullptr) {
  const int n = mol.max_atoms();
  std::vector<int> comp(n, -1);
  int count = 0;
  for (int s = 0; s < n; ++s) {
    if (mol.atom(s) == Element::None || comp[s] >= 0) continue;
    std::vector<int> stack{s};
    comp[s] = count;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v)
        if (mol.bond(u, v) != BondKind::None && comp[v] < 0) {
          comp[v] = count;
          stack.push_back(v);
        }
    }
    ++count;
  }
  if (label) *label = comp;
  return count;
}

}  // namespace

MoleculeGraph decode_graph(const Eigen::MatrixXd& atom_logits, const Eigen::MatrixXd& bond_logits, Mode mode) {
  const auto& alphabet = AtomAlphabet::for_mode(mode);
  const int n = static_cast<int>(atom_logits.rows());
  if (n != max_atoms_for(mode) || atom_logits.cols() != alphabet.size())
    throw ContractError("decode_graph: atom logits must be " + std::to_string(max_atoms_for(mode)) + "x" +
                        std::to_string(alphabet.size()));
  if (bond_logits.rows() != Eigen::Index{n} * n || bond_logits.cols() != BondAlphabet::kSize)
    throw ContractError("decode_graph: bond logits must be " + std::to_string(n * n) + "x" +
                        std::to_string(BondAlphabet::kSize));
  MoleculeGraph g(n);
  for (int i = 0; i < n; ++i) g.set_atom(i, alphabet.symbols[argmax_row(atom_logits, i)]);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (g.atom(i) == Element::None || g.atom(j) == Element::None) continue;
      g.set_bond(i, j, BondAlphabet::kind(argmax_row(bond_logits, Eigen::Index{i} * n + j)));
    }
  return g;
}

Validity is_valid(const MoleculeGraph& mol) {
  if (!mol.structurally_sound()) return {false, "malformed graph"};
  const int n = mol.max_atoms();
  if (mol.heavy_atom_count() == 0) return {false, "empty molecule"};
  for (int i = 0; i < n; ++i) {
    double total = 0.0;
    for (int j = 0; j < n; ++j) total += bond_order(mol.bond(i, j));
    if (total > max_valence(mol.atom(i)) + 1e-9) return {false, "valence exceeded at atom " + std::to_string(i)};
  }
  if (mol.heavy_atom_count() >= 2) {
    for (int i = 0; i < n; ++i) {
      if (mol.atom(i) == Element::None) continue;
      bool bonded = false;
      for (int j = 0; j < n && !bonded; ++j) bonded = mol.bond(i, j) != BondKind::None;
      if (!bonded) return {false, "isolated atom " + std::to_string(i)};
    }
  }
  if (components(mol) != 1) return {false, "disconnected"};
  return {true, ""};
}

int count_rings(const MoleculeGraph& mol) {
  return std::max(0, mol.bond_count() - mol.heavy_atom_count() + components(mol));
}

PropertyScores property_scores(const MoleculeGraph& mol) {
  if (!is_valid(mol).valid) return {};
  PropertyScores s;
  int heavy = 0, hetero = 0, triples = 0;
  for (int i = 0; i < mol.max_atoms(); ++i) {
    const Element e = mol.atom(i);
    if (e == Element::None) continue;
    ++heavy;
    if (e != Element::C) ++hetero;
    switch (e) {
      case Element::C: s.logp_proxy += 0.40; break;
      case Element::N: s.logp_proxy -= 0.45; break;
      case Element::O: s.logp_proxy -= 0.55; break;
      case Element::S: s.logp_proxy += 0.30; break;
      case Element::F: s.logp_proxy += 0.15; break;
      default: break;
    }
    for (int j = i + 1; j < mol.max_atoms(); ++j) triples += mol.bond(i, j) == BondKind::Triple;
  }
  const int rings = count_rings(mol);
  int satisfied = 0;
  satisfied += heavy >= 2 && heavy <= mol.max_atoms();
  satisfied += hetero >= 1;
  satisfied += rings <= 2;
  satisfied += s.logp_proxy >= -2.0 && s.logp_proxy <= 2.0;
  s.druglike_proxy = satisfied / 4.0;
  s.sa_proxy = std::clamp(1.0 - 0.15 * rings - 0.15 * triples - 0.05 * std::max(0, heavy - 6), 0.0, 1.0);
  return s;
}

// ---------------------------------------------------------------------------

namespace {

const char* smiles_bond(BondKind b) {
  switch (b) {
    case BondKind::Double: return "=";
    case BondKind::Triple: return "#";
    case BondKind::Aromatic: return ":";
    default: return "";
  }
}

std::string ring_label(int digit) { return digit < 10 ? std::to_string(digit) : "%" + std::to_string(digit); }

}  // namespace

std::string to_smiles(const MoleculeGraph& mol) {
  const auto v = is_valid(mol);
  if (!v.valid) throw ContractError("to_smiles: invalid molecule (" + v.reason + ")");
  const int n = mol.max_atoms();
  int root = 0;
  while (mol.atom(root) == Element::None) ++root;

  // Pass 1: spanning tree and ring-closure discovery.
  struct Closure {
    int digit, partner;
    bool opening;
  };
  std::vector<int> parent(n, -1);
  std::vector<bool> visited(n, false);
  std::vector<std::vector<int>> children(n);
  std::vector<std::vector<Closure>> closures(n);
  int next_digit = 1;
  std::vector<std::vector<bool>> closed(n, std::vector<bool>(n, false));
  std::function<void(int)> discover = [&](int u) {
    visited[u] = true;
    for (int w = 0; w < n; ++w) {
      if (mol.bond(u, w) == BondKind::None || w == parent[u]) continue;
      if (!visited[w]) {
        parent[w] = u;
        children[u].push_back(w);
        discover(w);
      } else if (!closed[u][w]) {
        closed[u][w] = closed[w][u] = true;
        const int d = next_digit++;
        closures[w].push_back({d, u, true});
        closures[u].push_back({d, w, false});
      }
    }
  };
  discover(root);

  // Pass 2: emission.
  std::string out;
  std::function<void(int)> emit = [&](int u) {
    if (parent[u] >= 0) out += smiles_bond(mol.bond(parent[u], u));
    out += mol.atom(u) == Element::X ? "*" : element_symbol(mol.atom(u));
    auto cl = closures[u];
    std::sort(cl.begin(), cl.end(), [](const Closure& a, const Closure& b) { return a.digit < b.digit; });
    for (const auto& c : cl) {
      if (c.opening) out += smiles_bond(mol.bond(u, c.partner));
      out += ring_label(c.digit);
    }
    for (size_t k = 0; k < children[u].size(); ++k) {
      const bool last = k + 1 == children[u].size();
      if (!last) out += "(";
      emit(children[u][k]);
      if (!last) out += ")";
    }
  };
  emit(root);
  return out;
}

Eigen::VectorXd one_hot(const MoleculeGraph& mol, Mode mode) {
  const auto& alphabet = AtomAlphabet::for_mode(mode);
  const int n = max_atoms_for(mode);
  require(mol.max_atoms() == n, "one_hot: molecule size does not match mode");
  const int A = alphabet.size(), B = BondAlphabet::kSize;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n * A + n * n * B);
  for (int i = 0; i < n; ++i) {
    const int c = alphabet.index_of(mol.atom(i));
    require(c >= 0, "one_hot: element not in alphabet");
    v(i * A + c) = 1.0;
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) v(n * A + (i * n + j) * B + BondAlphabet::channel(mol.bond(i, j))) = 1.0;
  return v;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  std::istringstream is(text);
  while (std::getline(is, cur)) {
    if (!cur.empty() && cur.back() == '\r') cur.pop_back();
    lines.push_back(cur);
  }
  return lines;
}

std::vector<std::string> tokens(const std::string& line) {
  std::vector<std::string> t;
  std::istringstream is(line);
  std::string s;
  while (is >> s) t.push_back(s);
  return t;
}

bool parse_int(const std::string& s, int& out) {
  try {
    size_t pos = 0;
    out = std::stoi(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

bool parse_double(const std::string& s) {
  try {
    size_t pos = 0;
    (void)std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

SdfResult parse_sdf(const std::string& text, Mode mode) {
  const auto lines = split_lines(text);
  const auto& alphabet = AtomAlphabet::for_mode(mode);
  const int max_atoms = max_atoms_for(mode);
  SdfResult result;
  size_t i = 0;
  auto line_at = [&](size_t k, const char* what) -> const std::string& {
    if (k >= lines.size()) throw ParseError(std::string("unexpected end of input in ") + what, int(k) + 1);
    return lines[k];
  };
  while (true) {
    while (i < lines.size() && is_blank(lines[i])) ++i;
    if (i >= lines.size()) break;
    // Header (3 lines) then counts.
    line_at(i + 2, "header");
    const size_t counts_no = i + 3;
    const std::string& counts = line_at(counts_no, "counts line");
    // aaa and bbb are fixed 3-column fields.
    auto field = [&](size_t pos) {
      const auto t = tokens(counts.substr(pos, 3));
      return t.size() == 1 ? t[0] : std::string();
    };
    int n_atoms = -1, n_bonds = -1;
    if (counts.find("V2000") == std::string::npos || counts.size() < 6 || !parse_int(field(0), n_atoms) ||
        !parse_int(field(3), n_bonds) || n_atoms < 0 || n_bonds < 0)
      throw ParseError("malformed counts line", int(counts_no) + 1);

    std::vector<std::string> symbols;
    size_t k = counts_no + 1;
    for (int a = 0; a < n_atoms; ++a, ++k) {
      const auto t = tokens(line_at(k, "atom block"));
      if (t.size() < 4 || !parse_double(t[0]) || !parse_double(t[1]) || !parse_double(t[2]) ||
          !std::isalpha(static_cast<unsigned char>(t[3][0])))
        throw ParseError("malformed atom line (expected " + std::to_string(n_atoms) + " atoms)", int(k) + 1);
      symbols.push_back(t[3]);
    }
    struct RawBond {
      int a, b, type;
    };
    std::vector<RawBond> raw;
    for (int b = 0; b < n_bonds; ++b, ++k) {
      const auto t = tokens(line_at(k, "bond block"));
      RawBond rb{};
      if (t.size() < 3 || !parse_int(t[0], rb.a) || !parse_int(t[1], rb.b) || !parse_int(t[2], rb.type) ||
          rb.a < 1 || rb.a > n_atoms || rb.b < 1 || rb.b > n_atoms || rb.a == rb.b || rb.type < 1 || rb.type > 4)
        throw ParseError("malformed bond line", int(k) + 1);
      raw.push_back(rb);
    }
    while (true) {
      const std::string& l = line_at(k, "property block");
      ++k;
      if (l.rfind("M  END", 0) == 0) break;
      if (l.rfind("$$$$", 0) == 0) throw ParseError("record ended before 'M  END'", int(k));
    }
    while (k < lines.size() && lines[k].rfind("$$$$", 0) != 0) ++k;
    i = k + 1;

    // Map to the active alphabet.
    std::vector<int> slot(symbols.size(), -1);
    std::vector<Element> heavy;
    bool skip = false;
    for (size_t a = 0; a < symbols.size(); ++a) {
      if (symbols[a] == "H") continue;
      Element e = Element::X;
      try {
        e = element_from_symbol(symbols[a]);
      } catch (const ContractError&) {
        if (mode == Mode::Small) skip = true;
      }
      if (alphabet.index_of(e) < 0) skip = true;
      slot[a] = static_cast<int>(heavy.size());
      heavy.push_back(e);
    }
    if (skip || heavy.empty() || static_cast<int>(heavy.size()) > max_atoms) {
      ++result.skipped;
      continue;
    }
    MoleculeGraph g(max_atoms);
    for (size_t a = 0; a < heavy.size(); ++a) g.set_atom(static_cast<int>(a), heavy[a]);
    for (const auto& rb : raw) {
      const int u = slot[rb.a - 1], v = slot[rb.b - 1];
      if (u < 0 || v < 0) continue;
      g.set_bond(u, v, rb.type == 4 ? BondKind::Aromatic : static_cast<BondKind>(rb.type));
    }
    result.molecules.push_back(std::move(g));
  }
  return result;
}

std::string to_jsonl_line(const MoleculeGraph& mol) {
  nlohmann::ordered_json j;
  j["atoms"] = nlohmann::ordered_json::array();
  std::vector<int> slot(mol.max_atoms(), -1);
  int next = 0;
  for (int i = 0; i < mol.max_atoms(); ++i)
    if (mol.atom(i) != Element::None) {
      slot[i] = next++;
      j["atoms"].push_back(element_symbol(mol.atom(i)));
    }
  j["bonds"] = nlohmann::ordered_json::array();
  for (int a = 0; a < mol.max_atoms(); ++a)
    for (int b = a + 1; b < mol.max_atoms(); ++b)
      if (mol.bond(a, b) != BondKind::None && slot[a] >= 0 && slot[b] >= 0)
        j["bonds"].push_back(nlohmann::ordered_json::array({slot[a], slot[b], bond_name(mol.bond(a, b))}));
  return j.dump();
}

MoleculeGraph from_jsonl_line(const std::string& line, Mode mode) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("atoms") || !j["atoms"].is_array())
    throw DataError("molecule record needs an \"atoms\" array");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "atoms" && it.key() != "bonds") throw DataError("unknown molecule field '" + it.key() + "'");
  const auto& alphabet = AtomAlphabet::for_mode(mode);
  const int n = max_atoms_for(mode);
  const auto& atoms = j["atoms"];
  if (static_cast<int>(atoms.size()) > n)
    throw ContractError("molecule has " + std::to_string(atoms.size()) + " atoms, mode allows " + std::to_string(n));
  MoleculeGraph g(n);
  for (size_t i = 0; i < atoms.size(); ++i) {
    if (!atoms[i].is_string()) throw DataError("atom symbols must be strings");
    const Element e = element_from_symbol(atoms[i].get<std::string>());
    if (alphabet.index_of(e) < 0) throw ContractError("element outside the active alphabet");
    g.set_atom(static_cast<int>(i), e);
  }
  if (j.contains("bonds")) {
    for (const auto& b : j["bonds"]) {
      if (!b.is_array() || b.size() != 3 || !b[0].is_number_integer() || !b[1].is_number_integer() ||
          !b[2].is_string())
        throw DataError("bonds must be [i, j, \"KIND\"] triples");
      const int u = b[0].get<int>(), v = b[1].get<int>();
      if (u < 0 || v < 0 || u >= int(atoms.size()) || v >= int(atoms.size()) || u == v)
        throw DataError("bond endpoint out of range");
      g.set_bond(u, v, bond_from_name(b[2].get<std::string>()));
    }
  }
  return g;
}

std::string canonical_key(const MoleculeGraph& mol) {
  std::vector<int> idx;
  for (int i = 0; i < mol.max_atoms(); ++i)
    if (mol.atom(i) != Element::None) idx.push_back(i);
  require(idx.size() <= 8, "canonical_key: exhaustive canonicalization limited to 8 heavy atoms");
  std::vector<int> perm(idx.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::string best;
  do {
    std::string key;
    for (int p : perm) key += element_symbol(mol.atom(idx[p]));
    key += '|';
    for (size_t a = 0; a < perm.size(); ++a)
      for (size_t b = a + 1; b < perm.size(); ++b)
        key += static_cast<char>('0' + BondAlphabet::channel(mol.bond(idx[perm[a]], idx[perm[b]])));
    if (best.empty() || key < best) best = key;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace drugqml::mol
