#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "drugqml/datasets.hpp"
#include "drugqml/molgraph.hpp"
#include "oracles.hpp"

using namespace drugqml;
using namespace drugqml::mol;

namespace {

MoleculeGraph make(const std::vector<Element>& atoms, const std::vector<std::tuple<int, int, BondKind>>& bonds,
                   int max_atoms = 9) {
  MoleculeGraph g(max_atoms);
  for (size_t i = 0; i < atoms.size(); ++i) g.set_atom(int(i), atoms[i]);
  for (auto [a, b, k] : bonds) g.set_bond(a, b, k);
  return g;
}

const MoleculeGraph kFormaldehyde = make({Element::C, Element::O}, {{0, 1, BondKind::Double}});

const std::string kSampleSdf =
    "sample\n"
    "  spec\n"
    "comment\n"
    "  3  2  0  0  0  0  0  0  0  0999 V2000\n"
    "    0.0000    0.0000    0.0000 C   0  0\n"
    "    0.0000    0.0000    0.0000 O   0  0\n"
    "    0.0000    0.0000    0.0000 C   0  0\n"
    "  1  2  1  0\n"
    "  2  3  1  0\n"
    "M  END\n"
    "$$$$\n";

}  // namespace

TEST_CASE("decode_graph examples") {
  const int n = 9;
  Eigen::MatrixXd atoms = Eigen::MatrixXd::Zero(n, 5), bonds = Eigen::MatrixXd::Zero(n * n, 5);
  SUBCASE("one-hot C=O") {
    for (int i = 0; i < n; ++i) atoms(i, 0) = 1;
    atoms(0, 0) = 0;
    atoms(0, 1) = 1;  // C
    atoms(1, 0) = 0;
    atoms(1, 3) = 1;  // O
    for (int r = 0; r < n * n; ++r) bonds(r, 0) = 1;
    bonds(0 * n + 1, 0) = 0;
    bonds(0 * n + 1, 2) = 1;
    const auto g = decode_graph(atoms, bonds, Mode::Small);
    CHECK(g == kFormaldehyde);
  }
  SUBCASE("all null") {
    const auto g = decode_graph(atoms, bonds, Mode::Small);  // all ties -> channel 0
    CHECK(g.heavy_atom_count() == 0);
    CHECK(g.bond_count() == 0);
  }
  SUBCASE("bond to an empty slot is masked") {
    for (int i = 0; i < n; ++i) atoms(i, 0) = 1;
    atoms(0, 0) = 0;
    atoms(0, 1) = 1;
    bonds(0 * n + 1, 1) = 5;
    const auto g = decode_graph(atoms, bonds, Mode::Small);
    CHECK(g.bond(0, 1) == BondKind::None);
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(decode_graph(Eigen::MatrixXd::Zero(9, 7), bonds, Mode::Small), ContractError);
    CHECK_THROWS_AS(decode_graph(atoms, Eigen::MatrixXd::Zero(81, 4), Mode::Small), ContractError);
  }
}

TEST_CASE("decode_graph output is always structurally sound") {
  Rng rng(8);
  for (int t = 0; t < 200; ++t) {
    const Mode mode = t % 2 ? Mode::Small : Mode::Large;
    const int n = max_atoms_for(mode);
    Eigen::MatrixXd atoms(n, AtomAlphabet::for_mode(mode).size()), bonds(n * n, 5);
    for (Eigen::Index i = 0; i < atoms.size(); ++i) atoms.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < bonds.size(); ++i) bonds.data()[i] = rng.normal();
    CHECK(decode_graph(atoms, bonds, mode).structurally_sound());
  }
}

TEST_CASE("is_valid examples") {
  CHECK(is_valid(kFormaldehyde).valid);
  const auto of = is_valid(make({Element::O, Element::F}, {{0, 1, BondKind::Triple}}));
  CHECK_FALSE(of.valid);
  CHECK(of.reason == "valence exceeded at atom 0");
  const auto split =
      is_valid(make({Element::C, Element::C, Element::O, Element::O}, {{0, 1, BondKind::Single}, {2, 3, BondKind::Single}}));
  CHECK_FALSE(split.valid);
  CHECK(split.reason == "disconnected");
  CHECK(is_valid(MoleculeGraph(9)).reason == "empty molecule");
  CHECK(is_valid(make({Element::N}, {})).valid);
  // Aromatic counts 1.5: C with two aromatic bonds plus one single = 4.
  CHECK(is_valid(make({Element::C, Element::C, Element::C, Element::C},
                      {{0, 1, BondKind::Aromatic}, {0, 2, BondKind::Aromatic}, {0, 3, BondKind::Single}}))
            .valid);
  CHECK_FALSE(is_valid(make({Element::O, Element::C, Element::C}, {{0, 1, BondKind::Aromatic}, {0, 2, BondKind::Single}}))
                  .valid);
}

TEST_CASE("is_valid agrees with the brute-force checker on every <=3-slot graph") {
  const Element symbols[] = {Element::None, Element::C, Element::N, Element::O, Element::F};
  const char chars[] = {' ', 'C', 'N', 'O', 'F'};
  const std::pair<int, int> pairs[] = {{0, 1}, {0, 2}, {1, 2}};
  long checked = 0, agree = 0;
  for (int slots = 1; slots <= 3; ++slots) {
    const int n_pairs = slots * (slots - 1) / 2;
    int atom_space = 1, bond_space = 1;
    for (int i = 0; i < slots; ++i) atom_space *= 5;
    for (int i = 0; i < n_pairs; ++i) bond_space *= 5;
    for (int a = 0; a < atom_space; ++a)
      for (int b = 0; b < bond_space; ++b) {
        MoleculeGraph g(slots);
        std::string atoms(slots, ' ');
        std::vector<std::vector<int>> order(slots, std::vector<int>(slots, 0));
        int code = a;
        for (int i = 0; i < slots; ++i, code /= 5) {
          g.set_atom(i, symbols[code % 5]);
          atoms[i] = chars[code % 5];
        }
        code = b;
        bool touches_empty = false;
        for (int p = 0; p < n_pairs; ++p, code /= 5) {
          const auto [i, j] = pairs[p];
          const auto kind = static_cast<BondKind>(code % 5);
          if (kind != BondKind::None && (atoms[i] == ' ' || atoms[j] == ' ')) touches_empty = true;
          g.set_bond(i, j, kind);
          const int half = kind == BondKind::Aromatic ? 3 : 2 * (code % 5);
          order[i][j] = order[j][i] = half;
        }
        if (touches_empty) continue;  // outside the structural invariants
        ++checked;
        agree += is_valid(g).valid == oracle::brute_force_valid(atoms, order);
      }
  }
  CHECK(checked > 1000);
  CHECK(agree == checked);
}

TEST_CASE("count_rings examples and properties") {
  const auto chain = make({Element::C, Element::C, Element::C}, {{0, 1, BondKind::Single}, {1, 2, BondKind::Single}});
  CHECK(count_rings(chain) == 0);
  auto tri = chain;
  tri.set_bond(0, 2, BondKind::Single);
  CHECK(count_rings(tri) == 1);
  CHECK(count_rings(MoleculeGraph(9)) == 0);

  // Adding a bond inside a connected molecule raises the cycle rank by one.
  const auto ds = data::gen_synthetic_molecules(40, 4, 9, Mode::Small, 17);
  for (const auto& m : ds.molecules) {
    CHECK(count_rings(m) >= 0);
    for (int i = 0; i < 9; ++i)
      for (int j = i + 1; j < 9; ++j)
        if (m.atom(i) != Element::None && m.atom(j) != Element::None && m.bond(i, j) == BondKind::None) {
          auto g = m;
          g.set_bond(i, j, BondKind::Single);
          CHECK(count_rings(g) == count_rings(m) + 1);
          i = j = 9;
        }
  }
}

TEST_CASE("property_scores examples") {
  const auto s = property_scores(kFormaldehyde);
  CHECK(s.logp_proxy == doctest::Approx(-0.15));
  CHECK(s.druglike_proxy == doctest::Approx(1.0));
  auto tri = make({Element::C, Element::C, Element::C},
                  {{0, 1, BondKind::Single}, {1, 2, BondKind::Single}, {0, 2, BondKind::Single}});
  CHECK(property_scores(tri).sa_proxy == doctest::Approx(0.85));
  const auto bad = property_scores(make({Element::O, Element::F}, {{0, 1, BondKind::Triple}}));
  CHECK(bad.logp_proxy == 0.0);
  CHECK(bad.druglike_proxy == 0.0);
  CHECK(bad.sa_proxy == 0.0);
}

TEST_CASE("property_scores is permutation invariant") {
  const auto ds = data::gen_synthetic_molecules(30, 2, 9, Mode::Small, 5);
  Rng rng(2);
  for (const auto& m : ds.molecules) {
    std::vector<int> perm(9);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = 8; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
    MoleculeGraph p(9);
    for (int i = 0; i < 9; ++i) p.set_atom(perm[i], m.atom(i));
    for (int i = 0; i < 9; ++i)
      for (int j = i + 1; j < 9; ++j) p.set_bond(perm[i], perm[j], m.bond(i, j));
    const auto a = property_scores(m), b = property_scores(p);
    CHECK(a.logp_proxy == doctest::Approx(b.logp_proxy));
    CHECK(a.druglike_proxy == b.druglike_proxy);
    CHECK(a.sa_proxy == doctest::Approx(b.sa_proxy));
  }
}

TEST_CASE("to_smiles examples") {
  CHECK(to_smiles(make({Element::C}, {})) == "C");
  CHECK(to_smiles(make({Element::C, Element::O}, {{0, 1, BondKind::Single}})) == "CO");
  CHECK(to_smiles(make({Element::C, Element::C, Element::C},
                       {{0, 1, BondKind::Single}, {1, 2, BondKind::Single}, {0, 2, BondKind::Single}})) == "C1CC1");
  CHECK(to_smiles(kFormaldehyde) == "C=O");
  CHECK(to_smiles(make({Element::C, Element::N, Element::O}, {{0, 1, BondKind::Single}, {0, 2, BondKind::Double}})) ==
        "C(N)=O");
  CHECK_THROWS_AS(to_smiles(MoleculeGraph(9)), ContractError);
}

TEST_CASE("to_smiles round-trips atom and bond multisets for all valid <=4-atom molecules") {
  const auto ds = data::enumerate_small_molecules(4);
  for (const auto& m : ds.molecules) {
    const auto parsed = oracle::parse_smiles(to_smiles(m));
    std::vector<std::string> atoms_expected, atoms_got = parsed.atoms;
    std::multiset<std::tuple<std::string, std::string, int>> bonds_expected, bonds_got;
    for (int i = 0; i < 9; ++i)
      if (m.atom(i) != Element::None) atoms_expected.push_back(element_symbol(m.atom(i)));
    for (int i = 0; i < 9; ++i)
      for (int j = i + 1; j < 9; ++j)
        if (m.bond(i, j) != BondKind::None) {
          auto a = std::string(element_symbol(m.atom(i))), b = std::string(element_symbol(m.atom(j)));
          if (b < a) std::swap(a, b);
          bonds_expected.insert({a, b, int(2 * bond_order(m.bond(i, j)))});
        }
    for (auto [i, j, code] : parsed.bonds) {
      auto a = parsed.atoms[i], b = parsed.atoms[j];
      if (b < a) std::swap(a, b);
      bonds_got.insert({a, b, code});
    }
    std::sort(atoms_expected.begin(), atoms_expected.end());
    std::sort(atoms_got.begin(), atoms_got.end());
    CHECK(atoms_expected == atoms_got);
    CHECK(bonds_expected == bonds_got);
  }
}

TEST_CASE("parse_sdf examples") {
  const auto r = parse_sdf(kSampleSdf, Mode::Small);
  REQUIRE(r.molecules.size() == 1);
  const auto& g = r.molecules[0];
  CHECK(g.atom(0) == Element::C);
  CHECK(g.atom(1) == Element::O);
  CHECK(g.atom(2) == Element::C);
  CHECK(g.bond(0, 1) == BondKind::Single);
  CHECK(g.bond(1, 2) == BondKind::Single);
  CHECK(g.bond(0, 2) == BondKind::None);

  CHECK(parse_sdf("", Mode::Small).molecules.empty());

  const std::string truncated =
      "t\n\n\n"
      "  2  1  0  0  0  0  0  0  0  0999 V2000\n"
      "    0.0000    0.0000    0.0000 C   0  0\n"
      "  1  2  1  0\n"
      "M  END\n";
  try {
    parse_sdf(truncated, Mode::Small);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 6);
  }
  CHECK_THROWS_AS(parse_sdf("a\nb\nc\n  x  y V2000\n", Mode::Small), ParseError);
}

TEST_CASE("parse_sdf drops hydrogens, maps aromatic bonds and skips foreign elements") {
  const std::string text =
      "m1\n\n\n"
      "  4  3  0  0  0  0  0  0  0  0999 V2000\n"
      "    0.0 0.0 0.0 C   0  0\n"
      "    0.0 0.0 0.0 H   0  0\n"
      "    0.0 0.0 0.0 C   0  0\n"
      "    0.0 0.0 0.0 Cl  0  0\n"
      "  1  2  1  0\n"
      "  1  3  4  0\n"
      "  3  4  1  0\n"
      "M  END\n"
      "> <prop>\n1\n\n"
      "$$$$\n";
  const auto small = parse_sdf(text, Mode::Small);
  CHECK(small.molecules.empty());
  CHECK(small.skipped == 1);
  const auto large = parse_sdf(text, Mode::Large);
  REQUIRE(large.molecules.size() == 1);
  const auto& g = large.molecules[0];
  CHECK(g.heavy_atom_count() == 3);
  CHECK(g.atom(2) == Element::X);
  CHECK(g.bond(0, 1) == BondKind::Aromatic);
  CHECK(g.bond(1, 2) == BondKind::Single);
}

TEST_CASE("JSONL molecule lines") {
  const auto g = from_jsonl_line(R"({"atoms":["C","O"],"bonds":[[0,1,"DOUBLE"]]})", Mode::Small);
  CHECK(g == kFormaldehyde);
  CHECK(to_jsonl_line(g) == R"({"atoms":["C","O"],"bonds":[[0,1,"DOUBLE"]]})");
  CHECK_THROWS_AS(from_jsonl_line("{", Mode::Small), DataError);
  CHECK_THROWS_AS(from_jsonl_line(R"({"atoms":["S"]})", Mode::Small), ContractError);
  CHECK(from_jsonl_line(R"({"atoms":["S"]})", Mode::Large).atom(0) == Element::S);
}

TEST_CASE("one_hot layout") {
  const auto v = one_hot(kFormaldehyde, Mode::Small);
  CHECK(v.size() == 9 * 5 + 81 * 5);
  CHECK(v.sum() == doctest::Approx(9 + 81));
  CHECK(v(0 * 5 + 1) == 1.0);
  CHECK(v(1 * 5 + 3) == 1.0);
  CHECK(v(45 + (0 * 9 + 1) * 5 + 2) == 1.0);
  CHECK(v(45 + (1 * 9 + 0) * 5 + 2) == 1.0);
}
