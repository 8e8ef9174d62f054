// Acceptance checks 1-8. One PASS/FAIL line per criterion; exit status is the
// number of failures. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Eigenvalues>

#include "drugqml/cli.hpp"
#include "drugqml/datasets.hpp"
#include "drugqml/metrics.hpp"
#include "drugqml/molgraph.hpp"
#include "drugqml/qgan.hpp"
#include "drugqml/qsim.hpp"
#include "drugqml/quanv.hpp"
#include "drugqml/qvae.hpp"
#include "oracles.hpp"

using namespace drugqml;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradRelTol = 1e-5;
constexpr double kGradRuntime = 30.0;
constexpr double kPatchTol = 1e-12;
constexpr double kFdAbsTol = 1e-8;
constexpr double kFdRelTol = 1e-6;
constexpr double kQganFdRatio = 0.5;
constexpr double kQganValidity = 0.3;
constexpr int kQganEpochs = 500;
constexpr double kQganRuntime = 600.0;
constexpr double kQuanvAcc = 0.40;
constexpr int kQuanvTail = 20;
constexpr int kQuanvWindow = 5;
constexpr double kQuanvRuntime = 900.0;
constexpr double kVaeShare = 0.60;
constexpr int kVaeAfter = 20;
constexpr double kVaeRuntime = 600.0;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// 1 ------------------------------------------------------------------------

Outcome gradient_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  int circuits = 0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const int n = 4 + int(seed % 5);
    const int layers = 1 + int((seed / 5) % 2);
    const auto c = qsim::build_qgan_ansatz(n, layers);
    Rng rng(9000 + seed);
    Eigen::VectorXd p(c.n_params), a(n);
    for (auto& v : p) v = rng.uniform(-M_PI, M_PI);
    for (auto& v : a) v = rng.uniform(-M_PI, M_PI);
    const Eigen::MatrixXd ps = qsim::param_shift_grad(c, p, a);
    const Eigen::MatrixXd fd = oracle::fd_jacobian(
        [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(qsim::run_circuit(c, x, a)); }, p, 1e-5);
    worst = std::max(worst, oracle::max_rel_error(ps, fd));
    ++circuits;
  }
  const double secs = seconds_since(t0);
  return {worst < kGradRelTol && secs < kGradRuntime && circuits >= 20,
          std::to_string(circuits) + " circuits (4-8 qubits, L<=2), max rel error " + fmt("%.3g", worst) + " < " +
              fmt("%g", kGradRelTol) + ", " + fmt("%.1f", secs) + " s < " + fmt("%g", kGradRuntime) + " s"};
}

// 2 ------------------------------------------------------------------------

// Same gates on one 8-qubit register with qubit and slot offsets.
qsim::ParamCircuit flatten(const qsim::PatchedCircuit& pc) {
  qsim::ParamCircuit mono{pc.n_qubits(), pc.sub_circuits.front().n_layers, {}, pc.n_params()};
  int q0 = 0, s0 = 0;
  for (const auto& sub : pc.sub_circuits) {
    for (auto g : sub.gates) {
      g.target += q0;
      if (g.control) *g.control += q0;
      if (g.param_slot) *g.param_slot += s0;
      mono.gates.push_back(g);
    }
    q0 += sub.n_qubits;
    s0 += sub.n_params;
  }
  mono.validate();
  return mono;
}

Outcome patched_equivalence() {
  const auto mono = qsim::build_qgan_ansatz(8, 1);
  const auto p2 = qsim::build_patched_ansatz(8, 2, 1);
  const auto p4 = qsim::build_patched_ansatz(8, 4, 1);
  const bool counts = mono.n_params == 15 && p2.sub_circuits.size() == 2 && p2.sub_circuits[0].n_qubits == 4 &&
                      p2.sub_circuits[0].n_params == 7 && p4.sub_circuits.size() == 4 &&
                      p4.sub_circuits[0].n_qubits == 2 && p4.sub_circuits[0].n_params == 3;
  double worst = 0.0;
  for (const auto* pc : {&p2, &p4}) {
    const auto flat = flatten(*pc);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(700 + seed);
      Eigen::VectorXd p(pc->n_params()), a(8);
      for (auto& v : p) v = rng.uniform(-M_PI, M_PI);
      for (auto& v : a) v = rng.uniform(-M_PI, M_PI);
      worst = std::max(worst,
                       (qsim::run_circuit(*pc, p, a) - qsim::run_circuit(flat, p, a)).cwiseAbs().maxCoeff());
    }
  }
  return {counts && worst < kPatchTol,
          "parameter counts 15/7/3 " + std::string(counts ? "exact" : "WRONG") + "; P2/P4 vs monolithic max |diff| " +
              fmt("%.3g", worst) + " < " + fmt("%g", kPatchTol)};
}

// 3 ------------------------------------------------------------------------

Eigen::MatrixXd random_spd(int d, Rng& rng) {
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  return a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
}

// Tr sqrt(Sa Sb) from the eigenvalues of the non-symmetric product.
double oracle_fd(const metrics::GaussianStats& a, const metrics::GaussianStats& b) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(a.cov * b.cov, false);
  double tr = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) tr += std::sqrt(std::max(0.0, es.eigenvalues()(i).real()));
  return (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2 * tr;
}

Outcome frechet() {
  Rng rng(31);
  double self = 0.0, uni = 0.0, commuting = 0.0, rel = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int d = 1 + int(rng.index(10));
    Eigen::VectorXd ma(d), mb(d);
    for (int i = 0; i < d; ++i) ma(i) = rng.normal(), mb(i) = rng.normal();
    const metrics::GaussianStats a{ma, random_spd(d, rng)}, b{mb, random_spd(d, rng)};
    self = std::max(self, std::abs(metrics::frechet_distance(a, a)));
    const double want = oracle_fd(a, b);
    rel = std::max(rel, std::abs(metrics::frechet_distance(a, b) - want) / std::max(std::abs(want), 1e-12));

    // Univariate: (m1 - m2)^2 + (s1 - s2)^2.
    const double m1 = rng.normal(), m2 = rng.normal(), s1 = rng.uniform(0.1, 3), s2 = rng.uniform(0.1, 3);
    const metrics::GaussianStats u1{Eigen::VectorXd::Constant(1, m1), Eigen::MatrixXd::Constant(1, 1, s1 * s1)};
    const metrics::GaussianStats u2{Eigen::VectorXd::Constant(1, m2), Eigen::MatrixXd::Constant(1, 1, s2 * s2)};
    uni = std::max(uni, std::abs(metrics::frechet_distance(u1, u2) - ((m1 - m2) * (m1 - m2) + (s1 - s2) * (s1 - s2))));

    // Commuting covariances: shared eigenbasis Q, spectra la, lb.
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_spd(d, rng));
    const Eigen::MatrixXd q = qr.householderQ();
    Eigen::VectorXd la(d), lb(d);
    for (int i = 0; i < d; ++i) la(i) = rng.uniform(0.05, 3), lb(i) = rng.uniform(0.05, 3);
    const metrics::GaussianStats ca{ma, q * la.asDiagonal() * q.transpose()},
        cb{mb, q * lb.asDiagonal() * q.transpose()};
    const double closed = (ma - mb).squaredNorm() + (la.cwiseSqrt() - lb.cwiseSqrt()).squaredNorm();
    commuting = std::max(commuting, std::abs(metrics::frechet_distance(ca, cb) - closed));
  }
  return {self < kFdAbsTol && uni < kFdAbsTol && commuting < kFdAbsTol && rel < kFdRelTol,
          "self " + fmt("%.2g", self) + ", univariate " + fmt("%.2g", uni) + ", commuting " + fmt("%.2g", commuting) +
              " (< " + fmt("%g", kFdAbsTol) + "); SPD d<=10 vs eigen oracle rel " + fmt("%.2g", rel) + " (< " +
              fmt("%g", kFdRelTol) + ")"};
}

// 4 ------------------------------------------------------------------------

Outcome desk_qgan() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto ds = data::enumerate_small_molecules(4);
  qgan::GanTrainConfig cfg;
  cfg.max_epochs = kQganEpochs;
  cfg.batch_size = 32;
  cfg.seed = 0;
  cfg.threads = 1;
  qgan::GeneratorSpec spec;
  spec.n_qubits = 8;
  spec.n_layers = 1;
  const auto r = qgan::train_qgan(qgan::init_gan(cfg, spec), ds);
  const double secs = seconds_since(t0);
  const auto& rec = r.last.records;
  if (rec.empty() || !r.best) return {false, "no epochs recorded"};
  const int be = r.best->stopper.best_epoch;
  const double fd0 = rec.front().fd, best = r.best->stopper.best;
  const double validity = rec[size_t(be)].validity_fraction;
  return {best <= kQganFdRatio * fd0 && validity >= kQganValidity && secs < kQganRuntime,
          std::to_string(ds.molecules.size()) + " molecules, " + std::to_string(rec.size()) + " epochs: FD " +
              fmt("%.4g", fd0) + " -> best " + fmt("%.4g", best) + " at epoch " + std::to_string(be) + " (ratio " +
              fmt("%.3f", best / fd0) + " <= " + fmt("%g", kQganFdRatio) + "), validity at best " +
              fmt("%.3f", validity) + " >= " + fmt("%g", kQganValidity) + ", " + fmt("%.0f", secs) + " s < " +
              fmt("%g", kQganRuntime) + " s"};
}

// 5 ------------------------------------------------------------------------

Outcome desk_quanv() {
  const auto t0 = std::chrono::steady_clock::now();
  // Shape contract at full size.
  data::VoxelGrid big;
  big.channels = 14;
  big.dim = 32;
  big.data = nn::Tensor({14, 32, 32, 32});
  Rng rng(5);
  for (auto& v : big.data.data) v = rng.uniform();
  const auto qf = quanv::quanvolve(big, quanv::make_filter(0));
  const auto cf = quanv::random_cnn_features(big, 0);
  const bool shapes = qf.shape == std::vector<Eigen::Index>{7, 8, 8, 8, 4} && qf.size() == 14336 &&
                      cf.shape == std::vector<Eigen::Index>{28, 8, 8, 8};

  const auto ds = data::gen_synthetic_voxels(50, 8, 16, 0);
  bool pass = shapes;
  std::string detail = std::string("shapes ") + (shapes ? "7x8x8x8x4=14336 / 28x8x8x8" : "WRONG");
  for (auto v : {quanv::Variant::QuanvMlp, quanv::Variant::RandomCnnMlp}) {
    quanv::QuanvConfig cfg;  // 2 folds, 50 epochs, batch 32, lr 1e-5
    cfg.variant = v;
    cfg.threads = 1;
    const auto st = quanv::train_pipeline(quanv::init_quanv(cfg, ds), ds);
    for (int fold = 0; fold < cfg.folds; ++fold) {
      std::vector<double> loss;
      double final_acc = 0.0;
      for (const auto& r : st.records)
        if (r.fold == fold) loss.push_back(r.train_loss), final_acc = r.train_acc;
      // Trailing window-5 mean; each smoothed value in the last 20 epochs must
      // not exceed its predecessor.
      std::vector<double> smooth;
      for (size_t i = kQuanvWindow - 1; i < loss.size(); ++i) {
        double s = 0.0;
        for (int k = 0; k < kQuanvWindow; ++k) s += loss[i - size_t(k)];
        smooth.push_back(s / kQuanvWindow);
      }
      bool monotone = smooth.size() > size_t(kQuanvTail);
      for (size_t i = smooth.size() - kQuanvTail; monotone && i < smooth.size(); ++i)
        monotone = smooth[i] <= smooth[i - 1];
      pass = pass && final_acc > kQuanvAcc && monotone;
      detail += std::string("; ") + quanv::variant_name(v) + " fold " + std::to_string(fold) + " acc " +
                fmt("%.3f", final_acc) + (monotone ? " loss non-increasing" : " loss NOT non-increasing");
    }
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < kQuanvRuntime;
  return {pass, detail + " (acc > " + fmt("%g", kQuanvAcc) + "); " + fmt("%.0f", secs) + " s < " +
                    fmt("%g", kQuanvRuntime) + " s"};
}

// 6 ------------------------------------------------------------------------

Outcome desk_qvae() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto ds = data::gen_synthetic_molecules(200, 2, 12, mol::Mode::Large, 0);
  qvae::VaeConfig cfg;  // 4 variants, 100 epochs, shared initial weights
  cfg.threads = 1;
  const auto st = qvae::train_vae_comparison(qvae::init_vae(cfg), ds);
  const double secs = seconds_since(t0);

  std::map<std::string, std::map<int, qvae::VaeRecord>> by;
  double min_kl = INFINITY;
  for (const auto& r : st.records) {
    by[r.variant][r.epoch] = r;
    min_kl = std::min(min_kl, r.kl);
  }
  const auto& cl = by["classical_none"];
  const auto& ae = by["angle_embed"];
  int wins = 0, total = 0;
  for (const auto& [e, r] : cl)
    if (e > kVaeAfter && ae.count(e)) {
      ++total;
      wins += r.total <= ae.at(e).total;
    }
  const double share = total ? double(wins) / total : 0.0;
  std::string finals;
  for (const auto& [v, recs] : by) finals += " " + v + "=" + fmt("%.4f", recs.rbegin()->second.total);
  const bool complete = by.size() == 4 && cl.size() == size_t(cfg.epochs);
  return {complete && min_kl >= 0.0 && share >= kVaeShare && secs < kVaeRuntime,
          "min KL " + fmt("%.3g", min_kl) + " >= 0; classical <= angle_embed in " + std::to_string(wins) + "/" +
              std::to_string(total) + " epochs after " + std::to_string(kVaeAfter) + " (" + fmt("%.2f", share) +
              " >= " + fmt("%g", kVaeShare) + "); final totals" + finals + "; " + fmt("%.0f", secs) + " s < " +
              fmt("%g", kVaeRuntime) + " s"};
}

// 7 ------------------------------------------------------------------------

Outcome molecule_kernel() {
  using mol::BondKind;
  using mol::Element;
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
        mol::MoleculeGraph g(slots);
        std::string atoms(size_t(slots), ' ');
        std::vector<std::vector<int>> order(size_t(slots), std::vector<int>(size_t(slots), 0));
        int code = a;
        for (int i = 0; i < slots; ++i, code /= 5) {
          g.set_atom(i, symbols[code % 5]);
          atoms[size_t(i)] = chars[code % 5];
        }
        code = b;
        bool touches_empty = false;
        for (int p = 0; p < n_pairs; ++p, code /= 5) {
          const auto [i, j] = pairs[p];
          const auto kind = static_cast<BondKind>(code % 5);
          if (kind != BondKind::None && (atoms[size_t(i)] == ' ' || atoms[size_t(j)] == ' ')) touches_empty = true;
          g.set_bond(i, j, kind);
          order[size_t(i)][size_t(j)] = order[size_t(j)][size_t(i)] = kind == BondKind::Aromatic ? 3 : 2 * (code % 5);
        }
        if (touches_empty) continue;  // not a graph the type can hold
        ++checked;
        agree += mol::is_valid(g).valid == oracle::brute_force_valid(atoms, order);
      }
  }

  const auto ds = data::enumerate_small_molecules(4);
  long round_trips = 0;
  for (const auto& m : ds.molecules) {
    const auto parsed = oracle::parse_smiles(mol::to_smiles(m));
    std::vector<std::string> want_atoms, got_atoms = parsed.atoms;
    std::multiset<std::tuple<std::string, std::string, int>> want_bonds, got_bonds;
    for (int i = 0; i < m.max_atoms(); ++i) {
      if (m.atom(i) == Element::None) continue;
      want_atoms.push_back(mol::element_symbol(m.atom(i)));
      for (int j = i + 1; j < m.max_atoms(); ++j)
        if (m.bond(i, j) != BondKind::None) {
          auto x = std::string(mol::element_symbol(m.atom(i))), y = std::string(mol::element_symbol(m.atom(j)));
          if (y < x) std::swap(x, y);
          want_bonds.insert({x, y, int(2 * mol::bond_order(m.bond(i, j)))});
        }
    }
    for (auto [i, j, c] : parsed.bonds) {
      auto x = parsed.atoms[size_t(i)], y = parsed.atoms[size_t(j)];
      if (y < x) std::swap(x, y);
      got_bonds.insert({x, y, c});
    }
    std::sort(want_atoms.begin(), want_atoms.end());
    std::sort(got_atoms.begin(), got_atoms.end());
    round_trips += want_atoms == got_atoms && want_bonds == got_bonds;
  }
  const long n = long(ds.molecules.size());
  return {checked > 0 && agree == checked && n > 0 && round_trips == n,
          "is_valid vs brute force " + std::to_string(agree) + "/" + std::to_string(checked) +
              " graphs (<=3 atoms); SMILES round trip " + std::to_string(round_trips) + "/" + std::to_string(n) +
              " molecules (<=4 atoms)"};
}

// 8 ------------------------------------------------------------------------

struct CliRun {
  int code;
  std::string out;
};

CliRun cli_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str()};
}

std::string slurp(const fs::path& p) { return fs::exists(p) ? io::read_text_file(p.string()) : std::string("<missing>"); }

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("drugqml_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const auto path = [&](const std::string& rel) { return (root / rel).string(); };
  io::write_text_file(path("qgan.json"),
                      R"({"seed": 3, "qgan": {"max_epochs": 10, "fd_samples": 64, "steps_per_epoch": 2,
                          "n_critic": 2, "checkpoint_every": 3, "generator": {"n_qubits": 4}}})");
  io::write_text_file(path("quanv.json"), R"({"seed": 5, "quanv": {"epochs": 5, "batch_size": 8, "checkpoint_every": 2,
                          "data": {"per_class": 6, "channels": 2, "dim": 8}}})");
  io::write_text_file(path("qvae.json"), R"({"seed": 1, "qvae": {"epochs": 5, "batch_size": 16, "checkpoint_every": 5,
                          "variants": ["classical_none", "data_reupload_normalized"], "data": {"n": 32}}})");

  std::vector<std::string> failures;
  int compared = 0;
  const auto same_files = [&](const std::string& a, const std::string& b, std::initializer_list<const char*> files,
                              const std::string& what) {
    for (const char* f : files) {
      ++compared;
      const auto x = slurp(root / a / f), y = slurp(root / b / f);
      if (x == "<missing>" || x != y) failures.push_back(what + ":" + f);
    }
  };
  // stdout is compared unless it echoes the (run-specific) output paths.
  const auto twice = [&](const std::string& what, const std::function<std::vector<std::string>(const std::string&)>& args,
                         bool compare_stdout = true) {
    const auto a = cli_run(args("a")), b = cli_run(args("b"));
    ++compared;
    if (a.code != 0 || b.code != 0 || (compare_stdout && a.out != b.out)) failures.push_back(what + ":stdout/exit");
  };

  // Reruns of every command.
  for (const std::string cmd : {"qgan", "quanv", "qvae"}) {
    twice(cmd + " train", [&](const std::string& tag) {
      return std::vector<std::string>{cmd, "train", "--config", path(cmd + ".json"), "--out", path(cmd + "_" + tag)};
    });
    same_files(cmd + "_a", cmd + "_b", {"metrics.csv", "checkpoint_last.json", "config.json"}, cmd + " rerun");
  }
  same_files("qgan_a", "qgan_b", {"checkpoint_best.json"}, "qgan rerun");
  twice("qgan sample", [&](const std::string& tag) {
    return std::vector<std::string>{"qgan", "sample", "--checkpoint", path("qgan_a/checkpoint_best.json"), "--count",
                                    "32", "--out", path("sample_" + tag)};
  });
  same_files("sample_a", "sample_b", {"samples.jsonl"}, "qgan sample");
  twice("dataset synth", [&](const std::string& tag) {
    return std::vector<std::string>{"dataset", "synth", "--seed", "4", "--out", path("ds_" + tag)};
  });
  same_files("ds_a", "ds_b", {"molecules.jsonl"}, "dataset synth");
  if (cli_run({"dataset", "synth", "--seed", "5", "--out", path("ds_c")}).code != 0) failures.push_back("dataset synth:exit");
  twice("fd", [&](const std::string&) {
    return std::vector<std::string>{"fd", "--a", path("ds_a/molecules.jsonl"), "--b", path("ds_c/molecules.jsonl"),
                                    "--mode", "large"};
  });
  twice("molcheck", [&](const std::string&) {
    return std::vector<std::string>{"molcheck", "--in", path("sample_a/samples.jsonl")};
  });
  twice("gradcheck", [&](const std::string&) {
    return std::vector<std::string>{"gradcheck", "--seed", "7", "--qubits", "4"};
  });
  twice("plot", [&](const std::string& tag) {
    return std::vector<std::string>{"plot", "--in", path("qvae_a/metrics.csv"), "--out", path("plot_" + tag)};
  }, false);
  same_files("plot_a", "plot_b", {"total.svg", "recon.svg", "kl.svg"}, "plot");

  // 10-epoch split runs: E1 epochs, then resume for the rest.
  const std::map<std::string, std::string> split_at{{"qgan", "4"}, {"quanv", "7"}, {"qvae", "3"}};
  for (const auto& [cmd, e1] : split_at) {
    const auto first = cli_run({cmd, "train", "--config", path(cmd + ".json"), "--out", path(cmd + "_split"),
                                "--stop-after", e1});
    const auto second = cli_run({cmd, "train", "--resume", path(cmd + "_split/checkpoint_last.json")});
    ++compared;
    if (first.code != 0 || second.code != 0) failures.push_back(cmd + " split:exit");
    same_files(cmd + "_a", cmd + "_split", {"metrics.csv", "checkpoint_last.json"}, cmd + " split");
  }
  const std::string qgan_csv = slurp(root / "qgan_a/metrics.csv");
  const int epochs10 = int(std::count(qgan_csv.begin(), qgan_csv.end(), '\n')) - 1;

  fs::remove_all(root);
  std::string detail = std::to_string(compared) + " artifact comparisons across all 9 commands; split runs at 4/10 "
                       "(qgan), 7/10 (quanv, 2 folds x 5), 3/10 (qvae, 2 variants x 5)";
  if (epochs10 != 10) failures.push_back("qgan run has " + std::to_string(epochs10) + " epochs, expected 10");
  for (const auto& f : failures) detail += "; mismatch " + f;
  return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient fidelity", gradient_fidelity},
      {"patched equivalence", patched_equivalence},
      {"Frechet distance", frechet},
      {"desk-scale QGAN-HG", desk_qgan},
      {"desk-scale quanvolution", desk_quanv},
      {"desk-scale QVAE comparison", desk_qvae},
      {"molecule-kernel oracle", molecule_kernel},
      {"determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %d %s: %s -- %s\n", id, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
