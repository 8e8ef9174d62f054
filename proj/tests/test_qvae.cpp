#include <doctest.h>

#include <filesystem>
#include <numbers>

#include "drugqml/qvae.hpp"
#include "oracles.hpp"

using namespace drugqml;
using namespace drugqml::qvae;

namespace {

const QuantumLayerVariant kClassical{QuantumKind::ClassicalNone, false};
const QuantumLayerVariant kAngle{QuantumKind::AngleEmbed, false};
const QuantumLayerVariant kReupload{QuantumKind::DataReupload, false};
const QuantumLayerVariant kReuploadNorm{QuantumKind::DataReupload, true};

mol::MoleculeGraph large_molecule(std::uint64_t seed) {
  return data::gen_synthetic_molecules(1, 3, 8, mol::Mode::Large, seed).molecules.front();
}

Vector random_vector(int n, std::uint64_t seed) {
  Rng rng(seed);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

void zero_mlp(nn::Mlp& m) {
  for (auto& l : m.layers()) {
    l.weight.setZero();
    l.bias.setZero();
  }
}

// Freezes the power-iteration vectors so repeated forwards see one function.
void freeze_sn(LigandVae& vae) {
  for (auto* m : {&vae.encoder, &vae.decoder})
    for (auto& l : m->layers()) l.freeze_sn_vectors = true;
}

Vector reupload_oracle(const QuantumLayer& layer, const Vector& z) {
  Vector out(kLatent);
  for (int g = 0; g < kGroups; ++g) {
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(256);
    psi(0) = 1;
    for (int r = 0; r < layer.variant().reupload_rounds; ++r) {
      for (int q = 0; q < 8; ++q) {
        const int f = g * 8 + q;
        const double angle = layer.w(r, f) * std::numbers::pi * std::tanh(z(f)) + layer.b(r, f);
        psi = oracle::embed_single(oracle::ry_matrix(angle), q, 8) * psi;
      }
      for (int q = 0; q < 8; ++q) psi = oracle::embed_controlled(oracle::x_matrix(), q, (q + 1) % 8, 8) * psi;
    }
    out.segment(g * 8, 8) = oracle::z_expectations(psi, 8);
  }
  return out;
}

data::MoleculeDataset small_set(int n) { return data::gen_synthetic_molecules(n, 2, 6, mol::Mode::Large, 3); }

}  // namespace

TEST_CASE("variant names") {
  for (const auto& v : comparison_variants()) CHECK(variant_from_name(variant_name(v)) == v);
  CHECK(variant_name(comparison_variants()[3]) == "data_reupload_normalized");
  CHECK_THROWS_AS(variant_from_name("amplitude_embed"), ConfigError);
  CHECK_THROWS_AS(variant_from_name("classical_none_normalized"), ConfigError);
}

TEST_CASE("network shapes and shared initial weights") {
  CHECK(input_dim() == 5344);
  auto a = make_vae(kClassical, 4), b = make_vae(kReuploadNorm, 4);
  CHECK(a.encoder.in() == 5344);
  CHECK(a.encoder.out() == 64);
  CHECK(a.decoder.in() == 32);
  CHECK(a.decoder.out() == 5344);
  for (size_t i = 0; i < a.encoder.layers().size(); ++i) {
    CHECK(a.encoder.layers()[i].weight == b.encoder.layers()[i].weight);
    CHECK(a.decoder.layers()[i].weight == b.decoder.layers()[i].weight);
    CHECK(a.encoder.layers()[i].spectral_norm);
  }
  CHECK(make_vae(kClassical, 5).encoder.layers()[0].weight != a.encoder.layers()[0].weight);
}

TEST_CASE("encode examples") {
  auto vae = make_vae(kClassical, 1);
  const auto m = large_molecule(2);
  SUBCASE("determinism") {
    const auto a = encode(vae, m), b = encode(vae, m);
    CHECK(a.mu == b.mu);
    CHECK(a.logvar == b.logvar);
    CHECK(a.mu.size() == 32);
  }
  SUBCASE("zero network") {
    zero_mlp(vae.encoder);
    const auto e = encode(vae, m);
    CHECK(e.mu.isZero(0));
    CHECK(e.logvar.isZero(0));
  }
  SUBCASE("logvar clamp") {
    zero_mlp(vae.encoder);
    vae.encoder.layers().back().bias.tail(32).setConstant(50.0);
    vae.encoder.layers().back().bias(32) = -50.0;
    const auto e = encode(vae, m);
    CHECK(e.logvar(1) == 10.0);
    CHECK(e.logvar(0) == -10.0);
  }
  SUBCASE("wrong mode") {
    const auto small = data::enumerate_small_molecules(2).molecules.front();
    CHECK_THROWS_AS(encode(vae, small), ContractError);
  }
}

TEST_CASE("reparameterize examples") {
  const Vector mu = random_vector(32, 1), n = random_vector(32, 2);
  CHECK(reparameterize(mu, random_vector(32, 3), Vector::Zero(32)) == mu);
  CHECK(reparameterize(Vector::Zero(32), Vector::Zero(32), n) == n);
  const Vector z = reparameterize(mu, Vector::Constant(32, -10.0), n);
  CHECK((z - mu).cwiseAbs().maxCoeff() <= std::exp(-5.0) * n.cwiseAbs().maxCoeff() + 1e-15);
  CHECK_THROWS_AS(reparameterize(Vector::Zero(31), Vector::Zero(32), n), ContractError);
}

TEST_CASE("quantum_latent_transform examples") {
  const Vector z = random_vector(32, 5);
  SUBCASE("classical is the exact identity") {
    QuantumLayer layer(kClassical, 1);
    for (std::uint64_t s = 0; s < 10; ++s) {
      const Vector zz = random_vector(32, s) * 100.0;
      CHECK(quantum_latent_transform(layer, zz) == zz);
    }
    QuantumLayer normed({QuantumKind::ClassicalNone, true}, 1);
    CHECK(quantum_latent_transform(normed, z) == z);
  }
  SUBCASE("angle embedding at zero is equal across groups") {
    QuantumLayer layer(kAngle, 9);
    const Vector out = quantum_latent_transform(layer, Vector::Zero(32));
    for (int g = 1; g < kGroups; ++g) CHECK(out.segment(g * 8, 8) == out.head(8));
    CHECK(out.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
    CHECK(quantum_latent_transform(layer, z) != out);
  }
  SUBCASE("data re-uploading matches a dense-unitary replay") {
    QuantumLayer layer(kReupload, 3);
    Rng rng(4);
    for (Eigen::Index i = 0; i < layer.w.size(); ++i) {
      layer.w(i) = rng.uniform(-1.5, 1.5);
      layer.b(i) = rng.uniform(-3.0, 3.0);
    }
    CHECK((quantum_latent_transform(layer, z) - reupload_oracle(layer, z)).cwiseAbs().maxCoeff() < 1e-12);
    QuantumLayer two({QuantumKind::DataReupload, false, 8, 2}, 3);
    CHECK((quantum_latent_transform(two, z) - reupload_oracle(two, z)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("length mismatch") {
    QuantumLayer layer(kAngle, 1);
    CHECK_THROWS_AS(quantum_latent_transform(layer, Vector::Zero(31)), ContractError);
  }
}

TEST_CASE("running standardization contract") {
  QuantumLayer layer(kReuploadNorm, 2);
  Rng rng(8);
  auto batch = [&](int n) {
    Matrix z(32, n);
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    return z;
  };
  const Matrix before = layer.forward(batch(4), false);
  CHECK(layer.stat_updates == 0);
  CHECK(layer.running_mean.isZero(0));
  for (int t = 0; t < 120; ++t) layer.forward(batch(32), true);
  CHECK(layer.stat_updates == 120);
  const Matrix out = layer.forward(batch(2000), false);
  const Vector mean = out.rowwise().mean();
  const Vector var = (out.colwise() - mean).array().square().rowwise().mean();
  CHECK(mean.cwiseAbs().maxCoeff() <= 0.2);
  CHECK(var.minCoeff() >= 0.5);
  CHECK(var.maxCoeff() <= 1.5);
  CHECK(before.rows() == 32);
}

TEST_CASE("decode examples") {
  auto vae = make_vae(kClassical, 1);
  const Vector z = random_vector(32, 6);
  const auto d = decode(vae, z);
  CHECK(d.atom_logits.rows() == 32);
  CHECK(d.atom_logits.cols() == 7);
  CHECK(d.bond_logits.rows() == 1024);
  CHECK(d.bond_logits.cols() == 5);
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j) CHECK(d.bond_logits.row(i * 32 + j) == d.bond_logits.row(j * 32 + i));
  const auto d2 = decode(vae, z);
  CHECK(d2.atom_logits == d.atom_logits);

  zero_mlp(vae.decoder);
  const auto flat = decode(vae, z);
  CHECK(flat.atom_logits.isZero(0));
  const auto g = mol::decode_graph(flat.atom_logits, flat.bond_logits, mol::Mode::Large);
  CHECK(g.heavy_atom_count() == 0);
  CHECK(g.bond_count() == 0);
}

TEST_CASE("elbo_loss examples") {
  auto vae = make_vae(kClassical, 2);
  const auto m = large_molecule(7);
  zero_mlp(vae.encoder);
  SUBCASE("prior match gives zero KL") {
    const auto e = elbo_loss(vae, m, random_vector(32, 1));
    CHECK(e.kl == 0.0);
    CHECK(e.total == e.recon);
  }
  SUBCASE("unit mean in one dimension") {
    vae.encoder.layers().back().bias(5) = 1.0;
    CHECK(elbo_loss(vae, m, Vector::Zero(32)).kl == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("saturated logits give zero reconstruction") {
    zero_mlp(vae.decoder);
    vae.decoder.layers().back().bias = 60.0 * mol::one_hot(m, mol::Mode::Large);
    const auto e = elbo_loss(vae, m, Vector::Zero(32));
    CHECK(e.recon >= 0.0);
    CHECK(e.recon < 1e-20);
  }
  SUBCASE("uniform logits") {
    zero_mlp(vae.decoder);
    CHECK(elbo_loss(vae, m, Vector::Zero(32)).recon == doctest::Approx(std::log(7.0) + std::log(5.0)));
  }
}

TEST_CASE("KL and reconstruction are non-negative") {
  for (std::uint64_t s = 0; s < 6; ++s) {
    auto vae = make_vae(comparison_variants()[s % 4], s);
    Rng rng(s);
    for (auto& l : vae.encoder.layers()) l.bias.array() += rng.uniform(-2.0, 2.0);
    const auto e = elbo_loss(vae, large_molecule(s + 10), random_vector(32, s));
    CHECK(e.kl >= 0.0);
    CHECK(e.recon >= 0.0);
    CHECK(e.total == doctest::Approx(e.kl + e.recon));
  }
}

TEST_CASE("parameter-shift gradients of the total loss match finite differences") {
  const auto m = large_molecule(11);
  const Matrix x = mol::one_hot(m, mol::Mode::Large);
  const Matrix noise = random_vector(32, 12);
  for (const auto& v : {kReupload, kReuploadNorm, kAngle}) {
    CAPTURE(variant_name(v));
    auto vae = make_vae(v, 13);
    if (v.kind == QuantumKind::DataReupload) {
      Rng rng(14);
      for (Eigen::Index i = 0; i < vae.quantum.w.size(); ++i) {
        vae.quantum.w(i) = rng.uniform(0.5, 1.5);
        vae.quantum.b(i) = rng.uniform(-1.0, 1.0);
      }
    }
    if (v.normalized) {
      vae.quantum.running_mean = random_vector(32, 15) * 0.1;
      vae.quantum.running_var = Vector::Constant(32, 0.3);
    }
    batch_elbo(vae, x, noise, false, false);
    freeze_sn(vae);
    vae.encoder.zero_grad();
    vae.decoder.zero_grad();
    vae.quantum.zero_grad();
    batch_elbo(vae, x, noise, false, true);

    auto loss = [&] { return batch_elbo(vae, x, noise, false, false).total; };
    auto fd = [&](double& p) {
      // Small step: leaky-ReLU kinks near zero pre-activations are the
      // dominant FD error at 1e-5.
      const double saved = p;
      const double h = 1e-6;
      p = saved + h;
      const double up = loss();
      p = saved - h;
      const double dn = loss();
      p = saved;
      return (up - dn) / (2 * h);
    };
    if (v.kind == QuantumKind::DataReupload) {
      Matrix num_w(vae.quantum.w.rows(), vae.quantum.w.cols()), num_b = num_w;
      for (Eigen::Index i = 0; i < num_w.size(); ++i) {
        num_w(i) = fd(vae.quantum.w(i));
        num_b(i) = fd(vae.quantum.b(i));
      }
      CHECK(oracle::max_rel_error(vae.quantum.grad_w, num_w) < 1e-4);
      CHECK(oracle::max_rel_error(vae.quantum.grad_b, num_b) < 1e-4);
    }
    // A sample of classical weights on both sides of the quantum layer.
    Rng pick(16);
    for (auto* mlp : {&vae.encoder, &vae.decoder})
      for (auto& l : mlp->layers()) {
        Matrix ana(1, 6), num(1, 6);
        for (int t = 0; t < 6; ++t) {
          Eigen::Index r = Eigen::Index(pick.index(std::uint64_t(l.weight.rows())));
          Eigen::Index c = Eigen::Index(pick.index(std::uint64_t(l.weight.cols())));
          if (mlp == &vae.encoder && &l == &mlp->layers().front()) {
            // Only inputs that are hot carry gradient.
            while (x(c, 0) == 0.0) c = Eigen::Index(pick.index(std::uint64_t(l.weight.cols())));
          }
          ana(t) = l.grad_weight(r, c);
          num(t) = fd(l.weight(r, c));
        }
        CHECK(oracle::max_rel_error(ana, num) < 1e-4);
        Matrix bana = l.grad_bias.head(3).transpose(), bnum(1, 3);
        for (int t = 0; t < 3; ++t) bnum(t) = fd(l.bias(t));
        CHECK(oracle::max_rel_error(bana, bnum) < 1e-4);
      }
  }
}

TEST_CASE("train_vae_comparison loop contract") {
  const auto ds = small_set(12);
  VaeConfig cfg;
  cfg.variants = {kClassical};
  cfg.epochs = 1;
  cfg.batch_size = 8;
  auto s = train_vae_comparison(init_vae(cfg), ds);
  REQUIRE(s.records.size() == 1);
  CHECK(s.records[0].variant == "classical_none");
  CHECK(s.records[0].epoch == 0);

  cfg.variants = {kClassical, kAngle, kReuploadNorm};
  cfg.epochs = 3;
  s = train_vae_comparison(init_vae(cfg), ds);
  REQUIRE(s.records.size() == 9);
  for (const auto& r : s.records) {
    CHECK(r.kl >= 0.0);
    CHECK(r.recon >= 0.0);
    CHECK(r.total == doctest::Approx(r.recon + r.kl));
  }
  CHECK(s.records[3].variant == "angle_embed");
  CHECK(s.records[8].epoch == 2);
  CHECK(s.vae.quantum.stat_updates == 3 * 2);

  cfg.variants.clear();
  CHECK_THROWS_AS(init_vae(cfg), ConfigError);
  cfg.variants = {kClassical};
  CHECK_THROWS_AS(train_vae_comparison(init_vae(cfg), data::MoleculeDataset{mol::Mode::Large, {}, 0}), DataError);
  CHECK_THROWS_AS(train_vae_comparison(init_vae(cfg), data::enumerate_small_molecules(2)), DataError);
}

TEST_CASE("training reduces the loss") {
  const auto ds = small_set(16);
  VaeConfig cfg;
  cfg.variants = {kClassical};
  cfg.epochs = 8;
  cfg.batch_size = 8;
  const auto s = train_vae_comparison(init_vae(cfg), ds);
  CHECK(s.records.back().total < s.records.front().total);
}

TEST_CASE("checkpoint round trip and resume") {
  const auto ds = small_set(10);
  VaeConfig cfg;
  cfg.variants = {kReupload, kReuploadNorm};
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.checkpoint_every = 2;
  const auto full = train_vae_comparison(init_vae(cfg), ds);

  const auto j = checkpoint_to_json(full);
  CHECK(checkpoint_to_json(checkpoint_from_json(j)) == j);
  CHECK(checkpoint_from_json(j).vae.quantum.running_var == full.vae.quantum.running_var);

  for (int budget : {1, 2, 3}) {
    CAPTURE(budget);
    const auto dir = std::filesystem::temp_directory_path() / "drugqml_qvae_resume";
    std::filesystem::remove_all(dir);
    train_vae_comparison(init_vae(cfg), ds, dir.string(), budget);
    const auto state = checkpoint_from_json(io::read_json_file((dir / "checkpoint_last.json").string()));
    const auto resumed = train_vae_comparison(state, ds, dir.string());
    std::filesystem::remove_all(dir);
    REQUIRE(resumed.records.size() == full.records.size());
    for (size_t i = 0; i < full.records.size(); ++i) CHECK(resumed.records[i].total == full.records[i].total);
    CHECK(resumed.vae.quantum.w == full.vae.quantum.w);
    CHECK(resumed.vae.decoder.layers()[2].weight == full.vae.decoder.layers()[2].weight);
  }

  auto bad = j;
  bad["quantum"]["variant"] = "angle_embed";
  CHECK_THROWS_AS(checkpoint_from_json(bad), DataError);
  bad = j;
  bad.erase("encoder");
  CHECK_THROWS_AS(checkpoint_from_json(bad), DataError);
}
