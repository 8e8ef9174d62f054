#include "drugqml/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "drugqml/datasets.hpp"
#include "drugqml/metrics.hpp"
#include "drugqml/molgraph.hpp"
#include "drugqml/qsim.hpp"

namespace drugqml::cli {

namespace fs = std::filesystem;
using io::Json;

namespace {

constexpr std::uint64_t kTagSample = 41;
constexpr std::uint64_t kTagGradcheck = 42;

// ---------------------------------------------------------------------------
// Config schema

std::set<std::string> keys_of(const Json& j) {
  std::set<std::string> s;
  for (const auto& [k, v] : j.items()) s.insert(k);
  return s;
}

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: '" + (where.empty() ? std::string("<root>") : where) + "' must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError("config: unknown key '" + (where.empty() ? k : where + "." + k) + "'");
}

const Json& molecule_data_defaults_qgan() {
  static const Json j{{"source", "enumerate"}, {"max_atoms", 4}};
  return j;
}
const Json& molecule_data_defaults_qvae() {
  static const Json j{{"source", "synthetic"}, {"n", 200}, {"min_atoms", 2}, {"max_heavy", 12}};
  return j;
}
const Json& voxel_data_defaults() {
  static const Json j{{"source", "synthetic"}, {"per_class", 50}, {"channels", 8}, {"dim", 16}};
  return j;
}
const Json& dataset_defaults() {
  static const Json j{{"kind", "molecules"}, {"source", "synthetic"}, {"mode", "large"}, {"n", 200},
                      {"min_atoms", 2},      {"max_heavy", 12},      {"max_atoms", 4},   {"per_class", 50},
                      {"channels", 8},       {"dim", 16},            {"seed", 0}};
  return j;
}
const Json& check_defaults() {
  static const Json j{{"qubits", 4}, {"layers", 1}, {"seed", 0}, {"tolerance", 1e-5}};
  return j;
}

const std::set<std::string> kMoleculeDataKeys{"source", "max_atoms", "n", "min_atoms", "max_heavy", "path", "format"};
const std::set<std::string> kVoxelDataKeys{"source", "per_class", "channels", "dim", "path"};

std::set<std::string> with(std::set<std::string> s, std::initializer_list<const char*> extra) {
  for (const char* e : extra) s.insert(e);
  return s;
}

std::set<std::string> qgan_keys() {
  return with(keys_of(qgan::config_to_json(qgan::GanTrainConfig{})), {"generator", "data"});
}
std::set<std::string> quanv_keys() { return with(keys_of(quanv::config_to_json(quanv::QuanvConfig{})), {"data"}); }
std::set<std::string> qvae_keys() { return with(keys_of(qvae::config_to_json(qvae::VaeConfig{})), {"data"}); }

template <typename T>
T get_as(const Json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError("config: '" + where + "." + key + "' has the wrong type or is missing");
  }
}

Json merged(const Json& defaults, const Json& user) {
  Json j = defaults;
  for (const auto& [k, v] : user.items()) j[k] = v;
  return j;
}

Json without(Json j, std::initializer_list<const char*> keys) {
  for (const char* k : keys) j.erase(k);
  return j;
}

// ---------------------------------------------------------------------------
// Datasets described by config sections

data::MoleculeFormat format_for(const Json& d, const std::string& path) {
  std::string f = d.contains("format") ? get_as<std::string>(d, "format", "data") : "";
  if (f.empty()) f = fs::path(path).extension() == ".sdf" ? "sdf" : "jsonl";
  if (f == "jsonl") return data::MoleculeFormat::Jsonl;
  if (f == "sdf") return data::MoleculeFormat::Sdf;
  throw ConfigError("config: data.format must be 'jsonl' or 'sdf'");
}

data::MoleculeDataset molecule_data(const Json& d, mol::Mode mode, std::uint64_t seed, const std::string& where) {
  const auto source = get_as<std::string>(d, "source", where);
  if (source == "enumerate") {
    if (mode != mol::Mode::Small) throw ConfigError("config: " + where + ": enumeration produces small-mode graphs only");
    return data::enumerate_small_molecules(get_as<int>(d, "max_atoms", where));
  }
  if (source == "synthetic")
    return data::gen_synthetic_molecules(get_as<int>(d, "n", where), get_as<int>(d, "min_atoms", where),
                                         get_as<int>(d, "max_heavy", where), mode, seed);
  if (source == "file") {
    const auto path = get_as<std::string>(d, "path", where);
    return data::load_molecules(path, format_for(d, path), mode);
  }
  throw ConfigError("config: " + where + ".source must be 'enumerate', 'synthetic' or 'file'");
}

data::VoxelDataset voxel_data(const Json& d, std::uint64_t seed, const std::string& where) {
  const auto source = get_as<std::string>(d, "source", where);
  if (source == "synthetic")
    return data::gen_synthetic_voxels(get_as<int>(d, "per_class", where), get_as<int>(d, "channels", where),
                                      get_as<int>(d, "dim", where), seed);
  if (source == "file") return data::read_voxb(get_as<std::string>(d, "path", where));
  throw ConfigError("config: " + where + ".source must be 'synthetic' or 'file'");
}

mol::Mode mode_from_name(const std::string& s) {
  if (s == "small") return mol::Mode::Small;
  if (s == "large") return mol::Mode::Large;
  throw ConfigError("mode must be 'small' or 'large', got '" + s + "'");
}

// ---------------------------------------------------------------------------
// Run plumbing shared by the train commands

struct Common {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string resume;
  int stop_after = -1;
};

Json load_config(const std::string& path) {
  if (path.empty()) return Json::object();
  Json doc;
  try {
    doc = Json::parse(io::read_text_file(path));
  } catch (const Json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  validate_run_config(doc);
  return doc;
}

// Effective seed: flag, then the section's own key, then the global key.
std::uint64_t resolve_seed(const Common& c, const Json& doc, const Json& section) {
  if (c.seed) return *c.seed;
  if (section.contains("seed")) return get_as<std::uint64_t>(section, "seed", "section");
  if (doc.contains("seed")) return get_as<std::uint64_t>(doc, "seed", "config");
  return 0;
}

int resolve_threads_opt(const Common& c, const Json& doc, const Json& section) {
  if (c.threads) return *c.threads;
  if (doc.contains("threads")) return get_as<int>(doc, "threads", "config");
  if (section.contains("threads")) return get_as<int>(section, "threads", "section");
  return 0;
}

std::string resolve_out(const Common& c, const Json& doc) {
  if (!c.out.empty()) return c.out;
  if (doc.contains("output_dir")) return get_as<std::string>(doc, "output_dir", "config");
  if (!c.resume.empty()) return fs::path(c.resume).parent_path().string();
  throw ConfigError("no output directory: pass --out or set output_dir");
}

// On resume the data description comes from --config or, failing that, the
// config.json snapshot next to the checkpoint.
Json resume_config(const Common& c) {
  if (!c.config_path.empty()) return load_config(c.config_path);
  const auto snap = fs::path(c.resume).parent_path() / "config.json";
  if (fs::exists(snap)) return load_config(snap.string());
  return Json::object();
}

Json read_checkpoint(const std::string& path, const std::string& command) {
  Json j = io::read_json_file(path);
  if (!j.is_object() || j.value("command", "") != command)
    throw DataError(path + ": not a '" + command + "' checkpoint");
  return j;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// Wall-clock times live only here, so every other artifact stays byte-stable.
void log_line(const std::string& out_dir, const std::string& msg) {
  std::ofstream f(fs::path(out_dir) / "run.log", std::ios::app);
  if (!f) throw DataError("cannot write " + (fs::path(out_dir) / "run.log").string());
  f << timestamp() << ' ' << msg << '\n';
}

void prepare_out(const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw DataError("cannot create output directory " + out_dir);
}

void write_snapshot(const std::string& out_dir, const Json& doc) {
  io::write_json_file((fs::path(out_dir) / "config.json").string(), doc);
}

std::string out_file(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

// ---------------------------------------------------------------------------
// Commands

int cmd_qgan_train(const Common& c, std::ostream& out) {
  Json doc = c.resume.empty() ? load_config(c.config_path) : resume_config(c);
  const Json section = doc.value("qgan", Json::object());
  const Json data_j = merged(molecule_data_defaults_qgan(), section.value("data", Json::object()));
  const std::string out_dir = resolve_out(c, doc);

  qgan::GanState state;
  if (c.resume.empty()) {
    Json train_j = without(section, {"generator", "data"});
    train_j["seed"] = resolve_seed(c, doc, section);
    train_j["threads"] = resolve_threads_opt(c, doc, section);
    const auto cfg = qgan::config_from_json(train_j);
    cfg.validate();
    const auto spec = qgan::spec_from_json(section.value("generator", Json::object()));
    doc["qgan"] = qgan::config_to_json(cfg);
    doc["qgan"]["generator"] = qgan::spec_to_json(spec);
    doc["qgan"]["data"] = data_j;
    state = qgan::init_gan(cfg, spec);
  } else {
    if (c.seed) throw ConfigError("--seed cannot be combined with --resume");
    state = qgan::checkpoint_from_json(read_checkpoint(c.resume, "qgan"));
    if (c.threads) state.cfg.threads = *c.threads;
  }
  const auto ds = molecule_data(data_j, state.gen.spec.mode, state.cfg.seed, "qgan.data");

  prepare_out(out_dir);
  if (c.resume.empty()) write_snapshot(out_dir, doc);
  log_line(out_dir, "qgan train start epoch " + std::to_string(state.next_epoch));
  auto result = qgan::train_qgan(std::move(state), ds, out_dir, c.stop_after);
  emit_metrics_csv(result.last.records, out_file(out_dir, "metrics.csv"));
  log_line(out_dir, "qgan train stop " + result.last.stop_reason);

  out << "epochs " << result.last.next_epoch << " stop_reason " << result.last.stop_reason;
  if (result.best) out << " best_fd " << format_double(result.best->stopper.best) << " best_epoch "
                       << result.best->stopper.best_epoch;
  out << '\n';
  return kExitOk;
}

int cmd_qgan_sample(const std::string& checkpoint, int count, const Common& c, std::ostream& out) {
  if (count < 1) throw ConfigError("--count must be positive");
  if (c.out.empty()) throw ConfigError("qgan sample: --out is required");
  auto state = qgan::checkpoint_from_json(read_checkpoint(checkpoint, "qgan"));
  const std::uint64_t seed = c.seed.value_or(0);
  const auto batch = qgan::generate_batch(state.gen, count, derive_seed(seed, kTagSample),
                                          resolve_threads(c.threads.value_or(0)));
  std::string text;
  int valid = 0;
  for (const auto& m : batch.molecules) {
    text += mol::to_jsonl_line(m) + "\n";
    valid += mol::is_valid(m).valid ? 1 : 0;
  }
  prepare_out(c.out);
  io::write_text_file(out_file(c.out, "samples.jsonl"), text);
  out << "samples " << count << " validity_fraction " << format_double(double(valid) / count) << '\n';
  return kExitOk;
}

int cmd_quanv_train(const Common& c, std::ostream& out) {
  Json doc = c.resume.empty() ? load_config(c.config_path) : resume_config(c);
  const Json section = doc.value("quanv", Json::object());
  const Json data_j = merged(voxel_data_defaults(), section.value("data", Json::object()));
  const std::string out_dir = resolve_out(c, doc);

  quanv::QuanvState state;
  data::VoxelDataset ds;
  if (c.resume.empty()) {
    Json train_j = without(section, {"data"});
    train_j["seed"] = resolve_seed(c, doc, section);
    train_j["threads"] = resolve_threads_opt(c, doc, section);
    const auto cfg = quanv::config_from_json(train_j);
    cfg.validate();
    doc["quanv"] = quanv::config_to_json(cfg);
    doc["quanv"]["data"] = data_j;
    ds = voxel_data(data_j, cfg.seed, "quanv.data");
    state = quanv::init_quanv(cfg, ds);
  } else {
    if (c.seed) throw ConfigError("--seed cannot be combined with --resume");
    state = quanv::checkpoint_from_json(read_checkpoint(c.resume, "quanv"));
    if (c.threads) state.cfg.threads = *c.threads;
    ds = voxel_data(data_j, state.cfg.seed, "quanv.data");
  }

  prepare_out(out_dir);
  if (c.resume.empty()) write_snapshot(out_dir, doc);
  log_line(out_dir, "quanv train start fold " + std::to_string(state.fold) + " epoch " +
                        std::to_string(state.next_epoch));
  state = quanv::train_pipeline(std::move(state), ds, out_dir, c.stop_after);
  emit_metrics_csv(state.records, out_file(out_dir, "metrics.csv"));
  log_line(out_dir, "quanv train stop");

  out << "records " << state.records.size();
  if (!state.records.empty())
    out << " final_train_acc " << format_double(state.records.back().train_acc) << " final_val_acc "
        << format_double(state.records.back().val_acc);
  out << '\n';
  return kExitOk;
}

int cmd_qvae_train(const Common& c, std::ostream& out) {
  Json doc = c.resume.empty() ? load_config(c.config_path) : resume_config(c);
  const Json section = doc.value("qvae", Json::object());
  const Json data_j = merged(molecule_data_defaults_qvae(), section.value("data", Json::object()));
  const std::string out_dir = resolve_out(c, doc);

  qvae::VaeState state;
  if (c.resume.empty()) {
    Json train_j = without(section, {"data"});
    train_j["seed"] = resolve_seed(c, doc, section);
    train_j["threads"] = resolve_threads_opt(c, doc, section);
    const auto cfg = qvae::config_from_json(train_j);
    cfg.validate();
    doc["qvae"] = qvae::config_to_json(cfg);
    doc["qvae"]["data"] = data_j;
    state = qvae::init_vae(cfg);
  } else {
    if (c.seed) throw ConfigError("--seed cannot be combined with --resume");
    state = qvae::checkpoint_from_json(read_checkpoint(c.resume, "qvae"));
    if (c.threads) state.cfg.threads = *c.threads;
  }
  const auto ds = molecule_data(data_j, mol::Mode::Large, state.cfg.seed, "qvae.data");

  prepare_out(out_dir);
  if (c.resume.empty()) write_snapshot(out_dir, doc);
  log_line(out_dir, "qvae train start variant " + std::to_string(state.variant_index) + " epoch " +
                        std::to_string(state.next_epoch));
  state = qvae::train_vae_comparison(std::move(state), ds, out_dir, c.stop_after);
  emit_metrics_csv(state.records, out_file(out_dir, "metrics.csv"));
  log_line(out_dir, "qvae train stop");

  out << "records " << state.records.size() << '\n';
  return kExitOk;
}

int cmd_dataset_synth(const Common& c, std::ostream& out) {
  Json doc = load_config(c.config_path);
  const Json section = doc.value("dataset", Json::object());
  Json d = merged(dataset_defaults(), section);
  d["seed"] = resolve_seed(c, doc, section);
  const auto seed = d["seed"].get<std::uint64_t>();
  const std::string out_dir = resolve_out(c, doc);
  const auto kind = get_as<std::string>(d, "kind", "dataset");
  if (kind == "molecules") {
    const auto mode = mode_from_name(get_as<std::string>(d, "mode", "dataset"));
    if (d["source"] == "file") throw ConfigError("config: dataset.source must be 'enumerate' or 'synthetic'");
    const auto ds = molecule_data(d, mode, seed, "dataset");
    prepare_out(out_dir);
    data::write_jsonl(ds, out_file(out_dir, "molecules.jsonl"));
    out << "molecules " << ds.molecules.size() << '\n';
  } else if (kind == "voxels") {
    if (d["source"] != "synthetic") throw ConfigError("config: dataset.source must be 'synthetic' for voxels");
    const auto ds = voxel_data(d, seed, "dataset");
    prepare_out(out_dir);
    data::write_voxb(ds, out_file(out_dir, "voxels.voxb"));
    out << "voxels " << ds.samples.size() << '\n';
  } else {
    throw ConfigError("config: dataset.kind must be 'molecules' or 'voxels'");
  }
  return kExitOk;
}

data::MoleculeFormat format_for_path(const std::string& path) {
  return fs::path(path).extension() == ".sdf" ? data::MoleculeFormat::Sdf : data::MoleculeFormat::Jsonl;
}

int cmd_fd(const std::string& a, const std::string& b, const std::string& mode_s, std::ostream& out) {
  const auto mode = mode_from_name(mode_s);
  const auto da = data::load_molecules(a, format_for_path(a), mode);
  const auto db = data::load_molecules(b, format_for_path(b), mode);
  out << format_double(metrics::descriptor_fd(da.molecules, db.molecules)) << '\n';
  return kExitOk;
}

// Unlike the dataset loaders, invalid records are reported rather than
// dropped.
int cmd_molcheck(const std::string& in, const std::string& mode_s, std::ostream& out) {
  const auto mode = mode_from_name(mode_s);
  const std::string text = io::read_text_file(in);
  struct Entry {
    std::optional<mol::MoleculeGraph> mol;
    std::string error;
  };
  std::vector<Entry> entries;
  if (format_for_path(in) == data::MoleculeFormat::Sdf) {
    for (auto& m : mol::parse_sdf(text, mode).molecules) entries.push_back({std::move(m), ""});
  } else {
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        entries.push_back({mol::from_jsonl_line(line, mode), ""});
      } catch (const ContractError& e) {
        entries.push_back({std::nullopt, e.what()});
      } catch (const DataError& e) {
        throw ParseError(e.what(), line_no);
      }
    }
  }
  out << "index,smiles,valid,reason,logp_proxy,druglike_proxy,sa_proxy\n";
  for (size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    std::string reason = e.error;
    bool valid = false;
    if (e.mol) {
      const auto v = mol::is_valid(*e.mol);
      valid = v.valid;
      reason = v.reason;
    }
    std::replace(reason.begin(), reason.end(), ',', ';');
    out << i << ',';
    if (valid) {
      const auto p = mol::property_scores(*e.mol);
      out << mol::to_smiles(*e.mol) << ",1," << reason << ',' << format_double(p.logp_proxy) << ','
          << format_double(p.druglike_proxy) << ',' << format_double(p.sa_proxy) << '\n';
    } else {
      out << ",0," << reason << ",,,\n";
    }
  }
  return kExitOk;
}

int cmd_gradcheck(const Common& c, std::optional<int> qubits, std::optional<int> layers, std::ostream& out) {
  Json doc = load_config(c.config_path);
  const Json section = doc.value("check", Json::object());
  Json d = merged(check_defaults(), section);
  const auto seed = resolve_seed(c, doc, section);
  const int n = qubits.value_or(get_as<int>(d, "qubits", "check"));
  const int l = layers.value_or(get_as<int>(d, "layers", "check"));
  const double tol = get_as<double>(d, "tolerance", "check");
  if (n < 1 || n > 12 || l < 1) throw ConfigError("gradcheck: need 1 <= qubits <= 12 and layers >= 1");
  const double e = gradcheck_error(seed, n, l);
  out << "max_relative_error " << format_double(e) << '\n';
  return e < tol ? kExitOk : kExitNumerical;
}

int cmd_plot(const std::string& in, const std::string& out_dir, std::ostream& out) {
  for (const auto& p : plot_metrics(in, out_dir)) out << p << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// SVG line charts

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string r;
  for (char ch : s) {
    if (ch == '<') r += "&lt;";
    else if (ch == '>') r += "&gt;";
    else if (ch == '&') r += "&amp;";
    else r += ch;
  }
  return r;
}

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> pts;
};

std::string svg_chart(const std::string& title, const std::vector<Series>& series) {
  constexpr double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (const auto& [x, y] : s.pts) {
      x0 = std::min(x0, x), x1 = std::max(x1, x);
      y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n"
     << "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n"
     << "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
     << xml_escape(title) << "</text>\n"
     << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  const auto label = [&](double x, double y, const std::string& anchor, const std::string& text) {
    os << "<text x=\"" << fmt("%.1f", x) << "\" y=\"" << fmt("%.1f", y) << "\" text-anchor=\"" << anchor
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(text) << "</text>\n";
  };
  label(L, H - B + 16, "middle", fmt("%.6g", x0));
  label(W - R, H - B + 16, "middle", fmt("%.6g", x1));
  label(L - 6, H - B, "end", fmt("%.6g", y0));
  label(L - 6, T + 4, "end", fmt("%.6g", y1));
  label((L + W - R) / 2, H - 12, "middle", "epoch");

  for (size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (size_t k = 0; k < series[i].pts.size(); ++k)
      os << (k ? " " : "") << fmt("%.2f", px(series[i].pts[k].first)) << ','
         << fmt("%.2f", py(series[i].pts[k].second));
    os << "\"/>\n";
    if (series.size() > 1 || !series[i].name.empty()) {
      const double ly = T + 14.0 * double(i);
      os << "<line x1=\"" << W - R - 130 << "\" y1=\"" << fmt("%.1f", ly) << "\" x2=\"" << W - R - 110
         << "\" y2=\"" << fmt("%.1f", ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      label(W - R - 105, ly + 4, "start", series[i].name);
    }
  }
  os << "</svg>\n";
  return os.str();
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Argument parsing

void add_common(CLI::App* app, Common& c, bool training) {
  app->add_option("--config", c.config_path, "JSON run configuration");
  app->add_option("--seed", c.seed, "Base seed (overrides the config)");
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--threads", c.threads, "Worker threads (default: DRUGQML_THREADS, else 1)")
      ->check(CLI::NonNegativeNumber);
  if (training) {
    app->add_option("--resume", c.resume, "Continue from a checkpoint_last.json");
    app->add_option("--stop-after", c.stop_after, "Stop after this many epochs, leaving a resumable checkpoint")
        ->check(CLI::NonNegativeNumber);
  }
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hybrid quantum-classical models for molecule generation and pocket classification", "drugqml"};
  app.require_subcommand(1);

  Common common;
  auto* qgan_cmd = app.add_subcommand("qgan", "Quantum GAN with a hybrid generator");
  qgan_cmd->require_subcommand(1);
  auto* qgan_train = qgan_cmd->add_subcommand("train", "Train a QGAN (config section 'qgan')");
  add_common(qgan_train, common, true);
  auto* qgan_sample = qgan_cmd->add_subcommand("sample", "Sample molecules from a checkpoint");
  std::string checkpoint;
  int count = 256;
  qgan_sample->add_option("--checkpoint", checkpoint, "QGAN checkpoint")->required();
  qgan_sample->add_option("--count", count, "Number of molecules");
  add_common(qgan_sample, common, false);

  auto* quanv_cmd = app.add_subcommand("quanv", "Quanvolutional pocket classifier");
  quanv_cmd->require_subcommand(1);
  auto* quanv_train = quanv_cmd->add_subcommand("train", "Train with k-fold CV (config section 'quanv')");
  add_common(quanv_train, common, true);

  auto* qvae_cmd = app.add_subcommand("qvae", "Ligand VAE with quantum latent layers");
  qvae_cmd->require_subcommand(1);
  auto* qvae_train = qvae_cmd->add_subcommand("train", "Train the variant comparison (config section 'qvae')");
  add_common(qvae_train, common, true);

  auto* dataset_cmd = app.add_subcommand("dataset", "Dataset utilities");
  dataset_cmd->require_subcommand(1);
  auto* dataset_synth = dataset_cmd->add_subcommand("synth", "Write a synthetic dataset (config section 'dataset')");
  add_common(dataset_synth, common, false);

  std::string fd_a, fd_b, mode = "small";
  auto* fd_cmd = app.add_subcommand("fd", "Descriptor Frechet distance between two molecule files");
  fd_cmd->add_option("--a", fd_a, "First molecule file (.jsonl or .sdf)")->required();
  fd_cmd->add_option("--b", fd_b, "Second molecule file")->required();
  fd_cmd->add_option("--mode", mode, "small | large");

  std::string in_path;
  auto* molcheck_cmd = app.add_subcommand("molcheck", "Per-molecule validity and property proxies as CSV");
  molcheck_cmd->add_option("--in", in_path, "Molecule file (.jsonl or .sdf)")->required();
  molcheck_cmd->add_option("--mode", mode, "small | large");

  std::optional<int> qubits, layers;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Parameter shift vs finite differences");
  gradcheck_cmd->add_option("--qubits", qubits, "Register size");
  gradcheck_cmd->add_option("--layers", layers, "Ansatz layers");
  add_common(gradcheck_cmd, common, false);

  std::string plot_out;
  auto* plot_cmd = app.add_subcommand("plot", "One SVG chart per metric column of a metrics CSV");
  plot_cmd->add_option("--in", in_path, "metrics.csv")->required();
  plot_cmd->add_option("--out", plot_out, "Output directory")->required();

  // CLI11 would report a stray word as a missing subcommand; name it instead.
  CLI::App* level = &app;
  for (const auto& a : args) {
    if (a.empty() || a[0] == '-') break;
    const auto subs = level->get_subcommands([](CLI::App*) { return true; });
    if (subs.empty()) break;
    const auto it = std::find_if(subs.begin(), subs.end(), [&](CLI::App* s) { return s->get_name() == a; });
    if (it == subs.end()) {
      err << "error: unknown subcommand '" << a << "'\n\n" << level->help();
      return kExitConfig;
    }
    level = *it;
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    // Help for the deepest parsed subcommand.
    const CLI::App* target = &app;
    while (!target->get_subcommands().empty()) target = target->get_subcommands().front();
    out << target->help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    const CLI::App* target = &app;
    while (!target->get_subcommands().empty()) target = target->get_subcommands().front();
    err << "error: " << e.what() << "\n\n" << target->help();
    return kExitConfig;
  }

  if (qgan_train->parsed()) return cmd_qgan_train(common, out);
  if (qgan_sample->parsed()) return cmd_qgan_sample(checkpoint, count, common, out);
  if (quanv_train->parsed()) return cmd_quanv_train(common, out);
  if (qvae_train->parsed()) return cmd_qvae_train(common, out);
  if (dataset_synth->parsed()) return cmd_dataset_synth(common, out);
  if (fd_cmd->parsed()) return cmd_fd(fd_a, fd_b, mode, out);
  if (molcheck_cmd->parsed()) return cmd_molcheck(in_path, mode, out);
  if (gradcheck_cmd->parsed()) return cmd_gradcheck(common, qubits, layers, out);
  if (plot_cmd->parsed()) return cmd_plot(in_path, plot_out, out);
  err << app.help();
  return kExitConfig;
}

}  // namespace

void validate_run_config(const Json& doc) {
  check_keys(doc, {"seed", "output_dir", "threads", "qgan", "quanv", "qvae", "dataset", "check"}, "");
  if (doc.contains("qgan")) {
    const auto& s = doc["qgan"];
    check_keys(s, qgan_keys(), "qgan");
    if (s.contains("generator")) check_keys(s["generator"], keys_of(qgan::spec_to_json({})), "qgan.generator");
    if (s.contains("data")) check_keys(s["data"], kMoleculeDataKeys, "qgan.data");
  }
  if (doc.contains("quanv")) {
    const auto& s = doc["quanv"];
    check_keys(s, quanv_keys(), "quanv");
    if (s.contains("data")) check_keys(s["data"], kVoxelDataKeys, "quanv.data");
  }
  if (doc.contains("qvae")) {
    const auto& s = doc["qvae"];
    check_keys(s, qvae_keys(), "qvae");
    if (s.contains("data")) check_keys(s["data"], kMoleculeDataKeys, "qvae.data");
  }
  if (doc.contains("dataset")) check_keys(doc["dataset"], keys_of(dataset_defaults()), "dataset");
  if (doc.contains("check")) check_keys(doc["check"], keys_of(check_defaults()), "check");
}

std::string format_double(double x) { return fmt("%.9g", x); }

std::string metrics_csv(const std::vector<qgan::EpochRecord>& records) {
  std::string s = "epoch,lr,fd,validity_fraction,druglike_mean,logp_mean,sa_mean,d_loss,g_loss\n";
  for (const auto& r : records)
    s += std::to_string(r.epoch) + ',' + format_double(r.lr) + ',' + format_double(r.fd) + ',' +
         format_double(r.validity_fraction) + ',' + format_double(r.druglike_mean) + ',' +
         format_double(r.logp_mean) + ',' + format_double(r.sa_mean) + ',' + format_double(r.d_loss) + ',' +
         format_double(r.g_loss) + '\n';
  return s;
}

std::string metrics_csv(const std::vector<quanv::FoldRecord>& records) {
  std::string s = "fold,epoch,train_loss,val_loss,train_acc,val_acc\n";
  for (const auto& r : records)
    s += std::to_string(r.fold) + ',' + std::to_string(r.epoch) + ',' + format_double(r.train_loss) + ',' +
         format_double(r.val_loss) + ',' + format_double(r.train_acc) + ',' + format_double(r.val_acc) + '\n';
  return s;
}

std::string metrics_csv(const std::vector<qvae::VaeRecord>& records) {
  std::string s = "variant,epoch,total,recon,kl\n";
  for (const auto& r : records)
    s += r.variant + ',' + std::to_string(r.epoch) + ',' + format_double(r.total) + ',' + format_double(r.recon) +
         ',' + format_double(r.kl) + '\n';
  return s;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (t.header.empty()) {
      t.header = std::move(cells);
    } else {
      if (cells.size() != t.header.size())
        throw ParseError("expected " + std::to_string(t.header.size()) + " columns, got " +
                             std::to_string(cells.size()),
                         line_no);
      t.rows.push_back(std::move(cells));
    }
  }
  if (t.header.empty()) throw DataError("empty CSV");
  return t;
}

std::vector<std::string> plot_metrics(const std::string& csv_path, const std::string& out_dir) {
  const auto t = parse_csv(io::read_text_file(csv_path));
  const auto col = [&](const std::string& name) -> int {
    const auto it = std::find(t.header.begin(), t.header.end(), name);
    return it == t.header.end() ? -1 : int(it - t.header.begin());
  };
  const int xcol = col("epoch");
  if (xcol < 0) throw DataError(csv_path + ": no 'epoch' column");
  std::vector<int> group_cols;
  for (const char* g : {"variant", "fold"})
    if (col(g) >= 0) group_cols.push_back(col(g));

  // Series in order of first appearance.
  std::vector<std::string> keys;
  std::vector<std::string> row_key(t.rows.size());
  for (size_t r = 0; r < t.rows.size(); ++r) {
    std::string k;
    for (int g : group_cols) k += (k.empty() ? "" : " ") + t.header[size_t(g)] + "=" + t.rows[r][size_t(g)];
    row_key[r] = k;
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  }

  prepare_out(out_dir);
  std::vector<std::string> written;
  for (size_t c = 0; c < t.header.size(); ++c) {
    if (int(c) == xcol || std::find(group_cols.begin(), group_cols.end(), int(c)) != group_cols.end()) continue;
    std::vector<Series> series(keys.size());
    for (size_t i = 0; i < keys.size(); ++i) series[i].name = keys[i];
    for (size_t r = 0; r < t.rows.size(); ++r) {
      const auto x = parse_number(t.rows[r][size_t(xcol)]);
      const auto y = parse_number(t.rows[r][c]);
      if (!x) throw DataError(csv_path + ": non-numeric epoch '" + t.rows[r][size_t(xcol)] + "'");
      if (!y && !t.rows[r][c].empty() && t.rows[r][c] != "nan")
        throw DataError(csv_path + ": non-numeric value '" + t.rows[r][c] + "' in column " + t.header[c]);
      if (!y || !std::isfinite(*y)) continue;
      const size_t s = size_t(std::find(keys.begin(), keys.end(), row_key[r]) - keys.begin());
      series[s].pts.emplace_back(*x, *y);
    }
    const auto path = (fs::path(out_dir) / (t.header[c] + ".svg")).string();
    io::write_text_file(path, svg_chart(t.header[c], series));
    written.push_back(path);
  }
  return written;
}

double gradcheck_error(std::uint64_t seed, int n_qubits, int n_layers) {
  const auto c = qsim::build_qgan_ansatz(n_qubits, n_layers);
  Rng rng(derive_seed(seed, kTagGradcheck));
  Eigen::VectorXd p(c.n_params), init(n_qubits);
  for (auto& v : p) v = rng.uniform(0.0, 2 * M_PI);
  for (auto& v : init) v = rng.uniform(-M_PI, M_PI);
  const Eigen::MatrixXd ps = qsim::param_shift_grad(c, p, init);
  constexpr double h = 1e-5;
  Eigen::MatrixXd fd(n_qubits, c.n_params);
  for (int k = 0; k < c.n_params; ++k) {
    Eigen::VectorXd a = p, b = p;
    a(k) += h;
    b(k) -= h;
    fd.col(k) = (qsim::run_circuit(c, a, init) - qsim::run_circuit(c, b, init)) / (2 * h);
  }
  double worst = 0.0;
  for (Eigen::Index i = 0; i < ps.size(); ++i) {
    const double x = ps.data()[i], y = fd.data()[i];
    worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-4}));
  }
  return worst;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ContractError& e) {
    err << "invalid argument: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace drugqml::cli
