#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "drugqml/qgan.hpp"
#include "drugqml/quanv.hpp"
#include "drugqml/qvae.hpp"
#include "drugqml/serialize.hpp"

namespace drugqml::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

/// Entry point. `args` excludes the program name. Subcommands:
///   qgan train | qgan sample | quanv train | qvae train | dataset synth |
///   fd | molcheck | gradcheck | plot
/// Exit codes: 0 ok, 2 config/usage, 3 data/IO, 4 numerical failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

/// Strict run configuration: one JSON object with global keys seed,
/// output_dir, threads and one section per command (qgan, quanv, qvae,
/// dataset, check). Unknown keys at any level -> ConfigError naming the key.
void validate_run_config(const io::Json& doc);

// "%.9g"
std::string format_double(double x);

std::string metrics_csv(const std::vector<qgan::EpochRecord>& records);
std::string metrics_csv(const std::vector<quanv::FoldRecord>& records);
std::string metrics_csv(const std::vector<qvae::VaeRecord>& records);

/// Header plus one row per record; DataError if `path` cannot be written.
template <typename Record>
void emit_metrics_csv(const std::vector<Record>& records, const std::string& path) {
  io::write_text_file(path, metrics_csv(records));
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv(const std::string& text);  // DataError on ragged rows

/// One SVG line chart per metric column of a metrics CSV. "epoch" is the x
/// axis; "fold" and "variant" columns split the rows into series. Returns the
/// written paths in column order.
std::vector<std::string> plot_metrics(const std::string& csv_path, const std::string& out_dir);

/// Parameter shift vs central differences on a seeded QGAN ansatz; max
/// relative error with a 1e-4 magnitude floor.
double gradcheck_error(std::uint64_t seed, int n_qubits, int n_layers);

}  // namespace drugqml::cli
