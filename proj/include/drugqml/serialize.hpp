#pragma once

// JSON (de)serialization of model state for checkpoints. Doubles go through
// nlohmann's shortest round-trip formatting, so reload is bit-exact.

#include <string>

#include <json.hpp>

#include "drugqml/nn.hpp"
#include "drugqml/qsim.hpp"

namespace drugqml::io {

using Json = nlohmann::json;

Json to_json(const Eigen::VectorXd& v);
Json to_json(const Eigen::MatrixXd& m);
Eigen::VectorXd vector_from_json(const Json& j);
Eigen::MatrixXd matrix_from_json(const Json& j);

Json to_json(const nn::Mlp& mlp);
nn::Mlp mlp_from_json(const Json& j);

Json to_json(const nn::AdamState& s);
nn::AdamState adam_from_json(const Json& j);

Json to_json(const qsim::ParamCircuit& c);
Json to_json(const qsim::Circuit& c);
qsim::Circuit circuit_from_json(const Json& j);

// Writes via a temporary file and rename so a crash never leaves a torn
// checkpoint. Throws DataError on I/O failure.
void write_json_file(const std::string& path, const Json& j);
Json read_json_file(const std::string& path);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace drugqml::io
