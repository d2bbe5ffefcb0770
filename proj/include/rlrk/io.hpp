#pragma once

#include <filesystem>
#include <string>

#include "rlrk/model.hpp"
#include "rlrk/solver.hpp"

namespace rlrk {

/// Binary dump format, little-endian:
///   magic "RLRK1" | u32 m | u32 dims[m] | f64 payload
/// The payload is first-index-fastest for every order; matrices are written
/// as m = 2 blocks, plain vectors (responses) as m = 1.
void save_tensor(std::ostream& out, const TensorXd& t);
void save_tensor(const std::filesystem::path& path, const TensorXd& t);
TensorXd load_tensor(std::istream& in);
TensorXd load_tensor(const std::filesystem::path& path);

void save_matrix(std::ostream& out, const Eigen::MatrixXd& m);
void save_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd load_matrix(std::istream& in);
Eigen::MatrixXd load_matrix(const std::filesystem::path& path);

/// Dataset cache: <stem>.bin holds the responses block followed by the n
/// sensing blocks (and the truth block when present); <stem>.json is the
/// provenance sidecar (seed, noise, shapes).
void save_dataset(const std::filesystem::path& stem, const MatrixDataset& data);
void save_dataset(const std::filesystem::path& stem, const TensorDataset& data);
MatrixDataset load_matrix_dataset(const std::filesystem::path& stem);
TensorDataset load_tensor_dataset(const std::filesystem::path& stem);

/// Per-iteration trace as CSV with header iter,eta,phase,objective,rel_error;
/// rel_error is blank when no ground truth was supplied. Bytes are
/// deterministic (%.17g formatting).
std::string trace_to_csv(const SolveTrace& trace);
void save_trace_csv(const std::filesystem::path& path, const SolveTrace& trace);

/// %.17g, the shortest round-trippable double formatting used everywhere a
/// file must be byte-reproducible.
std::string format_double(double value);

}  // namespace rlrk
