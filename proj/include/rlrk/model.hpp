#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rlrk/tensor.hpp"

namespace rlrk {

struct NoiseSpec {
    enum class Kind { None, Gaussian, StudentT };

    Kind kind = Kind::None;
    double sigma = 0.0;  // Gaussian std deviation
    double nu = 0.0;     // StudentT degrees of freedom, > 1 so E|xi| exists
    double scale = 1.0;  // StudentT multiplier on the standard t variate

    static NoiseSpec none() { return {}; }
    static NoiseSpec gaussian(double sigma);
    static NoiseSpec student_t(double nu, double scale);
};

NoiseSpec parse_noise(const std::string& text);  // "none" | "gaussian:<s>" | "student_t:<nu>:<scale>"
std::string format_noise(const NoiseSpec& noise);

/// E|xi|. Gaussian closed form is sigma*sqrt(2/pi); Student-t values come
/// from a frozen Monte-Carlo table (no closed form is assumed), with a
/// deterministic 1e7-draw fallback for degrees of freedom outside the table.
double noise_mean_abs(const NoiseSpec& noise);

/// Exact low-rank (or low-Tucker-rank) target together with the spectral
/// quantities the schedules care about.
template <class Carrier>
struct GroundTruth {
    Carrier object;
    double sigma_min = 0.0;  // sigma_r for matrices, min_j sigma_{r_j}(M_(j)) for tensors
    double kappa = 1.0;
};

template <class Carrier>
struct Dataset {
    std::vector<Carrier> sensing;
    Eigen::VectorXd responses;
    std::uint64_t seed = 0;
    NoiseSpec noise;
    std::optional<GroundTruth<Carrier>> truth;

    Index n() const { return static_cast<Index>(sensing.size()); }
};

using MatrixDataset = Dataset<Eigen::MatrixXd>;
using TensorDataset = Dataset<TensorXd>;

/// M* = U diag(spectrum) V^T with Haar-ish random orthonormal U, V.
GroundTruth<Eigen::MatrixXd> gen_low_rank_matrix(Index d1, Index d2, Index r,
                                                 const std::vector<double>& spectrum,
                                                 std::uint64_t seed);

/// Random core + orthonormal factors, core rescaled so the smallest per-mode
/// r_j-th singular value equals mode_min_sv.
GroundTruth<TensorXd> gen_low_rank_tensor(const Dims& dims, const RankVec& ranks,
                                          double mode_min_sv, std::uint64_t seed);

/// i.i.d. N(0,1) sensing objects and responses Y_i = <X_i, M*> + xi_i.
/// One RNG stream per observation index, so the dataset is identical for a
/// given (seed, params) regardless of evaluation order.
MatrixDataset gen_observations(const GroundTruth<Eigen::MatrixXd>& truth, Index n,
                               const NoiseSpec& noise, std::uint64_t seed);
TensorDataset gen_observations(const GroundTruth<TensorXd>& truth, Index n,
                               const NoiseSpec& noise, std::uint64_t seed);

/// 20 log10(|M*|_F / E|xi|).
double snr_db_from_norm(double truth_fro, const NoiseSpec& noise);

template <class Carrier>
double snr_db(const GroundTruth<Carrier>& truth, const NoiseSpec& noise) {
    return snr_db_from_norm(fro_norm(truth.object), noise);
}

/// Inverse of snr_db: rescales the noise parameter so the pair
/// (truth_fro, result) sits at the requested SNR.
NoiseSpec noise_at_snr(const NoiseSpec& shape, double target_snr_db, double truth_fro);

}  // namespace rlrk
