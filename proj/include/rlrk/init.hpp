#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "rlrk/model.hpp"

namespace rlrk {

/// Shrinkage threshold for the second-order-moment initialization.
/// Explicit carries a user value; PlugIn derives tau from observable
/// surrogates of the quantities the threshold formula wants.
struct ShrinkageParams {
    enum class Mode { Explicit, PlugIn };

    Mode mode = Mode::PlugIn;
    double tau = 0.0;  // Explicit mode; must be positive

    static ShrinkageParams explicit_tau(double tau);
    static ShrinkageParams plug_in() { return {}; }
};

/// M0 = SVD_r(n^-1 sum_i X_i Y_i).
Eigen::MatrixXd spectral_init_matrix(const MatrixDataset& data, Index r);

/// M0 = HOSVD_r(n^-1 sum_i Y_i X_i), the naive tensor spectral start.
TensorXd hosvd_init_tensor(const TensorDataset& data, const RankVec& ranks);

/// Y_i -> sign(Y_i) min(|Y_i|, tau).
Eigen::VectorXd shrink_responses(const Eigen::VectorXd& y, double tau);

/// Second-order U-statistic for mode j,
///   N_j = (n(n-1))^-1 sum_{i != i'} Yt_i Yt_i' (X_i(j) X_i'(j)^T + transpose),
/// computed through the algebraic identity 2 (S S^T - D) / (n(n-1)) with
/// S = sum_i Yt_i X_i(j) and D = sum_i Yt_i^2 X_i(j) X_i(j)^T.
Eigen::MatrixXd second_moment_ustat(const TensorDataset& data, const Eigen::VectorXd& y_tilde,
                                    int mode);

/// Least-squares core fit against fixed orthonormal factors; solves the
/// normal equations with a pseudo-inverse (cutoff 1e-10 lambda_max).
TensorXd core_least_squares(const TensorDataset& data,
                            const std::vector<Eigen::MatrixXd>& factors);

/// Full shrinkage pipeline: cap responses, build the per-mode U-statistics,
/// take their top eigenspaces as factors, then fit the core against the
/// unshrunk responses.
TensorXd shrinkage_init_tensor(const TensorDataset& data, const RankVec& ranks,
                               const ShrinkageParams& params = ShrinkageParams::plug_in());

/// The tau that PlugIn mode would use (exposed for tests and the harness
/// summary): sqrt(n) (d*)^(-1/4) (sqrt(rbar) lambda_hat + noise_hat) with
/// lambda_hat from the naive HOSVD start and noise_hat a scaled median
/// absolute deviation of the responses.
double plug_in_tau(const TensorDataset& data, const RankVec& ranks);

}  // namespace rlrk
