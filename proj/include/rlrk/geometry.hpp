#pragma once

#include <Eigen/Dense>

#include <vector>

#include "rlrk/decomp.hpp"
#include "rlrk/tensor.hpp"

namespace rlrk {

/// Tangent-space data at a rank-r matrix iterate: the left/right singular
/// bases of its thin SVD.
struct MatrixTangentBasis {
    Eigen::MatrixXd u;  // d1 x r
    Eigen::MatrixXd v;  // d2 x r
};

/// Basis from an explicit thin SVD of the iterate. Raises NumericError when
/// the iterate is numerically rank deficient (sigma_r < 1e-12 sigma_1).
MatrixTangentBasis make_matrix_basis(const SvdFactors<double>& factors, Index r);
MatrixTangentBasis make_matrix_basis(const Eigen::MatrixXd& m, Index r);

/// P_T(G) = U U^T G + G V V^T - U U^T G V V^T; rank at most 2r.
Eigen::MatrixXd tangent_project_matrix(const Eigen::MatrixXd& g, const MatrixTangentBasis& basis);

struct MatrixRetraction {
    Eigen::MatrixXd estimate;
    SvdFactors<double> factors;
};

/// Best rank-r approximation of y. Factors a thin column basis first (column-
/// pivoted QR with detected rank) and runs the SVD on the small core.
MatrixRetraction retract_matrix(const Eigen::MatrixXd& y, Index r);

/// Retraction for y known to lie in the tangent space at `basis` (the solver
/// step M - eta * P_T(G) always does): works on a 2r x 2r core.
MatrixRetraction retract_matrix_in_tangent(const Eigen::MatrixXd& y, Index r,
                                           const MatrixTangentBasis& basis);

/// Tangent-space data at a Tucker iterate: the decomposition plus cached
/// pseudo-inverses of the core matricizations.
struct TuckerTangentBasis {
    TuckerDecompXd decomp;
    std::vector<Eigen::MatrixXd> pinv_cores;  // pinv of core_(j)
    std::vector<double> core_cond;            // condition numbers of core_(j)
};

/// Builds the basis, validating C_(j) C_(j)^+ C_(j) = C_(j) per mode; a
/// rank-deficient core raises NumericError naming the offending mode.
TuckerTangentBasis make_tucker_basis(const TuckerDecompXd& decomp);

struct TuckerProjection {
    TensorXd tangent;
    std::vector<Eigen::MatrixXd> udots;  // per-mode normal components, d_j x r_j
};

/// P_T(G) = G x_j U_j U_j^T + sum_i C x_{j != i} U_j x_i Udot_i with
/// Udot_i = (I - U_i U_i^T) (G)_(i) (kron_{j != i} U_j) (C_(i))^+.
TuckerProjection tangent_project_tucker_full(const TensorXd& g, const TuckerTangentBasis& basis);
TensorXd tangent_project_tucker(const TensorXd& g, const TuckerTangentBasis& basis);

struct TuckerRetraction {
    TensorXd estimate;
    TuckerDecompXd decomp;
};

/// Rank-r HOSVD retraction of a dense tensor.
TuckerRetraction retract_tucker(const TensorXd& y, const RankVec& ranks);

/// Retraction for y whose mode-j columns lie in span[U_j, Udot_j]: projects
/// onto those joint bases and runs HOSVD on a core of side at most 2 r_j.
TuckerRetraction retract_tucker_in_tangent(const TensorXd& y, const RankVec& ranks,
                                           const TuckerTangentBasis& basis,
                                           const std::vector<Eigen::MatrixXd>& udots);

}  // namespace rlrk
