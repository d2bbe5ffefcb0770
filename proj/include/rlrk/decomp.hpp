#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <sstream>
#include <string>

#include "rlrk/errors.hpp"
#include "rlrk/tensor.hpp"

namespace rlrk {

/// Thin SVD triple with columns sorted by nonincreasing singular value.
template <class Scalar>
struct SvdFactors {
    DenseMatrix<Scalar> u;       // rows x k, orthonormal columns
    DenseVector<Scalar> s;       // k singular values, nonincreasing
    DenseMatrix<Scalar> v;       // cols x k, orthonormal columns
};

/// The single dense SVD kernel behind every rank-truncation routine
/// (one-sided Jacobi with QR preconditioning).
template <class Derived>
SvdFactors<typename Derived::Scalar> thin_svd(const Eigen::MatrixBase<Derived>& m) {
    using Scalar = typename Derived::Scalar;
    if (!m.allFinite()) throw std::invalid_argument("thin_svd: input has non-finite entries");
    Eigen::JacobiSVD<DenseMatrix<Scalar>> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) {
        std::ostringstream msg;
        msg << "thin_svd: decomposition failed on " << m.rows() << "x" << m.cols() << " input";
        throw NumericError(msg.str());
    }
    return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

/// Best rank-r approximation (Eckart-Young) plus its thin factors.
template <class Derived>
std::pair<DenseMatrix<typename Derived::Scalar>, SvdFactors<typename Derived::Scalar>> svd_r(
    const Eigen::MatrixBase<Derived>& m, Index r) {
    using Scalar = typename Derived::Scalar;
    if (r < 1 || r > std::min(m.rows(), m.cols()))
        throw std::invalid_argument("svd_r: rank out of range");
    SvdFactors<Scalar> f = thin_svd(m);
    f.u.conservativeResize(Eigen::NoChange, r);
    f.s.conservativeResize(r);
    f.v.conservativeResize(Eigen::NoChange, r);
    DenseMatrix<Scalar> approx = f.u * f.s.asDiagonal() * f.v.transpose();
    return {std::move(approx), std::move(f)};
}

/// sqrt of the sum of the r largest squared singular values,
/// i.e. the Frobenius norm of the best rank-r approximation.
template <class Derived>
typename Derived::Scalar partial_fro_matrix(const Eigen::MatrixBase<Derived>& g, Index r) {
    if (r < 1 || r > std::min(g.rows(), g.cols()))
        throw std::invalid_argument("partial_fro_matrix: rank out of range");
    const DenseVector<typename Derived::Scalar> s = thin_svd(g).s;
    return s.head(r).norm();
}

/// Core tensor with per-mode orthonormal factors; factor j is d_j x r_j.
template <class Scalar>
struct TuckerDecomp {
    Tensor<Scalar> core;
    std::vector<DenseMatrix<Scalar>> factors;

    RankVec ranks() const { return core.dims(); }
};

using TuckerDecompXd = TuckerDecomp<double>;

inline void check_rank_feasible(const Dims& dims, const RankVec& ranks) {
    if (ranks.size() != dims.size())
        throw std::invalid_argument("rank vector length must match tensor order");
    const Index total = dims_product(dims);
    for (std::size_t j = 0; j < dims.size(); ++j) {
        if (ranks[j] < 1 || ranks[j] > dims[j])
            throw std::invalid_argument("rank out of range for mode " + std::to_string(j));
        if (ranks[j] > total / dims[j])
            throw std::invalid_argument("rank infeasible for mode " + std::to_string(j));
    }
}

/// Model complexity count 2^m r_1...r_m + 2 sum_j d_j r_j.
inline Index tucker_dof(const Dims& dims, const RankVec& ranks) {
    Index prod = 1;
    for (Index r : ranks) prod *= r;
    Index dof = (Index{1} << dims.size()) * prod;
    for (std::size_t j = 0; j < dims.size(); ++j) dof += 2 * dims[j] * ranks[j];
    return dof;
}

/// C x_1 U_1 x_2 ... x_m U_m.
template <class Scalar>
Tensor<Scalar> tucker_compose(const TuckerDecomp<Scalar>& d) {
    Tensor<Scalar> out = d.core;
    for (int j = 0; j < out.order(); ++j) out = mode_product(out, d.factors[static_cast<std::size_t>(j)], j);
    return out;
}

/// One-pass HOSVD: every factor comes from the matricization of the original
/// tensor (not the sequentially truncated variant). Returns the rank-r
/// approximation T x_j U_j U_j^T together with the decomposition.
template <class Scalar>
std::pair<Tensor<Scalar>, TuckerDecomp<Scalar>> hosvd(const Tensor<Scalar>& t, const RankVec& ranks) {
    check_rank_feasible(t.dims(), ranks);
    const int m = t.order();
    TuckerDecomp<Scalar> decomp;
    decomp.factors.resize(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
        SvdFactors<Scalar> f = thin_svd(matricize(t, j));
        decomp.factors[static_cast<std::size_t>(j)] = f.u.leftCols(ranks[static_cast<std::size_t>(j)]);
    }
    Tensor<Scalar> core = t;
    for (int j = 0; j < m; ++j)
        core = mode_product(core, decomp.factors[static_cast<std::size_t>(j)].transpose(), j);
    decomp.core = core;
    return {tucker_compose(decomp), std::move(decomp)};
}

/// Frobenius norm of the rank-r HOSVD approximation. This is a computable
/// lower bound on the tensor's sup-based truncated norm; diagnostic use only,
/// never part of a solver update.
template <class Scalar>
Scalar partial_fro_tensor(const Tensor<Scalar>& g, const RankVec& ranks) {
    auto [approx, decomp] = hosvd(g, ranks);
    (void)decomp;
    return approx.vec().norm();
}

}  // namespace rlrk
