#include "rlrk/geometry.hpp"

#include <algorithm>
#include <sstream>

#include "rlrk/errors.hpp"

namespace rlrk {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Orthonormal basis of col(b) by column-pivoted QR with detected rank.
MatrixXd orth_columns(const MatrixXd& b, double rel_threshold = 1e-12) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(b);
    qr.setThreshold(rel_threshold);
    const Index rank = qr.rank();
    if (rank == 0) return MatrixXd(b.rows(), 0);
    return MatrixXd(qr.householderQ()).leftCols(rank);
}

/// As orth_columns, but directions are kept only above an absolute noise
/// floor tied to the caller's scale. Guards against a near-zero b whose
/// floating-point residue would otherwise produce junk basis directions.
MatrixXd orth_columns_at_scale(const MatrixXd& b, double scale) {
    const double floor_ = 1e-13 * scale;
    if (!(b.norm() > floor_)) return MatrixXd(b.rows(), 0);
    Eigen::ColPivHouseholderQR<MatrixXd> qr(b);
    const MatrixXd r_mat = qr.matrixR();
    Index rank = 0;
    const Index kmax = std::min(b.rows(), b.cols());
    for (Index k = 0; k < kmax; ++k) {
        if (std::abs(r_mat(k, k)) > floor_)
            ++rank;  // ColPiv R diagonal is nonincreasing in magnitude
        else
            break;
    }
    if (rank == 0) return MatrixXd(b.rows(), 0);
    return MatrixXd(qr.householderQ()).leftCols(rank);
}

MatrixRetraction truncate_with_basis(const MatrixXd& q1, const MatrixXd& core, Index r) {
    auto [small_approx, f] = svd_r(core, std::min(r, std::min(core.rows(), core.cols())));
    MatrixRetraction out;
    out.factors.u = q1 * f.u;
    out.factors.s = f.s;
    out.factors.v = f.v;
    out.estimate = out.factors.u * out.factors.s.asDiagonal() * out.factors.v.transpose();
    return out;
}

}  // namespace

MatrixTangentBasis make_matrix_basis(const SvdFactors<double>& factors, Index r) {
    if (factors.s.size() < r) throw std::invalid_argument("make_matrix_basis: rank too large");
    if (!(factors.s[r - 1] > 1e-12 * factors.s[0]))
        throw NumericError("make_matrix_basis: iterate is numerically rank deficient");
    return {factors.u.leftCols(r), factors.v.leftCols(r)};
}

MatrixTangentBasis make_matrix_basis(const Eigen::MatrixXd& m, Index r) {
    if (r < 1 || r > std::min(m.rows(), m.cols()))
        throw std::invalid_argument("make_matrix_basis: rank out of range");
    return make_matrix_basis(thin_svd(m), r);
}

Eigen::MatrixXd tangent_project_matrix(const Eigen::MatrixXd& g, const MatrixTangentBasis& basis) {
    const MatrixXd& u = basis.u;
    const MatrixXd& v = basis.v;
    if (g.rows() != u.rows() || g.cols() != v.rows())
        throw std::invalid_argument("tangent_project_matrix: shape mismatch");
    const MatrixXd a = u.transpose() * g;      // r x d2
    const MatrixXd b = g * v;                  // d1 x r
    const MatrixXd c = a * v;                  // r x r
    return u * a + (b - u * c) * v.transpose();
}

MatrixRetraction retract_matrix(const Eigen::MatrixXd& y, Index r) {
    if (r < 1 || r > std::min(y.rows(), y.cols()))
        throw std::invalid_argument("retract_matrix: rank out of range");
    const MatrixXd q1 = orth_columns(y);
    if (q1.cols() == 0) {  // zero input retracts to zero
        MatrixRetraction out;
        out.estimate = MatrixXd::Zero(y.rows(), y.cols());
        out.factors.u = MatrixXd::Zero(y.rows(), r);
        out.factors.s = VectorXd::Zero(r);
        out.factors.v = MatrixXd::Zero(y.cols(), r);
        return out;
    }
    return truncate_with_basis(q1, q1.transpose() * y, r);
}

MatrixRetraction retract_matrix_in_tangent(const Eigen::MatrixXd& y, Index r,
                                           const MatrixTangentBasis& basis) {
    const MatrixXd& u = basis.u;
    const MatrixXd& v = basis.v;
    if (y.rows() != u.rows() || y.cols() != v.rows())
        throw std::invalid_argument("retract_matrix_in_tangent: shape mismatch");
    // y = U A + B V^T with B orthogonal to col(U)
    const MatrixXd a = u.transpose() * y;          // r x d2
    MatrixXd b = (y - u * a) * v;                  // d1 x r
    b -= u * (u.transpose() * b);                  // kill fp leakage into col(U)
    const MatrixXd qb = orth_columns_at_scale(b, std::max(y.norm(), 1.0));
    MatrixXd q1(u.rows(), u.cols() + qb.cols());
    q1 << u, qb;
    return truncate_with_basis(q1, q1.transpose() * y, r);
}

TuckerTangentBasis make_tucker_basis(const TuckerDecompXd& decomp) {
    TuckerTangentBasis basis;
    basis.decomp = decomp;
    const int m = decomp.core.order();
    basis.pinv_cores.resize(static_cast<std::size_t>(m));
    basis.core_cond.resize(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
        const MatrixXd cj = matricize(decomp.core, j);
        const SvdFactors<double> f = thin_svd(cj);
        const double smax = f.s.size() > 0 ? f.s[0] : 0.0;
        const double cutoff = 1e-10 * smax;
        const double smin = f.s[f.s.size() - 1];
        if (!(smin > cutoff)) {
            // a truncated direction means the pinv no longer inverts the full
            // row space and the tangent formula breaks
            std::ostringstream msg;
            msg << "make_tucker_basis: core matricization of mode " << j
                << " is rank deficient (sigma_min " << smin << " vs sigma_max " << smax << ")";
            throw NumericError(msg.str());
        }
        VectorXd sinv = VectorXd::Zero(f.s.size());
        for (Index k = 0; k < f.s.size(); ++k)
            if (f.s[k] > cutoff) sinv[k] = 1.0 / f.s[k];
        const MatrixXd pinv = f.v * sinv.asDiagonal() * f.u.transpose();
        const double residual = (cj * pinv * cj - cj).norm();
        if (!(residual <= 1e-6 * std::max(1.0, cj.norm()))) {
            std::ostringstream msg;
            msg << "make_tucker_basis: pinv residual " << residual << " on mode " << j;
            throw NumericError(msg.str());
        }
        basis.core_cond[static_cast<std::size_t>(j)] = smax / smin;
        basis.pinv_cores[static_cast<std::size_t>(j)] = pinv;
    }
    return basis;
}

TuckerProjection tangent_project_tucker_full(const TensorXd& g, const TuckerTangentBasis& basis) {
    const TuckerDecompXd& d = basis.decomp;
    const int m = d.core.order();
    if (g.order() != m) throw std::invalid_argument("tangent_project_tucker: order mismatch");
    for (int j = 0; j < m; ++j)
        if (g.dim(j) != d.factors[static_cast<std::size_t>(j)].rows())
            throw std::invalid_argument("tangent_project_tucker: shape mismatch");

    // core-range term: G x_j U_j U_j^T, assembled from the small core
    TensorXd g_core = g;
    for (int j = 0; j < m; ++j)
        g_core = mode_product(g_core, d.factors[static_cast<std::size_t>(j)].transpose(), j);
    TuckerDecompXd range;
    range.core = g_core;
    range.factors = d.factors;
    TensorXd result = tucker_compose(range);

    TuckerProjection out;
    out.udots.resize(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        // (G)_(i) (kron_{j != i} U_j) == matricize(G x_{j != i} U_j^T, i)
        TensorXd reduced = g;
        for (int j = 0; j < m; ++j) {
            if (j == i) continue;
            reduced = mode_product(reduced, d.factors[static_cast<std::size_t>(j)].transpose(), j);
        }
        const MatrixXd& ui = d.factors[static_cast<std::size_t>(i)];
        const MatrixXd w = matricize(reduced, i) * basis.pinv_cores[static_cast<std::size_t>(i)];
        const MatrixXd udot = w - ui * (ui.transpose() * w);
        out.udots[static_cast<std::size_t>(i)] = udot;

        TensorXd term = d.core;
        for (int j = 0; j < m; ++j) {
            if (j == i) continue;
            term = mode_product(term, d.factors[static_cast<std::size_t>(j)], j);
        }
        term = mode_product(term, udot, i);
        result = result + term;
    }
    out.tangent = std::move(result);
    return out;
}

TensorXd tangent_project_tucker(const TensorXd& g, const TuckerTangentBasis& basis) {
    return tangent_project_tucker_full(g, basis).tangent;
}

TuckerRetraction retract_tucker(const TensorXd& y, const RankVec& ranks) {
    auto [approx, decomp] = hosvd(y, ranks);
    return {std::move(approx), std::move(decomp)};
}

TuckerRetraction retract_tucker_in_tangent(const TensorXd& y, const RankVec& ranks,
                                           const TuckerTangentBasis& basis,
                                           const std::vector<Eigen::MatrixXd>& udots) {
    const int m = y.order();
    check_rank_feasible(y.dims(), ranks);
    // joint bases W_j = [U_j, orth(Udot_j)]; Udot is orthogonal to U by
    // construction, so the concatenation is orthonormal
    const double scale = std::max(fro_norm(y), 1.0);
    std::vector<MatrixXd> w(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
        const MatrixXd& uj = basis.decomp.factors[static_cast<std::size_t>(j)];
        MatrixXd udot = udots[static_cast<std::size_t>(j)];
        udot -= uj * (uj.transpose() * udot);
        const MatrixXd qd = orth_columns_at_scale(udot, scale);
        MatrixXd wj(uj.rows(), uj.cols() + qd.cols());
        wj << uj, qd;
        w[static_cast<std::size_t>(j)] = std::move(wj);
    }
    TensorXd z = y;
    for (int j = 0; j < m; ++j)
        z = mode_product(z, w[static_cast<std::size_t>(j)].transpose(), j);
    auto [small_approx, small_decomp] = hosvd(z, ranks);
    (void)small_approx;
    TuckerRetraction out;
    out.decomp.core = small_decomp.core;
    out.decomp.factors.resize(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j)
        out.decomp.factors[static_cast<std::size_t>(j)] =
            w[static_cast<std::size_t>(j)] * small_decomp.factors[static_cast<std::size_t>(j)];
    out.estimate = tucker_compose(out.decomp);
    return out;
}

}  // namespace rlrk
