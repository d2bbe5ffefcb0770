#include "rlrk/init.hpp"

#include <algorithm>
#include <cmath>

#include "rlrk/decomp.hpp"
#include "rlrk/errors.hpp"
#include "rlrk/parallel.hpp"

namespace rlrk {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr Index kMaxCoreSize = 4096;

double median_of(std::vector<double> values) {
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid),
                     values.end());
    double hi = values[mid];
    if (values.size() % 2 == 0) {
        const double lo =
            *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
        return 0.5 * (lo + hi);
    }
    return hi;
}

/// Columns of eig sorted by |eigenvalue| descending: the top singular
/// subspace of a symmetric matrix.
MatrixXd top_abs_eigenvectors(const MatrixXd& sym, Index k) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
    if (eig.info() != Eigen::Success)
        throw NumericError("top_abs_eigenvectors: eigendecomposition failed");
    const VectorXd& vals = eig.eigenvalues();
    std::vector<Index> order(static_cast<std::size_t>(vals.size()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return std::abs(vals[a]) > std::abs(vals[b]);
    });
    MatrixXd out(sym.rows(), k);
    for (Index c = 0; c < k; ++c) out.col(c) = eig.eigenvectors().col(order[static_cast<std::size_t>(c)]);
    return out;
}

template <class Carrier>
Carrier response_weighted_mean(const Dataset<Carrier>& data) {
    const std::size_t n = data.sensing.size();
    const std::size_t chunks = chunk_count(n);
    std::vector<Carrier> partials(chunks, zeros_like(data.sensing.front()));
    run_chunks(chunks, [&](std::size_t c) {
        const auto [begin, end] = chunk_range(n, chunks, c);
        for (std::size_t i = begin; i < end; ++i)
            add_scaled(partials[c], data.responses[static_cast<Index>(i)], data.sensing[i]);
    });
    tree_reduce(partials, [](Carrier& a, const Carrier& b) { add_scaled(a, 1.0, b); });
    Carrier mean = std::move(partials.front());
    if constexpr (std::is_same_v<Carrier, MatrixXd>) {
        mean /= static_cast<double>(n);
    } else {
        mean.vec() /= static_cast<double>(n);
    }
    return mean;
}

}  // namespace

ShrinkageParams ShrinkageParams::explicit_tau(double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("shrinkage: tau must be positive");
    ShrinkageParams params;
    params.mode = Mode::Explicit;
    params.tau = tau;
    return params;
}

Eigen::MatrixXd spectral_init_matrix(const MatrixDataset& data, Index r) {
    if (data.sensing.empty()) throw std::invalid_argument("spectral_init_matrix: empty dataset");
    return svd_r(response_weighted_mean(data), r).first;
}

TensorXd hosvd_init_tensor(const TensorDataset& data, const RankVec& ranks) {
    if (data.sensing.empty()) throw std::invalid_argument("hosvd_init_tensor: empty dataset");
    return hosvd(response_weighted_mean(data), ranks).first;
}

Eigen::VectorXd shrink_responses(const Eigen::VectorXd& y, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("shrink_responses: tau must be positive");
    VectorXd out(y.size());
    for (Index i = 0; i < y.size(); ++i) {
        const double capped = std::min(std::abs(y[i]), tau);
        out[i] = y[i] < 0.0 ? -capped : capped;
    }
    return out;
}

Eigen::MatrixXd second_moment_ustat(const TensorDataset& data, const Eigen::VectorXd& y_tilde,
                                    int mode) {
    const Index n = data.n();
    if (n < 2) throw std::invalid_argument("second_moment_ustat: needs n >= 2");
    if (y_tilde.size() != n)
        throw std::invalid_argument("second_moment_ustat: response length mismatch");
    const Index dj = data.sensing.front().dim(mode);

    MatrixXd s = MatrixXd::Zero(dj, data.sensing.front().size() / dj);
    MatrixXd d = MatrixXd::Zero(dj, dj);
    for (Index i = 0; i < n; ++i) {
        const MatrixXd xi = matricize(data.sensing[static_cast<std::size_t>(i)], mode);
        s.noalias() += y_tilde[i] * xi;
        d.noalias() += (y_tilde[i] * y_tilde[i]) * (xi * xi.transpose());
    }
    const double denom = static_cast<double>(n) * static_cast<double>(n - 1);
    return 2.0 * (s * s.transpose() - d) / denom;
}

TensorXd core_least_squares(const TensorDataset& data,
                            const std::vector<Eigen::MatrixXd>& factors) {
    if (data.sensing.empty()) throw std::invalid_argument("core_least_squares: empty dataset");
    const int m = data.sensing.front().order();
    if (static_cast<int>(factors.size()) != m)
        throw std::invalid_argument("core_least_squares: factor count mismatch");
    Dims core_dims(static_cast<std::size_t>(m));
    Index core_size = 1;
    for (int j = 0; j < m; ++j) {
        if (factors[static_cast<std::size_t>(j)].rows() != data.sensing.front().dim(j))
            throw std::invalid_argument("core_least_squares: factor rows mismatch");
        core_dims[static_cast<std::size_t>(j)] = factors[static_cast<std::size_t>(j)].cols();
        core_size *= core_dims[static_cast<std::size_t>(j)];
    }
    if (core_size > kMaxCoreSize)
        throw std::invalid_argument("core_least_squares: core size exceeds the guard");

    MatrixXd gram = MatrixXd::Zero(core_size, core_size);
    VectorXd rhs = VectorXd::Zero(core_size);
    for (Index i = 0; i < data.n(); ++i) {
        TensorXd z = data.sensing[static_cast<std::size_t>(i)];
        for (int j = 0; j < m; ++j)
            z = mode_product(z, factors[static_cast<std::size_t>(j)].transpose(), j);
        gram.noalias() += z.vec() * z.vec().transpose();
        rhs.noalias() += data.responses[i] * z.vec();
    }

    // pseudo-inverse solve of the normal equations
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success)
        throw NumericError("core_least_squares: eigendecomposition of the Gram matrix failed");
    const double lambda_max = eig.eigenvalues().cwiseAbs().maxCoeff();
    const double cutoff = 1e-10 * lambda_max;
    VectorXd inv = VectorXd::Zero(core_size);
    for (Index k = 0; k < core_size; ++k)
        if (eig.eigenvalues()[k] > cutoff) inv[k] = 1.0 / eig.eigenvalues()[k];
    const VectorXd solution =
        eig.eigenvectors() * inv.asDiagonal() * (eig.eigenvectors().transpose() * rhs);
    return TensorXd(core_dims, solution);
}

double plug_in_tau(const TensorDataset& data, const RankVec& ranks) {
    const Index n = data.n();
    const Index d_star = data.sensing.front().size();
    const Index r_bar = *std::max_element(ranks.begin(), ranks.end());

    const TensorXd naive = hosvd_init_tensor(data, ranks);
    double lambda_hat = 0.0;
    for (int j = 0; j < naive.order(); ++j)
        lambda_hat = std::max(lambda_hat, thin_svd(matricize(naive, j)).s[0]);

    std::vector<double> y(data.responses.data(), data.responses.data() + n);
    const double med = median_of(y);
    for (auto& v : y) v = std::abs(v - med);
    const double noise_hat = 1.4826 * median_of(y);

    return std::sqrt(static_cast<double>(n)) * std::pow(static_cast<double>(d_star), -0.25) *
           (std::sqrt(static_cast<double>(r_bar)) * lambda_hat + noise_hat);
}

TensorXd shrinkage_init_tensor(const TensorDataset& data, const RankVec& ranks,
                               const ShrinkageParams& params) {
    if (data.n() < 2) throw std::invalid_argument("shrinkage_init_tensor: needs n >= 2");
    const int m = data.sensing.front().order();
    check_rank_feasible(data.sensing.front().dims(), ranks);

    const double tau =
        params.mode == ShrinkageParams::Mode::Explicit ? params.tau : plug_in_tau(data, ranks);
    const VectorXd y_tilde = shrink_responses(data.responses, tau);

    std::vector<MatrixXd> factors(static_cast<std::size_t>(m));
    run_chunks(static_cast<std::size_t>(m), [&](std::size_t j) {
        const MatrixXd n_j = second_moment_ustat(data, y_tilde, static_cast<int>(j));
        const MatrixXd sym = 0.5 * (n_j + n_j.transpose());
        factors[j] = top_abs_eigenvectors(sym, ranks[j]);
    });

    // core fit uses the raw (unshrunk) responses
    const TensorXd core = core_least_squares(data, factors);
    TuckerDecompXd decomp;
    decomp.core = core;
    decomp.factors = std::move(factors);
    return tucker_compose(decomp);
}

}  // namespace rlrk
