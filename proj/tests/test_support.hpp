#pragma once

#include <Eigen/Dense>

#include "rlrk/rng.hpp"
#include "rlrk/tensor.hpp"

namespace rlrk::test {

inline Eigen::MatrixXd random_matrix(Index rows, Index cols, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
    return m;
}

inline TensorXd random_tensor(const Dims& dims, std::uint64_t seed) {
    Rng rng(seed);
    TensorXd t(dims);
    for (Index i = 0; i < t.size(); ++i) t.vec()[i] = rng.normal();
    return t;
}

/// Orthonormal columns via thin QR of a Gaussian matrix.
inline Eigen::MatrixXd random_orthonormal(Index rows, Index cols, std::uint64_t seed) {
    Eigen::MatrixXd g = random_matrix(rows, cols, seed);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    return Eigen::MatrixXd(qr.householderQ()) .leftCols(cols);
}

/// Kronecker product, A index slow / B index fast.
inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

}  // namespace rlrk::test
