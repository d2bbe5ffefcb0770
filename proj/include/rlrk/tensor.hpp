#pragma once

#include <Eigen/Dense>

#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

namespace rlrk {

using Index = Eigen::Index;
using Dims = std::vector<Index>;

/// Tucker rank vector, one entry per mode.
using RankVec = std::vector<Index>;

template <class Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Dense m-way array (m >= 2). Entries are stored flat with the first index
/// fastest, so for m = 2 the layout coincides with a column-major matrix.
/// Shape is fixed at construction.
template <class Scalar>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Dims dims) : dims_(std::move(dims)) {
        if (dims_.size() < 2) throw std::invalid_argument("Tensor: order must be >= 2");
        Index n = 1;
        for (Index d : dims_) {
            if (d < 1) throw std::invalid_argument("Tensor: dims must be positive");
            n *= d;
        }
        data_ = DenseVector<Scalar>::Zero(n);
    }

    Tensor(Dims dims, DenseVector<Scalar> values) : Tensor(std::move(dims)) {
        if (values.size() != data_.size())
            throw std::invalid_argument("Tensor: value count does not match dims");
        data_ = std::move(values);
    }

    int order() const { return static_cast<int>(dims_.size()); }
    const Dims& dims() const { return dims_; }
    Index dim(int mode) const { return dims_[static_cast<std::size_t>(mode)]; }
    Index size() const { return data_.size(); }

    Scalar* data() { return data_.data(); }
    const Scalar* data() const { return data_.data(); }

    /// Flattened view (first index fastest); the natural hook for Eigen
    /// expressions over all entries.
    DenseVector<Scalar>& vec() { return data_; }
    const DenseVector<Scalar>& vec() const { return data_; }

    Scalar& at(std::initializer_list<Index> idx) { return data_[offset(idx)]; }
    Scalar at(std::initializer_list<Index> idx) const { return data_[offset(idx)]; }

    bool same_dims(const Tensor& other) const { return dims_ == other.dims_; }

private:
    Index offset(std::initializer_list<Index> idx) const {
        if (idx.size() != dims_.size()) throw std::invalid_argument("Tensor: bad index arity");
        Index off = 0, stride = 1;
        auto it = idx.begin();
        for (std::size_t k = 0; k < dims_.size(); ++k, ++it) {
            if (*it < 0 || *it >= dims_[k]) throw std::out_of_range("Tensor: index out of range");
            off += *it * stride;
            stride *= dims_[k];
        }
        return off;
    }

    Dims dims_;
    DenseVector<Scalar> data_;
};

using TensorXd = Tensor<double>;

inline Index dims_product(const Dims& dims) {
    return std::accumulate(dims.begin(), dims.end(), Index{1}, std::multiplies<Index>());
}

template <class Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
    if (!a.same_dims(b)) throw std::invalid_argument("Tensor +: shape mismatch");
    return Tensor<Scalar>(a.dims(), a.vec() + b.vec());
}

template <class Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
    if (!a.same_dims(b)) throw std::invalid_argument("Tensor -: shape mismatch");
    return Tensor<Scalar>(a.dims(), a.vec() - b.vec());
}

template <class Scalar>
Tensor<Scalar> operator*(Scalar c, const Tensor<Scalar>& a) {
    return Tensor<Scalar>(a.dims(), c * a.vec());
}

/// Mode-j matricization: rows indexed by mode j, columns by the remaining
/// indices in lexicographic order with the first remaining index fastest.
/// With the first-index-fastest element layout this makes each output column
/// a strided slice of the flat data.
template <class Scalar>
DenseMatrix<Scalar> matricize(const Tensor<Scalar>& t, int mode) {
    const int m = t.order();
    if (mode < 0 || mode >= m) throw std::invalid_argument("matricize: mode out of range");
    Index inner = 1, outer = 1;
    for (int k = 0; k < mode; ++k) inner *= t.dim(k);
    for (int k = mode + 1; k < m; ++k) outer *= t.dim(k);
    const Index dj = t.dim(mode);

    DenseMatrix<Scalar> out(dj, inner * outer);
    const Scalar* src = t.data();
    for (Index b = 0; b < outer; ++b) {
        for (Index a = 0; a < inner; ++a) {
            Eigen::Map<const DenseVector<Scalar>, 0, Eigen::InnerStride<>> fiber(
                src + a + b * inner * dj, dj, Eigen::InnerStride<>(inner));
            out.col(a + b * inner) = fiber;
        }
    }
    return out;
}

/// Inverse of matricize: folds a d_mode x prod(other dims) matrix back into a
/// tensor of shape `dims`.
template <class Derived>
Tensor<typename Derived::Scalar> fold(const Eigen::MatrixBase<Derived>& mat, int mode,
                                      const Dims& dims) {
    using Scalar = typename Derived::Scalar;
    const int m = static_cast<int>(dims.size());
    if (mode < 0 || mode >= m) throw std::invalid_argument("fold: mode out of range");
    Index inner = 1, outer = 1;
    for (int k = 0; k < mode; ++k) inner *= dims[static_cast<std::size_t>(k)];
    for (int k = mode + 1; k < m; ++k) outer *= dims[static_cast<std::size_t>(k)];
    const Index dj = dims[static_cast<std::size_t>(mode)];
    if (mat.rows() != dj || mat.cols() != inner * outer)
        throw std::invalid_argument("fold: matrix shape does not match dims");

    Tensor<Scalar> out(dims);
    Scalar* dst = out.data();
    for (Index b = 0; b < outer; ++b) {
        for (Index a = 0; a < inner; ++a) {
            Eigen::Map<DenseVector<Scalar>, 0, Eigen::InnerStride<>> fiber(
                dst + a + b * inner * dj, dj, Eigen::InnerStride<>(inner));
            fiber = mat.col(a + b * inner);
        }
    }
    return out;
}

/// Mode-j product: replaces dim j by the row count of `a`, satisfying
/// matricize(result, j) = a * matricize(t, j).
template <class Scalar, class Derived>
Tensor<Scalar> mode_product(const Tensor<Scalar>& t, const Eigen::MatrixBase<Derived>& a,
                            int mode) {
    static_assert(std::is_same_v<typename Derived::Scalar, Scalar>);
    const int m = t.order();
    if (mode < 0 || mode >= m) throw std::invalid_argument("mode_product: mode out of range");
    if (a.cols() != t.dim(mode))
        throw std::invalid_argument("mode_product: matrix cols must equal tensor dim");
    Dims out_dims = t.dims();
    out_dims[static_cast<std::size_t>(mode)] = a.rows();
    const DenseMatrix<Scalar> product = a * matricize(t, mode);
    return fold(product, mode, out_dims);
}

// ---------------------------------------------------------------------------
// Carrier helpers shared by the matrix and tensor code paths. Algorithms that
// treat the estimate as a flat vector (losses, data generation, solver traces)
// are written once against these.

inline double inner(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a.array() * b.array()).sum();
}
inline double inner(const TensorXd& a, const TensorXd& b) { return a.vec().dot(b.vec()); }

inline double fro_norm(const Eigen::MatrixXd& a) { return a.norm(); }
inline double fro_norm(const TensorXd& a) { return a.vec().norm(); }

inline void add_scaled(Eigen::MatrixXd& acc, double c, const Eigen::MatrixXd& x) {
    acc.noalias() += c * x;
}
inline void add_scaled(TensorXd& acc, double c, const TensorXd& x) { acc.vec() += c * x.vec(); }

inline Eigen::MatrixXd zeros_like(const Eigen::MatrixXd& a) {
    return Eigen::MatrixXd::Zero(a.rows(), a.cols());
}
inline TensorXd zeros_like(const TensorXd& a) { return TensorXd(a.dims()); }

inline bool same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols();
}
inline bool same_shape(const TensorXd& a, const TensorXd& b) { return a.same_dims(b); }

inline bool all_finite(const Eigen::MatrixXd& a) { return a.allFinite(); }
inline bool all_finite(const TensorXd& a) { return a.vec().allFinite(); }

}  // namespace rlrk
