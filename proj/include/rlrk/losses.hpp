#pragma once

#include <string>
#include <vector>

#include "rlrk/model.hpp"
#include "rlrk/parallel.hpp"

namespace rlrk {

/// Scalar loss rho applied to residuals Y_i - <M, X_i>.
struct LossSpec {
    enum class Kind { Square, Absolute, Huber, Quantile };

    Kind kind = Kind::Absolute;
    double delta = 0.0;  // Huber: > 0; Quantile: strictly inside (0,1)

    static LossSpec square() { return {Kind::Square, 0.0}; }
    static LossSpec absolute() { return {Kind::Absolute, 0.0}; }
    static LossSpec huber(double delta);
    static LossSpec quantile(double delta);
};

/// Config syntax: "absolute" | "square" | "huber:<delta>" | "quantile:<delta>".
LossSpec parse_loss(const std::string& text);
std::string format_loss(const LossSpec& spec);

double loss_value(const LossSpec& spec, double x);

/// One valid subgradient element; 0 is returned wherever 0 is admissible, so
/// exactly interpolated observations contribute nothing.
double loss_deriv(const LossSpec& spec, double x);

/// Lipschitz bound of the scalar loss: 1 (absolute), 2 delta (Huber),
/// max(delta, 1-delta) (quantile). Practical stepsizes divide by this so one
/// (c1, c2) calibration carries across losses; the square loss, which is not
/// Lipschitz, maps to 1.
double loss_lipschitz_scale(const LossSpec& spec);

namespace detail {

template <class Carrier>
void check_shapes(const Dataset<Carrier>& data, const Carrier& m, const char* who) {
    if (data.sensing.empty()) throw std::invalid_argument(std::string(who) + ": empty dataset");
    if (!same_shape(data.sensing.front(), m))
        throw std::invalid_argument(std::string(who) + ": estimate shape mismatch");
}

}  // namespace detail

/// Residuals r_i = Y_i - <M, X_i>; chunked so downstream reductions are
/// reproducible for any thread count.
template <class Carrier>
Eigen::VectorXd residuals(const Dataset<Carrier>& data, const Carrier& m) {
    detail::check_shapes(data, m, "residuals");
    const std::size_t n = data.sensing.size();
    Eigen::VectorXd r(static_cast<Index>(n));
    const std::size_t chunks = chunk_count(n);
    run_chunks(chunks, [&](std::size_t c) {
        const auto [begin, end] = chunk_range(n, chunks, c);
        for (std::size_t i = begin; i < end; ++i)
            r[static_cast<Index>(i)] =
                data.responses[static_cast<Index>(i)] - inner(m, data.sensing[i]);
    });
    return r;
}

/// f(M) = sum_i rho(Y_i - <M, X_i>), reduced by a fixed pairwise tree.
template <class Carrier>
double objective(const LossSpec& spec, const Dataset<Carrier>& data, const Carrier& m) {
    const Eigen::VectorXd r = residuals(data, m);
    const std::size_t n = data.sensing.size();
    const std::size_t chunks = chunk_count(n);
    std::vector<double> partials(chunks, 0.0);
    for (std::size_t c = 0; c < chunks; ++c) {
        const auto [begin, end] = chunk_range(n, chunks, c);
        double acc = 0.0;
        for (std::size_t i = begin; i < end; ++i)
            acc += loss_value(spec, r[static_cast<Index>(i)]);
        partials[c] = acc;
    }
    return tree_reduce(partials, [](double& a, const double& b) { a += b; });
}

template <class Carrier>
Carrier subgradient_from_residuals(const LossSpec& spec, const Dataset<Carrier>& data,
                                   const Eigen::VectorXd& r) {
    const std::size_t n = data.sensing.size();
    const std::size_t chunks = chunk_count(n);
    std::vector<Carrier> partials(chunks, zeros_like(data.sensing.front()));
    run_chunks(chunks, [&](std::size_t c) {
        const auto [begin, end] = chunk_range(n, chunks, c);
        for (std::size_t i = begin; i < end; ++i) {
            const double coeff = -loss_deriv(spec, r[static_cast<Index>(i)]);
            if (coeff != 0.0) add_scaled(partials[c], coeff, data.sensing[i]);
        }
    });
    tree_reduce(partials, [](Carrier& a, const Carrier& b) { add_scaled(a, 1.0, b); });
    return std::move(partials.front());
}

/// Vanilla subgradient G = sum_i (-rho'(r_i)) X_i.
template <class Carrier>
Carrier full_subgradient(const LossSpec& spec, const Dataset<Carrier>& data, const Carrier& m) {
    const Eigen::VectorXd r = residuals(data, m);
    return subgradient_from_residuals(spec, data, r);
}

/// Objective and subgradient from one residual pass; what the solver calls
/// every iteration.
template <class Carrier>
std::pair<double, Carrier> objective_and_subgradient(const LossSpec& spec,
                                                     const Dataset<Carrier>& data,
                                                     const Carrier& m) {
    const Eigen::VectorXd r = residuals(data, m);
    const std::size_t n = data.sensing.size();
    const std::size_t chunks = chunk_count(n);
    std::vector<double> obj(chunks, 0.0);
    for (std::size_t c = 0; c < chunks; ++c) {
        const auto [begin, end] = chunk_range(n, chunks, c);
        for (std::size_t i = begin; i < end; ++i)
            obj[c] += loss_value(spec, r[static_cast<Index>(i)]);
    }
    const double f = tree_reduce(obj, [](double& a, const double& b) { a += b; });
    return {f, subgradient_from_residuals(spec, data, r)};
}

}  // namespace rlrk
