#include "rlrk/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "rlrk/decomp.hpp"
#include "rlrk/errors.hpp"
#include "rlrk/rng.hpp"

namespace rlrk {
namespace {

constexpr double kSqrt2OverPi = 0.79788456080286535588;

// n * d* memory guard, about 2.2 GB of sensing payload.
constexpr Index kMaxSensingEntries = 270'000'000;

/// E|T_nu| for the standard Student-t, frozen from a 1e8-draw Monte-Carlo run
/// of Rng::student_t (seed 20250809).
const std::map<double, double>& t_mean_abs_table() {
    static const std::map<double, double> table = {
        {2.0, 1.414026},
        {2.1, 1.357135},
        {3.0, 1.102672},
        {4.0, 0.999914},
    };
    return table;
}

double t_mean_abs(double nu) {
    const auto& table = t_mean_abs_table();
    auto it = table.find(nu);
    if (it != table.end()) return it->second;

    // Untabulated nu: deterministic 1e7-draw estimate, cached per process.
    static std::map<double, double> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto hit = cache.find(nu);
    if (hit != cache.end()) return hit->second;
    Rng rng(20250809);
    double sum = 0.0;
    const long n = 10'000'000L;
    for (long i = 0; i < n; ++i) sum += std::abs(rng.student_t(nu));
    const double value = sum / static_cast<double>(n);
    cache.emplace(nu, value);
    return value;
}

Eigen::MatrixXd random_orthonormal(Index rows, Index cols, Rng& rng) {
    Eigen::MatrixXd g(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) g(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    return Eigen::MatrixXd(qr.householderQ()).leftCols(cols);
}

double draw_noise(Rng& rng, const NoiseSpec& noise) {
    switch (noise.kind) {
        case NoiseSpec::Kind::None:
            return 0.0;
        case NoiseSpec::Kind::Gaussian:
            return noise.sigma * rng.normal();
        case NoiseSpec::Kind::StudentT:
            return noise.scale * rng.student_t(noise.nu);
    }
    return 0.0;
}

template <class Carrier>
Dataset<Carrier> gen_observations_impl(const GroundTruth<Carrier>& truth, Index n,
                                       const NoiseSpec& noise, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("gen_observations: n must be >= 1");
    const Index d_total = truth.object.size();
    if (n * d_total > kMaxSensingEntries)
        throw std::invalid_argument("gen_observations: n * d* exceeds the memory guard");

    Dataset<Carrier> data;
    data.seed = seed;
    data.noise = noise;
    data.truth = truth;
    data.sensing.reserve(static_cast<std::size_t>(n));
    data.responses.resize(n);
    for (Index i = 0; i < n; ++i) {
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
        Carrier x = zeros_like(truth.object);
        if constexpr (std::is_same_v<Carrier, Eigen::MatrixXd>) {
            for (Index c = 0; c < x.cols(); ++c)
                for (Index r = 0; r < x.rows(); ++r) x(r, c) = rng.normal();
        } else {
            for (Index k = 0; k < x.size(); ++k) x.vec()[k] = rng.normal();
        }
        data.responses[i] = inner(x, truth.object) + draw_noise(rng, noise);
        data.sensing.push_back(std::move(x));
    }
    return data;
}

}  // namespace

NoiseSpec NoiseSpec::gaussian(double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian noise: sigma must be positive");
    NoiseSpec spec;
    spec.kind = Kind::Gaussian;
    spec.sigma = sigma;
    return spec;
}

NoiseSpec NoiseSpec::student_t(double nu, double scale) {
    if (!(nu > 1.0))
        throw std::invalid_argument("student_t noise: nu must exceed 1 so E|xi| is finite");
    if (!(scale > 0.0)) throw std::invalid_argument("student_t noise: scale must be positive");
    NoiseSpec spec;
    spec.kind = Kind::StudentT;
    spec.nu = nu;
    spec.scale = scale;
    return spec;
}

NoiseSpec parse_noise(const std::string& text) {
    if (text == "none") return NoiseSpec::none();
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    if (head == "gaussian") {
        if (colon == std::string::npos)
            throw std::invalid_argument("noise: expected gaussian:<sigma>");
        return NoiseSpec::gaussian(std::stod(text.substr(colon + 1)));
    }
    if (head == "student_t") {
        const auto colon2 = text.find(':', colon + 1);
        if (colon == std::string::npos || colon2 == std::string::npos)
            throw std::invalid_argument("noise: expected student_t:<nu>:<scale>");
        const double nu = std::stod(text.substr(colon + 1, colon2 - colon - 1));
        const double scale = std::stod(text.substr(colon2 + 1));
        return NoiseSpec::student_t(nu, scale);
    }
    throw std::invalid_argument("noise: unknown kind '" + text + "'");
}

std::string format_noise(const NoiseSpec& noise) {
    std::ostringstream out;
    switch (noise.kind) {
        case NoiseSpec::Kind::None:
            out << "none";
            break;
        case NoiseSpec::Kind::Gaussian:
            out << "gaussian:" << noise.sigma;
            break;
        case NoiseSpec::Kind::StudentT:
            out << "student_t:" << noise.nu << ":" << noise.scale;
            break;
    }
    return out.str();
}

double noise_mean_abs(const NoiseSpec& noise) {
    switch (noise.kind) {
        case NoiseSpec::Kind::None:
            return 0.0;
        case NoiseSpec::Kind::Gaussian:
            return noise.sigma * kSqrt2OverPi;
        case NoiseSpec::Kind::StudentT:
            if (!(noise.nu > 1.0))
                throw std::invalid_argument("noise_mean_abs: t with nu <= 1 has no mean");
            return noise.scale * t_mean_abs(noise.nu);
    }
    return 0.0;
}

GroundTruth<Eigen::MatrixXd> gen_low_rank_matrix(Index d1, Index d2, Index r,
                                                 const std::vector<double>& spectrum,
                                                 std::uint64_t seed) {
    if (r < 1 || r > std::min(d1, d2))
        throw std::invalid_argument("gen_low_rank_matrix: rank out of range");
    if (static_cast<Index>(spectrum.size()) != r)
        throw std::invalid_argument("gen_low_rank_matrix: spectrum must have r entries");
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        if (!(spectrum[i] > 0.0))
            throw std::invalid_argument("gen_low_rank_matrix: spectrum must be positive");
        if (i > 0 && spectrum[i] > spectrum[i - 1])
            throw std::invalid_argument("gen_low_rank_matrix: spectrum must be nonincreasing");
    }
    Rng rng_u = Rng::stream(seed, 0);
    Rng rng_v = Rng::stream(seed, 1);
    const Eigen::MatrixXd u = random_orthonormal(d1, r, rng_u);
    const Eigen::MatrixXd v = random_orthonormal(d2, r, rng_v);
    const Eigen::VectorXd s = Eigen::Map<const Eigen::VectorXd>(spectrum.data(), r);

    GroundTruth<Eigen::MatrixXd> truth;
    truth.object = u * s.asDiagonal() * v.transpose();
    truth.sigma_min = spectrum.back();
    truth.kappa = spectrum.front() / spectrum.back();
    return truth;
}

GroundTruth<TensorXd> gen_low_rank_tensor(const Dims& dims, const RankVec& ranks,
                                          double mode_min_sv, std::uint64_t seed) {
    check_rank_feasible(dims, ranks);
    if (!(mode_min_sv > 0.0))
        throw std::invalid_argument("gen_low_rank_tensor: mode_min_sv must be positive");
    const int m = static_cast<int>(dims.size());

    for (int attempt = 0; attempt < 16; ++attempt) {
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(attempt));
        TensorXd core(Dims(ranks.begin(), ranks.end()));
        for (Index k = 0; k < core.size(); ++k) core.vec()[k] = rng.normal();

        double min_sv = std::numeric_limits<double>::infinity();
        double max_sv = 0.0;
        for (int j = 0; j < m; ++j) {
            const Eigen::VectorXd s = thin_svd(matricize(core, j)).s;
            min_sv = std::min(min_sv, s[ranks[static_cast<std::size_t>(j)] - 1]);
            max_sv = std::max(max_sv, s[0]);
        }
        if (!(min_sv > 1e-8 * max_sv)) continue;  // mode-rank deficient core, retry

        core = (mode_min_sv / min_sv) * core;
        TuckerDecompXd decomp;
        decomp.core = core;
        decomp.factors.reserve(static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j)
            decomp.factors.push_back(random_orthonormal(dims[static_cast<std::size_t>(j)],
                                                        ranks[static_cast<std::size_t>(j)], rng));

        GroundTruth<TensorXd> truth;
        truth.object = tucker_compose(decomp);
        truth.sigma_min = mode_min_sv;
        truth.kappa = max_sv / min_sv;
        return truth;
    }
    throw NumericError("gen_low_rank_tensor: degenerate core after 16 attempts");
}

MatrixDataset gen_observations(const GroundTruth<Eigen::MatrixXd>& truth, Index n,
                               const NoiseSpec& noise, std::uint64_t seed) {
    return gen_observations_impl(truth, n, noise, seed);
}

TensorDataset gen_observations(const GroundTruth<TensorXd>& truth, Index n,
                               const NoiseSpec& noise, std::uint64_t seed) {
    return gen_observations_impl(truth, n, noise, seed);
}

double snr_db_from_norm(double truth_fro, const NoiseSpec& noise) {
    if (noise.kind == NoiseSpec::Kind::None)
        throw std::invalid_argument("snr_db: undefined for noiseless data");
    if (!(truth_fro > 0.0)) throw std::invalid_argument("snr_db: zero truth");
    const double mean_abs = noise_mean_abs(noise);
    if (!(mean_abs > 0.0)) throw std::invalid_argument("snr_db: zero noise scale");
    return 20.0 * std::log10(truth_fro / mean_abs);
}

NoiseSpec noise_at_snr(const NoiseSpec& shape, double target_snr_db, double truth_fro) {
    if (shape.kind == NoiseSpec::Kind::None)
        throw std::invalid_argument("noise_at_snr: noiseless shape has no scale");
    if (!(truth_fro > 0.0)) throw std::invalid_argument("noise_at_snr: zero truth");
    const double target_mean_abs = truth_fro * std::pow(10.0, -target_snr_db / 20.0);
    NoiseSpec out = shape;
    if (shape.kind == NoiseSpec::Kind::Gaussian) {
        out.sigma = target_mean_abs / kSqrt2OverPi;
    } else {
        NoiseSpec unit = shape;
        unit.scale = 1.0;
        out.scale = target_mean_abs / noise_mean_abs(unit);
    }
    return out;
}

}  // namespace rlrk
