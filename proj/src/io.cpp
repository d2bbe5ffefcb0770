#include "rlrk/io.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rlrk/errors.hpp"

namespace rlrk {
namespace {

constexpr char kMagic[5] = {'R', 'L', 'R', 'K', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char bytes[4];
    for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
    return v;
}

void write_payload(std::ostream& out, const double* data, Index count) {
    static_assert(sizeof(double) == 8);
    // little-endian hosts only; u32 headers are written byte-by-byte, the
    // f64 payload natively
    out.write(reinterpret_cast<const char*>(data), count * 8);
}

void read_payload(std::istream& in, double* data, Index count) {
    in.read(reinterpret_cast<char*>(data), count * 8);
    if (!in) throw std::invalid_argument("dump: truncated payload");
}

void write_block(std::ostream& out, const Dims& dims, const double* data, Index count) {
    out.write(kMagic, 5);
    write_u32(out, static_cast<std::uint32_t>(dims.size()));
    for (Index d : dims) write_u32(out, static_cast<std::uint32_t>(d));
    write_payload(out, data, count);
}

Dims read_block_dims(std::istream& in) {
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, kMagic, 5) != 0)
        throw std::invalid_argument("dump: bad magic, not an RLRK1 block");
    const std::uint32_t m = read_u32(in);
    if (m == 0 || m > 64) throw std::invalid_argument("dump: implausible order");
    Dims dims(m);
    for (std::uint32_t j = 0; j < m; ++j) dims[j] = static_cast<Index>(read_u32(in));
    return dims;
}

Eigen::VectorXd read_vector_block(std::istream& in) {
    const Dims dims = read_block_dims(in);
    if (dims.size() != 1) throw std::invalid_argument("dump: expected an m=1 block");
    Eigen::VectorXd v(dims[0]);
    read_payload(in, v.data(), v.size());
    return v;
}

template <class Carrier>
struct CarrierIo;

template <>
struct CarrierIo<Eigen::MatrixXd> {
    static constexpr const char* kind = "matrix";
    static void save(std::ostream& out, const Eigen::MatrixXd& m) { save_matrix(out, m); }
    static Eigen::MatrixXd load(std::istream& in) { return load_matrix(in); }
};

template <>
struct CarrierIo<TensorXd> {
    static constexpr const char* kind = "tensor";
    static void save(std::ostream& out, const TensorXd& t) { save_tensor(out, t); }
    static TensorXd load(std::istream& in) { return load_tensor(in); }
};

template <class Carrier>
void save_dataset_impl(const std::filesystem::path& stem, const Dataset<Carrier>& data) {
    std::ofstream bin(stem.string() + ".bin", std::ios::binary);
    if (!bin) throw std::invalid_argument("save_dataset: cannot open " + stem.string() + ".bin");
    Dims resp_dims = {data.responses.size()};
    write_block(bin, resp_dims, data.responses.data(), data.responses.size());
    for (const auto& x : data.sensing) CarrierIo<Carrier>::save(bin, x);
    if (data.truth) CarrierIo<Carrier>::save(bin, data.truth->object);

    nlohmann::ordered_json side;
    side["schema_version"] = 1;
    side["kind"] = CarrierIo<Carrier>::kind;
    side["n"] = data.n();
    side["seed"] = data.seed;
    side["noise"] = format_noise(data.noise);
    nlohmann::ordered_json shape = nlohmann::ordered_json::array();
    if constexpr (std::is_same_v<Carrier, Eigen::MatrixXd>) {
        shape.push_back(data.sensing.front().rows());
        shape.push_back(data.sensing.front().cols());
    } else {
        for (Index d : data.sensing.front().dims()) shape.push_back(d);
    }
    side["shape"] = shape;
    side["has_truth"] = data.truth.has_value();
    if (data.truth) {
        side["truth_sigma_min"] = data.truth->sigma_min;
        side["truth_kappa"] = data.truth->kappa;
    }
    std::ofstream json_out(stem.string() + ".json");
    json_out << side.dump(2) << "\n";
}

template <class Carrier>
Dataset<Carrier> load_dataset_impl(const std::filesystem::path& stem) {
    std::ifstream json_in(stem.string() + ".json");
    if (!json_in)
        throw std::invalid_argument("load_dataset: cannot open " + stem.string() + ".json");
    nlohmann::json side = nlohmann::json::parse(json_in);
    if (side.at("kind").get<std::string>() != CarrierIo<Carrier>::kind)
        throw std::invalid_argument("load_dataset: sidecar kind does not match the requested type");

    std::ifstream bin(stem.string() + ".bin", std::ios::binary);
    if (!bin) throw std::invalid_argument("load_dataset: cannot open " + stem.string() + ".bin");
    Dataset<Carrier> data;
    data.seed = side.at("seed").get<std::uint64_t>();
    data.noise = parse_noise(side.at("noise").get<std::string>());
    data.responses = read_vector_block(bin);
    const Index n = side.at("n").get<Index>();
    if (data.responses.size() != n) throw std::invalid_argument("load_dataset: n mismatch");
    data.sensing.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) data.sensing.push_back(CarrierIo<Carrier>::load(bin));
    if (side.at("has_truth").get<bool>()) {
        GroundTruth<Carrier> truth;
        truth.object = CarrierIo<Carrier>::load(bin);
        truth.sigma_min = side.at("truth_sigma_min").get<double>();
        truth.kappa = side.at("truth_kappa").get<double>();
        data.truth = std::move(truth);
    }
    return data;
}

}  // namespace

std::string format_double(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

void save_tensor(std::ostream& out, const TensorXd& t) {
    write_block(out, t.dims(), t.data(), t.size());
}

void save_tensor(const std::filesystem::path& path, const TensorXd& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::invalid_argument("save_tensor: cannot open " + path.string());
    save_tensor(out, t);
}

TensorXd load_tensor(std::istream& in) {
    const Dims dims = read_block_dims(in);
    if (dims.size() < 2) throw std::invalid_argument("load_tensor: order must be >= 2");
    TensorXd t(dims);
    read_payload(in, t.data(), t.size());
    return t;
}

TensorXd load_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("load_tensor: cannot open " + path.string());
    return load_tensor(in);
}

void save_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
    // column-major storage == first-index-fastest payload
    Dims dims = {m.rows(), m.cols()};
    write_block(out, dims, m.data(), m.size());
}

void save_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::invalid_argument("save_matrix: cannot open " + path.string());
    save_matrix(out, m);
}

Eigen::MatrixXd load_matrix(std::istream& in) {
    const Dims dims = read_block_dims(in);
    if (dims.size() != 2) throw std::invalid_argument("load_matrix: expected an m=2 block");
    Eigen::MatrixXd m(dims[0], dims[1]);
    read_payload(in, m.data(), m.size());
    return m;
}

Eigen::MatrixXd load_matrix(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("load_matrix: cannot open " + path.string());
    return load_matrix(in);
}

void save_dataset(const std::filesystem::path& stem, const MatrixDataset& data) {
    save_dataset_impl(stem, data);
}

void save_dataset(const std::filesystem::path& stem, const TensorDataset& data) {
    save_dataset_impl(stem, data);
}

MatrixDataset load_matrix_dataset(const std::filesystem::path& stem) {
    return load_dataset_impl<Eigen::MatrixXd>(stem);
}

TensorDataset load_tensor_dataset(const std::filesystem::path& stem) {
    return load_dataset_impl<TensorXd>(stem);
}

std::string trace_to_csv(const SolveTrace& trace) {
    std::ostringstream out;
    out << "iter,eta,phase,objective,rel_error\n";
    for (const auto& rec : trace.records) {
        out << rec.iter << ',' << format_double(rec.eta) << ','
            << (rec.phase == Phase::One ? 1 : 2) << ',' << format_double(rec.objective) << ',';
        if (rec.rel_error) out << format_double(*rec.rel_error);
        out << '\n';
    }
    return out.str();
}

void save_trace_csv(const std::filesystem::path& path, const SolveTrace& trace) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("save_trace_csv: cannot open " + path.string());
    out << trace_to_csv(trace);
}

}  // namespace rlrk
