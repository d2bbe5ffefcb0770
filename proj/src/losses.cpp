#include "rlrk/losses.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rlrk {

LossSpec LossSpec::huber(double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("huber loss: delta must be positive");
    return {Kind::Huber, delta};
}

LossSpec LossSpec::quantile(double delta) {
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("quantile loss: delta must lie strictly in (0,1)");
    return {Kind::Quantile, delta};
}

LossSpec parse_loss(const std::string& text) {
    if (text == "square") return LossSpec::square();
    if (text == "absolute") return LossSpec::absolute();
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    if (colon != std::string::npos) {
        const double delta = std::stod(text.substr(colon + 1));
        if (head == "huber") return LossSpec::huber(delta);
        if (head == "quantile") return LossSpec::quantile(delta);
    }
    throw std::invalid_argument("loss: unknown spec '" + text + "'");
}

std::string format_loss(const LossSpec& spec) {
    std::ostringstream out;
    switch (spec.kind) {
        case LossSpec::Kind::Square:
            out << "square";
            break;
        case LossSpec::Kind::Absolute:
            out << "absolute";
            break;
        case LossSpec::Kind::Huber:
            out << "huber:" << spec.delta;
            break;
        case LossSpec::Kind::Quantile:
            out << "quantile:" << spec.delta;
            break;
    }
    return out.str();
}

double loss_value(const LossSpec& spec, double x) {
    switch (spec.kind) {
        case LossSpec::Kind::Square:
            return x * x;
        case LossSpec::Kind::Absolute:
            return std::abs(x);
        case LossSpec::Kind::Huber: {
            const double d = spec.delta;
            return std::abs(x) <= d ? x * x : 2.0 * d * std::abs(x) - d * d;
        }
        case LossSpec::Kind::Quantile:
            return x >= 0.0 ? spec.delta * x : (spec.delta - 1.0) * x;
    }
    return 0.0;
}

double loss_lipschitz_scale(const LossSpec& spec) {
    switch (spec.kind) {
        case LossSpec::Kind::Square:
        case LossSpec::Kind::Absolute:
            return 1.0;
        case LossSpec::Kind::Huber:
            return 2.0 * spec.delta;
        case LossSpec::Kind::Quantile:
            return std::max(spec.delta, 1.0 - spec.delta);
    }
    return 1.0;
}

double loss_deriv(const LossSpec& spec, double x) {
    switch (spec.kind) {
        case LossSpec::Kind::Square:
            return 2.0 * x;
        case LossSpec::Kind::Absolute:
            return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
        case LossSpec::Kind::Huber: {
            const double d = spec.delta;
            if (std::abs(x) <= d) return 2.0 * x;
            return x > 0.0 ? 2.0 * d : -2.0 * d;
        }
        case LossSpec::Kind::Quantile:
            if (x > 0.0) return spec.delta;
            if (x < 0.0) return spec.delta - 1.0;
            return 0.0;  // 0 is in [delta-1, delta]
    }
    return 0.0;
}

}  // namespace rlrk
