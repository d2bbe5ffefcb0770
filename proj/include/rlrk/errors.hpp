#pragma once

#include <stdexcept>
#include <string>

namespace rlrk {

/// Raised when an iterative numeric kernel cannot produce a valid result
/// (SVD failure, rank-deficient core, non-finite objective, ...).
/// Argument/shape violations throw std::invalid_argument instead.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rlrk
