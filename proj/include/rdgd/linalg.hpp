#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstring>
#include <string>
#include <vector>

#include "rdgd/errors.hpp"

namespace rdgd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using AgentId = std::size_t;

inline void require_same_dim(const Vector& a, Eigen::Index d, const char* what) {
    if (a.size() != d) {
        throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(d) +
                             ", got " + std::to_string(a.size()));
    }
}

inline Vector to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> to_std(const Vector& v) {
    return {v.data(), v.data() + v.size()};
}

// Bitwise comparison; NaNs with equal payloads compare equal.
inline bool bitwise_equal(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) return false;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (std::memcmp(&a[i], &b[i], sizeof(double)) != 0) return false;
    }
    return true;
}

}  // namespace rdgd
