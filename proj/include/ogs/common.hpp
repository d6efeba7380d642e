// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ogs {

template <typename S> using Vec2 = Eigen::Matrix<S, 2, 1>;
template <typename S> using Vec3 = Eigen::Matrix<S, 3, 1>;
template <typename S> using Vec4 = Eigen::Matrix<S, 4, 1>;
template <typename S> using Mat2 = Eigen::Matrix<S, 2, 2>;
template <typename S> using Mat3 = Eigen::Matrix<S, 3, 3>;

using Vec2f = Vec2<float>;
using Vec3f = Vec3<float>;
using Vec4f = Vec4<float>;
using Mat3f = Mat3<float>;

using MatX3f = Eigen::Matrix<float, Eigen::Dynamic, 3, Eigen::RowMajor>;
using MatX2f = Eigen::Matrix<float, Eigen::Dynamic, 2, Eigen::RowMajor>;
using MatX3i = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

template <typename S> inline S sigmoid(S x) {
    return x >= S(0) ? S(1) / (S(1) + std::exp(-x))
                     : std::exp(x) / (S(1) + std::exp(x));
}

// log(sigmoid(y)/(1-sigmoid(y))) inverse; y must be in (0,1)
template <typename S> inline S inv_sigmoid(S y) { return std::log(y / (S(1) - y)); }

template <typename S> inline S softplus(S x) {
    return x > S(30) ? x : std::log1p(std::exp(x));
}

// solves softplus(x) = y for y > 0
template <typename S> inline S inv_softplus(S y) {
    return y > S(30) ? y : std::log(std::expm1(y));
}

class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define OGS_REQUIRE(cond, msg)                                                 \
    do {                                                                       \
        if (!(cond)) throw ::ogs::Error(msg);                                  \
    } while (0)

} // namespace ogs
