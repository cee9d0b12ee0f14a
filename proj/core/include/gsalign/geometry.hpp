#pragma once

#include <Eigen/Core>

#include <cmath>

namespace gsalign {

template <typename T>
using Vec2 = Eigen::Matrix<T, 2, 1>;
template <typename T>
using Vec3 = Eigen::Matrix<T, 3, 1>;
template <typename T>
using Vec4 = Eigen::Matrix<T, 4, 1>;
template <typename T>
using Mat2 = Eigen::Matrix<T, 2, 2>;
template <typename T>
using Mat3 = Eigen::Matrix<T, 3, 3>;

/// Rotation matrix of a unit quaternion stored as (w, x, y, z).
template <typename T>
Mat3<T> rotation_from_unit_quaternion(const Vec4<T>& q) {
    const T w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3<T> r;
    r << T(1) - T(2) * (y * y + z * z), T(2) * (x * y - w * z), T(2) * (x * z + w * y),
        T(2) * (x * y + w * z), T(1) - T(2) * (x * x + z * z), T(2) * (y * z - w * x),
        T(2) * (x * z - w * y), T(2) * (y * z + w * x), T(1) - T(2) * (x * x + y * y);
    return r;
}

/// Pulls dL/dR back onto the (unit) quaternion components.
template <typename T>
Vec4<T> unit_quaternion_grad(const Vec4<T>& q, const Mat3<T>& g) {
    const T w = q[0], x = q[1], y = q[2], z = q[3];
    Vec4<T> out;
    out[0] = T(2) * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) +
                     x * g(2, 1));
    out[1] = T(2) * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - T(2) * x * g(1, 1) -
                     w * g(1, 2) + z * g(2, 0) + w * g(2, 1) - T(2) * x * g(2, 2));
    out[2] = T(2) * (-T(2) * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) +
                     z * g(1, 2) - w * g(2, 0) + z * g(2, 1) - T(2) * y * g(2, 2));
    out[3] = T(2) * (-T(2) * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) -
                     T(2) * z * g(1, 1) + y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
    return out;
}

/// Gradient through q_hat = q / |q| given dL/dq_hat.
template <typename T>
Vec4<T> normalize_grad(const Vec4<T>& q, const Vec4<T>& grad_unit) {
    const T norm = q.norm();
    const Vec4<T> unit = q / norm;
    return (grad_unit - unit * unit.dot(grad_unit)) / norm;
}

/// Sigma = R diag(exp(2 log_scale)) R^T, from an already normalized quaternion.
template <typename T>
Mat3<T> covariance_from_unit(const Vec4<T>& unit_q, const Vec3<T>& log_scale) {
    const Mat3<T> r = rotation_from_unit_quaternion(unit_q);
    Mat3<T> m = r;
    for (int k = 0; k < 3; ++k) m.col(k) *= std::exp(log_scale[k]);
    return m * m.transpose();
}

/// Covariance of a Gaussian from an arbitrary non-zero quaternion (w, x, y, z) and
/// per-axis log standard deviations. Throws InvalidParameter on a zero quaternion.
Eigen::Matrix3d build_covariance(const Eigen::Vector4d& rotation, const Eigen::Vector3d& log_scale);

}  // namespace gsalign
