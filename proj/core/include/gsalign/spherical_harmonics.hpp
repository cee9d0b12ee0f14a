#pragma once

#include "gsalign/geometry.hpp"
#include "gsalign/types.hpp"

#include <array>

namespace gsalign {

namespace sh_constants {
inline constexpr double kC0 = 0.28209479177387814;
inline constexpr double kC1 = 0.4886025119029199;
inline constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                  -1.0925484305920792, 0.5462742152960396};
inline constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                                  0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                                  -0.5900435899266435};
}  // namespace sh_constants

/// Number of basis functions used at a given degree: (degree + 1)^2.
constexpr int sh_basis_count(int degree) { return (degree + 1) * (degree + 1); }

/// Real SH basis evaluated at a unit direction. Entries beyond the degree are zero.
template <typename T>
std::array<T, kShBasisCount> sh_basis(const Vec3<T>& d, int degree) {
    using namespace sh_constants;
    std::array<T, kShBasisCount> y{};
    const T x = d[0], yy = d[1], z = d[2];
    y[0] = T(kC0);
    if (degree < 1) return y;
    y[1] = -T(kC1) * yy;
    y[2] = T(kC1) * z;
    y[3] = -T(kC1) * x;
    if (degree < 2) return y;
    const T xx = x * x, y2 = yy * yy, zz = z * z;
    y[4] = T(kC2[0]) * x * yy;
    y[5] = T(kC2[1]) * yy * z;
    y[6] = T(kC2[2]) * (T(2) * zz - xx - y2);
    y[7] = T(kC2[3]) * x * z;
    y[8] = T(kC2[4]) * (xx - y2);
    if (degree < 3) return y;
    y[9] = T(kC3[0]) * yy * (T(3) * xx - y2);
    y[10] = T(kC3[1]) * x * yy * z;
    y[11] = T(kC3[2]) * yy * (T(4) * zz - xx - y2);
    y[12] = T(kC3[3]) * z * (T(2) * zz - T(3) * xx - T(3) * y2);
    y[13] = T(kC3[4]) * x * (T(4) * zz - xx - y2);
    y[14] = T(kC3[5]) * z * (xx - y2);
    y[15] = T(kC3[6]) * x * (xx - T(3) * y2);
    return y;
}

/// Partial derivatives of each basis polynomial with respect to (x, y, z).
template <typename T>
std::array<Vec3<T>, kShBasisCount> sh_basis_gradient(const Vec3<T>& d, int degree) {
    using namespace sh_constants;
    std::array<Vec3<T>, kShBasisCount> g;
    for (auto& v : g) v.setZero();
    if (degree < 1) return g;
    const T x = d[0], y = d[1], z = d[2];
    g[1] = Vec3<T>(T(0), -T(kC1), T(0));
    g[2] = Vec3<T>(T(0), T(0), T(kC1));
    g[3] = Vec3<T>(-T(kC1), T(0), T(0));
    if (degree < 2) return g;
    const T xx = x * x, yy = y * y, zz = z * z;
    g[4] = T(kC2[0]) * Vec3<T>(y, x, T(0));
    g[5] = T(kC2[1]) * Vec3<T>(T(0), z, y);
    g[6] = T(kC2[2]) * Vec3<T>(-T(2) * x, -T(2) * y, T(4) * z);
    g[7] = T(kC2[3]) * Vec3<T>(z, T(0), x);
    g[8] = T(kC2[4]) * Vec3<T>(T(2) * x, -T(2) * y, T(0));
    if (degree < 3) return g;
    g[9] = T(kC3[0]) * Vec3<T>(T(6) * x * y, T(3) * xx - T(3) * yy, T(0));
    g[10] = T(kC3[1]) * Vec3<T>(y * z, x * z, x * y);
    g[11] = T(kC3[2]) * Vec3<T>(-T(2) * x * y, T(4) * zz - xx - T(3) * yy, T(8) * y * z);
    g[12] = T(kC3[3]) *
            Vec3<T>(-T(6) * x * z, -T(6) * y * z, T(6) * zz - T(3) * xx - T(3) * yy);
    g[13] = T(kC3[4]) * Vec3<T>(T(4) * zz - T(3) * xx - yy, -T(2) * x * y, T(8) * x * z);
    g[14] = T(kC3[5]) * Vec3<T>(T(2) * x * z, -T(2) * y * z, xx - yy);
    g[15] = T(kC3[6]) * Vec3<T>(T(3) * xx - T(3) * yy, -T(6) * x * y, T(0));
    return g;
}

/// View-dependent color before the +0.5 offset and clamp.
template <typename T, typename Coeff>
Vec3<T> sh_raw_color(const std::array<Coeff, kShCoeffCount>& sh,
                     const std::array<T, kShBasisCount>& basis, int degree) {
    Vec3<T> rgb = Vec3<T>::Zero();
    const int n = sh_basis_count(degree);
    for (int k = 0; k < n; ++k)
        for (int c = 0; c < 3; ++c) rgb[c] += T(sh[k * 3 + c]) * basis[k];
    return rgb;
}

/// Evaluates clamp(sum_k c_k Y_k(dir) + 0.5, >= 0) per channel. A zero direction
/// falls back to +z; other directions are renormalized.
Eigen::Vector3d eval_sh(const ShCoeffs& sh, const Eigen::Vector3d& view_dir, int degree);

}  // namespace gsalign
