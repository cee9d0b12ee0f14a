#include "gsalign/spherical_harmonics.hpp"
#include "gsalign/error.hpp"

#include <algorithm>

namespace gsalign {

Eigen::Vector3d eval_sh(const ShCoeffs& sh, const Eigen::Vector3d& view_dir, int degree) {
    if (degree < 0 || degree > kMaxShDegree)
        throw InvalidParameter("eval_sh: degree must be in 0..3");
    const double norm = view_dir.norm();
    const Eigen::Vector3d dir = norm > 0.0 && std::isfinite(norm)
                                    ? Eigen::Vector3d(view_dir / norm)
                                    : Eigen::Vector3d::UnitZ();
    const auto basis = sh_basis<double>(dir, degree);
    Eigen::Vector3d rgb = sh_raw_color<double>(sh, basis, degree);
    for (int c = 0; c < 3; ++c) rgb[c] = std::max(rgb[c] + 0.5, 0.0);
    return rgb;
}

}  // namespace gsalign
