#include "gsalign/geometry.hpp"
#include "gsalign/types.hpp"
#include "gsalign/error.hpp"

#include <algorithm>
#include <cmath>

namespace gsalign {

double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double p) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidParameter("logit requires 0 < p < 1");
    return std::log(p) - std::log1p(-p);
}

double GaussianPrimitive::opacity() const { return logistic(opacity_logit); }

Eigen::Vector3d GaussianPrimitive::scale() const {
    return log_scale.cast<double>().array().exp().matrix();
}

bool GaussianPrimitive::operator==(const GaussianPrimitive& other) const {
    return position == other.position && rotation == other.rotation &&
           log_scale == other.log_scale && opacity_logit == other.opacity_logit &&
           sh == other.sh;
}

void Camera::validate() const {
    if (!(fx > 0.0 && fy > 0.0)) throw InvalidParameter("camera focal lengths must be positive");
    if (width <= 0 || height <= 0) throw InvalidParameter("camera size must be positive");
    if (!(cx > 0.0 && cx < width && cy > 0.0 && cy < height))
        throw InvalidParameter("camera principal point must lie inside the image");
    const double err = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).norm();
    if (!(err < 1e-6)) throw InvalidParameter("camera rotation is not orthonormal");
    if (!translation.allFinite()) throw InvalidParameter("camera translation is not finite");
}

Camera Camera::from_camera_to_world(double fx, double fy, double cx, double cy, int width,
                                    int height, const Eigen::Matrix3d& rotation_c2w,
                                    const Eigen::Vector3d& position) {
    Camera cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = cx;
    cam.cy = cy;
    cam.width = width;
    cam.height = height;
    cam.rotation = rotation_c2w.transpose();
    cam.translation = -cam.rotation * position;
    return cam;
}

void Image::clamp01() {
    for (double& v : data) v = std::clamp(v, 0.0, 1.0);
}

Eigen::Matrix3d build_covariance(const Eigen::Vector4d& rotation,
                                 const Eigen::Vector3d& log_scale) {
    const double norm = rotation.norm();
    if (!(norm > 0.0) || !std::isfinite(norm))
        throw InvalidParameter("build_covariance: quaternion must be non-zero and finite");
    return covariance_from_unit<double>(rotation / norm, log_scale);
}

}  // namespace gsalign
