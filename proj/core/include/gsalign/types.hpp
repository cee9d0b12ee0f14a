#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <vector>

namespace gsalign {

/// Number of real spherical-harmonic basis functions up to degree 3.
inline constexpr int kShBasisCount = 16;
/// Total SH coefficients per primitive (16 basis functions x RGB).
inline constexpr int kShCoeffCount = kShBasisCount * 3;
inline constexpr int kMaxShDegree = 3;

/// Coefficients are stored basis-major: sh[k * 3 + channel].
using ShCoeffs = std::array<float, kShCoeffCount>;

/// One anisotropic 3D Gaussian. Opacity and scale are stored pre-activation.
struct GaussianPrimitive {
    Eigen::Vector3f position = Eigen::Vector3f::Zero();
    /// Rotation quaternion in (w, x, y, z) order.
    Eigen::Vector4f rotation = Eigen::Vector4f(1.0f, 0.0f, 0.0f, 0.0f);
    /// Natural log of the per-axis standard deviation.
    Eigen::Vector3f log_scale = Eigen::Vector3f::Zero();
    float opacity_logit = 0.0f;
    ShCoeffs sh{};

    double opacity() const;
    Eigen::Vector3d scale() const;

    bool operator==(const GaussianPrimitive& other) const;
};

double logistic(double x);
/// Inverse of logistic. Requires 0 < p < 1.
double logit(double p);

/// Pinhole camera with a world-to-camera rigid transform.
struct Camera {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.5;
    double cy = 0.5;
    int width = 1;
    int height = 1;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    /// Throws InvalidParameter when intrinsics or rotation are out of range.
    void validate() const;

    /// Camera center in world coordinates.
    Eigen::Vector3d center() const { return -rotation.transpose() * translation; }

    /// Builds the world-to-camera camera from a camera-to-world pose.
    static Camera from_camera_to_world(double fx, double fy, double cx, double cy, int width,
                                       int height, const Eigen::Matrix3d& rotation_c2w,
                                       const Eigen::Vector3d& position);
};

/// Row-major RGB image with values nominally in [0, 1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width + x) * 3 + c;
    }
    double& at(int x, int y, int c) { return data[index(x, y, c)]; }
    double at(int x, int y, int c) const { return data[index(x, y, c)]; }

    bool same_shape(const Image& other) const {
        return width == other.width && height == other.height;
    }
    void clamp01();
};

}  // namespace gsalign
