#pragma once

#include "gsalign/keyframe.hpp"

#include <Eigen/Geometry>
#include <filesystem>
#include <string>
#include <vector>

namespace gsalign {

/// Contents of intrinsics.txt: "fx fy cx cy width height".
struct Intrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.5;
    double cy = 0.5;
    int width = 1;
    int height = 1;
};

/// One trajectory row. The pose is camera-to-world.
struct TrajectoryEntry {
    double timestamp = 0.0;
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    /// Unit quaternion; normalized on parse.
    Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
};

/// Default soft-synchronization window between a pose and its image, in seconds.
inline constexpr double kDefaultSyncWindow = 0.08;

Intrinsics parse_intrinsics(const std::filesystem::path& path);

/// Parses "timestamp tx ty tz qx qy qz qw". Throws ParseError carrying `line_no`.
TrajectoryEntry parse_trajectory_line(const std::string& line, long line_no);

/// Reads a trajectory file, skipping blank and '#' lines. Timestamps must strictly increase.
std::vector<TrajectoryEntry> parse_trajectory(const std::filesystem::path& path);

/// Reads "x y z r g b" rows.
std::vector<ColoredPoint> read_points(const std::filesystem::path& path);

/// World-to-camera Camera for a camera-to-world pose.
Camera camera_from_pose(const Intrinsics& intrinsics, const TrajectoryEntry& pose);

/// Formats a timestamp the way dataset file names spell it.
std::string timestamp_stem(double timestamp);

/// Directory-backed keyframe stream.
///
///     root/intrinsics.txt
///     root/trajectory.txt
///     root/images/<timestamp>.ppm|.png
///     root/points/<timestamp>.txt   (optional, named after the matched image)
///     root/gt_map.ply               (optional)
///
/// Each pose is paired with the image whose timestamp is nearest, provided the gap is at
/// most the sync window; unmatched poses are skipped and counted. Frame ids are the
/// zero-based trajectory row indices.
class PosedDataset : public KeyframeSource {
public:
    explicit PosedDataset(std::filesystem::path root, double sync_window = kDefaultSyncWindow);

    std::optional<Keyframe> next() override;

    const std::filesystem::path& root() const { return root_; }
    const Intrinsics& intrinsics() const { return intrinsics_; }
    const std::vector<TrajectoryEntry>& trajectory() const { return trajectory_; }
    /// Poses without an image inside the sync window.
    std::size_t skipped() const { return skipped_; }
    /// Number of poses that resolved to an image.
    std::size_t matched() const;
    /// Cameras of all matched frames, in stream order.
    std::vector<Camera> cameras() const;
    /// Reads every remaining frame.
    std::vector<Keyframe> load_all();

private:
    struct Match {
        std::size_t pose;
        std::filesystem::path image;
        std::string stem;
    };

    std::filesystem::path root_;
    Intrinsics intrinsics_;
    std::vector<TrajectoryEntry> trajectory_;
    std::vector<Match> matches_;
    std::size_t cursor_ = 0;
    std::size_t skipped_ = 0;
};

}  // namespace gsalign
