#include "gsalign/posed_dataset.hpp"
#include "gsalign/error.hpp"
#include "gsalign/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gsalign {

namespace fs = std::filesystem;

namespace {

bool skip_line(const std::string& line) {
    const auto first = line.find_first_not_of(" \t\r");
    return first == std::string::npos || line[first] == '#';
}

std::vector<double> split_numbers(const std::string& line, long line_no) {
    std::istringstream in(line);
    std::vector<double> values;
    std::string token;
    while (in >> token) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(token, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != token.size()) throw ParseError("not a number: '" + token + "'", line_no);
        values.push_back(v);
    }
    return values;
}

std::ifstream open_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

}  // namespace

Intrinsics parse_intrinsics(const fs::path& path) {
    auto in = open_text(path);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (skip_line(line)) continue;
        const auto v = split_numbers(line, line_no);
        if (v.size() != 6)
            throw ParseError("intrinsics need 6 fields 'fx fy cx cy width height', got " +
                                 std::to_string(v.size()),
                             line_no);
        Intrinsics k{v[0], v[1], v[2], v[3], static_cast<int>(v[4]), static_cast<int>(v[5])};
        if (!(k.fx > 0 && k.fy > 0) || k.width <= 0 || k.height <= 0 || v[4] != k.width ||
            v[5] != k.height)
            throw ParseError("invalid intrinsics values", line_no);
        return k;
    }
    throw ParseError("intrinsics file is empty: " + path.string());
}

TrajectoryEntry parse_trajectory_line(const std::string& line, long line_no) {
    const auto v = split_numbers(line, line_no);
    if (v.size() != 8)
        throw ParseError("trajectory rows need 8 fields 'timestamp tx ty tz qx qy qz qw', got " +
                             std::to_string(v.size()),
                         line_no);
    for (double x : v)
        if (!std::isfinite(x)) throw ParseError("non-finite trajectory value", line_no);
    TrajectoryEntry e;
    e.timestamp = v[0];
    e.position = {v[1], v[2], v[3]};
    e.rotation = Eigen::Quaterniond(v[7], v[4], v[5], v[6]);
    const double n = e.rotation.norm();
    if (!(n > 0.0)) throw ParseError("zero quaternion", line_no);
    e.rotation.coeffs() /= n;
    return e;
}

std::vector<TrajectoryEntry> parse_trajectory(const fs::path& path) {
    auto in = open_text(path);
    std::vector<TrajectoryEntry> out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (skip_line(line)) continue;
        auto e = parse_trajectory_line(line, line_no);
        if (!out.empty() && !(e.timestamp > out.back().timestamp))
            throw ParseError("trajectory timestamps must strictly increase", line_no);
        out.push_back(e);
    }
    return out;
}

std::vector<ColoredPoint> read_points(const fs::path& path) {
    auto in = open_text(path);
    std::vector<ColoredPoint> out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (skip_line(line)) continue;
        const auto v = split_numbers(line, line_no);
        if (v.size() != 6)
            throw ParseError("point rows need 6 fields 'x y z r g b', got " + std::to_string(v.size()),
                             line_no);
        ColoredPoint p;
        p.position = {v[0], v[1], v[2]};
        p.color = {v[3], v[4], v[5]};
        if (!p.position.allFinite() || (p.color.array() < 0.0).any() || (p.color.array() > 1.0).any())
            throw ParseError("point coordinates must be finite and colors in [0, 1]", line_no);
        out.push_back(p);
    }
    return out;
}

Camera camera_from_pose(const Intrinsics& k, const TrajectoryEntry& pose) {
    return Camera::from_camera_to_world(k.fx, k.fy, k.cx, k.cy, k.width, k.height,
                                        pose.rotation.toRotationMatrix(), pose.position);
}

std::string timestamp_stem(double timestamp) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", timestamp);
    return buf;
}

PosedDataset::PosedDataset(fs::path root, double sync_window) : root_(std::move(root)) {
    if (!(sync_window >= 0.0)) throw InvalidParameter("sync window must be non-negative");
    if (!fs::is_directory(root_)) throw IoError("dataset directory not found: " + root_.string());
    intrinsics_ = parse_intrinsics(root_ / "intrinsics.txt");
    trajectory_ = parse_trajectory(root_ / "trajectory.txt");

    struct Candidate {
        double t;
        fs::path path;
        std::string stem;
    };
    std::vector<Candidate> images;
    const fs::path image_dir = root_ / "images";
    if (!fs::is_directory(image_dir)) throw IoError("missing images directory: " + image_dir.string());
    for (const auto& entry : fs::directory_iterator(image_dir)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension().string();
        if (ext != ".ppm" && ext != ".png") continue;
        const std::string stem = entry.path().stem().string();
        std::size_t used = 0;
        double t = 0.0;
        try {
            t = std::stod(stem, &used);
        } catch (const std::exception&) {
            continue;
        }
        if (used == stem.size()) images.push_back({t, entry.path(), stem});
    }
    std::sort(images.begin(), images.end(),
              [](const Candidate& a, const Candidate& b) { return a.t < b.t || (a.t == b.t && a.path < b.path); });

    for (std::size_t i = 0; i < trajectory_.size(); ++i) {
        const double t = trajectory_[i].timestamp;
        const auto it = std::lower_bound(images.begin(), images.end(), t,
                                         [](const Candidate& c, double v) { return c.t < v; });
        const Candidate* best = nullptr;
        if (it != images.end()) best = &*it;
        if (it != images.begin()) {
            const Candidate* prev = &*(it - 1);
            if (!best || t - prev->t <= best->t - t) best = prev;
        }
        // The 1e-9 slack absorbs decimal round-off in file-name timestamps.
        if (best && std::abs(best->t - t) <= sync_window + 1e-9) {
            matches_.push_back({i, best->path, best->stem});
        } else {
            ++skipped_;
        }
    }
}

std::size_t PosedDataset::matched() const { return matches_.size(); }

std::vector<Camera> PosedDataset::cameras() const {
    std::vector<Camera> out;
    out.reserve(matches_.size());
    for (const auto& m : matches_) out.push_back(camera_from_pose(intrinsics_, trajectory_[m.pose]));
    return out;
}

std::optional<Keyframe> PosedDataset::next() {
    if (cursor_ >= matches_.size()) return std::nullopt;
    const Match& m = matches_[cursor_++];
    const TrajectoryEntry& pose = trajectory_[m.pose];
    const std::string frame = "frame " + std::to_string(m.pose) + " (t=" + timestamp_stem(pose.timestamp) + ")";
    Keyframe kf;
    kf.id = static_cast<KeyframeId>(m.pose);
    kf.timestamp = pose.timestamp;
    kf.camera = camera_from_pose(intrinsics_, pose);
    try {
        kf.image = read_image(m.image);
        if (kf.image.width != intrinsics_.width || kf.image.height != intrinsics_.height)
            throw ParseError("image is " + std::to_string(kf.image.width) + "x" +
                             std::to_string(kf.image.height) + ", intrinsics say " +
                             std::to_string(intrinsics_.width) + "x" + std::to_string(intrinsics_.height));
        const fs::path points = root_ / "points" / (m.stem + ".txt");
        if (fs::exists(points)) kf.points = read_points(points);
    } catch (const ParseError& e) {
        throw ParseError(frame + ": " + e.what());
    } catch (const Error& e) {
        throw IoError(frame + ": " + e.what());
    }
    return kf;
}

std::vector<Keyframe> PosedDataset::load_all() {
    std::vector<Keyframe> out;
    while (auto kf = next()) out.push_back(std::move(*kf));
    return out;
}

}  // namespace gsalign
