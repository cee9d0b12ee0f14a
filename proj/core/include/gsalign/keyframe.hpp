#pragma once

#include "gsalign/densify.hpp"
#include "gsalign/scheduler.hpp"
#include "gsalign/types.hpp"

#include <optional>
#include <vector>

namespace gsalign {

/// A posed image handed to the back-end, optionally with a colored sparse point cloud.
struct Keyframe {
    KeyframeId id = 0;
    double timestamp = 0.0;
    Camera camera;
    Image image;
    std::vector<ColoredPoint> points;
};

/// Pull-based keyframe producer. next() returns std::nullopt at end of stream.
class KeyframeSource {
public:
    virtual ~KeyframeSource() = default;
    virtual std::optional<Keyframe> next() = 0;
};

/// Source over keyframes already held in memory.
class VectorKeyframeSource : public KeyframeSource {
public:
    explicit VectorKeyframeSource(std::vector<Keyframe> frames) : frames_(std::move(frames)) {}
    std::optional<Keyframe> next() override {
        if (cursor_ >= frames_.size()) return std::nullopt;
        return frames_[cursor_++];
    }

private:
    std::vector<Keyframe> frames_;
    std::size_t cursor_ = 0;
};

}  // namespace gsalign
