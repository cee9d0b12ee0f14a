#include "gsalign/densify.hpp"
#include "gsalign/error.hpp"
#include "gsalign/geometry.hpp"
#include "gsalign/spherical_harmonics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gsalign {

void DensifyConfig::validate() const {
    if (interval < 1) throw InvalidParameter("densify interval must be >= 1");
    if (!(grad_threshold > 0.0)) throw InvalidParameter("densify grad_threshold must be > 0");
    if (!(prune_opacity > 0.0)) throw InvalidParameter("prune_opacity must be > 0");
    if (!(split_scale_percentile > 0.0)) throw InvalidParameter("split_scale_percentile must be > 0");
    if (split_children < 1) throw InvalidParameter("split_children must be >= 1");
    if (!(split_scale_shrink > 0.0)) throw InvalidParameter("split_scale_shrink must be > 0");
    if (!(clone_step >= 0.0)) throw InvalidParameter("clone_step must be >= 0");
}

std::vector<GaussianPrimitive> seed_from_points(std::span<const ColoredPoint> points,
                                                double scene_extent,
                                                std::span<const Eigen::Vector3d> existing) {
    std::vector<GaussianPrimitive> out;
    if (points.empty()) return out;
    if (!(scene_extent > 0.0)) throw InvalidParameter("scene_extent must be > 0");
    for (std::size_t i = 0; i < points.size(); ++i)
        if (!points[i].position.allFinite() || !points[i].color.allFinite())
            throw InvalidParameter("point " + std::to_string(i) + " is not finite");

    const float opacity_logit = static_cast<float>(logit(kSeedOpacity));
    out.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        // Three smallest neighbour distances, brute force.
        double best[3] = {INFINITY, INFINITY, INFINITY};
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (j == i) continue;
            double d = (points[i].position - points[j].position).norm();
            for (double& b : best)
                if (d < b) std::swap(d, b);
        }
        for (const auto& q : existing) {
            double d = (points[i].position - q).norm();
            for (double& b : best)
                if (d < b) std::swap(d, b);
        }
        const std::size_t neighbours = std::min<std::size_t>(3, points.size() - 1 + existing.size());
        double scale = 0.01 * scene_extent;
        if (neighbours > 0) {
            double sum = 0.0;
            for (std::size_t k = 0; k < neighbours; ++k) sum += best[k];
            scale = sum / double(neighbours);
        }
        const float log_scale = static_cast<float>(std::log(std::max(scale, kMinSeedScale)));

        GaussianPrimitive p;
        p.position = points[i].position.cast<float>();
        p.log_scale = Eigen::Vector3f::Constant(log_scale);
        p.opacity_logit = opacity_logit;
        for (int c = 0; c < 3; ++c)
            p.sh[c] = static_cast<float>((points[i].color[c] - 0.5) / sh_constants::kC0);
        out.push_back(p);
    }
    return out;
}

void accumulate_grad_stats(GaussianMap& map, const ParamGrads& grads) {
    if (grads.size() != map.size() || grads.mean2d_norm.size() != map.size() ||
        grads.contributions.size() != map.size())
        throw InvalidParameter("accumulate_grad_stats: gradients cover " +
                               std::to_string(grads.size()) + " primitives, map has " +
                               std::to_string(map.size()));
    auto& stats = map.grad_stats();
    for (std::size_t i = 0; i < map.size(); ++i) {
        if (grads.contributions[i] == 0) continue;
        stats[i].grad_norm_sum += grads.mean2d_norm[i];
        stats[i].position_grad_sum += grads.primitives[i].position;
        ++stats[i].observations;
    }
}

DensifyResult densify_and_prune(GaussianMap& map, const DensifyConfig& config,
                                double scene_extent, std::mt19937_64& rng) {
    config.validate();
    if (!(scene_extent > 0.0)) throw InvalidParameter("scene_extent must be > 0");
    DensifyResult result;
    std::vector<GaussianPrimitive> fresh;
    std::vector<bool> removed(map.size(), false);
    std::normal_distribution<double> normal(0.0, 1.0);
    const float shrink = static_cast<float>(std::log(config.split_scale_shrink));

    for (std::size_t i = 0; i < map.size(); ++i) {
        const GradStats& st = map.grad_stats()[i];
        if (!(st.mean_grad_norm() > config.grad_threshold)) continue;
        const GaussianPrimitive& parent = map[i];
        const Eigen::Vector3d scale = parent.scale();
        if (scale.maxCoeff() <= config.split_scale_percentile * scene_extent) {
            GaussianPrimitive clone = parent;
            const double gn = st.position_grad_sum.norm();
            if (gn > 0.0)
                clone.position -= (config.clone_step * st.position_grad_sum / gn).cast<float>();
            fresh.push_back(clone);
            ++result.cloned;
        } else {
            const Eigen::Vector4d q = parent.rotation.cast<double>();
            const Eigen::Matrix3d rot = rotation_from_unit_quaternion<double>(q / q.norm());
            for (int c = 0; c < config.split_children; ++c) {
                const Eigen::Vector3d z(normal(rng), normal(rng), normal(rng));
                GaussianPrimitive child = parent;
                child.position =
                    (parent.position.cast<double>() + rot * scale.cwiseProduct(z)).cast<float>();
                child.log_scale = parent.log_scale.array() - shrink;
                fresh.push_back(child);
            }
            removed[i] = true;
            ++result.split;
        }
    }

    for (std::size_t i = 0; i < map.size(); ++i) {
        if (removed[i]) continue;
        if (map[i].opacity() < config.prune_opacity) {
            ++result.pruned;
            continue;
        }
        result.survivors.push_back(i);
    }
    std::vector<GaussianPrimitive> kept_fresh;
    for (const auto& p : fresh) {
        if (p.opacity() < config.prune_opacity) {
            ++result.pruned;
            continue;
        }
        kept_fresh.push_back(p);
    }
    result.n_new = kept_fresh.size();

    map.gather(result.survivors);
    map.insert(kept_fresh);
    map.reset_grad_stats();
    return result;
}

}  // namespace gsalign
