#pragma once

#include "hbound/foam.hpp"
#include "hbound/scene.hpp"

#include <cmath>
#include <memory>
#include <vector>

namespace hbound::testing {

inline GridGeometry standard_grid() { return {24, 24, 24, 0.1, {-1.2, -1.2, -1.2}}; }

inline std::vector<ClassSpec> standard_classes()
{
    ClassSpec cyl{"cylinder", {{PrimitiveKind::Cylinder, {0, 0, 0}, 0, 0.53, 0.53, 1.58}}, 0.15, 12};
    ClassSpec box{"cuboid", {{PrimitiveKind::Cuboid, {0, 0, 0}, 0, 0.88, 0.68, 1.22}}, 0.15, 12};
    return {cyl, box};
}

inline SolveConfig standard_config()
{
    SolveConfig c;
    c.alpha = -20.0;
    c.r_min = 9.0;
    c.n_r = 32;
    c.beta = std::pow(11.0 / 9.0, 1.0 / 32.0);
    return c;
}

// Coarser setup for unit tests: 32 x 32 retina over the same patch, 16 shells over [9, 11].
inline Retina small_retina()
{
    Retina r;
    r.nu = r.nv = 32;
    return r;
}

inline SolveConfig small_config()
{
    SolveConfig c = standard_config();
    c.n_r = 16;
    c.beta = std::pow(11.0 / 9.0, 1.0 / 16.0);
    return c;
}

struct Scene {
    std::unique_ptr<Problem> problem;
    Hypothesis truth;
    std::vector<std::uint8_t> silhouette;
};

// Renders class `cls` (base dimensions) at the given pose and builds the two-class problem.
inline Scene make_scene(std::uint64_t seed, int cls, const Pose& pose, const SolveConfig& cfg,
                        double sp_noise = 0.0, const Retina& ret = {})
{
    const GridGeometry g = standard_grid();
    const auto classes = standard_classes();
    std::vector<LogitField3D> priors;
    for (size_t k = 0; k < classes.size(); ++k)
        priors.push_back(build_class_prior(classes[k], g, cfg.epsilon, seed * 31 + k));
    const BinaryGrid shape = voxelize(classes[cls].parts, g);
    Rendering r = render_ground_truth(shape, pose, ret, cfg.epsilon);
    LogitField2D fpi = sp_noise > 0 ? noise_salt_pepper(r.fpi, sp_noise, seed * 7 + 3) : r.fpi;
    Scene s;
    s.problem = std::make_unique<Problem>(ret, std::move(fpi), std::move(priors), cfg);
    s.truth = {cls, pose};
    s.silhouette = std::move(r.silhouette);
    return s;
}

}  // namespace hbound::testing
