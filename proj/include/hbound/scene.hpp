#pragma once

#include "hbound/bernoulli.hpp"
#include "hbound/core.hpp"
#include "hbound/geometry.hpp"
#include "hbound/summaries.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

namespace hbound {

enum class PrimitiveKind { Cylinder, Cuboid, Sphere };

inline const char* primitive_name(PrimitiveKind k)
{
    switch (k) {
    case PrimitiveKind::Cylinder: return "cylinder";
    case PrimitiveKind::Cuboid: return "cuboid";
    case PrimitiveKind::Sphere: return "sphere";
    }
    return "";
}

inline PrimitiveKind primitive_from_name(const std::string& s)
{
    if (s == "cylinder") return PrimitiveKind::Cylinder;
    if (s == "cuboid") return PrimitiveKind::Cuboid;
    if (s == "sphere") return PrimitiveKind::Sphere;
    throw ParameterError("scene: unknown primitive kind '" + s + "'");
}

// Solid in ICS. Cylinder: radius a, height c along z. Cuboid: edge lengths a, b, c.
// Sphere: radius a. Rotated by yaw degrees about z around its center.
struct Primitive {
    PrimitiveKind kind = PrimitiveKind::Sphere;
    Vec3 center;
    double yaw = 0;
    double a = 1, b = 1, c = 1;

    void validate() const
    {
        require(a > 0 && (kind == PrimitiveKind::Sphere || c > 0) &&
                    (kind != PrimitiveKind::Cuboid || b > 0),
                "primitive: dimensions must be positive");
    }

    bool contains(Vec3 p) const
    {
        const double t = -yaw * std::numbers::pi / 180.0;
        const double dx = p.x - center.x, dy = p.y - center.y, dz = p.z - center.z;
        const double x = std::cos(t) * dx - std::sin(t) * dy;
        const double y = std::sin(t) * dx + std::cos(t) * dy;
        switch (kind) {
        case PrimitiveKind::Cylinder: return x * x + y * y <= a * a && std::abs(dz) <= 0.5 * c;
        case PrimitiveKind::Cuboid:
            return std::abs(x) <= 0.5 * a && std::abs(y) <= 0.5 * b && std::abs(dz) <= 0.5 * c;
        case PrimitiveKind::Sphere: return x * x + y * y + dz * dz <= a * a;
        }
        return false;
    }
};

// Cell = 1 iff its center lies inside the union of the primitives.
inline BinaryGrid voxelize(const std::vector<Primitive>& prims, const GridGeometry& g)
{
    BinaryGrid out;
    out.nx = g.nx;
    out.ny = g.ny;
    out.nz = g.nz;
    out.cell_size = g.cell;
    out.origin = g.origin;
    out.cells.assign(out.size(), 0);
    for (const Primitive& p : prims) p.validate();
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const Vec3 c = g.lo(i, j, k) + Vec3{0.5 * g.cell, 0.5 * g.cell, 0.5 * g.cell};
                for (const Primitive& p : prims)
                    if (p.contains(c)) {
                        out.cells[(static_cast<size_t>(k) * g.ny + j) * g.nx + i] = 1;
                        break;
                    }
            }
    return out;
}

struct Rendering {
    std::vector<std::uint8_t> silhouette;  // u fastest
    LogitField2D fpi;
};

// Silhouette of the posed shape by marching each pixel's central ray in half-cell steps.
inline Rendering render_ground_truth(const BinaryGrid& shape, const Pose& pose, const Retina& ret,
                                     double eps = 0.01)
{
    ret.validate();
    pose.validate();
    Rendering r;
    r.silhouette.assign(static_cast<size_t>(ret.nu) * ret.nv, 0);
    // World bounding sphere of the grid gives the marching interval.
    const Box3 dom{shape.origin, shape.origin + Vec3{shape.nx * shape.cell_size, shape.ny * shape.cell_size,
                                                      shape.nz * shape.cell_size}};
    double dmin = kInf, dmax = 0;
    for (int c = 0; c < 8; ++c) dmax = std::max(dmax, norm(pose.apply(dom.corner(c)) - ret.center));
    const Vec3 mid = pose.apply(0.5 * (dom.lo + dom.hi)) - ret.center;
    double radius = 0;
    for (int c = 0; c < 8; ++c) radius = std::max(radius, norm(pose.apply(dom.corner(c)) - ret.center - mid));
    dmin = std::max(0.0, norm(mid) - radius);
    const double step = 0.5 * shape.cell_size * std::min(pose.kxy(), pose.kz());
    for (int j = 0; j < ret.nv; ++j)
        for (int i = 0; i < ret.nu; ++i) {
            const Vec3 d = Retina::direction(ret.u_center(i), ret.v_center(j));
            for (double t = dmin; t <= dmax; t += step) {
                const Vec3 x = pose.inverse(ret.center + t * d);
                const int ci = static_cast<int>(std::floor((x.x - shape.origin.x) / shape.cell_size));
                const int cj = static_cast<int>(std::floor((x.y - shape.origin.y) / shape.cell_size));
                const int ck = static_cast<int>(std::floor((x.z - shape.origin.z) / shape.cell_size));
                if (ci < 0 || cj < 0 || ck < 0 || ci >= shape.nx || cj >= shape.ny || ck >= shape.nz) continue;
                if (shape.cells[(static_cast<size_t>(ck) * shape.ny + cj) * shape.nx + ci]) {
                    r.silhouette[static_cast<size_t>(j) * ret.nu + i] = 1;
                    break;
                }
            }
        }
    std::vector<double> p(r.silhouette.size());
    for (size_t c = 0; c < p.size(); ++c) p[c] = r.silhouette[c] ? 1.0 - eps : eps;
    r.fpi = fpi_from_probabilities(ret.nu, ret.nv, p, ret.cell_area(), eps);
    return r;
}

// Class described by base primitives whose dimensions are jittered per sample.
struct ClassSpec {
    std::string name;
    std::vector<Primitive> parts;
    double jitter = 0.1;  // relative half-width of the uniform dimension jitter
    int samples = 10;
};

inline std::vector<BinaryGrid> sample_class_shapes(const ClassSpec& spec, const GridGeometry& g,
                                                   std::uint64_t seed)
{
    require(spec.samples >= 1, "class prior: need at least one sample");
    require(spec.jitter >= 0 && spec.jitter < 1, "class prior: jitter must lie in [0, 1)");
    Rng rng(seed);
    std::vector<BinaryGrid> shapes;
    for (int s = 0; s < spec.samples; ++s) {
        std::vector<Primitive> parts = spec.parts;
        for (Primitive& p : parts) {
            p.a *= 1.0 + spec.jitter * (2.0 * rng.uniform() - 1.0);
            p.b *= 1.0 + spec.jitter * (2.0 * rng.uniform() - 1.0);
            p.c *= 1.0 + spec.jitter * (2.0 * rng.uniform() - 1.0);
        }
        shapes.push_back(voxelize(parts, g));
    }
    return shapes;
}

inline LogitField3D build_class_prior(const ClassSpec& spec, const GridGeometry& g, double eps,
                                      std::uint64_t seed)
{
    return prior_from_shapes(sample_class_shapes(spec, g, seed), eps);
}

}  // namespace hbound
