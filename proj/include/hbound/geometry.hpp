#pragma once

#include "hbound/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace hbound {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
    friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b)
{
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }

// Closed interval with the arithmetic needed for conservative boxes.
struct Interval {
    double lo = 0, hi = 0;
};

inline Interval operator*(Interval a, Interval b)
{
    const double p[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
    return {*std::min_element(p, p + 4), *std::max_element(p, p + 4)};
}

// Range of cos over [a, b] (radians, b - a < 2 pi).
inline Interval cos_range(double a, double b)
{
    Interval r{std::min(std::cos(a), std::cos(b)), std::max(std::cos(a), std::cos(b))};
    constexpr double pi = std::numbers::pi;
    for (int k = -2; k <= 2; ++k) {
        const double t = k * pi;
        if (t >= a && t <= b) {
            if (k % 2 == 0) r.hi = 1.0;
            else r.lo = -1.0;
        }
    }
    return r;
}

inline Interval sin_range(double a, double b)
{
    return cos_range(a - std::numbers::pi / 2, b - std::numbers::pi / 2);
}

struct Box3 {
    Vec3 lo, hi;

    Vec3 corner(int k) const
    {
        return {(k & 1) ? hi.x : lo.x, (k & 2) ? hi.y : lo.y, (k & 4) ? hi.z : lo.z};
    }
};

// Rectangle on the retina in (azimuth, sin-elevation) coordinates.
struct RetinaRect {
    double u0 = 0, u1 = 0, v0 = 0, v1 = 0;
};

// Equal-area parametrisation: the solid angle is the Lebesgue measure of the rectangle.
inline double solid_angle(const RetinaRect& r)
{
    return std::max(0.0, r.u1 - r.u0) * std::max(0.0, r.v1 - r.v0);
}

// Half-open range of native retina cells.
struct PixelBox {
    int iu0 = 0, iu1 = 0, iv0 = 0, iv1 = 0;

    int nu() const { return iu1 - iu0; }
    int nv() const { return iv1 - iv0; }
    long long cells() const { return static_cast<long long>(nu()) * nv(); }
    bool empty() const { return nu() <= 0 || nv() <= 0; }
    friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

struct Retina {
    Vec3 center;
    double u0 = -0.15, u1 = 0.15, v0 = -0.15, v1 = 0.15;
    int nu = 64, nv = 64;

    void validate() const
    {
        require(u1 > u0 && v1 > v0, "retina: empty patch");
        require(v0 >= -1 && v1 <= 1, "retina: v outside [-1, 1]");
        require(u0 >= -std::numbers::pi && u1 <= std::numbers::pi, "retina: u outside [-pi, pi]");
        require(nu > 0 && nv > 0, "retina: resolution must be positive");
    }

    double du() const { return (u1 - u0) / nu; }
    double dv() const { return (v1 - v0) / nv; }
    double cell_area() const { return du() * dv(); }
    double u_edge(int i) const { return u0 + i * du(); }
    double v_edge(int j) const { return v0 + j * dv(); }
    double u_center(int i) const { return u0 + (i + 0.5) * du(); }
    double v_center(int j) const { return v0 + (j + 0.5) * dv(); }

    RetinaRect rect(const PixelBox& b) const
    {
        return {u_edge(b.iu0), u_edge(b.iu1), v_edge(b.iv0), v_edge(b.iv1)};
    }

    static Vec3 direction(double u, double v)
    {
        const double w = std::sqrt(std::max(0.0, 1.0 - v * v));
        return {std::cos(u) * w, std::sin(u) * w, v};
    }

    Vec3 point(double u, double v, double rho) const { return center + rho * direction(u, v); }
};

// World AABB of { center + rho d(u, v) : u in [ua, ub], v in [va, vb], rho in [ra, rb] }.
inline Box3 frustum_aabb(const Retina& ret, double ua, double ub, double va, double vb, double ra,
                         double rb)
{
    auto wv = [](double v) { return std::sqrt(std::max(0.0, 1.0 - v * v)); };
    Interval w{std::min(wv(va), wv(vb)), std::max(wv(va), wv(vb))};
    if (va <= 0 && vb >= 0) w.hi = 1.0;
    const Interval rho{ra, rb};
    const Interval x = rho * (cos_range(ua, ub) * w);
    const Interval y = rho * (sin_range(ua, ub) * w);
    const Interval z = rho * Interval{va, vb};
    return {{ret.center.x + x.lo, ret.center.y + y.lo, ret.center.z + z.lo},
            {ret.center.x + x.hi, ret.center.y + y.hi, ret.center.z + z.hi}};
}

// (u, v) retina coordinates of a world point.
inline std::array<double, 2> project(const Retina& ret, Vec3 p)
{
    const Vec3 d = p - ret.center;
    const double n = norm(d);
    return {std::atan2(d.y, d.x), n > 0 ? d.z / n : 0.0};
}

// Pose ICS -> WCS: scale xy, scale z, rotate about z, translate horizontally.
struct Pose {
    double tx = 0, ty = 0;
    double phi = 0;   // degrees
    double sxy = 0;   // percent
    double sz = 0;    // percent

    void validate() const
    {
        require(sxy > -100 && sz > -100, "pose: scaling must keep the Jacobian positive");
        require(std::isfinite(tx) && std::isfinite(ty) && std::isfinite(phi), "pose: non-finite value");
    }

    double kxy() const { return 1.0 + sxy / 100.0; }
    double kz() const { return 1.0 + sz / 100.0; }
    double jacobian() const { return kxy() * kxy() * kz(); }

    Vec3 apply(Vec3 p) const
    {
        const double a = phi * std::numbers::pi / 180.0;
        const double c = std::cos(a), s = std::sin(a);
        const double x = kxy() * p.x, y = kxy() * p.y, z = kz() * p.z;
        return {c * x - s * y + tx, s * x + c * y + ty, z};
    }

    Vec3 inverse(Vec3 p) const
    {
        const double a = phi * std::numbers::pi / 180.0;
        const double c = std::cos(a), s = std::sin(a);
        const double x = p.x - tx, y = p.y - ty;
        return {(c * x + s * y) / kxy(), (-s * x + c * y) / kxy(), p.z / kz()};
    }

    friend bool operator==(const Pose&, const Pose&) = default;
};

// Central dilation by factor s about point c, composed after the pose. Only representable as a
// Pose when c lies in the plane z = 0 of the horizontal translations and at the origin.
inline Pose dilate_pose(const Pose& p, double s)
{
    Pose q = p;
    q.tx = s * p.tx;
    q.ty = s * p.ty;
    q.sxy = (s * p.kxy() - 1.0) * 100.0;
    q.sz = (s * p.kz() - 1.0) * 100.0;
    return q;
}

inline std::vector<double> radial_knots(double beta, double r0, int n_r)
{
    require(beta > 1.0, "radial_knots: beta must exceed 1");
    require(r0 > 0.0, "radial_knots: r0 must be positive");
    require(n_r >= 1, "radial_knots: need at least one shell");
    std::vector<double> k(static_cast<size_t>(n_r) + 1);
    for (int i = 0; i <= n_r; ++i) k[i] = r0 * std::pow(beta, i);
    return k;
}

// Volume of the cone piece of solid angle a between radii rho0 and rho1.
inline double voxel_volume(double a, double rho0, double rho1)
{
    return a / 3.0 * (rho1 * rho1 * rho1 - rho0 * rho0 * rho0);
}

// rho1 with voxel_volume(a, rho0, rho1) = vol.
inline double invert_volume_inner(double a, double rho0, double vol)
{
    if (vol <= 0) return rho0;
    if (a <= 0) throw ParameterError("invert_volume_inner: mass in a zero-measure pixel part");
    return std::cbrt(rho0 * rho0 * rho0 + 3.0 * vol / a);
}

// rho0 with voxel_volume(a, rho0, rho1) = vol.
inline double invert_volume_outer(double a, double rho1, double vol)
{
    if (vol <= 0) return rho1;
    if (a <= 0) throw ParameterError("invert_volume_outer: mass in a zero-measure pixel part");
    return std::cbrt(std::max(0.0, rho1 * rho1 * rho1 - 3.0 * vol / a));
}

// Convex polytope given by vertices, outward halfspaces n.x <= d and edge directions.
struct Polytope {
    std::vector<Vec3> vertices;
    std::vector<std::pair<Vec3, double>> halfspaces;
    std::vector<Vec3> edges;
    bool solid = true;  // false when some face is degenerate (zero-volume body)

    bool contains(Vec3 p, double tol = 0.0) const
    {
        if (!solid) return false;
        for (const auto& [n, d] : halfspaces)
            if (dot(n, p) > d + tol) return false;
        return true;
    }

    Box3 bounds() const
    {
        Box3 b{vertices.front(), vertices.front()};
        for (const Vec3& v : vertices)
            for (int k = 0; k < 3; ++k) {
                b.lo[k] = std::min(b.lo[k], v[k]);
                b.hi[k] = std::max(b.hi[k], v[k]);
            }
        return b;
    }
};

// Builds a polytope from vertices and face index lists (any orientation).
inline Polytope make_polytope(std::vector<Vec3> verts, const std::vector<std::vector<int>>& faces)
{
    Polytope p;
    p.vertices = std::move(verts);
    Vec3 c;
    for (const Vec3& v : p.vertices) c = c + v;
    c = (1.0 / p.vertices.size()) * c;
    double scale = 0;
    for (const Vec3& v : p.vertices) scale = std::max(scale, norm(v - c));
    for (const auto& f : faces) {
        Vec3 n;
        const size_t k = f.size();
        for (size_t i = 0; i < k; ++i) {
            n = n + cross(p.vertices[f[i]] - c, p.vertices[f[(i + 1) % k]] - c);
            Vec3 e = p.vertices[f[(i + 1) % k]] - p.vertices[f[i]];
            if (norm(e) > 1e-14 * (1 + scale)) p.edges.push_back(e);
        }
        const double len = norm(n);
        if (len <= 1e-12 * (1 + scale * scale)) {
            p.solid = false;
            continue;
        }
        n = (1.0 / len) * n;
        double d = dot(n, p.vertices[f[0]]);
        for (int idx : f) d = std::max(d, dot(n, p.vertices[idx]));
        if (dot(n, c) > d) {
            n = -1.0 * n;
            d = dot(n, p.vertices[f[0]]);
            for (int idx : f) d = std::max(d, dot(n, p.vertices[idx]));
        }
        if (d - dot(n, c) <= 1e-12 * (1 + scale)) p.solid = false;
        p.halfspaces.push_back({n, d});
    }
    return p;
}

// Hexahedron from 8 corners indexed by bits (bit0: x side, bit1: y side, bit2: z side).
inline Polytope make_hexahedron(const std::array<Vec3, 8>& c)
{
    static const std::vector<std::vector<int>> faces = {
        {0, 2, 6, 4}, {1, 3, 7, 5}, {0, 1, 5, 4}, {2, 3, 7, 6}, {0, 1, 3, 2}, {4, 5, 7, 6}};
    return make_polytope(std::vector<Vec3>(c.begin(), c.end()), faces);
}

inline Polytope make_tetrahedron(Vec3 a, Vec3 b, Vec3 c, Vec3 d)
{
    return make_polytope({a, b, c, d}, {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}});
}

// Preimage under the pose of a world AABB: a parallelepiped in ICS.
inline Polytope box_to_ics(const Box3& world, const Pose& pose)
{
    std::array<Vec3, 8> c;
    for (int k = 0; k < 8; ++k) c[k] = pose.inverse(world.corner(k));
    return make_hexahedron(c);
}

// Hull of the 8 frustum corners of a voxel, mapped to ICS; world measures are |J| times ICS ones.
struct IcsVoxel {
    Polytope region;
    double jacobian = 1.0;
};

inline IcsVoxel map_voxel_to_ics(const Retina& ret, const RetinaRect& r, double rho0, double rho1,
                                 const Pose& pose)
{
    std::array<Vec3, 8> c;
    for (int k = 0; k < 8; ++k) {
        const double u = (k & 1) ? r.u1 : r.u0;
        const double v = (k & 2) ? r.v1 : r.v0;
        const double rho = (k & 4) ? rho1 : rho0;
        c[k] = pose.inverse(ret.point(u, v, rho));
    }
    return {make_hexahedron(c), pose.jacobian()};
}

// Conservative (u, v) bounds of the world image of an ICS box under the pose.
// Returns false when the body surrounds the camera's vertical axis (no finite azimuth range).
inline bool support_uv_bounds(const Retina& ret, const Pose& pose, const Box3& ics, RetinaRect& out)
{
    std::array<Vec3, 8> w;
    for (int k = 0; k < 8; ++k) w[k] = pose.apply(ics.corner(k)) - ret.center;
    // Horizontal cross-section is the rotated rectangle of corners 0,1,3,2.
    const std::array<int, 4> ring = {0, 1, 3, 2};
    bool inside = true;
    double sign = 0;
    double rmin = kInf, rmax = 0;
    for (int i = 0; i < 4; ++i) {
        const Vec3 a = w[ring[i]], b = w[ring[(i + 1) % 4]];
        const double cr = a.x * b.y - a.y * b.x;
        if (sign == 0) sign = cr;
        else if (cr * sign < 0) inside = false;
        const double ex = b.x - a.x, ey = b.y - a.y;
        const double len2 = ex * ex + ey * ey;
        double t = len2 > 0 ? -(a.x * ex + a.y * ey) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        rmin = std::min(rmin, std::hypot(a.x + t * ex, a.y + t * ey));
        rmax = std::max(rmax, std::hypot(a.x, a.y));
    }
    if (inside) return false;
    double umin = kInf, umax = -kInf;
    const double ref = std::atan2(w[0].y, w[0].x);
    for (const Vec3& p : w) {
        double u = std::atan2(p.y, p.x);
        while (u - ref > std::numbers::pi) u -= 2 * std::numbers::pi;
        while (u - ref < -std::numbers::pi) u += 2 * std::numbers::pi;
        umin = std::min(umin, u);
        umax = std::max(umax, u);
    }
    double z0 = kInf, z1 = -kInf;
    for (const Vec3& p : w) {
        z0 = std::min(z0, p.z);
        z1 = std::max(z1, p.z);
    }
    auto tan_to_v = [](double t) {
        if (std::isinf(t)) return t > 0 ? 1.0 : -1.0;
        return t / std::sqrt(1.0 + t * t);
    };
    const double tmax = z1 > 0 ? (rmin > 0 ? z1 / rmin : kInf) : z1 / rmax;
    const double tmin = z0 < 0 ? (rmin > 0 ? z0 / rmin : -kInf) : z0 / rmax;
    out = {umin, umax, tan_to_v(tmin), tan_to_v(tmax)};
    return true;
}

}  // namespace hbound
