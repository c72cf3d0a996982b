#pragma once

#include "hbound/bernoulli.hpp"
#include "hbound/core.hpp"
#include "hbound/geometry.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace hbound {

// Cell-index box, half-open in every axis. 2D boxes use k0 = 0, k1 = 1.
struct CellBox {
    int i0 = 0, i1 = 0, j0 = 0, j1 = 0, k0 = 0, k1 = 1;

    bool empty() const { return i1 <= i0 || j1 <= j0 || k1 <= k0; }
    long long cells() const
    {
        return empty() ? 0 : static_cast<long long>(i1 - i0) * (j1 - j0) * (k1 - k0);
    }
};

// Prefix sums over a 3D array (2D when nz = 1) with O(1) box queries.
class PrefixSum3 {
public:
    PrefixSum3() = default;

    template <class F>
    PrefixSum3(int nx, int ny, int nz, F value) : nx_(nx), ny_(ny), nz_(nz)
    {
        s_.assign(static_cast<size_t>(nx + 1) * (ny + 1) * (nz + 1), 0.0);
        for (int k = 1; k <= nz; ++k)
            for (int j = 1; j <= ny; ++j)
                for (int i = 1; i <= nx; ++i)
                    s_[idx(i, j, k)] = value(i - 1, j - 1, k - 1) + s_[idx(i - 1, j, k)] +
                                       s_[idx(i, j - 1, k)] + s_[idx(i, j, k - 1)] -
                                       s_[idx(i - 1, j - 1, k)] - s_[idx(i - 1, j, k - 1)] -
                                       s_[idx(i, j - 1, k - 1)] + s_[idx(i - 1, j - 1, k - 1)];
    }

    double sum(const CellBox& b) const
    {
        require(b.i0 >= 0 && b.j0 >= 0 && b.k0 >= 0 && b.i1 <= nx_ && b.j1 <= ny_ && b.k1 <= nz_,
                "summary query: box out of bounds");
        if (b.empty()) return 0.0;
        return s_[idx(b.i1, b.j1, b.k1)] - s_[idx(b.i0, b.j1, b.k1)] - s_[idx(b.i1, b.j0, b.k1)] -
               s_[idx(b.i1, b.j1, b.k0)] + s_[idx(b.i0, b.j0, b.k1)] + s_[idx(b.i0, b.j1, b.k0)] +
               s_[idx(b.i1, b.j0, b.k0)] - s_[idx(b.i0, b.j0, b.k0)];
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int nz() const { return nz_; }

private:
    size_t idx(int i, int j, int k) const
    {
        return (static_cast<size_t>(k) * (ny_ + 1) + j) * (nx_ + 1) + i;
    }

    int nx_ = 0, ny_ = 0, nz_ = 0;
    std::vector<double> s_;
};

// Mean-summary index: integral of delta over grid-aligned boxes.
class MeanSummaryIndex {
public:
    MeanSummaryIndex() = default;

    MeanSummaryIndex(int nx, int ny, int nz, const std::vector<float>& logit, double cell_measure)
        : measure_(cell_measure),
          sum_(nx, ny, nz, [&](int i, int j, int k) {
              return static_cast<double>(logit[(static_cast<size_t>(k) * ny + j) * nx + i]);
          })
    {
    }

    explicit MeanSummaryIndex(const LogitField2D& f)
        : MeanSummaryIndex(f.nu, f.nv, 1, f.logit, f.cell_area)
    {
    }
    explicit MeanSummaryIndex(const LogitField3D& f)
        : MeanSummaryIndex(f.nx, f.ny, f.nz, f.logit, f.cell_volume())
    {
    }

    double query(const CellBox& b) const { return measure_ * sum_.sum(b); }
    double cell_measure() const { return measure_; }

private:
    double measure_ = 1.0;
    PrefixSum3 sum_;
};

// m-summary vector: entry k + m holds the measure of { delta < k delta_max / m }, k = -m..m.
using MSummary = std::vector<double>;

// m-summary index: 2m+1 integral images of the threshold indicators I_k.
class MSummaryIndex {
public:
    MSummaryIndex() = default;

    MSummaryIndex(int nx, int ny, int nz, const std::vector<float>& logit, double cell_measure,
                  double delta_max, int m)
        : m_(m), delta_max_(delta_max), measure_(cell_measure)
    {
        require(m >= 1, "m-summary: m must be >= 1");
        levels_.reserve(2 * m + 1);
        for (int k = -m; k <= m; ++k) {
            const double thr = k * delta_max / m;
            levels_.emplace_back(nx, ny, nz, [&](int i, int j, int kk) {
                return logit[(static_cast<size_t>(kk) * ny + j) * nx + i] < thr ? 1.0 : 0.0;
            });
        }
    }

    MSummaryIndex(const LogitField2D& f, int m)
        : MSummaryIndex(f.nu, f.nv, 1, f.logit, f.cell_area, f.delta_max, m)
    {
    }
    MSummaryIndex(const LogitField3D& f, int m)
        : MSummaryIndex(f.nx, f.ny, f.nz, f.logit, f.cell_volume(), f.delta_max, m)
    {
    }

    MSummary query(const CellBox& b) const
    {
        MSummary y(levels_.size());
        for (size_t k = 0; k < levels_.size(); ++k) y[k] = measure_ * levels_[k].sum(b);
        return y;
    }

    int m() const { return m_; }
    double delta_max() const { return delta_max_; }
    double cell_measure() const { return measure_; }

private:
    int m_ = 6;
    double delta_max_ = 0;
    double measure_ = 1.0;
    std::vector<PrefixSum3> levels_;
};

// Exact range min / max along rows (x runs) via per-row sparse tables.
class RowRangeMinMax {
public:
    RowRangeMinMax() = default;

    RowRangeMinMax(int nx, int ny, int nz, const std::vector<float>& v) : nx_(nx), ny_(ny), nz_(nz)
    {
        levels_ = 1;
        while ((1 << levels_) <= nx) ++levels_;
        const size_t rows = static_cast<size_t>(ny) * nz;
        mn_.assign(static_cast<size_t>(levels_) * rows * nx, 0.f);
        mx_.assign(mn_.size(), 0.f);
        for (size_t r = 0; r < rows; ++r)
            for (int i = 0; i < nx; ++i) mn_[at(0, r, i)] = mx_[at(0, r, i)] = v[r * nx + i];
        for (int l = 1; l < levels_; ++l)
            for (size_t r = 0; r < rows; ++r)
                for (int i = 0; i + (1 << l) <= nx; ++i) {
                    const int h = 1 << (l - 1);
                    mn_[at(l, r, i)] = std::min(mn_[at(l - 1, r, i)], mn_[at(l - 1, r, i + h)]);
                    mx_[at(l, r, i)] = std::max(mx_[at(l - 1, r, i)], mx_[at(l - 1, r, i + h)]);
                }
    }

    // Min and max over cells [i0, i1) of row (j, k).
    void row(int j, int k, int i0, int i1, double& lo, double& hi) const
    {
        const size_t r = static_cast<size_t>(k) * ny_ + j;
        int l = 0;
        while ((2 << l) <= i1 - i0) ++l;
        lo = std::min(mn_[at(l, r, i0)], mn_[at(l, r, i1 - (1 << l))]);
        hi = std::max(mx_[at(l, r, i0)], mx_[at(l, r, i1 - (1 << l))]);
    }

private:
    size_t at(int l, size_t r, int i) const
    {
        return (static_cast<size_t>(l) * ny_ * nz_ + r) * nx_ + i;
    }

    int nx_ = 0, ny_ = 0, nz_ = 0, levels_ = 0;
    std::vector<float> mn_, mx_;
};

// Partition of a convex region over a grid: interior row-run boxes and partial cells.
struct PartialCell {
    int i = 0, j = 0, k = 0;
    double measure = 0;  // |cell intersect region|
};

struct ConvexRegionDecomposition {
    std::vector<CellBox> boxes;
    std::vector<PartialCell> partial;
    double region_measure = 0;    // exact |region intersect grid domain|
    bool leaves_domain = false;   // region extends beyond the grid
};

namespace detail {

// Convex polygon clipping in 3D used for exact cell/halfspace intersection volumes.
struct Poly3 {
    std::vector<std::vector<Vec3>> faces;
};

inline Poly3 cell_poly(Vec3 lo, Vec3 hi)
{
    Box3 b{lo, hi};
    static const int f[6][4] = {{0, 2, 6, 4}, {1, 5, 7, 3}, {0, 4, 5, 1},
                                {2, 3, 7, 6}, {0, 1, 3, 2}, {4, 6, 7, 5}};
    Poly3 p;
    for (const auto& face : f) {
        std::vector<Vec3> q;
        for (int c : face) q.push_back(b.corner(c));
        p.faces.push_back(q);
    }
    return p;
}

// Clips a closed convex polyhedron by n.x <= d, capping the cut.
inline Poly3 clip(const Poly3& in, Vec3 n, double d)
{
    Poly3 out;
    std::vector<Vec3> cut;
    bool face_on_plane = false;
    for (const auto& f : in.faces) {
        std::vector<Vec3> q;
        const size_t k = f.size();
        bool all_zero = true;
        for (const Vec3& p : f) all_zero = all_zero && dot(n, p) - d == 0;
        face_on_plane = face_on_plane || all_zero;
        for (size_t a = 0; a < k; ++a) {
            const Vec3 p = f[a], r = f[(a + 1) % k];
            const double sp = dot(n, p) - d, sr = dot(n, r) - d;
            if (sp <= 0) q.push_back(p);
            if ((sp < 0 && sr > 0) || (sp > 0 && sr < 0)) {
                const Vec3 x = p + (sp / (sp - sr)) * (r - p);
                q.push_back(x);
                cut.push_back(x);
            }
            else if (sp == 0) {
                cut.push_back(p);
            }
        }
        if (q.size() >= 3) out.faces.push_back(q);
    }
    if (cut.size() >= 3 && !face_on_plane) {
        // Order the cap polygon around its centroid in the plane.
        Vec3 c;
        for (const Vec3& p : cut) c = c + p;
        c = (1.0 / cut.size()) * c;
        Vec3 e1 = std::abs(n.x) < 0.9 ? cross(n, Vec3{1, 0, 0}) : cross(n, Vec3{0, 1, 0});
        e1 = (1.0 / norm(e1)) * e1;
        const Vec3 e2 = cross(n, e1);
        std::sort(cut.begin(), cut.end(), [&](Vec3 a, Vec3 b) {
            return std::atan2(dot(a - c, e2), dot(a - c, e1)) <
                   std::atan2(dot(b - c, e2), dot(b - c, e1));
        });
        out.faces.push_back(cut);
    }
    return out;
}

inline double volume(const Poly3& p)
{
    if (p.faces.empty()) return 0.0;
    Vec3 o;
    size_t n = 0;
    for (const auto& f : p.faces)
        for (const Vec3& v : f) {
            o = o + v;
            ++n;
        }
    o = (1.0 / n) * o;
    double v = 0;
    for (const auto& f : p.faces)
        for (size_t a = 1; a + 1 < f.size(); ++a)
            v += std::abs(dot(f[0] - o, cross(f[a] - o, f[a + 1] - o)));
    return v / 6.0;
}

// Separating-axis test between a convex polytope and an axis-aligned box (closed sets).
inline bool touches(const Polytope& poly, Vec3 lo, Vec3 hi)
{
    auto separated = [&](Vec3 ax) {
        const double len = norm(ax);
        if (len < 1e-14) return false;
        double pmin = kInf, pmax = -kInf;
        for (const Vec3& v : poly.vertices) {
            const double t = dot(ax, v);
            pmin = std::min(pmin, t);
            pmax = std::max(pmax, t);
        }
        const Vec3 c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
        const double bc = dot(ax, c);
        const double br = std::abs(ax.x) * h.x + std::abs(ax.y) * h.y + std::abs(ax.z) * h.z;
        const double tol = 1e-12 * len * (1.0 + norm(c) + norm(h));
        return pmax < bc - br - tol || pmin > bc + br + tol;
    };
    const Vec3 axes[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (const Vec3& a : axes)
        if (separated(a)) return false;
    for (const auto& hs : poly.halfspaces)
        if (separated(hs.first)) return false;
    for (size_t e = 0; e < poly.edges.size(); ++e)
        for (const Vec3& a : axes)
            if (separated(cross(poly.edges[e], a))) return false;
    // Degenerate bodies: also test pairwise edge normals.
    if (!poly.solid)
        for (size_t e = 0; e < poly.edges.size(); ++e)
            for (size_t f = e + 1; f < poly.edges.size(); ++f)
                if (separated(cross(poly.edges[e], poly.edges[f]))) return false;
    return true;
}

}  // namespace detail

// Exact |cell intersect region| by halfspace clipping.
inline double intersection_volume(const Polytope& region, Vec3 lo, Vec3 hi)
{
    if (!region.solid) return 0.0;
    detail::Poly3 p = detail::cell_poly(lo, hi);
    for (const auto& [n, d] : region.halfspaces) {
        p = detail::clip(p, n, d);
        if (p.faces.empty()) return 0.0;
    }
    return detail::volume(p);
}

// Grid geometry used by decompose_convex.
struct GridGeometry {
    int nx = 1, ny = 1, nz = 1;
    double cell = 1.0;
    Vec3 origin;

    Vec3 lo(int i, int j, int k) const { return origin + Vec3{i * cell, j * cell, k * cell}; }
    Vec3 hi(int i, int j, int k) const { return lo(i + 1, j + 1, k + 1); }

    static GridGeometry of(const LogitField3D& f) { return {f.nx, f.ny, f.nz, f.cell_size, f.origin}; }
};

// Cells fully inside the region (all corners inside) grouped into x-runs; touched cells are
// partial. With exact_measures = false the partial measures and region measure are skipped.
inline ConvexRegionDecomposition decompose_convex(const Polytope& region, const GridGeometry& g,
                                                  bool exact_measures = true)
{
    ConvexRegionDecomposition d;
    const Box3 b = region.bounds();
    auto cidx = [&](double x, double o, int n) {
        return std::clamp(static_cast<int>(std::floor((x - o) / g.cell)), 0, n - 1);
    };
    const Box3 dom{g.origin, g.lo(g.nx, g.ny, g.nz)};
    for (int a = 0; a < 3; ++a)
        if (b.lo[a] < dom.lo[a] || b.hi[a] > dom.hi[a]) d.leaves_domain = true;
    if (b.hi.x < dom.lo.x || b.hi.y < dom.lo.y || b.hi.z < dom.lo.z || b.lo.x > dom.hi.x ||
        b.lo.y > dom.hi.y || b.lo.z > dom.hi.z)
        return d;
    const int i0 = cidx(b.lo.x, g.origin.x, g.nx), i1 = cidx(b.hi.x, g.origin.x, g.nx);
    const int j0 = cidx(b.lo.y, g.origin.y, g.ny), j1 = cidx(b.hi.y, g.origin.y, g.ny);
    const int k0 = cidx(b.lo.z, g.origin.z, g.nz), k1 = cidx(b.hi.z, g.origin.z, g.nz);
    const double cv = g.cell * g.cell * g.cell;
    for (int k = k0; k <= k1; ++k)
        for (int j = j0; j <= j1; ++j) {
            int run = -1;
            for (int i = i0; i <= i1 + 1; ++i) {
                bool inside = false;
                if (i <= i1 && region.solid) {
                    inside = true;
                    for (int c = 0; c < 8 && inside; ++c) {
                        const Vec3 p = g.lo(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                        inside = region.contains(p);
                    }
                }
                if (inside) {
                    if (run < 0) run = i;
                    continue;
                }
                if (run >= 0) {
                    d.boxes.push_back({run, i, j, j + 1, k, k + 1});
                    if (exact_measures) d.region_measure += cv * (i - run);
                    run = -1;
                }
                if (i <= i1 && detail::touches(region, g.lo(i, j, k), g.hi(i, j, k))) {
                    PartialCell pc{i, j, k, 0.0};
                    if (exact_measures) {
                        pc.measure = intersection_volume(region, g.lo(i, j, k), g.hi(i, j, k));
                        d.region_measure += pc.measure;
                    }
                    d.partial.push_back(pc);
                }
            }
        }
    return d;
}

inline CellBox cell_box(const PartialCell& c) { return {c.i, c.i + 1, c.j, c.j + 1, c.k, c.k + 1}; }

// Lower bound on the mean-summary over the decomposed region.
inline double mean_lower_convex(const MeanSummaryIndex& idx, const ConvexRegionDecomposition& d,
                                double delta_max)
{
    double s = 0;
    for (const CellBox& b : d.boxes) s += idx.query(b);
    const double cm = idx.cell_measure();
    for (const PartialCell& c : d.partial) {
        const double g = idx.query(cell_box(c));
        s += std::max(g - delta_max * (cm - c.measure), -delta_max * c.measure);
    }
    return s;
}

// Worst-case m-summary over the region: partial cells are filled with the greatest values of
// their bounding box. The result is componentwise <= the exact m-summary, so F computed from
// it dominates F of the exact one.
inline MSummary msummary_upper_convex(const MSummaryIndex& idx, const ConvexRegionDecomposition& d)
{
    const int m = idx.m();
    MSummary total(2 * m + 1, 0.0);
    for (const CellBox& b : d.boxes) {
        const MSummary y = idx.query(b);
        for (size_t k = 0; k < y.size(); ++k) total[k] += y[k];
    }
    const double cm = idx.cell_measure();
    for (const PartialCell& c : d.partial) {
        const MSummary yg = idx.query(cell_box(c));
        MSummary yu(2 * m + 1);
        // M^m from the top, then downward: Ybar^k = Ybar^{k+1} - min(M^k_Gamma, Ybar^{k+1}).
        yu[2 * m] = c.measure - std::min(cm - yg[2 * m], c.measure);
        for (int k = m - 1; k >= -m; --k) {
            const double mg = yg[k + 1 + m] - yg[k + m];
            yu[k + m] = yu[k + 1 + m] - std::min(mg, yu[k + 1 + m]);
        }
        for (size_t k = 0; k < yu.size(); ++k) total[k] += yu[k];
    }
    return total;
}

}  // namespace hbound
