#pragma once

#include "hbound/core.hpp"
#include "hbound/geometry.hpp"

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace hbound {

inline double delta_max_of(double eps)
{
    require(eps > 0 && eps < 0.5, "epsilon must lie in (0, 0.5)");
    // Rounded through float so that every stored logit satisfies |delta| <= delta_max.
    return static_cast<float>(std::log((1.0 - eps) / eps));
}

inline double logistic(double d) { return 1.0 / (1.0 + std::exp(-d)); }

// log(1 - p) for p = logistic(d), stable for large |d|.
inline double log1m_logistic(double d)
{
    return d > 0 ? -d - std::log1p(std::exp(-d)) : -std::log1p(std::exp(d));
}

// Logit of p clamped into [eps, 1 - eps].
inline double clamp_logit(double p, double eps)
{
    if (std::isnan(p)) throw ParameterError("clamp_logit: NaN probability");
    require(p >= 0.0 && p <= 1.0, "clamp_logit: probability outside [0, 1]");
    const double q = std::min(std::max(p, eps), 1.0 - eps);
    double d = std::log(q / (1.0 - q));
    const double dm = delta_max_of(eps);
    return static_cast<float>(std::clamp(d, -dm, dm));
}

// Deterministic 64-bit stream with portable uniform and normal variates.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0;
    bool has_spare_ = false;
};

// Image Bernoulli field on the native retina grid, stored as clamped logits (u fastest).
struct LogitField2D {
    int nu = 0, nv = 0;
    std::vector<float> logit;
    double cell_area = 1.0;
    double epsilon = 0.01;
    double delta_max = delta_max_of(0.01);
    double z_const = 0.0;

    double at(int i, int j) const { return logit[static_cast<size_t>(j) * nu + i]; }
    float& at(int i, int j) { return logit[static_cast<size_t>(j) * nu + i]; }

    void refresh_constant()
    {
        double z = 0;
        for (float d : logit) z += log1m_logistic(d);
        z_const = z * cell_area;
    }
};

// Shape prior on a regular ICS grid (x fastest). Cells outside the grid read as -delta_max.
struct LogitField3D {
    int nx = 0, ny = 0, nz = 0;
    std::vector<float> logit;
    double cell_size = 1.0;
    Vec3 origin;
    double epsilon = 0.01;
    double delta_max = delta_max_of(0.01);
    double z_const = 0.0;
    Box3 support;
    Box3 positive;  // closed box of the cells with delta > 0
    bool has_positive = false;

    size_t index(int i, int j, int k) const
    {
        return (static_cast<size_t>(k) * ny + j) * nx + i;
    }
    double at(int i, int j, int k) const { return logit[index(i, j, k)]; }
    double cell_volume() const { return cell_size * cell_size * cell_size; }

    bool cell_of(Vec3 p, int& i, int& j, int& k) const
    {
        i = static_cast<int>(std::floor((p.x - origin.x) / cell_size));
        j = static_cast<int>(std::floor((p.y - origin.y) / cell_size));
        k = static_cast<int>(std::floor((p.z - origin.z) / cell_size));
        return i >= 0 && j >= 0 && k >= 0 && i < nx && j < ny && k < nz;
    }

    double value_at(Vec3 p) const
    {
        int i, j, k;
        return cell_of(p, i, j, k) ? at(i, j, k) : -delta_max;
    }

    Box3 domain() const
    {
        return {origin, origin + Vec3{nx * cell_size, ny * cell_size, nz * cell_size}};
    }

    // Recomputes z_const, the support box (cells above -delta_max, padded by one cell) and the
    // box of positive cells.
    void refresh()
    {
        double z = 0;
        int lo[3] = {nx, ny, nz}, hi[3] = {-1, -1, -1};
        int plo[3] = {nx, ny, nz}, phi[3] = {-1, -1, -1};
        for (int k = 0; k < nz; ++k)
            for (int j = 0; j < ny; ++j)
                for (int i = 0; i < nx; ++i) {
                    const double d = at(i, j, k);
                    z += log1m_logistic(d);
                    const int c[3] = {i, j, k};
                    if (d > -delta_max + 1e-12)
                        for (int a = 0; a < 3; ++a) {
                            lo[a] = std::min(lo[a], c[a]);
                            hi[a] = std::max(hi[a], c[a]);
                        }
                    if (d > 0)
                        for (int a = 0; a < 3; ++a) {
                            plo[a] = std::min(plo[a], c[a]);
                            phi[a] = std::max(phi[a], c[a]);
                        }
                }
        z_const = z * cell_volume();
        auto corner = [&](const int* c) {
            return origin + Vec3{c[0] * cell_size, c[1] * cell_size, c[2] * cell_size};
        };
        has_positive = phi[0] >= 0;
        if (has_positive) {
            for (int a = 0; a < 3; ++a) ++phi[a];
            positive = {corner(plo), corner(phi)};
        }
        else {
            positive = {origin, origin};
        }
        if (hi[0] < 0) {
            support = {origin, origin};
            return;
        }
        for (int a = 0; a < 3; ++a) {
            lo[a] -= 1;
            hi[a] += 2;
        }
        support = {corner(lo), corner(hi)};
    }

    bool has_support() const { return support.hi.x > support.lo.x; }
};

// Binary voxel grid sharing the prior grid geometry.
struct BinaryGrid {
    int nx = 0, ny = 0, nz = 0;
    double cell_size = 1.0;
    Vec3 origin;
    std::vector<std::uint8_t> cells;

    size_t size() const { return static_cast<size_t>(nx) * ny * nz; }
};

// Bernoulli estimate p = (1/N) sum of shapes, then clamped logits.
inline LogitField3D prior_from_shapes(const std::vector<BinaryGrid>& shapes, double eps = 0.01)
{
    require(!shapes.empty(), "prior_from_shapes: no shapes");
    const BinaryGrid& g = shapes.front();
    for (const BinaryGrid& s : shapes) {
        require(s.nx == g.nx && s.ny == g.ny && s.nz == g.nz && s.cell_size == g.cell_size &&
                    s.origin == g.origin && s.cells.size() == g.size(),
                "prior_from_shapes: mismatched grids");
    }
    LogitField3D f;
    f.nx = g.nx;
    f.ny = g.ny;
    f.nz = g.nz;
    f.cell_size = g.cell_size;
    f.origin = g.origin;
    f.epsilon = eps;
    f.delta_max = delta_max_of(eps);
    f.logit.resize(g.size());
    const double n = static_cast<double>(shapes.size());
    for (size_t c = 0; c < g.size(); ++c) {
        int count = 0;
        for (const BinaryGrid& s : shapes) count += s.cells[c] ? 1 : 0;
        f.logit[c] = static_cast<float>(clamp_logit(count / n, eps));
    }
    f.refresh();
    return f;
}

// Foreground success rate p_fg / (p_fg + p_bg) per cell.
inline LogitField2D fpi_from_likelihoods(int nu, int nv, const std::vector<double>& p_fg,
                                         const std::vector<double>& p_bg, double cell_area,
                                         double eps = 0.01)
{
    const size_t n = static_cast<size_t>(nu) * nv;
    require(p_fg.size() == n && p_bg.size() == n, "fpi_from_likelihoods: size mismatch");
    LogitField2D f;
    f.nu = nu;
    f.nv = nv;
    f.cell_area = cell_area;
    f.epsilon = eps;
    f.delta_max = delta_max_of(eps);
    f.logit.resize(n);
    for (size_t c = 0; c < n; ++c) {
        require(p_fg[c] >= 0 && p_bg[c] >= 0, "fpi_from_likelihoods: negative density");
        const double s = p_fg[c] + p_bg[c];
        f.logit[c] = static_cast<float>(clamp_logit(s > 0 ? p_fg[c] / s : 0.5, eps));
    }
    f.refresh_constant();
    return f;
}

inline LogitField2D fpi_from_probabilities(int nu, int nv, const std::vector<double>& p,
                                           double cell_area, double eps = 0.01)
{
    std::vector<double> bg(p.size());
    for (size_t c = 0; c < p.size(); ++c) bg[c] = 1.0 - p[c];
    return fpi_from_likelihoods(nu, nv, p, bg, cell_area, eps);
}

// Constant term of the posed prior, Z_{B_H} = |J| Z_K (ICS grid sum).
inline double constant_term_3d(const LogitField3D& prior, const Pose& pose)
{
    return pose.jacobian() * prior.z_const;
}

inline LogitField2D noise_salt_pepper(const LogitField2D& f, double P, std::uint64_t seed)
{
    require(P >= 0 && P <= 1, "noise_salt_pepper: P outside [0, 1]");
    LogitField2D g = f;
    Rng rng(seed);
    for (float& d : g.logit)
        if (rng.uniform() < P) d = -d;
    g.refresh_constant();
    return g;
}

inline LogitField2D noise_structured(const LogitField2D& f, int ell)
{
    require(ell >= 1, "noise_structured: period must be >= 1");
    LogitField2D g = f;
    for (int j = 0; j < g.nv; ++j)
        for (int i = 0; i < g.nu; ++i)
            if (i % ell == 0 || j % ell == 0) g.at(i, j) = -g.at(i, j);
    g.refresh_constant();
    return g;
}

inline LogitField2D noise_gaussian(const LogitField2D& f, double sigma, std::uint64_t seed)
{
    require(sigma >= 0, "noise_gaussian: negative sigma");
    LogitField2D g = f;
    if (sigma == 0) return g;
    Rng rng(seed);
    for (float& d : g.logit) {
        const double p = logistic(d) + sigma * rng.normal();
        d = static_cast<float>(clamp_logit(std::clamp(p, 0.0, 1.0), g.epsilon));
    }
    g.refresh_constant();
    return g;
}

}  // namespace hbound
