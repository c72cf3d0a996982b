#pragma once

#include "hbound/core.hpp"
#include "hbound/geometry.hpp"
#include "hbound/projection.hpp"
#include "hbound/summaries.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace hbound {

// Psi_k = sum of the k largest values (Psi_0 = 0), plus the order that realises it.
struct TopK {
    std::vector<double> psi;
    std::vector<int> order;  // indices by decreasing value, ties by lower index
};

inline TopK top_k_sums(const std::vector<double>& values)
{
    TopK t;
    t.order.resize(values.size());
    std::iota(t.order.begin(), t.order.end(), 0);
    std::stable_sort(t.order.begin(), t.order.end(),
                     [&](int a, int b) { return values[a] > values[b]; });
    t.psi.assign(values.size() + 1, 0.0);
    for (size_t k = 0; k < values.size(); ++k) t.psi[k + 1] = t.psi[k] + values[t.order[k]];
    return t;
}

struct PixelLowerResult {
    double value = 0;
    int n_star = 0;
    int q_star = 0;
    std::vector<int> psi_indices;
};

// max over n, q of q Yf + area log P(q | n log beta) + c Psi_n, with c = lambda / |J|.
// Ties prefer smaller n, then q = 0.
inline PixelLowerResult pixel_lower(double area, double yf, const std::vector<double>& voxel_means,
                                    double c, double log_beta, double alpha)
{
    const TopK t = top_k_sums(voxel_means);
    PixelLowerResult r;
    r.value = -kInf;
    for (size_t n = 0; n < t.psi.size(); ++n)
        for (int q = 0; q <= 1; ++q) {
            const double ell = static_cast<double>(n) * log_beta;
            const double v = q * yf + area * log_p_q_given_ell(q, ell, alpha) + c * t.psi[n];
            if (v > r.value) {
                r.value = v;
                r.n_star = static_cast<int>(n);
                r.q_star = q;
            }
        }
    r.psi_indices.assign(t.order.begin(), t.order.begin() + r.n_star);
    return r;
}

// Concave piecewise-linear function on [0, total] with F(0) = 0, stored as segments of
// nonincreasing slope. Represents the supremum of the integral of delta over sets of mass S.
struct ConcavePwl {
    std::vector<double> len;
    std::vector<double> slope;

    double total() const { return std::accumulate(len.begin(), len.end(), 0.0); }

    double operator()(double s) const
    {
        double v = 0;
        for (size_t i = 0; i < len.size() && s > 0; ++i) {
            const double t = std::min(s, len[i]);
            v += t * slope[i];
            s -= t;
        }
        return v;
    }

    // Smallest maximiser.
    double peak() const
    {
        double p = 0;
        for (size_t i = 0; i < len.size() && slope[i] > 0; ++i) p += len[i];
        return p;
    }

    double max_abs_slope() const
    {
        double a = 0;
        for (size_t i = 0; i < len.size(); ++i)
            if (len[i] > 0) a = std::max(a, std::abs(slope[i]));
        return a;
    }

    static ConcavePwl single(double mass, double slope)
    {
        return {{std::max(0.0, mass)}, {slope}};
    }

    // From an m-summary over a set of measure omega. Slopes are capped at max_value when given.
    static ConcavePwl from_msummary(const MSummary& y, int m, double delta_max, double omega,
                                    double max_value = kInf)
    {
        ConcavePwl f;
        auto push = [&](double l, double s) {
            if (l <= 0) return;
            f.len.push_back(l);
            f.slope.push_back(std::min(s, max_value));
        };
        push(omega - y[2 * m], delta_max);
        for (int j = m - 1; j >= -m; --j) push(y[j + 1 + m] - y[j + m], (j + 1) * delta_max / m);
        push(y[0], -delta_max);
        return f;
    }
};

// Literal form of the m-summary bound: returns F(S) and sets J(S).
inline double msummary_F(const MSummary& y, int m, double delta_max, double omega, double s,
                         int* j_out = nullptr)
{
    require(s >= 0 && s <= omega * (1 + 1e-12), "F: mass outside [0, |omega|]");
    int J = m + 1;
    for (int j = -m; j <= m; ++j)
        if (y[j + m] >= omega - s) {
            J = j;
            break;
        }
    if (j_out) *j_out = J;
    if (J > m) return delta_max * s;  // only cells at exactly delta_max are used
    double acc = 0;
    for (int j = J; j <= m - 1; ++j) acc += (y[j + 1 + m] - y[j + m]) * (j + 1);
    acc += (omega - y[2 * m]) * m;
    acc += J * (y[J + m] - omega + s);
    return delta_max / m * acc;
}

// Radial extent and prior bound of one voxel behind a pixel.
struct VoxelBound {
    double r_in = 1, r_out = 2;
    ConcavePwl f;  // over [0, |Phi_i|]
};

struct GammaResult {
    double value = 0;
    std::vector<double> v0, v1, rho0, rho1;
    double ell0 = 0, ell1 = 0;
};

namespace detail {

inline double h_ray(double s, double alpha) { return s > 0 ? std::log(-std::expm1(alpha * s)) : -kInf; }

// Index of the segment holding mass t (the first whose end exceeds t) and its start mass.
// Returns len.size() when t is at or past the total, where F is flat.
inline size_t segment_index(const ConcavePwl& f, double t, double& start)
{
    start = 0;
    for (size_t i = 0; i < f.len.size(); ++i) {
        if (t < start + f.len[i]) return i;
        start += f.len[i];
    }
    return f.len.size();
}

// Maximises q0 alpha y + c F(w + v0(y)) over y in [0, log(r_out/r_in)], v0 = q0 r_out^3 (1 - e^-3y)/3.
// Segments are walked by index so that a segment end reached through rounding still advances.
inline double best_y(const VoxelBound& vb, double w, double q0, double c, double alpha)
{
    const double X = std::log(vb.r_out / vb.r_in);
    if (q0 <= 0 || c <= 0) return 0.0;
    const double k = q0 * vb.r_out * vb.r_out * vb.r_out / 3.0;
    const double cap = k * (1.0 - std::exp(-3.0 * X));
    auto y_of = [&](double v0) {
        if (v0 >= cap) return X;
        return std::min(X, -std::log1p(-v0 / k) / 3.0);
    };
    double a;
    size_t i = segment_index(vb.f, w, a);
    double v0 = 0;
    for (; v0 < cap && i < vb.f.len.size(); ++i) {
        const double s = vb.f.slope[i];
        const double end = a + vb.f.len[i];
        a = end;
        if (s <= 0) break;
        const double ya = y_of(v0);
        const double vb_end = std::min(cap, end - w);
        const double yb = y_of(vb_end);
        // Stationary radius rho0^3 = -alpha / (c s); derivative > 0 for rho0 above it.
        const double rho = std::cbrt(-alpha / (c * s));
        const double ys = std::log(vb.r_out / rho);
        if (ys <= ya) return ya;
        if (ys < yb) return ys;
        v0 = std::max(v0, vb_end);
    }
    return y_of(std::min(v0, cap));
}

// Maximises c F(v1(x)) + kappa x over x in [xp, X], v1 = q1 r_in^3 (e^3x - 1)/3, past the peak.
inline double best_x(const VoxelBound& vb, double xp, double q1, double c, double kappa)
{
    const double X = std::log(vb.r_out / vb.r_in);
    if (c <= 0 || std::isinf(kappa)) return X;
    const double k = q1 * vb.r_in * vb.r_in * vb.r_in / 3.0;
    const double cap = k * std::expm1(3.0 * X);
    auto x_of = [&](double v1) {
        if (v1 >= cap) return X;
        return std::min(X, std::log1p(v1 / k) / 3.0);
    };
    double v1 = k * std::expm1(3.0 * xp);
    double xa = xp;
    double a;
    size_t i = segment_index(vb.f, v1, a);
    // Past the total F is flat and kappa x keeps increasing, so the walk ends at X.
    for (; v1 < cap && i < vb.f.len.size(); ++i) {
        const double s = vb.f.slope[i];
        const double end = a + vb.f.len[i];
        a = end;
        const double vend = std::min(cap, end);
        const double xb = x_of(vend);
        if (s < 0) {
            const double xs = std::log(kappa / (c * -s * 3.0 * k)) / 3.0;
            if (xs <= xa) return xa;
            if (xs < xb) return xs;
        }
        v1 = std::max(v1, vend);
        xa = xb;
    }
    return X;
}

}  // namespace detail

// gamma0 for one voxel: max over v0 of q0 alpha log(r_out/rho0) + c (F(v1 + v0) - F(v1)).
struct Gamma0Result {
    double value = 0, v0 = 0, rho0 = 0;
};

inline Gamma0Result gamma0_solve(double q0, const VoxelBound& vb, double v1, double c, double alpha)
{
    Gamma0Result r;
    const double y = detail::best_y(vb, v1, q0, c, alpha);
    const double r3 = vb.r_out * vb.r_out * vb.r_out;
    r.v0 = q0 > 0 ? q0 * r3 * (-std::expm1(-3.0 * y)) / 3.0 : 0.0;
    r.rho0 = vb.r_out * std::exp(-y);
    const double fmax = vb.f.total();
    r.value = q0 * alpha * y + c * (vb.f(std::min(fmax, v1 + r.v0)) - vb.f(v1));
    return r;
}

// Gamma_j(q-bar): exact supremum of the projection and prior terms over semidiscrete
// reconstructions, for foreground mass q1 = qbar and background mass q0 = area - qbar.
// With include_background = false only the foreground part (gamma1) is optimised.
inline GammaResult gamma_solve(double area, double qbar, const std::vector<VoxelBound>& vox,
                               double c, double alpha, bool include_background = true)
{
    const size_t n = vox.size();
    const double q1 = std::clamp(qbar, 0.0, area);
    const double q0 = include_background ? area - q1 : 0.0;
    GammaResult r;
    r.v0.assign(n, 0.0);
    r.v1.assign(n, 0.0);
    std::vector<double> x(n, 0.0), y(n, 0.0), xp(n, 0.0);
    std::vector<char> free_x(n, 0);
    double s_fix = 0;
    for (size_t i = 0; i < n; ++i) {
        const VoxelBound& vb = vox[i];
        const double X = std::log(vb.r_out / vb.r_in);
        const double r03 = vb.r_in * vb.r_in * vb.r_in;
        const double cap1 = q1 * (vb.r_out * vb.r_out * vb.r_out - r03) / 3.0;
        const double pk = c > 0 ? vb.f.peak() : kInf;
        if (q1 <= 0) {
            y[i] = detail::best_y(vb, 0.0, q0, c, alpha);
        }
        else if (cap1 <= pk) {
            x[i] = X;
            s_fix += X;
            y[i] = detail::best_y(vb, cap1, q0, c, alpha);
        }
        else {
            free_x[i] = 1;
            xp[i] = std::min(X, std::log1p(3.0 * pk / (q1 * r03)) / 3.0);
        }
    }
    if (q1 > 0) {
        auto kappa = [&](double s) {
            if (s <= 0) return kInf;
            return q1 * -alpha / std::expm1(-alpha * s);
        };
        auto fill = [&](double s) {
            double tot = s_fix;
            const double k = kappa(s);
            for (size_t i = 0; i < n; ++i)
                if (free_x[i]) {
                    x[i] = detail::best_x(vox[i], xp[i], q1, c, k);
                    tot += x[i];
                }
            return tot;
        };
        double lo = s_fix, hi = s_fix;
        for (size_t i = 0; i < n; ++i)
            if (free_x[i]) {
                lo += xp[i];
                hi += std::log(vox[i].r_out / vox[i].r_in);
            }
        if (fill(hi) < hi) {
            for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (fill(mid) >= mid) lo = mid;
                else hi = mid;
            }
            // Evaluate both ends and keep the better feasible point.
            std::vector<double> xa(n);
            fill(lo);
            xa = x;
            fill(hi);
            auto obj = [&](const std::vector<double>& xx) {
                double s = 0, v = 0;
                for (size_t i = 0; i < n; ++i) {
                    s += xx[i];
                    if (free_x[i]) {
                        const double r03 = vox[i].r_in * vox[i].r_in * vox[i].r_in;
                        v += c * vox[i].f(q1 * r03 * std::expm1(3.0 * xx[i]) / 3.0);
                    }
                }
                return q1 * detail::h_ray(s, alpha) + v;
            };
            if (obj(xa) > obj(x)) x = xa;
        }
    }
    double value = 0, ell1 = 0, ell0 = 0;
    r.rho0.resize(n);
    r.rho1.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const VoxelBound& vb = vox[i];
        const double r03 = vb.r_in * vb.r_in * vb.r_in;
        const double r13 = vb.r_out * vb.r_out * vb.r_out;
        const double fmax = vb.f.total();
        r.v1[i] = q1 > 0 ? std::min(q1 * (r13 - r03) / 3.0, q1 * r03 * std::expm1(3.0 * x[i]) / 3.0)
                         : 0.0;
        r.v0[i] = q0 > 0 ? std::min(q0 * (r13 - r03) / 3.0, q0 * r13 * -std::expm1(-3.0 * y[i]) / 3.0)
                         : 0.0;
        r.rho1[i] = vb.r_in * std::exp(x[i]);
        r.rho0[i] = vb.r_out * std::exp(-y[i]);
        ell1 += q1 > 0 ? x[i] : 0.0;
        ell0 += y[i];
        value += c * vb.f(std::min(fmax, r.v1[i] + r.v0[i]));
    }
    value += q0 * alpha * ell0;
    if (q1 > 0) value += q1 * detail::h_ray(ell1, alpha);
    r.value = value;
    r.ell0 = ell0;
    r.ell1 = ell1;
    return r;
}

// Objective of the Gamma problem at given masses (for audits and brute force).
inline double gamma_objective(double area, double qbar, const std::vector<VoxelBound>& vox,
                              const std::vector<double>& v1, const std::vector<double>& v0,
                              double c, double alpha)
{
    const double q1 = qbar, q0 = area - qbar;
    double ell1 = 0, ell0 = 0, pr = 0;
    for (size_t i = 0; i < vox.size(); ++i) {
        const VoxelBound& vb = vox[i];
        if (q1 > 0) ell1 += std::log(invert_volume_inner(q1, vb.r_in, v1[i]) / vb.r_in);
        if (q0 > 0) ell0 += std::log(vb.r_out / invert_volume_outer(q0, vb.r_out, v0[i]));
        pr += vb.f(std::min(vb.f.total(), v1[i] + v0[i]));
    }
    double v = c * pr + q0 * alpha * ell0;
    if (q1 > 0) v += q1 * detail::h_ray(ell1, alpha);
    return v;
}

struct PixelUpperResult {
    double value = 0;       // valid upper bound on the pixel's contribution
    double best_point = 0;  // best objective found at an evaluated q-bar
    double slack = 0;       // value - best_point
    double q_bar = 0;
    GammaResult gamma;
    int evaluations = 0;
};

struct PixelUpperOptions {
    int grid_points = 17;
    int max_evaluations = 256;
    double rel_tol = 1e-7;
};

// max over q-bar of F_f(q-bar) + Gamma(q-bar). Grid points plus adaptive bisection; each
// interval is bounded by the smaller of the neighbouring chord extensions and the one-sided
// slope bound of Gamma plus the exact maximum of F_f.
inline PixelUpperResult pixel_upper(double area, const ConcavePwl& ff,
                                    const std::vector<VoxelBound>& vox, double c, double alpha,
                                    const PixelUpperOptions& opt = {})
{
    require(opt.grid_points >= 2, "pixel_upper: need at least two grid points");
    double dplus = 0;
    for (const VoxelBound& vb : vox) {
        dplus += -alpha * std::log(vb.r_out / vb.r_in);
        dplus += c * vb.f.max_abs_slope() *
                 (vb.r_out * vb.r_out * vb.r_out - vb.r_in * vb.r_in * vb.r_in) / 3.0;
    }
    struct Node {
        double q, point, gamma;
    };
    std::vector<Node> pts;
    auto eval = [&](double q) {
        const double gm = gamma_solve(area, q, vox, c, alpha).value;
        return Node{q, ff(std::min(q, ff.total())) + gm, gm};
    };
    // Exact max of F_f(q) + dplus (q - qa) on [qa, qb].
    auto slope_ub = [&](const Node& a, const Node& b) {
        double best = -kInf;
        auto cand = [&](double q) {
            best = std::max(best, ff(std::min(q, ff.total())) + a.gamma + dplus * (q - a.q));
        };
        cand(a.q);
        cand(b.q);
        double acc = 0;
        for (double l : ff.len) {
            acc += l;
            if (acc > a.q && acc < b.q) cand(acc);
        }
        return best;
    };
    // F_f + Gamma is concave in q-bar (Gamma is a supremum of jointly concave perspective terms
    // over a convex set), so outside each sampled chord the objective lies below the chord's
    // line. Interval k is bounded by the lines of its two neighbouring chords.
    auto interval_ub = [&](const std::vector<Node>& p, size_t k) {
        const Node &a = p[k], &b = p[k + 1];
        struct Line {
            double q, v, s;
            double at(double x) const { return v + s * (x - q); }
        };
        std::vector<Line> lines;
        if (k >= 1) lines.push_back({a.q, a.point, (a.point - p[k - 1].point) / (a.q - p[k - 1].q)});
        if (k + 2 < p.size()) lines.push_back({b.q, b.point, (p[k + 2].point - b.point) / (p[k + 2].q - b.q)});
        double chord = kInf;
        if (!lines.empty()) {
            auto lower_env = [&](double x) {
                double m = kInf;
                for (const Line& l : lines) m = std::min(m, l.at(x));
                return m;
            };
            chord = std::max(lower_env(a.q), lower_env(b.q));
            if (lines.size() == 2 && lines[0].s != lines[1].s) {
                const double x = (lines[1].v - lines[0].v + lines[0].s * lines[0].q - lines[1].s * lines[1].q) /
                                 (lines[0].s - lines[1].s);
                if (x > a.q && x < b.q) chord = std::max(chord, lower_env(x));
            }
            // Extrapolated values get a guard against rounding in the sampled values.
            if (chord > std::max(a.point, b.point))
                chord += 1e-12 * std::max({1.0, std::abs(a.point), std::abs(b.point)});
        }
        return std::min(chord, slope_ub(a, b));
    };
    const int g = opt.grid_points;
    for (int k = 0; k < g; ++k) pts.push_back(eval(area * k / (g - 1)));
    PixelUpperResult r;
    r.evaluations = g;
    while (true) {
        double ub = -kInf, bp = -kInf;
        size_t arg = 0;
        for (size_t k = 0; k + 1 < pts.size(); ++k) {
            const double u = interval_ub(pts, k);
            if (u > ub) {
                ub = u;
                arg = k;
            }
        }
        for (const Node& p : pts) bp = std::max(bp, p.point);
        const bool done = ub - bp <= opt.rel_tol * std::max(1.0, std::abs(bp)) ||
                          r.evaluations >= opt.max_evaluations ||
                          pts[arg + 1].q - pts[arg].q <= 1e-15 * area;
        if (done || !std::isfinite(ub)) {
            r.value = std::max(ub, bp);
            r.best_point = bp;
            r.slack = r.value - bp;
            break;
        }
        pts.insert(pts.begin() + arg + 1, eval(0.5 * (pts[arg].q + pts[arg + 1].q)));
        ++r.evaluations;
    }
    size_t best = 0;
    for (size_t k = 1; k < pts.size(); ++k)
        if (pts[k].point > pts[best].point) best = k;
    r.q_bar = pts[best].q;
    r.gamma = gamma_solve(area, r.q_bar, vox, c, alpha);
    return r;
}

}  // namespace hbound
