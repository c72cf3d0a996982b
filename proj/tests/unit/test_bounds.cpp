#include "hbound/bounds.hpp"
#include "hbound/bernoulli.hpp"

#include "search.hpp"

#include <catch_amalgamated.hpp>

#include <functional>
#include <random>

using namespace hbound;
using namespace hbound::testing;
using Catch::Approx;

TEST_CASE("m-summary bound on the worked example", "[bounds]")
{
    const MSummary y{0, 1, 2, 3, 4};
    int J = 0;
    CHECK(msummary_F(y, 2, 3.0, 4.0, 1.0, &J) == Approx(3.0));
    CHECK(J == 1);
    const ConcavePwl f = ConcavePwl::from_msummary(y, 2, 3.0, 4.0);
    CHECK(f(1.0) == Approx(3.0));
    CHECK(f.total() == Approx(4.0));
    for (double s = 0; s <= 4.0; s += 0.125) CHECK(f(s) == Approx(msummary_F(y, 2, 3.0, 4.0, s)).margin(1e-12));
}

TEST_CASE("m-summary bound dominates the true sup", "[bounds]")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-4.5, 4.5);
    const double dmax = 4.5, cell = 0.25;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<float> d(12);
        for (float& x : d) x = static_cast<float>(u(rng));
        MSummaryIndex idx(12, 1, 1, d, cell, dmax, 3);
        const MSummary y = idx.query({0, 12, 0, 1, 0, 1});
        const ConcavePwl f = ConcavePwl::from_msummary(y, 3, dmax, 12 * cell);
        std::vector<float> s = d;
        std::sort(s.rbegin(), s.rend());
        double acc = 0;
        for (int k = 0; k <= 12; ++k) {
            CHECK(f(k * cell) >= acc - 1e-9);
            if (k < 12) acc += s[k] * cell;
        }
    }
}

TEST_CASE("pixel lower bound with no prior picks one voxel", "[bounds]")
{
    const PixelLowerResult r = pixel_lower(1.0, 10.0, {0.0}, 0.0, 1.0, -1.0);
    CHECK(r.value == Approx(10.0 + std::log(1.0 - std::exp(-1.0))));
    CHECK(r.n_star == 1);
    CHECK(r.q_star == 1);
}

TEST_CASE("pixel lower ties prefer fewer voxels and background", "[bounds]")
{
    const PixelLowerResult r = pixel_lower(1.0, 0.0, {0.0, 0.0}, 1.0, 0.0, -1.0);
    CHECK(r.n_star == 0);
    CHECK(r.q_star == 0);
    CHECK(r.value == 0.0);
}

TEST_CASE("gamma0 matches a dense one-dimensional search", "[bounds]")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        const double area = 0.001 + 0.01 * u(rng), q0 = area * u(rng), c = 5.0 * u(rng);
        auto vox = random_voxels(rng, 1, area, 4.6);
        const VoxelBound& vb = vox[0];
        const double cap = q0 * (std::pow(vb.r_out, 3) - std::pow(vb.r_in, 3)) / 3.0;
        const double v1 = (area - q0) * (std::pow(vb.r_out, 3) - std::pow(vb.r_in, 3)) / 3.0 * u(rng);
        const Gamma0Result g = gamma0_solve(q0, vb, v1, c, -1.0);
        double best = -kInf;
        for (int k = 0; k <= 10000; ++k) {
            const double v0 = cap * k / 10000.0;
            const double rho = q0 > 0 ? invert_volume_outer(q0, vb.r_out, v0) : vb.r_out;
            const double val = q0 * -1.0 * std::log(vb.r_out / rho) +
                               c * (vb.f(std::min(vb.f.total(), v1 + v0)) - vb.f(v1));
            best = std::max(best, val);
        }
        CHECK(g.value >= best - 1e-12 * std::max(1.0, std::abs(best)));
        CHECK(g.value == Approx(best).epsilon(1e-4).margin(1e-9));
    }
}

TEST_CASE("gamma1 matches a lattice search on four voxels", "[bounds]")
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 4; ++trial) {
        const double area = 0.002 + 0.01 * u(rng), q1 = area * (0.05 + 0.95 * u(rng));
        const double c = 3.0 * u(rng);
        auto vox = random_voxels(rng, 4, area, 4.6);
        const GammaResult g = gamma_solve(area, q1, vox, c, -1.0, false);
        std::vector<double> X(4);
        for (int i = 0; i < 4; ++i) X[i] = std::log(vox[i].r_out / vox[i].r_in);
        const double best = zoom_search(X, 40, 4, [&](const std::vector<double>& x) {
            double s = 0, val = 0;
            for (int i = 0; i < 4; ++i) {
                s += x[i];
                const double v1 = q1 * std::pow(vox[i].r_in, 3) * std::expm1(3 * x[i]) / 3;
                val += c * vox[i].f(std::min(vox[i].f.total(), v1));
            }
            return val + q1 * std::log(-std::expm1(-s));
        });
        CHECK(g.value >= best - 1e-12 * std::max(1.0, std::abs(best)));
        CHECK(g.value == Approx(best).epsilon(1e-4));
    }
}

TEST_CASE("joint gamma matches a lattice search on two voxels", "[bounds]")
{
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 4; ++trial) {
        const double area = 0.002 + 0.01 * u(rng), q1 = area * u(rng), c = 3.0 * u(rng);
        auto vox = random_voxels(rng, 2, area, 4.6);
        const GammaResult g = gamma_solve(area, q1, vox, c, -1.0);
        const double X0 = std::log(vox[0].r_out / vox[0].r_in), X1 = std::log(vox[1].r_out / vox[1].r_in);
        // Given x the background lengths separate per voxel, so y is searched one voxel at a time.
        const double best = zoom_search({X0, X1}, 40, 6, [&](const std::vector<double>& x) {
            std::vector<double> v1(2), v0(2);
            for (int i = 0; i < 2; ++i) {
                v1[i] = q1 * std::pow(vox[i].r_in, 3) * std::expm1(3 * x[i]) / 3;
                const double Xi = i == 0 ? X0 : X1;
                double by = 0;
                zoom_search({Xi}, 200, 4, [&](const std::vector<double>& y) {
                    const double w = (area - q1) * std::pow(vox[i].r_out, 3) * -std::expm1(-3 * y[0]) / 3;
                    const double v = -(area - q1) * y[0] +
                                     c * vox[i].f(std::min(vox[i].f.total(), v1[i] + w));
                    if (v > by || y[0] == 0) {
                        by = v;
                        v0[i] = w;
                    }
                    return v;
                });
            }
            return gamma_objective(area, q1, vox, v1, v0, c, -1.0);
        });
        CHECK(gamma_objective(area, q1, vox, g.v1, g.v0, c, -1.0) == Approx(g.value).epsilon(1e-12));
        CHECK(g.value >= best - 1e-12 * std::max(1.0, std::abs(best)));
        CHECK(g.value == Approx(best).epsilon(1e-4));
    }
}

TEST_CASE("gamma is concave in the foreground mass", "[bounds]")
{
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        const double area = 0.002 + 0.01 * u(rng), c = 3.0 * u(rng), alpha = -(0.5 + 20 * u(rng));
        const auto vox = random_voxels(rng, 1 + trial % 4, area, 4.6);
        const int n = 200;
        std::vector<double> g(n + 1);
        for (int k = 0; k <= n; ++k) g[k] = gamma_solve(area, area * k / n, vox, c, alpha).value;
        for (int k = 2; k < n; ++k) CHECK(g[k - 1] - 2 * g[k] + g[k + 1] <= 1e-9 * std::max(1.0, std::abs(g[k])));
    }
}

TEST_CASE("pixel upper bound is tight and never below a dense search", "[bounds]")
{
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        const double area = 0.002 + 0.01 * u(rng), c = 3.0 * u(rng);
        const auto vox = random_voxels(rng, 3, area, 4.6);
        const ConcavePwl ff = random_pwl(rng, area, 4.6, 3);
        const PixelUpperResult r = pixel_upper(area, ff, vox, c, -1.0);
        double best = -kInf;
        for (int k = 0; k <= 2000; ++k) {
            const double q = area * k / 2000.0;
            best = std::max(best, ff(q) + gamma_solve(area, q, vox, c, -1.0).value);
        }
        CHECK(r.value >= best - 1e-12 * std::max(1.0, std::abs(best)));
        CHECK(r.value - best <= 1e-4 * std::max(1e-12, std::abs(best)));
        CHECK(r.slack >= 0);
    }
}
