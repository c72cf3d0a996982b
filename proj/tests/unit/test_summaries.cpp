#include "hbound/summaries.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <random>

using namespace hbound;
using Catch::Approx;

namespace {

std::vector<float> random_logits(size_t n, std::mt19937_64& rng, double dmax)
{
    std::uniform_real_distribution<double> u(-dmax, dmax);
    std::vector<float> v(n);
    for (float& x : v) x = static_cast<float>(u(rng));
    return v;
}

CellBox random_box(std::mt19937_64& rng, int nx, int ny, int nz)
{
    auto span = [&](int n, int& a, int& b) {
        std::uniform_int_distribution<int> d(0, n);
        a = d(rng);
        b = d(rng);
        if (a > b) std::swap(a, b);
    };
    CellBox b;
    span(nx, b.i0, b.i1);
    span(ny, b.j0, b.j1);
    span(nz, b.k0, b.k1);
    return b;
}

}  // namespace

TEST_CASE("mean summaries equal direct sums", "[summaries]")
{
    std::mt19937_64 rng(11);
    const int nx = 9, ny = 7, nz = 5;
    const std::vector<float> v = random_logits(static_cast<size_t>(nx) * ny * nz, rng, 4.0);
    const MeanSummaryIndex idx(nx, ny, nz, v, 0.5);
    for (int t = 0; t < 200; ++t) {
        const CellBox b = random_box(rng, nx, ny, nz);
        double s = 0;
        for (int k = b.k0; k < b.k1; ++k)
            for (int j = b.j0; j < b.j1; ++j)
                for (int i = b.i0; i < b.i1; ++i) s += v[(static_cast<size_t>(k) * ny + j) * nx + i];
        CHECK(idx.query(b) == Approx(0.5 * s).margin(1e-9));
    }
    CHECK_THROWS_AS(idx.query({0, nx + 1, 0, 1, 0, 1}), ParameterError);
}

TEST_CASE("m-summaries count threshold levels", "[summaries]")
{
    std::mt19937_64 rng(12);
    const int nx = 8, ny = 8, m = 4;
    const double dmax = 4.0;
    const std::vector<float> v = random_logits(static_cast<size_t>(nx) * ny, rng, dmax);
    const MSummaryIndex idx(nx, ny, 1, v, 0.25, dmax, m);
    for (int t = 0; t < 100; ++t) {
        CellBox b = random_box(rng, nx, ny, 1);
        b.k0 = 0;
        b.k1 = 1;
        const MSummary y = idx.query(b);
        REQUIRE(y.size() == 2 * m + 1);
        for (int k = -m; k <= m; ++k) {
            int count = 0;
            for (int j = b.j0; j < b.j1; ++j)
                for (int i = b.i0; i < b.i1; ++i) count += v[static_cast<size_t>(j) * nx + i] < k * dmax / m;
            CHECK(y[k + m] == Approx(0.25 * count));
            if (k > -m) CHECK(y[k + m] >= y[k + m - 1]);
        }
        CHECK(y.back() == Approx(0.25 * b.cells()));
    }
}

TEST_CASE("row range min and max", "[summaries]")
{
    std::mt19937_64 rng(13);
    const int nx = 13, ny = 3, nz = 2;
    const std::vector<float> v = random_logits(static_cast<size_t>(nx) * ny * nz, rng, 4.0);
    const RowRangeMinMax rm(nx, ny, nz, v);
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i0 = 0; i0 < nx; ++i0)
                for (int i1 = i0 + 1; i1 <= nx; ++i1) {
                    double lo, hi;
                    rm.row(j, k, i0, i1, lo, hi);
                    const auto first = v.begin() + (static_cast<long>(k) * ny + j) * nx;
                    CHECK(lo == *std::min_element(first + i0, first + i1));
                    CHECK(hi == *std::max_element(first + i0, first + i1));
                }
}

TEST_CASE("convex decomposition of an aligned box is exact", "[summaries]")
{
    const GridGeometry g{6, 6, 6, 0.5, {0, 0, 0}};
    std::array<Vec3, 8> corners;
    for (int b = 0; b < 8; ++b) corners[b] = {b & 1 ? 2.0 : 0.5, b & 2 ? 1.5 : 0.5, b & 4 ? 2.5 : 0.5};
    const Polytope box = make_hexahedron(corners);
    const ConvexRegionDecomposition d = decompose_convex(box, g);
    CHECK_FALSE(d.leaves_domain);
    CHECK(d.region_measure == Approx(1.5 * 1.0 * 2.0));
    long long interior = 0;
    for (const CellBox& b : d.boxes) interior += b.cells();
    CHECK(interior == 3 * 2 * 4);
    double partial = 0;
    for (const PartialCell& c : d.partial) partial += c.measure;
    CHECK(partial == Approx(0.0).margin(1e-12));
}

TEST_CASE("convex decomposition measures match clipping", "[summaries]")
{
    const GridGeometry g{8, 8, 8, 0.25, {-1, -1, -1}};
    const Polytope tet = make_tetrahedron({-0.7, -0.6, -0.8}, {0.9, -0.3, -0.5}, {0.1, 0.8, -0.4}, {0.0, 0.1, 0.9});
    const ConvexRegionDecomposition d = decompose_convex(tet, g);
    double sum = 0;
    for (const CellBox& b : d.boxes) sum += b.cells() * 0.25 * 0.25 * 0.25;
    for (const PartialCell& c : d.partial) {
        CHECK(c.measure <= 0.25 * 0.25 * 0.25 + 1e-15);
        CHECK(c.measure == Approx(intersection_volume(tet, g.lo(c.i, c.j, c.k), g.hi(c.i, c.j, c.k))).margin(1e-14));
        sum += c.measure;
    }
    CHECK(sum == Approx(d.region_measure).epsilon(1e-10));
    const Vec3 a{-0.7, -0.6, -0.8}, b{0.9, -0.3, -0.5}, c{0.1, 0.8, -0.4}, e{0.0, 0.1, 0.9};
    const double exact = std::abs(dot(b - a, cross(c - a, e - a))) / 6.0;
    CHECK(d.region_measure == Approx(exact).epsilon(1e-10));
}

TEST_CASE("convex summary bounds hold on a random field", "[summaries]")
{
    std::mt19937_64 rng(14);
    const GridGeometry g{8, 8, 8, 0.25, {-1, -1, -1}};
    const double dmax = 4.0, cell = 0.25 * 0.25 * 0.25;
    const int m = 3;
    const std::vector<float> v = random_logits(512, rng, dmax);
    const MeanSummaryIndex mean(8, 8, 8, v, cell);
    const MSummaryIndex ms(8, 8, 8, v, cell, dmax, m);
    const Polytope tet = make_tetrahedron({-0.8, -0.7, -0.6}, {0.8, -0.5, -0.4}, {0.0, 0.9, -0.3}, {0.1, 0.0, 0.85});
    const ConvexRegionDecomposition d = decompose_convex(tet, g);
    double exact_mean = 0;
    MSummary exact(2 * m + 1, 0.0);
    for (int k = 0; k < 8; ++k)
        for (int j = 0; j < 8; ++j)
            for (int i = 0; i < 8; ++i) {
                const double w = intersection_volume(tet, g.lo(i, j, k), g.hi(i, j, k));
                const double x = v[(static_cast<size_t>(k) * 8 + j) * 8 + i];
                exact_mean += w * x;
                for (int t = -m; t <= m; ++t)
                    if (x < t * dmax / m) exact[t + m] += w;
            }
    CHECK(mean_lower_convex(mean, d, dmax) <= exact_mean + 1e-12);
    const MSummary up = msummary_upper_convex(ms, d);
    for (int t = 0; t <= 2 * m; ++t) CHECK(up[t] <= exact[t] + 1e-12);
}
