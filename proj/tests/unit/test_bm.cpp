#include "hbound/bm.hpp"
#include "hbound/oracle.hpp"

#include "scenes.hpp"

#include <catch_amalgamated.hpp>

using namespace hbound;
using namespace hbound::testing;
using Catch::Approx;

namespace {

Scene small_scene(int cls, double ty)
{
    return make_scene(3, cls, {10.0, ty, 0, 0, 0}, small_config(), 0.0, small_retina());
}

double tol(double x) { return 1e-9 * std::max(1.0, std::abs(x)); }

}  // namespace

TEST_CASE("children partition the parent box with the extra cell low", "[bm]")
{
    const Scene sc = small_scene(0, 0.1);
    RefinementState st(*sc.problem, {1, {10.0, -0.2, 30, 0.5, -0.5}});
    REQUIRE_FALSE(st.degenerate());
    for (int c = 0; c < 300 && !st.fully_refined(); ++c) st.refine_once();
    const auto& nodes = st.nodes();
    int checked = 0;
    for (const PixelNode& n : nodes) {
        if (n.leaf()) continue;
        ++checked;
        const PixelBox& b = n.box;
        long long cells = 0;
        for (int k : n.children) {
            const PixelBox& cb = nodes[k].box;
            CHECK(cb.iu0 >= b.iu0);
            CHECK(cb.iu1 <= b.iu1);
            CHECK(cb.iv0 >= b.iv0);
            CHECK(cb.iv1 <= b.iv1);
            CHECK(nodes[k].n_voxels == std::min(2 * n.n_voxels, sc.problem->config.n_r));
            cells += cb.cells();
        }
        if (b.cells() == 1) {
            CHECK(n.children.size() == 1);
            continue;
        }
        CHECK(cells == b.cells());
        const PixelBox& first = nodes[n.children[0]].box;
        const bool four = b.nu() >= 2 && b.nv() >= 2 && 2 * b.nu() >= b.nv() && 2 * b.nv() >= b.nu();
        CHECK(n.children.size() == (four ? 4u : 2u));
        if (four || b.nu() >= b.nv()) CHECK(first.nu() == (b.nu() + 1) / 2);
        if (four || b.nv() > b.nu()) CHECK(first.nv() == (b.nv() + 1) / 2);
    }
    CHECK(checked > 10);
}

TEST_CASE("incremental bounds equal a batch recomputation", "[bm]")
{
    const Scene sc = small_scene(1, -0.1);
    RefinementState st(*sc.problem, sc.truth);
    for (int step = 0; step < 6; ++step) {
        for (int c = 0; c < 40 && !st.fully_refined(); ++c) st.refine_once();
        const auto [lo, up] = st.recompute_batch();
        CHECK(lo == Approx(st.lower()).margin(tol(lo)));
        CHECK(up == Approx(st.upper()).margin(tol(up)));
    }
}

TEST_CASE("refinement brackets the exact evidence and counts cycles", "[bm]")
{
    const Scene sc = small_scene(0, 0.0);
    const Hypothesis h{0, {10.1, 0.15, 20, 0.3, 0.2}};
    const double exact = evidence_exact(*sc.problem, h).value;
    RefinementState st(*sc.problem, h);
    CHECK(st.cycles() == 0);
    CHECK(st.voxels_evaluated() == 1);
    double lo = st.lower(), up = st.upper();
    long long refined = 0, voxels = st.voxels_evaluated();
    while (!st.fully_refined()) {
        const CycleReport r = st.refine_once();
        REQUIRE(r.refined);
        ++refined;
        voxels += r.voxels_evaluated;
        CHECK(r.children >= 1);
        CHECK(r.voxels_evaluated >= 0);
        CHECK(st.lower() <= exact + tol(exact));
        CHECK(st.upper() >= exact - tol(exact));
        CHECK(st.lower() >= lo - tol(lo));
        CHECK(st.upper() <= up + tol(up));
        lo = st.lower();
        up = st.upper();
    }
    CHECK(st.cycles() == refined);
    CHECK(st.voxels_evaluated() == voxels);
    CHECK_FALSE(st.refine_once().refined);
    CHECK(st.cycles() == refined);
    CHECK(st.lower() == Approx(exact).margin(tol(exact)));
    CHECK(st.upper() == Approx(exact).margin(tol(exact)));
}

TEST_CASE("rasters cover the native partition", "[bm]")
{
    const Scene sc = small_scene(0, 0.0);
    RefinementState st(*sc.problem, sc.truth);
    for (int c = 0; c < 50; ++c) st.refine_once();
    const Rasters r = st.rasters();
    const Retina& ret = sc.problem->retina;
    const size_t n2 = static_cast<size_t>(ret.nu) * ret.nv;
    REQUIRE(r.q_hat.size() == n2);
    REQUIRE(r.v_tilde.size() == n2 * sc.problem->config.n_r);
    for (float q : r.q_hat) CHECK((q == 0.f || q == 1.f));
    for (float q : r.q_tilde) CHECK((q >= 0.f && q <= 1.f));
    for (float v : r.v_hat) CHECK((v == 0.f || v == 1.f));
    for (float v : r.v_tilde) CHECK((v >= 0.f && v <= 1.f));
}

TEST_CASE("out of view hypotheses are degenerate", "[bm]")
{
    const Scene sc = small_scene(0, 0.0);
    RefinementState st(*sc.problem, {0, {10.0, 8.0, 0, 0, 0}});
    CHECK(st.degenerate());
    CHECK(st.fully_refined());
    CHECK(st.lower() == st.upper());
}
