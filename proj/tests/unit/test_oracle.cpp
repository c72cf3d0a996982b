#include "hbound/oracle.hpp"

#include "scenes.hpp"

#include <catch_amalgamated.hpp>

using namespace hbound;
using namespace hbound::testing;
using Catch::Approx;

TEST_CASE("exact evidence matches the scalar evaluation", "[oracle]")
{
    const Scene sc = make_scene(8, 1, {10.0, -0.1, 0, 0, 0}, small_config(), 0.0, small_retina());
    Rng rng(8);
    for (int t = 0; t < 12; ++t) {
        const Hypothesis h{t % 2,
                           {9.8 + 0.4 * rng.uniform(), -0.4 + 0.8 * rng.uniform(), 360 * rng.uniform(),
                            -3 + 6 * rng.uniform(), -3 + 6 * rng.uniform()}};
        const double a = evidence_exact(*sc.problem, h).value;
        const double b = evidence_exact_scalar(*sc.problem, h);
        CHECK(a == Approx(b).epsilon(1e-9));
    }
}

TEST_CASE("image-only evidence has a closed form", "[oracle]")
{
    SolveConfig cfg = small_config();
    cfg.lambda = 0.0;
    const Scene sc = make_scene(2, 0, {10.0, 0.0, 0, 0, 0}, cfg, 0.0, small_retina());
    const Problem& pb = *sc.problem;
    const Hypothesis h{0, {10.0, 0.0, 0, 0, 0}};
    const ExactEvidence e = evidence_exact(pb, h);
    REQUIRE_FALSE(e.degenerate);
    const double a = pb.retina.cell_area();
    const double fill = a * std::log(-std::expm1(cfg.alpha * cfg.n_r * std::log(cfg.beta)));
    double expected = 0;
    int fg = 0;
    for (int j = e.theta0.iv0; j < e.theta0.iv1; ++j)
        for (int i = e.theta0.iu0; i < e.theta0.iu1; ++i) {
            const double v = pb.image->fpi.at(i, j) * a + fill;
            expected += std::max(0.0, v);
            fg += v > 0;
        }
    CHECK(fg > 0);
    CHECK(e.value == Approx(expected).epsilon(1e-12));
    CHECK(e.voxels == e.theta0.cells() * cfg.n_r);
}

TEST_CASE("exhaustive argmax", "[oracle]")
{
    const Scene sc = make_scene(4, 0, {10.0, 0.3, 0, 0, 0}, small_config(), 0.0, small_retina());
    std::vector<Hypothesis> hyps;
    for (double ty = -0.5; ty < 0.55; ty += 0.1) hyps.push_back({0, {10.0, ty, 0, 0, 0}});
    hyps.push_back({0, {10.0, 8.0, 0, 0, 0}});
    const OracleResult r = argmax_exhaustive(*sc.problem, hyps);
    REQUIRE(r.table.size() == hyps.size());
    CHECK(std::abs(hyps[r.best].pose.ty - 0.3) < 1e-9);
    CHECK(r.table.back().degenerate);
    long long total = 0;
    for (size_t i = 0; i < hyps.size(); ++i) {
        CHECK(r.table[i].value <= r.table[r.best].value);
        total += r.table[i].voxels;
    }
    CHECK(r.total_voxels == total);
}
