#include "hbound/foam.hpp"

#include "scenes.hpp"

#include <catch_amalgamated.hpp>

using namespace hbound;
using namespace hbound::testing;

namespace {

Scene small_scene(SolveConfig cfg = small_config())
{
    return make_scene(5, 0, {10.0, 0.2, 0, 0, 0}, cfg, 0.0, small_retina());
}

std::vector<Hypothesis> lateral(int cls)
{
    std::vector<Hypothesis> h;
    for (double ty = -0.6; ty < 0.65; ty += 0.2) h.push_back({cls, {10.0, ty, 0, 0, 0}});
    return h;
}

}  // namespace

TEST_CASE("solve finds the rendered hypothesis", "[foam]")
{
    const Scene sc = small_scene();
    auto hyps = lateral(0);
    const auto more = lateral(1);
    hyps.insert(hyps.end(), more.begin(), more.end());
    const SolveReport rep = solve(*sc.problem, hyps);
    REQUIRE(rep.reason == Termination::Optimal);
    CHECK(rep.solutions == std::vector<int>{rep.winner});
    CHECK(hyps[rep.winner].cls == 0);
    CHECK(std::abs(hyps[rep.winner].pose.ty - 0.2) < 1e-9);
    CHECK(rep.rasters.size() == 1);
    for (size_t i = 0; i < hyps.size(); ++i) {
        const HypothesisOutcome& o = rep.hypotheses[i];
        CHECK(o.lower <= o.upper + 1e-9 * std::max(1.0, std::abs(o.lower)));
        if (static_cast<int>(i) != rep.winner) {
            CHECK_FALSE(o.active);
            CHECK(o.pruned_at >= 0);
            CHECK(o.upper < rep.best_lower);
        }
    }
}

TEST_CASE("pruning is strict and uses the best rival lower bound", "[foam]")
{
    const Scene sc = small_scene();
    Foam f(*sc.problem, lateral(0));
    for (int c = 0; c < 30; ++c) {
        const int i = f.select_next();
        if (i < 0) break;
        CHECK(f.active(i));
        f.refine(i);
        for (int k = 0; k < 7; ++k) {
            double b = -kInf;
            for (int j = 0; j < 7; ++j)
                if (j != k) b = std::max(b, f.state(j).lower());
            if (f.active(k)) CHECK(f.state(k).upper() >= b);
        }
    }
}

TEST_CASE("greatest upper bound is refined first", "[foam]")
{
    const Scene sc = small_scene();
    Foam f(*sc.problem, lateral(1));
    const int i = f.select_next();
    REQUIRE(i >= 0);
    for (int k = 0; k < 7; ++k)
        if (f.active(k) && !f.state(k).fully_refined()) CHECK(f.state(k).upper() <= f.state(i).upper());
}

TEST_CASE("all policies agree on the winner", "[foam]")
{
    for (SelectionPolicy p : {SelectionPolicy::GreatestMargin, SelectionPolicy::RoundRobin}) {
        SolveConfig cfg = small_config();
        cfg.policy = p;
        const Scene sc = small_scene(cfg);
        const SolveReport rep = solve(*sc.problem, lateral(0));
        CHECK(rep.reason == Termination::Optimal);
        CHECK(rep.winner == 4);
    }
}

TEST_CASE("budget termination", "[foam]")
{
    SolveConfig cfg = small_config();
    cfg.budget = 7;
    const Scene sc = small_scene(cfg);
    const SolveReport rep = solve(*sc.problem, lateral(0));
    CHECK(rep.cycles == 0);
    CHECK((rep.reason == Termination::Budget || rep.reason == Termination::Optimal));
    if (rep.reason == Termination::Budget) CHECK(rep.winner == -1);

    cfg.budget = 20;
    const Scene sc2 = small_scene(cfg);
    const SolveReport r2 = solve(*sc2.problem, lateral(0));
    CHECK(r2.cycles <= 13);

    cfg.budget = 6;
    const Scene sc3 = small_scene(cfg);
    CHECK_THROWS_AS(solve(*sc3.problem, lateral(0)), ParameterError);
}

TEST_CASE("identical hypotheses end indistinguishable", "[foam]")
{
    const Scene sc = small_scene();
    const Hypothesis h{0, {10.0, 0.2, 0, 0, 0}};
    const SolveReport rep = solve(*sc.problem, {h, h});
    CHECK(rep.reason == Termination::Indistinguishable);
    CHECK(rep.solutions == std::vector<int>{0, 1});
    CHECK(rep.winner == -1);
    CHECK(rep.rasters.size() == 2);
    CHECK(rep.hypotheses[0].lower == rep.hypotheses[1].lower);
}

TEST_CASE("trace rows start with one initialization row per hypothesis", "[foam]")
{
    const Scene sc = small_scene();
    const SolveReport rep = solve(*sc.problem, lateral(0));
    REQUIRE(rep.trace.size() == 7 + static_cast<size_t>(rep.cycles));
    for (int i = 0; i < 7; ++i) {
        CHECK(rep.trace[i].cycle == 0);
        CHECK(rep.trace[i].hypothesis == i);
    }
    for (size_t r = 7; r < rep.trace.size(); ++r) CHECK(rep.trace[r].cycle == static_cast<long long>(r) - 6);
}

TEST_CASE("invalid input is rejected", "[foam]")
{
    const Scene sc = small_scene();
    CHECK_THROWS_AS(solve(*sc.problem, {}), ParameterError);
    CHECK_THROWS_AS(solve(*sc.problem, {{2, {10.0, 0, 0, 0, 0}}}), ParameterError);
    CHECK_THROWS_AS(solve(*sc.problem, {{0, {10.0, 8.0, 0, 0, 0}}}), DegenerateError);
}
