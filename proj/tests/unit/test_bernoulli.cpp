#include "hbound/bernoulli.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace hbound;
using Catch::Approx;

namespace {

LogitField2D ramp_field(int nu, int nv)
{
    std::vector<double> p(static_cast<size_t>(nu) * nv);
    for (size_t c = 0; c < p.size(); ++c) p[c] = static_cast<double>(c % 17) / 16.0;
    return fpi_from_probabilities(nu, nv, p, 0.25);
}

}  // namespace

TEST_CASE("clamped logits stay inside the epsilon band", "[bernoulli]")
{
    const double eps = 0.01, dm = delta_max_of(eps);
    CHECK(dm == Approx(std::log(99.0)).epsilon(1e-6));
    CHECK(clamp_logit(0.0, eps) == -dm);
    CHECK(clamp_logit(1.0, eps) == dm);
    CHECK(clamp_logit(0.5, eps) == 0.0);
    for (double p = 0; p <= 1.0; p += 0.01) CHECK(std::abs(clamp_logit(p, eps)) <= dm);
    CHECK_THROWS_AS(clamp_logit(std::nan(""), eps), ParameterError);
    CHECK_THROWS_AS(clamp_logit(1.5, eps), ParameterError);
    CHECK_THROWS_AS(delta_max_of(0.5), ParameterError);
    CHECK_THROWS_AS(delta_max_of(0.0), ParameterError);
}

TEST_CASE("log of one minus the logistic is stable", "[bernoulli]")
{
    for (double d : {-40.0, -5.0, -0.3, 0.0, 0.7, 6.0, 20.0})
        CHECK(log1m_logistic(d) == Approx(std::log1p(-logistic(d))).epsilon(1e-6).margin(1e-15));
    CHECK(log1m_logistic(40.0) == Approx(-40.0 - std::exp(-40.0)));
    CHECK(log1m_logistic(800.0) == Approx(-800.0));
}

TEST_CASE("rng streams are reproducible", "[bernoulli]")
{
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const double x = a.uniform();
        CHECK(x == b.uniform());
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
        differs = differs || x != c.uniform();
    }
    CHECK(differs);
    double s = 0, s2 = 0;
    Rng n(5);
    for (int i = 0; i < 20000; ++i) {
        const double z = n.normal();
        s += z;
        s2 += z * z;
    }
    CHECK(s / 20000 == Approx(0.0).margin(0.03));
    CHECK(s2 / 20000 == Approx(1.0).margin(0.05));
}

TEST_CASE("prior from shapes is the clamped occupancy frequency", "[bernoulli]")
{
    BinaryGrid g;
    g.nx = 2;
    g.ny = 1;
    g.nz = 1;
    g.cell_size = 0.5;
    g.cells = {1, 0};
    BinaryGrid h = g;
    h.cells = {1, 1};
    BinaryGrid e = g;
    e.cells = {0, 0};
    const LogitField3D f = prior_from_shapes({g, h, e, h});
    CHECK(f.at(0, 0, 0) == Approx(std::log(3.0)).epsilon(1e-6));
    CHECK(f.at(1, 0, 0) == Approx(0.0).margin(1e-7));
    CHECK(f.z_const == Approx((log1m_logistic(f.at(0, 0, 0)) + log1m_logistic(f.at(1, 0, 0))) * 0.125));
    CHECK(f.has_positive);
    CHECK(f.value_at({-1, 0, 0}) == -f.delta_max);

    BinaryGrid bad = g;
    bad.nx = 3;
    CHECK_THROWS_AS(prior_from_shapes({g, bad}), ParameterError);
    CHECK_THROWS_AS(prior_from_shapes({}), ParameterError);
}

TEST_CASE("image field from likelihoods", "[bernoulli]")
{
    const LogitField2D f = fpi_from_likelihoods(2, 1, {3.0, 0.0}, {1.0, 0.0}, 2.0);
    CHECK(f.at(0, 0) == Approx(std::log(3.0)).epsilon(1e-6));
    CHECK(f.at(1, 0) == 0.0f);
    CHECK(f.z_const == Approx(2.0 * (log1m_logistic(f.at(0, 0)) + std::log(0.5))));
    CHECK_THROWS_AS(fpi_from_likelihoods(2, 1, {-1.0, 0.0}, {1.0, 0.0}, 1.0), ParameterError);
    CHECK_THROWS_AS(fpi_from_likelihoods(2, 2, {1.0}, {1.0}, 1.0), ParameterError);
}

TEST_CASE("salt and pepper noise flips logits", "[bernoulli]")
{
    const LogitField2D f = ramp_field(16, 8);
    const LogitField2D all = noise_salt_pepper(f, 1.0, 3);
    for (size_t c = 0; c < f.logit.size(); ++c) CHECK(all.logit[c] == -f.logit[c]);
    const LogitField2D none = noise_salt_pepper(f, 0.0, 3);
    CHECK(none.logit == f.logit);
    CHECK(noise_salt_pepper(f, 0.3, 9).logit == noise_salt_pepper(f, 0.3, 9).logit);
    CHECK_THROWS_AS(noise_salt_pepper(f, 1.1, 1), ParameterError);
}

TEST_CASE("structured noise flips a lattice of rows and columns", "[bernoulli]")
{
    const LogitField2D f = ramp_field(9, 9);
    const LogitField2D g = noise_structured(f, 4);
    for (int j = 0; j < 9; ++j)
        for (int i = 0; i < 9; ++i) {
            const bool flip = i % 4 == 0 || j % 4 == 0;
            CHECK(g.at(i, j) == (flip ? -f.at(i, j) : f.at(i, j)));
        }
    CHECK_THROWS_AS(noise_structured(f, 0), ParameterError);
}

TEST_CASE("gaussian noise keeps the epsilon band", "[bernoulli]")
{
    const LogitField2D f = ramp_field(16, 16);
    CHECK(noise_gaussian(f, 0.0, 1).logit == f.logit);
    const LogitField2D g = noise_gaussian(f, 0.4, 1);
    CHECK(g.logit != f.logit);
    for (float d : g.logit) CHECK(std::abs(d) <= g.delta_max);
    CHECK(noise_gaussian(f, 0.4, 1).logit == g.logit);
    CHECK_THROWS_AS(noise_gaussian(f, -0.1, 1), ParameterError);
}
