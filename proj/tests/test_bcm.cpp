// SPDX-License-Identifier: Apache-2.0
//
// wedt: wireless environment digital twin calibration toolkit
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------


#include <doctest.h>

#include "wedt/bcm.hpp"
#include "wedt/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace wedt;

namespace
{
MeasurementSample sample_at(const Vec3 &r, double p, double tau)
{
    MeasurementSample s;
    s.r = r;
    s.params = {p, tau};
    return s;
}

std::vector<std::vector<double>> random_rows(std::mt19937_64 &rng, int m, int d)
{
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(d)));
    for (auto &r : rows)
        for (auto &v : r)
            v = u(rng);
    return rows;
}

// Draw y ~ N(0, K_f + sn2 I) on normalized inputs via an independent dense Cholesky.
std::vector<double> draw_from_prior(const std::vector<std::vector<double>> &xn, const GprHyper &h, std::mt19937_64 &rng)
{
    const auto m = static_cast<Eigen::Index>(xn.size());
    Eigen::MatrixXd k(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
        {
            double r2 = 0.0;
            for (std::size_t d = 0; d < xn[0].size(); ++d)
            {
                const double t = (xn[static_cast<std::size_t>(i)][d] - xn[static_cast<std::size_t>(j)][d]) / h.length[d];
                r2 += t * t;
            }
            const double r = std::sqrt(3.0 * r2);
            k(i, j) = h.sf2 * (1.0 + r) * std::exp(-r) + (i == j ? h.sn2 : 0.0);
        }
    const Eigen::MatrixXd l = k.llt().matrixL();
    std::normal_distribution<double> g;
    Eigen::VectorXd z(m);
    for (Eigen::Index i = 0; i < m; ++i)
        z(i) = g(rng);
    const Eigen::VectorXd y = l * z;
    return {y.data(), y.data() + m};
}
} // namespace

TEST_CASE("extract_features: path structure")
{
    FeatureContext ctx;
    ctx.trace = {1, false};
    SUBCASE("open LOS-only position")
    {
        const auto f = extract_features(SceneGeometry{}, {0, 0, 2}, {5, 1, 1}, ctx);
        CHECK(f.reachable);
        CHECK(f.v[3] == 1.0);
        CHECK(f.v[4] == doctest::Approx(std::log(2.0)));
        CHECK(f.v[5] == 0.0);
        CHECK(f.v[6] == 0.0);
        // Single tap: flat spectrum.
        CHECK(f.v[7] == doctest::Approx(0.0).scale(1.0));
        CHECK(f.v[0] == 5.0);
    }
    SUBCASE("two-ray position")
    {
        const auto f = extract_features(make_ground(100), {-20, 0, 10}, {20, 0, 2}, ctx);
        CHECK(f.v[3] == 1.0);
        CHECK(f.v[4] == doctest::Approx(std::log(3.0)));
        CHECK(f.v[5] == doctest::Approx(0.5));
        CHECK(f.v[6] == 1.0);
        CHECK(f.v[7] > 0.0);
        CHECK(std::isfinite(f.v[8]));
    }
    SUBCASE("unreachable position")
    {
        const SceneGeometry wall({{0, -50, -50}, {0, 50, -50}, {0, 50, 50}, {0, -50, 50}}, {{0, 1, 2}, {0, 2, 3}}, {0, 0});
        const auto f = extract_features(wall, {-1, 0, 0}, {1, 0, 0}, ctx);
        CHECK_FALSE(f.reachable);
        CHECK(f.v[3] == 0.0);
        CHECK(f.v[4] == 0.0);
        CHECK(f.v[7] == 0.0);
        CHECK(f.v[8] == -60.0);
    }
}

TEST_CASE("fit_physical")
{
    const std::vector<double> d = {1.5, 2.0, 3.7, 5.0, 8.2, 12.0};
    std::vector<ChannelParams> params;
    for (double x : d)
        params.push_back({-40.0 - 20.0 * std::log10(x), 10e-9 * std::pow(x, 0.5)});
    std::vector<char> los_store(d.size(), 1);
    const std::span<const bool> los(reinterpret_cast<const bool *>(los_store.data()), los_store.size());

    const auto m = fit_physical(params, d, los);
    CHECK(std::abs(m.g0 + 40.0) < 1e-9);
    CHECK(std::abs(m.n0 - 2.0) < 1e-9);
    CHECK(std::abs(m.a0 - 10e-9) / 10e-9 < 1e-6);
    CHECK(std::abs(m.b0 - 0.5) < 1e-6);

    // A masked NLOS outlier does not move the fit.
    auto with_outlier = params;
    auto d2 = d;
    with_outlier.push_back({-40.0 - 20.0 * std::log10(4.0) - 30.0, 90e-9});
    d2.push_back(4.0);
    std::vector<char> los2 = los_store;
    los2.push_back(0);
    const auto m2 = fit_physical(with_outlier, d2, std::span<const bool>(reinterpret_cast<const bool *>(los2.data()), los2.size()));
    CHECK(m2.g0 == doctest::Approx(m.g0).epsilon(1e-12));
    CHECK(m2.n0 == doctest::Approx(m.n0).epsilon(1e-12));

    // Equal distances: intercept only.
    const std::vector<double> same = {3.0, 3.0, 3.0, 3.0};
    const std::vector<ChannelParams> ps = {{-50, 20e-9}, {-52, 30e-9}, {-51, 10e-9}, {-49, 40e-9}};
    std::vector<char> all(4, 1);
    const auto m3 = fit_physical(ps, same, std::span<const bool>(reinterpret_cast<const bool *>(all.data()), 4));
    CHECK(m3.n0 == 2.0);
    CHECK(m3.b0 == 0.0);
    CHECK(m3.gain(3.0) == doctest::Approx(-50.5));
}

TEST_CASE("matern_ard")
{
    GprHyper h{{1.0, 1.0}, 2.5, 0.1};
    const std::vector<double> a = {0.3, -0.2}, far = {1e6, 0};
    CHECK(matern_ard(a, a, h) == 2.5);
    CHECK(matern_ard(a, far, h) < 1e-300);
    h.sf2 = 1.0;
    const std::vector<double> o = {0, 0}, unit = {1, 0};
    CHECK(matern_ard(o, unit, h) == doctest::Approx((1 + std::sqrt(3.0)) * std::exp(-std::sqrt(3.0))));
    CHECK(matern_ard(o, unit, h) == doctest::Approx(0.4834).epsilon(1e-4));
}

TEST_CASE("feature normalization")
{
    std::mt19937_64 rng(1);
    auto rows = random_rows(rng, 40, 4);
    for (auto &r : rows)
        r[2] = 7.0;
    const auto norm = FeatureNorm::fit(rows);
    CHECK(norm.std[2] == 1.0);
    std::vector<double> mean(4, 0.0), sq(4, 0.0);
    for (const auto &r : rows)
    {
        const auto z = norm.apply(r);
        for (int d = 0; d < 4; ++d)
        {
            mean[static_cast<std::size_t>(d)] += z[static_cast<std::size_t>(d)] / 40.0;
            sq[static_cast<std::size_t>(d)] += z[static_cast<std::size_t>(d)] * z[static_cast<std::size_t>(d)] / 40.0;
        }
    }
    for (int d = 0; d < 4; ++d)
    {
        CHECK(std::abs(mean[static_cast<std::size_t>(d)]) < 1e-9);
        if (d != 2)
            CHECK(std::abs(std::sqrt(sq[static_cast<std::size_t>(d)]) - 1.0) < 1e-9);
    }
}

TEST_CASE("gpr_predict")
{
    SUBCASE("single training point")
    {
        const std::vector<std::vector<double>> x = {{0.5, -1.0}};
        const std::vector<double> y = {2.0};
        FeatureNorm id{{0, 0}, {1, 1}};
        const GprHyper h{{0.7, 2.0}, 1.3, 0.2};
        const auto model = condition_gpr(x, y, h, id);
        const std::vector<double> q = {0.1, 0.4};
        const double r = std::sqrt(3.0 * (std::pow(0.4 / 0.7, 2) + std::pow(1.4 / 2.0, 2)));
        const double k = 1.3 * (1 + r) * std::exp(-r);
        const double denom = 1.3 + 0.2 + model.jitter;
        const auto pred = gpr_predict(model, q);
        CHECK(std::abs(pred.mean - k * 2.0 / denom) < 1e-12);
        CHECK(std::abs(pred.variance - (1.3 - k * k / denom)) < 1e-12);
    }
    SUBCASE("interpolation at zero noise")
    {
        std::mt19937_64 rng(5);
        const auto x = random_rows(rng, 12, 3);
        std::vector<double> y;
        for (const auto &r : x)
            y.push_back(std::sin(r[0]) + r[1] * r[2]);
        const auto model = condition_gpr(x, y, GprHyper{{0.6, 0.6, 0.6}, 2.0, 0.0}, FeatureNorm::fit(x));
        for (std::size_t i = 0; i < x.size(); ++i)
        {
            const auto p = gpr_predict(model, x[i]);
            CHECK(std::abs(p.mean - y[i]) < 1e-8);
            CHECK(p.variance < 1e-6);
        }
    }
    SUBCASE("zero residuals")
    {
        std::mt19937_64 rng(6);
        const auto x = random_rows(rng, 15, 3);
        const std::vector<double> y(15, 0.0);
        const auto model = fit_gpr(x, y, 3);
        CHECK(model.hyper.sf2 < 1e-4);
        const std::vector<double> far = {100, 100, 100};
        const auto p = gpr_predict(model, far);
        CHECK(p.mean == 0.0);
        CHECK(p.variance == doctest::Approx(model.hyper.sf2));
        for (const auto &r : x)
            CHECK(gpr_predict(model, r).mean == 0.0);
    }
}

TEST_CASE("fit_gpr: optimizer quality on generate-from-prior data")
{
    std::mt19937_64 rng(2024);
    const int m = 60, dim = 4;
    const auto x = random_rows(rng, m, dim);
    const auto norm = FeatureNorm::fit(x);
    std::vector<std::vector<double>> xn;
    for (const auto &r : x)
        xn.push_back(norm.apply(r));
    const GprHyper truth{{0.8, 1.5, 3.0, 0.5}, 2.0, 0.05};
    const auto y = draw_from_prior(xn, truth, rng);

    const auto model = fit_gpr(x, y, 11);
    const double true_lml = log_marginal_likelihood(model.x, Eigen::Map<const Eigen::VectorXd>(y.data(), m), truth);
    CHECK(model.lml >= true_lml - 1e-6);

    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(gpr_predict(model, x[i]).variance <= model.hyper.sf2 + 1e-9);

    // Analytic gradient against central differences.
    Eigen::VectorXd grad;
    const GprHyper probe{{0.9, 1.2, 2.0, 0.7}, 1.5, 0.1};
    log_marginal_likelihood(model.x, Eigen::Map<const Eigen::VectorXd>(y.data(), m), probe, &grad);
    const double h = 1e-5;
    for (int k = 0; k < dim + 2; ++k)
    {
        auto plus = probe, minus = probe;
        auto bump = [&](GprHyper &g, double s) {
            if (k < dim)
                g.length[static_cast<std::size_t>(k)] *= std::exp(s);
            else if (k == dim)
                g.sf2 *= std::exp(s);
            else
                g.sn2 *= std::exp(s);
        };
        bump(plus, h);
        bump(minus, -h);
        const Eigen::Map<const Eigen::VectorXd> ym(y.data(), m);
        const double fd = (log_marginal_likelihood(model.x, ym, plus) - log_marginal_likelihood(model.x, ym, minus)) / (2 * h);
        CHECK(grad(k) == doctest::Approx(fd).epsilon(1e-5));
    }

    SUBCASE("doubling targets scales the variances by four")
    {
        std::vector<double> y2 = y;
        for (double &v : y2)
            v *= 2.0;
        const auto model2 = fit_gpr(x, y2, 11);
        CHECK(model2.hyper.sf2 / model.hyper.sf2 == doctest::Approx(4.0).epsilon(0.02));
        CHECK(model2.hyper.sn2 / model.hyper.sn2 == doctest::Approx(4.0).epsilon(0.02));
        CHECK(model2.lml - model.lml == doctest::Approx(-m * std::log(2.0)).epsilon(1e-3));
    }
}

TEST_CASE("make_grid")
{
    const auto room = make_shoebox(10, 6, 3);
    const auto grid = make_grid(room, {});
    CHECK(grid.size() == 960);
    for (const auto &p : grid)
    {
        CHECK(p.z == 1.2);
        for (const auto &f : room.facets())
            CHECK(point_facet_distance(p, f) >= 0.05);
    }
    GridConfig low;
    low.height = 0.03;
    CHECK(make_grid(room, low).empty());
}

TEST_CASE("build_bcm")
{
    const auto room = make_shoebox(10, 6, 3);
    const Vec3 tx{1.0, 3.0, 2.0};
    FeatureContext ctx;
    ctx.trace = {1, false};
    ctx.antennas = {AntennaPattern::isotropic(), AntennaPattern::isotropic()};
    const PhysicalModel truth{-35.0, 1.8, 4e-9, 0.6};

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ux(0.5, 9.5), uy(0.5, 5.5);
    std::vector<MeasurementSample> samples;
    for (int i = 0; i < 30; ++i)
    {
        const Vec3 r{ux(rng), uy(rng), 1.2};
        const double d = distance(tx, r);
        samples.push_back(sample_at(r, truth.gain(d), truth.spread(d)));
    }
    GridConfig gc;
    gc.spacing = 1.0;
    const auto targets = make_grid(room, gc);

    SUBCASE("physical model only")
    {
        const auto res = build_bcm(room, tx, samples, targets, ctx, 9);
        REQUIRE(res.entries.size() + res.unreachable.size() == targets.size());
        CHECK(res.entries.size() == targets.size());
        for (const auto &e : res.entries)
        {
            const double d = distance(tx, e.r);
            CHECK(std::abs(e.p_hat - truth.gain(d)) < 1e-6);
            CHECK(std::abs(e.tau_hat - truth.spread(d)) < 1e-15);
            CHECK(e.kappa_p >= kKappaPFloor);
            CHECK(e.kappa_tau >= kKappaTauFloor * 1e-18);
        }
    }
    SUBCASE("uncertainty grows away from data and order does not matter")
    {
        auto noisy = samples;
        std::normal_distribution<double> g(0.0, 2.0);
        for (auto &s : noisy)
        {
            s.params.p += g(rng) + 3.0 * std::sin(s.r.x);
            s.params.tau *= 1.0 + 0.2 * std::cos(s.r.y);
        }
        std::vector<Vec3> pts = {noisy[0].r, {9.9, 5.9, 1.2}, {0.1, 0.1, 1.2}};
        const auto res = build_bcm(room, tx, noisy, pts, ctx, 9);
        REQUIRE(res.entries.size() == 3);
        const double far = std::max(res.entries[1].kappa_p, res.entries[2].kappa_p);
        CHECK(res.entries[0].kappa_p <= far);

        auto shuffled = noisy;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const auto res2 = build_bcm(room, tx, shuffled, pts, ctx, 9);
        CHECK(bcm_to_csv(res.entries) == bcm_to_csv(res2.entries));
    }
}

TEST_CASE("BCM CSV round trip")
{
    std::vector<BcmEntry> entries = {{{1.125, 2.5, 1.2}, -61.25, 12.5e-9, 0.3, 2.1e-18},
                                     {{3, 4, 1.2}, -70.123456789, 33.3e-9, 1.7, 9e-18}};
    const auto back = bcm_from_csv(bcm_to_csv(entries));
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i)
    {
        CHECK(back[i].r == entries[i].r);
        CHECK(back[i].p_hat == entries[i].p_hat);
        CHECK(back[i].tau_hat == doctest::Approx(entries[i].tau_hat).epsilon(1e-15));
        CHECK(back[i].kappa_tau == doctest::Approx(entries[i].kappa_tau).epsilon(1e-15));
    }
}
