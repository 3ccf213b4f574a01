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

#include "wedt/channel.hpp"
#include "wedt/scenes.hpp"

#include <algorithm>
#include <numbers>
#include <random>

using namespace wedt;
using cd = std::complex<double>;

namespace
{
constexpr double kPi = std::numbers::pi;
constexpr double kC = 299792458.0;

// Reference Fresnel formulas written directly with std::complex.
std::pair<cd, cd> fresnel_oracle(double eps, double sigma, double fc, double c)
{
    const cd eta(eps, -sigma / (2 * kPi * fc * 8.8541878128e-12));
    const cd st = std::sqrt(eta - (1.0 - c * c));
    return {(c - st) / (c + st), (eta * c - st) / (eta * c + st)};
}

Facet floor_facet()
{
    Facet f;
    f.v0 = {0, 0, 0};
    f.v1 = {1, 0, 0};
    f.v2 = {0, 1, 0};
    f.normal = {0, 0, 1};
    f.patch_area = 0.5;
    return f;
}

std::vector<cd> random_csi(std::mt19937_64 &rng, int n)
{
    std::normal_distribution<double> g;
    std::vector<cd> h(static_cast<std::size_t>(n));
    for (auto &v : h)
        v = {g(rng), g(rng)};
    return h;
}
} // namespace

TEST_CASE("OfdmConfig validation")
{
    CHECK_NOTHROW(OfdmConfig{}.validate());
    CHECK(OfdmConfig{}.spacing() == doctest::Approx(200e6 / 256));
    CHECK_THROWS(OfdmConfig{3.5e9, 200e6, 100}.validate());
    CHECK_THROWS(OfdmConfig{50e6, 200e6, 256}.validate());
}

TEST_CASE("antenna_gain")
{
    const AntennaPattern pat; // 360 deg / 17 deg, 8 dBi, 30 dB
    CHECK(antenna_gain(pat, 0.0, kPi / 2) == doctest::Approx(8.0));
    CHECK(antenna_gain(pat, 0.0, kPi / 2 + 17.0 * kPi / 180.0) == doctest::Approx(-4.0));
    CHECK(antenna_gain(pat, kPi, 0.0) == doctest::Approx(-22.0));
}

TEST_CASE("antenna_response")
{
    const auto iso = antenna_response(AntennaPattern::isotropic(0.0), 0.0, kPi / 2);
    CHECK(iso[0] == 1.0);
    CHECK(iso[1] == 0.0);
    AntennaPattern pat;
    pat.slant = kPi / 2;
    const auto v = antenna_response(pat, 0.0, kPi / 2);
    CHECK(std::abs(v[0]) < 1e-15);
    CHECK(v[1] == doctest::Approx(std::pow(10.0, 8.0 / 20.0)));
    pat.slant = kPi / 4;
    const auto d = antenna_response(pat, 0.0, kPi / 2);
    // 10^(8/20) / sqrt(2)
    CHECK(std::abs(d[0] - 1.77617) < 1e-4);
    CHECK(std::abs(d[1] - 1.77617) < 1e-4);
}

TEST_CASE("fresnel_coeffs")
{
    const double fc = 3.5e9;
    const auto [te0, tm0] = fresnel_coeffs(EmProperties{1.0, 0.0, 0.0, 0.0}, fc, 0.7);
    CHECK(std::abs(te0) < 1e-15);
    CHECK(std::abs(tm0) < 1e-15);

    const auto [te, tm] = fresnel_coeffs(EmProperties{4.0, 0.0, 0.0, 0.0}, fc, 1.0);
    CHECK(std::abs(te - cd(-1.0 / 3.0, 0.0)) < 1e-10);
    CHECK(std::abs(tm - cd(1.0 / 3.0, 0.0)) < 1e-10);

    const auto [tg, mg] = fresnel_coeffs(EmProperties{5.0, 0.1, 0.0, 0.0}, fc, 1e-6);
    CHECK(std::abs(std::abs(tg) - 1.0) < 1e-3);

    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> ue(1.0, 20.0), us(0.0, 3.0), uc(1e-4, 1.0);
    for (int i = 0; i < 500; ++i)
    {
        const double eps = ue(rng), sig = i % 5 == 0 ? 1e7 * us(rng) : us(rng), c = uc(rng);
        const auto [a, b] = fresnel_coeffs(EmProperties{eps, sig, 0, 0}, fc, c);
        const auto [oa, ob] = fresnel_oracle(eps, sig, fc, c);
        CHECK(std::abs(a - oa) < 1e-10);
        CHECK(std::abs(b - ob) < 1e-10);
        CHECK(std::abs(a) <= 1.0 + 1e-12);
        CHECK(std::abs(b) <= 1.0 + 1e-12);
    }
}

TEST_CASE("interaction_matrix")
{
    const double fc = 3.5e9;
    const Facet f = floor_facet();
    Interaction refl;
    refl.kind = InteractionKind::Reflection;
    refl.cos_theta_i = 0.6;
    const EmProperties mat{5.0, 0.05, 0.0, 0.3};
    const auto [te, tm] = fresnel_coeffs(mat, fc, 0.6);

    auto m = interaction_matrix(refl, f, EmVars::constant(mat), fc);
    CHECK(m.m[0][0].re.v == te.real());
    CHECK(m.m[0][0].im.v == te.imag());
    CHECK(m.m[1][1].re.v == tm.real());
    CHECK(m.m[1][1].im.v == tm.imag());
    CHECK(m.m[0][1].re.v == 0.0);
    CHECK(m.m[1][0].im.v == 0.0);

    auto rough = mat;
    rough.s = 1.0;
    m = interaction_matrix(refl, f, EmVars::constant(rough), fc);
    for (auto &row : m.m)
        for (auto &z : row)
            CHECK(std::abs(cd(z.re.v, z.im.v)) == 0.0);

    Interaction sc;
    sc.kind = InteractionKind::Scatter;
    sc.cos_theta_i = 0.5;
    sc.cos_theta_o = 0.8;
    auto smat = mat;
    smat.s = 0.4;
    smat.k_chi = 0.0;
    m = interaction_matrix(sc, f, EmVars::constant(smat), fc);
    CHECK(m.m[0][1].re.v == 0.0);
    CHECK(m.m[1][0].re.v == 0.0);
    const auto [ts, ms] = fresnel_coeffs(smat, fc, 0.5);
    const double gbar = std::sqrt((std::norm(ts) + std::norm(ms)) / 2.0);
    const double as = 0.4 * gbar * std::sqrt(0.5 * 0.5 * 0.8 / kPi);
    CHECK(m.m[0][0].re.v == doctest::Approx(as));

    smat.k_chi = 0.3;
    m = interaction_matrix(sc, f, EmVars::constant(smat), fc);
    // Each incident polarization scatters total power a_s^2.
    CHECK(m.m[0][0].re.v * m.m[0][0].re.v + m.m[1][0].re.v * m.m[1][0].re.v == doctest::Approx(as * as));
}

TEST_CASE("basis_transform")
{
    const Basis b{Vec3{1, 0, 0}, Vec3{0, 1, 0}};
    const auto id = basis_transform(b, b);
    CHECK(id[0][0] == 1.0);
    CHECK(id[1][1] == 1.0);
    CHECK(id[0][1] == 0.0);

    const double a = 0.7;
    const Basis r{Vec3{std::cos(a), std::sin(a), 0}, Vec3{-std::sin(a), std::cos(a), 0}};
    const auto t = basis_transform(b, r);
    CHECK(t[0][0] == doctest::Approx(std::cos(a)));
    CHECK(t[0][1] == doctest::Approx(std::sin(a)));
    CHECK(t[1][0] == doctest::Approx(-std::sin(a)));
    CHECK(t[1][1] == doctest::Approx(std::cos(a)));

    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (int i = 0; i < 100; ++i)
    {
        const Vec3 d = normalize(Vec3{g(rng), g(rng), g(rng)});
        auto perp = [&](const Vec3 &seed) {
            const Vec3 e0 = normalize(seed - d * dot(seed, d));
            return Basis{e0, cross(d, e0)};
        };
        const auto tt = basis_transform(perp({g(rng), g(rng), g(rng)}), perp({g(rng), g(rng), g(rng)}));
        for (int p = 0; p < 2; ++p)
            for (int q = 0; q < 2; ++q)
            {
                const double v = tt[0][static_cast<std::size_t>(p)] * tt[0][static_cast<std::size_t>(q)] +
                                 tt[1][static_cast<std::size_t>(p)] * tt[1][static_cast<std::size_t>(q)];
                CHECK(std::abs(v - (p == q ? 1.0 : 0.0)) < 1e-12);
            }
    }
}

TEST_CASE("path_coefficient")
{
    const double fc = 3.5e9;
    const SceneGeometry empty;
    const Antennas iso{AntennaPattern::isotropic(0.0), AntennaPattern::isotropic(0.0)};

    SUBCASE("Friis field factor")
    {
        const auto los = trace_los(empty, {0, 0, 1.5}, {100, 0, 1.5});
        REQUIRE(los);
        const cd a = path_coefficient(empty, *los, std::span<const EmProperties>{}, iso, fc);
        const double friis = kC / (4 * kPi * fc * 100.0);
        CHECK(std::abs(a) == doctest::Approx(friis).epsilon(1e-12));
        CHECK(std::abs(a) == doctest::Approx(6.8162e-5).epsilon(1e-4));
    }
    SUBCASE("fully rough reflector")
    {
        const auto ground = make_ground(50);
        const auto paths = trace_specular(ground, {-5, 0, 2}, {5, 0, 1}, 1);
        REQUIRE(paths.size() == 1);
        const EmProperties rough{4, 0.1, 1.0, 0.2};
        const cd a = path_coefficient(ground, paths[0], std::vector<EmProperties>{rough}, iso, fc);
        CHECK(std::abs(a) == 0.0);
    }
    SUBCASE("cross-polarized LOS")
    {
        const auto los = trace_los(empty, {0, 0, 1.5}, {7, 3, 2.5});
        const Antennas cross_pol{AntennaPattern::isotropic(0.0), AntennaPattern::isotropic(kPi / 2)};
        const double friis = kC / (4 * kPi * fc * los->total_length);
        CHECK(std::abs(path_coefficient(empty, *los, std::span<const EmProperties>{}, cross_pol, fc)) < 1e-12 * friis);
    }
    SUBCASE("passive bound without scatter")
    {
        const auto room = make_shoebox(8, 5, 3);
        const AntennaPattern pat;
        const Antennas ant{pat, pat};
        std::mt19937_64 rng(12);
        std::uniform_real_distribution<double> ue(1, 15), us(0, 1), ulog(-4, 7);
        const auto set = trace_paths(room, {1.5, 1.2, 2.1}, {6.3, 3.9, 1.1}, {2, false});
        double bound = 0.0;
        for (const auto &p : set.paths)
        {
            const auto ct = antenna_response(pat, p.phi_tx, p.theta_tx);
            const auto cr = antenna_response(pat, p.phi_rx, p.theta_rx);
            const double amp = kC / (4 * kPi * fc * p.total_length);
            bound += amp * amp * (ct[0] * ct[0] + ct[1] * ct[1]) * (cr[0] * cr[0] + cr[1] * cr[1]);
        }
        for (int trial = 0; trial < 50; ++trial)
        {
            double total = 0.0;
            for (const auto &p : set.paths)
            {
                std::vector<EmProperties> props;
                for (std::size_t k = 0; k < p.order(); ++k)
                    props.push_back({ue(rng), std::pow(10.0, ulog(rng)), us(rng), us(rng)});
                total += std::norm(path_coefficient(room, p, props, ant, fc));
            }
            CHECK(total <= bound);
        }
    }
}

TEST_CASE("compute_csi")
{
    const OfdmConfig ofdm;
    const auto zero = compute_csi(std::span<const cd>{}, std::span<const double>{}, ofdm);
    REQUIRE(zero.h.size() == 256);
    for (const auto &v : zero.h)
        CHECK(v == cd(0, 0));

    const cd a1(3e-5, -1e-5);
    const double t1 = 37e-9;
    const auto one = compute_csi(std::span(&a1, 1), std::span(&t1, 1), ofdm);
    for (const auto &v : one.h)
        CHECK(std::abs(v) == doctest::Approx(std::abs(a1)).epsilon(1e-12));

    const cd as[] = {a1, cd(-2e-6, 4e-6)};
    const double ts[] = {t1, 81.5e-9};
    const auto two = compute_csi(as, ts, ofdm);
    for (int n = -128; n < 128; ++n)
    {
        const double f = 3.5e9 + n * (200e6 / 256);
        const cd ref = as[0] * std::exp(cd(0, -2 * kPi * f * ts[0])) + as[1] * std::exp(cd(0, -2 * kPi * f * ts[1]));
        CHECK(std::abs(two.h[static_cast<std::size_t>(n + 128)] - ref) < 1e-12 * std::abs(as[0]));
    }
}

TEST_CASE("csi_to_cir")
{
    const int n = 256;
    Csi flat{std::vector<cd>(n, cd(1, 0))};
    const auto h = csi_to_cir(flat);
    for (int m = 0; m < n; ++m)
        CHECK(std::abs(h[static_cast<std::size_t>(m)] - (m == n / 2 ? cd(16, 0) : cd(0, 0))) < 1e-12);

    std::mt19937_64 rng(2);
    Csi rnd{random_csi(rng, n)};
    const auto hr = csi_to_cir(rnd);
    double e_f = 0, e_t = 0;
    for (int m = 0; m < n; ++m)
    {
        e_f += std::norm(rnd.h[static_cast<std::size_t>(m)]);
        e_t += std::norm(hr[static_cast<std::size_t>(m)]);
    }
    CHECK(std::abs(e_f - e_t) / e_f < 1e-10);

    // Direct evaluation of the centered transform.
    for (int l : {-128, -3, 0, 5, 127})
    {
        cd acc(0, 0);
        for (int k = -n / 2; k < n / 2; ++k)
            acc += rnd.h[static_cast<std::size_t>(k + n / 2)] * std::exp(cd(0, 2 * kPi * k * l / n));
        CHECK(std::abs(acc / 16.0 - hr[static_cast<std::size_t>(l + n / 2)]) < 1e-10);
    }

    const int l0 = 7;
    Csi shifted{std::vector<cd>(n)};
    for (int k = -n / 2; k < n / 2; ++k)
        shifted.h[static_cast<std::size_t>(k + n / 2)] = std::exp(cd(0, -2 * kPi * k * l0 / n));
    const auto hs = csi_to_cir(shifted);
    const auto peak = std::max_element(hs.begin(), hs.end(), [](cd a, cd b) { return std::abs(a) < std::abs(b); });
    CHECK(peak - hs.begin() - n / 2 == l0);
    CHECK(std::abs(*peak) == doctest::Approx(16.0));
}

TEST_CASE("extract_params")
{
    const OfdmConfig ofdm;
    const int n = 256;
    auto taps_to_csi = [&](std::vector<std::pair<int, cd>> taps) {
        Csi c{std::vector<cd>(n)};
        for (int k = -n / 2; k < n / 2; ++k)
            for (auto [l, a] : taps)
                c.h[static_cast<std::size_t>(k + n / 2)] += a * std::exp(cd(0, -2 * kPi * k * l / n)) / 16.0;
        return c;
    };
    const auto unit = extract_params(taps_to_csi({{0, 1.0}}), ofdm);
    REQUIRE(unit);
    CHECK(std::abs(unit->p) < 1e-12);
    CHECK(unit->tau < 1e-15);

    const auto two = extract_params(taps_to_csi({{0, 1.0}, {20, 1.0}}), ofdm);
    REQUIRE(two);
    CHECK(two->p == doctest::Approx(10 * std::log10(2.0)).epsilon(1e-12));
    CHECK(std::abs(two->tau - 50e-9) < 1e-20);

    auto scaled = taps_to_csi({{-4, cd(0.3, 0.2)}, {9, cd(-0.1, 0.5)}, {30, 0.05}});
    const auto base = extract_params(scaled, ofdm);
    for (auto &v : scaled.h)
        v *= 3.0;
    const auto up = extract_params(scaled, ofdm);
    CHECK(up->p - base->p == doctest::Approx(20 * std::log10(3.0)));
    CHECK(up->tau == doctest::Approx(base->tau).epsilon(1e-12));

    CHECK_FALSE(extract_params(Csi{std::vector<cd>(n)}, ofdm));
}

TEST_CASE("fused channel parameters agree with the taped transform")
{
    const OfdmConfig ofdm{3.5e9, 200e6, 16};
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> ud(5e-9, 40e-9);
    for (int trial = 0; trial < 5; ++trial)
    {
        ad::Tape tape;
        std::vector<ad::CVar> coeffs;
        std::vector<double> delays;
        for (int i = 0; i < 4; ++i)
        {
            coeffs.push_back({tape.leaf(g(rng)), tape.leaf(g(rng))});
            delays.push_back(ud(rng));
        }
        const auto fused = channel_params(tape, coeffs, delays, ofdm);
        const auto ref = params_from_cir(csi_to_cir(compute_csi(coeffs, delays, ofdm)), ofdm.bandwidth);
        CHECK(fused.p.v == doctest::Approx(ref.p.v).epsilon(1e-12));
        CHECK(fused.tau.v == doctest::Approx(ref.tau.v).epsilon(1e-10));
        const auto gp = ad::backward(tape, fused.p), gp_ref = ad::backward(tape, ref.p);
        const auto gt = ad::backward(tape, fused.tau), gt_ref = ad::backward(tape, ref.tau);
        for (const auto &c : coeffs)
            for (const auto &v : {c.re, c.im})
            {
                CHECK(gp[v] == doctest::Approx(gp_ref[v]).epsilon(1e-9));
                CHECK(gt[v] == doctest::Approx(gt_ref[v]).epsilon(1e-9).scale(1e-9));
            }
    }
}

TEST_CASE("p and tau gradients through the field match finite differences")
{
    const auto room = make_shoebox(6, 4, 3);
    const OfdmConfig ofdm;
    const Antennas iso{AntennaPattern::isotropic(), AntennaPattern::isotropic()};
    const auto set = trace_paths(room, {1.1, 0.9, 2.0}, {4.7, 3.1, 1.3}, {2, true});
    REQUIRE(set.paths.size() > 10);

    NetConfig config;
    config.hidden = {4};
    config.num_freqs = 1;
    auto net = init_net(3, config, FourierEncoder(1, room.bounds()));
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (double &p : net.params())
        p = u(rng);

    auto evaluate = [&](const EmFieldNet &n) { return *extract_params(simulate_csi(room, set, n, iso, ofdm), ofdm); };

    ad::Tape tape;
    const auto leaves = net.register_params(tape);
    std::vector<ad::CVar> coeffs;
    std::vector<double> delays;
    for (const auto &p : set.paths)
    {
        std::vector<EmVars> props;
        for (const auto &in : p.interactions)
            props.push_back(net.query(in.point, -1, leaves));
        coeffs.push_back(path_coefficient(room, p, props, iso, ofdm.fc));
        delays.push_back(p.delay);
    }
    const auto params = channel_params(tape, coeffs, delays, ofdm);
    const auto base = evaluate(net);
    CHECK(params.p.v == doctest::Approx(base.p).epsilon(1e-10));
    CHECK(params.tau.v == doctest::Approx(base.tau).epsilon(1e-8));
    const auto gp = ad::backward(tape, params.p);
    const auto gt = ad::backward(tape, params.tau);

    const double h = 1e-5;
    for (std::size_t i = 0; i < net.num_params(); ++i)
    {
        auto plus = net, minus = net;
        plus.params()[i] += h;
        minus.params()[i] -= h;
        const auto a = evaluate(plus), b = evaluate(minus);
        const double fd_p = (a.p - b.p) / (2 * h), fd_t = (a.tau - b.tau) / (2 * h) * 1e9;
        const double an_p = gp[leaves[i]], an_t = gt[leaves[i]] * 1e9;
        CHECK(std::abs(fd_p - an_p) <= std::max(1e-4 * std::max(std::abs(fd_p), std::abs(an_p)), 1e-8));
        CHECK(std::abs(fd_t - an_t) <= std::max(1e-4 * std::max(std::abs(fd_t), std::abs(an_t)), 1e-8));
    }
}

TEST_CASE("parameters are invariant to path order")
{
    const auto room = make_shoebox(10, 6, 3, shoebox_truth(3.5e9));
    const OfdmConfig ofdm;
    const Antennas ant{AntennaPattern{}, AntennaPattern{}};
    auto set = trace_paths(room, {2, 3, 2}, {8, 1, 1.2}, {});
    const auto table = MaterialTable::from_truth(room);
    const auto a = extract_params(simulate_csi(room, set, table, ant, ofdm), ofdm);
    std::reverse(set.paths.begin(), set.paths.end());
    const auto b = extract_params(simulate_csi(room, set, table, ant, ofdm), ofdm);
    CHECK(a->p == doctest::Approx(b->p).epsilon(1e-12));
    CHECK(a->tau == doctest::Approx(b->tau).epsilon(1e-10));
}
