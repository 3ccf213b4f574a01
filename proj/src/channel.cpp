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


#include "wedt/channel.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include <fftw3.h>

namespace wedt
{

using ad::CVar;
using ad::Var;

void OfdmConfig::validate() const
{
    if (!(bandwidth > 0.0) || !(fc > bandwidth / 2.0))
        throw std::invalid_argument("OfdmConfig: require fc > W/2 > 0");
    if (subcarriers < 8 || (subcarriers & (subcarriers - 1)) != 0)
        throw std::invalid_argument("OfdmConfig: subcarrier count must be a power of two >= 8");
}

// ---------------------------------------------------------------------------------------------
// Antennas and local bases

double antenna_gain(const AntennaPattern &pattern, double phi, double theta)
{
    const double pb = phi / pattern.phi_3db;
    const double tb = (theta - std::numbers::pi / 2.0) / pattern.theta_3db;
    return pattern.g_max - std::min(12.0 * (pb * pb + tb * tb), pattern.a_max);
}

std::array<double, 2> antenna_response(const AntennaPattern &pattern, double phi, double theta)
{
    const double amp = std::pow(10.0, antenna_gain(pattern, phi, theta) / 20.0);
    return {amp * std::cos(pattern.slant), amp * std::sin(pattern.slant)};
}

Basis antenna_basis(double phi, double theta)
{
    const double ct = std::cos(theta), st = std::sin(theta), cp = std::cos(phi), sp = std::sin(phi);
    return {Vec3{ct * cp, ct * sp, -st}, Vec3{-sp, cp, 0.0}};
}

Basis incidence_basis(const Vec3 &dir, const Facet &facet)
{
    Vec3 te = cross(dir, facet.normal);
    if (norm(te) < 1e-12)
    {
        const Vec3 edge = facet.v1 - facet.v0;
        te = edge - dir * dot(edge, dir);
    }
    te = normalize(te);
    return {te, cross(te, dir)};
}

Mat2 basis_transform(const Basis &prev, const Basis &next)
{
    Mat2 t{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            t[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                dot(next[static_cast<std::size_t>(i)], prev[static_cast<std::size_t>(j)]);
    return t;
}

// ---------------------------------------------------------------------------------------------
// Interactions

std::pair<CVar, CVar> fresnel_coeffs(const EmVars &props, double fc, double cos_theta_i)
{
    const double k = 1.0 / (2.0 * std::numbers::pi * fc * kVacuumPermittivity);
    const CVar eta{props.eps_r, -(props.sigma * k)};
    const double sin2 = 1.0 - cos_theta_i * cos_theta_i;
    const CVar st = ad::csqrt(CVar{eta.re - sin2, eta.im});
    const CVar c{cos_theta_i, 0.0};
    const CVar te = (c - st) / (c + st);
    const CVar ec = eta * Var(cos_theta_i);
    const CVar tm = (ec - st) / (ec + st);
    return {te, tm};
}

std::pair<cdouble, cdouble> fresnel_coeffs(const EmProperties &props, double fc, double cos_theta_i)
{
    const auto [te, tm] = fresnel_coeffs(EmVars::constant(props), fc, cos_theta_i);
    return {{te.re.v, te.im.v}, {tm.re.v, tm.im.v}};
}

CMat2 interaction_matrix(const Interaction &inter, const Facet &facet, const EmVars &props, double fc)
{
    CMat2 f;
    const auto [te, tm] = fresnel_coeffs(props, fc, inter.cos_theta_i);
    if (inter.kind == InteractionKind::Reflection)
    {
        const Var rough = ad::sqrt(1.0 - props.s * props.s);
        f.m[0][0] = te * rough;
        f.m[1][1] = tm * rough;
        f.m[0][1] = CVar{0.0, 0.0};
        f.m[1][0] = CVar{0.0, 0.0};
        return f;
    }
    const Var gbar = ad::sqrt((ad::abs2(te) + ad::abs2(tm)) * 0.5);
    const double lobe = std::sqrt(facet.patch_area * inter.cos_theta_i * inter.cos_theta_o / std::numbers::pi);
    const Var as = props.s * gbar * lobe;
    const Var co = as * ad::sqrt(1.0 - props.k_chi);
    const Var cross_pol = as * ad::sqrt(props.k_chi);
    f.m[0][0] = CVar{co, 0.0};
    f.m[1][1] = CVar{co, 0.0};
    f.m[0][1] = CVar{cross_pol, 0.0};
    f.m[1][0] = CVar{cross_pol, 0.0};
    return f;
}

namespace
{
void rotate(const Mat2 &t, CVar v[2])
{
    const CVar a = v[0] * Var(t[0][0]) + v[1] * Var(t[0][1]);
    const CVar b = v[0] * Var(t[1][0]) + v[1] * Var(t[1][1]);
    v[0] = a;
    v[1] = b;
}

void interact(const CMat2 &f, CVar v[2])
{
    const CVar a = f.m[0][0] * v[0] + f.m[0][1] * v[1];
    const CVar b = f.m[1][0] * v[0] + f.m[1][1] * v[1];
    v[0] = a;
    v[1] = b;
}

CVar scaled(const CVar &z, const cdouble &c) { return z * CVar{c.real(), c.imag()}; }
} // namespace

CVar path_coefficient(const SceneGeometry &scene, const PropagationPath &path, std::span<const EmVars> props,
                      const Antennas &antennas, double fc)
{
    if (props.size() != path.order())
        throw std::invalid_argument("path_coefficient: one property set per interaction required");

    const auto ct = antenna_response(antennas.tx, path.phi_tx, path.theta_tx);
    const double d0 = path.has_scatter() ? path.segment_lengths.front() : path.total_length;
    CVar v[2] = {CVar{ct[0] / d0, 0.0}, CVar{ct[1] / d0, 0.0}};
    Basis prev = antenna_basis(path.phi_tx, path.theta_tx);

    for (std::size_t k = 0; k < path.order(); ++k)
    {
        const Interaction &inter = path.interactions[k];
        const Facet &facet = scene.facet(inter.facet_id);
        const Basis in = incidence_basis(inter.incident_dir, facet);
        rotate(basis_transform(prev, in), v);
        interact(interaction_matrix(inter, facet, props[k], fc), v);
        if (inter.kind == InteractionKind::Reflection)
            prev = {in[0], cross(in[0], inter.outgoing_dir)};
        else
        {
            prev = incidence_basis(inter.outgoing_dir, facet);
            const double inv = 1.0 / path.segment_lengths[k + 1];
            v[0] = v[0] * Var(inv);
            v[1] = v[1] * Var(inv);
        }
    }

    rotate(basis_transform(prev, antenna_basis(path.phi_rx, path.theta_rx)), v);
    const auto cr = antenna_response(antennas.rx, path.phi_rx, path.theta_rx);
    const double pref = kSpeedOfLight / (4.0 * std::numbers::pi * fc);
    return (v[0] * Var(cr[0]) + v[1] * Var(cr[1])) * Var(pref);
}

cdouble path_coefficient(const SceneGeometry &scene, const PropagationPath &path, std::span<const EmProperties> props,
                         const Antennas &antennas, double fc)
{
    std::vector<EmVars> vars;
    vars.reserve(props.size());
    for (const auto &p : props)
        vars.push_back(EmVars::constant(p));
    const CVar a = path_coefficient(scene, path, vars, antennas, fc);
    return {a.re.v, a.im.v};
}

std::vector<EmProperties> interaction_props(const SceneGeometry &scene, const PropagationPath &path,
                                            const MaterialTable &table)
{
    std::vector<EmProperties> out;
    out.reserve(path.order());
    for (const auto &inter : path.interactions)
        out.push_back(table_lookup(table, scene.facet(inter.facet_id)));
    return out;
}

std::vector<EmProperties> interaction_props(const SceneGeometry &scene, const PropagationPath &path,
                                            const EmFieldNet &net)
{
    std::vector<EmProperties> out;
    out.reserve(path.order());
    for (const auto &inter : path.interactions)
        out.push_back(net.query(inter.point, scene.facet(inter.facet_id).category));
    return out;
}

// ---------------------------------------------------------------------------------------------
// CSI and CIR

namespace
{
// exp(-j 2 pi f_n tau) for every subcarrier. Successive phasors differ by a constant rotation, so the
// sequence is advanced by multiplication and re-anchored exactly every 32 subcarriers to bound drift.
void path_phasors(double delay, const OfdmConfig &ofdm, std::vector<cdouble> &out)
{
    const int n_sc = ofdm.subcarriers;
    out.resize(static_cast<std::size_t>(n_sc));
    const double step = -2.0 * std::numbers::pi * ofdm.spacing() * delay;
    const cdouble rot(std::cos(step), std::sin(step));
    cdouble z;
    for (int k = 0; k < n_sc; ++k)
    {
        if (k % 32 == 0)
        {
            const double ph = -2.0 * std::numbers::pi * ofdm.frequency(k - n_sc / 2) * delay;
            z = cdouble(std::cos(ph), std::sin(ph));
        }
        else
            z *= rot;
        out[static_cast<std::size_t>(k)] = z;
    }
}
} // namespace

Csi compute_csi(std::span<const cdouble> coeffs, std::span<const double> delays, const OfdmConfig &ofdm)
{
    const int n_sc = ofdm.subcarriers;
    Csi csi;
    csi.h.assign(static_cast<std::size_t>(n_sc), cdouble(0.0, 0.0));
    std::vector<cdouble> ph;
    for (std::size_t i = 0; i < coeffs.size(); ++i)
    {
        path_phasors(delays[i], ofdm, ph);
        for (int k = 0; k < n_sc; ++k)
            csi.h[static_cast<std::size_t>(k)] += coeffs[i] * ph[static_cast<std::size_t>(k)];
    }
    return csi;
}

std::vector<CVar> compute_csi(std::span<const CVar> coeffs, std::span<const double> delays, const OfdmConfig &ofdm)
{
    const int n_sc = ofdm.subcarriers;
    std::vector<CVar> h(static_cast<std::size_t>(n_sc), CVar{0.0, 0.0});
    std::vector<cdouble> ph;
    for (std::size_t i = 0; i < coeffs.size(); ++i)
    {
        path_phasors(delays[i], ofdm, ph);
        for (int k = 0; k < n_sc; ++k)
            h[static_cast<std::size_t>(k)] =
                h[static_cast<std::size_t>(k)] + scaled(coeffs[i], ph[static_cast<std::size_t>(k)]);
    }
    return h;
}

namespace
{
template <typename Props>
Csi simulate_impl(const SceneGeometry &scene, const PathSet &paths, const Props &source, const Antennas &antennas,
                  const OfdmConfig &ofdm)
{
    std::vector<cdouble> coeffs;
    std::vector<double> delays;
    for (const auto &p : paths.paths)
    {
        const auto props = interaction_props(scene, p, source);
        coeffs.push_back(path_coefficient(scene, p, props, antennas, ofdm.fc));
        delays.push_back(p.delay);
    }
    return compute_csi(coeffs, delays, ofdm);
}

struct PlanCache
{
    std::mutex mutex;
    std::map<int, fftw_plan> plans;

    fftw_plan get(int n)
    {
        std::lock_guard lock(mutex);
        auto it = plans.find(n);
        if (it != plans.end())
            return it->second;
        std::vector<fftw_complex> scratch_in(static_cast<std::size_t>(n)), scratch_out(static_cast<std::size_t>(n));
        fftw_plan p = fftw_plan_dft_1d(n, scratch_in.data(), scratch_out.data(), FFTW_BACKWARD,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans.emplace(n, p);
        return p;
    }
};

PlanCache &plan_cache()
{
    static PlanCache cache;
    return cache;
}
} // namespace

Csi simulate_csi(const SceneGeometry &scene, const PathSet &paths, const MaterialTable &table,
                 const Antennas &antennas, const OfdmConfig &ofdm)
{
    return simulate_impl(scene, paths, table, antennas, ofdm);
}

Csi simulate_csi(const SceneGeometry &scene, const PathSet &paths, const EmFieldNet &net, const Antennas &antennas,
                 const OfdmConfig &ofdm)
{
    return simulate_impl(scene, paths, net, antennas, ofdm);
}

std::vector<cdouble> csi_to_cir(const Csi &csi)
{
    const int n = static_cast<int>(csi.h.size());
    if (n % 4 != 0)
        throw std::invalid_argument("csi_to_cir: length must be a multiple of 4");
    // Centered indices: e^{j2pi(k-N/2)(m-N/2)/N} = (-1)^k (-1)^m e^{j2pi km/N} when 4 | N.
    std::vector<cdouble> in(csi.h.size()), out(csi.h.size());
    for (std::size_t k = 0; k < in.size(); ++k)
        in[k] = (k & 1U) ? -csi.h[k] : csi.h[k];
    fftw_execute_dft(plan_cache().get(n), reinterpret_cast<fftw_complex *>(in.data()),
                     reinterpret_cast<fftw_complex *>(out.data()));
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t m = 0; m < out.size(); ++m)
        out[m] *= (m & 1U) ? -scale : scale;
    return out;
}

std::vector<CVar> csi_to_cir(std::span<const CVar> csi)
{
    const int n = static_cast<int>(csi.size());
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    std::vector<CVar> out(csi.size(), CVar{0.0, 0.0});
    for (int m = 0; m < n; ++m)
    {
        CVar acc{0.0, 0.0};
        for (int k = 0; k < n; ++k)
        {
            const double ph = 2.0 * std::numbers::pi * static_cast<double>((k - n / 2) * (m - n / 2)) / n;
            acc = acc + scaled(csi[static_cast<std::size_t>(k)], cdouble(std::cos(ph), std::sin(ph)));
        }
        out[static_cast<std::size_t>(m)] = acc * Var(scale);
    }
    return out;
}

std::optional<ChannelParams> params_from_cir(std::span<const cdouble> cir, double bandwidth)
{
    const int n = static_cast<int>(cir.size());
    double p = 0.0, s1 = 0.0, s2 = 0.0;
    for (int m = 0; m < n; ++m)
    {
        const double l = m - n / 2;
        const double e = std::norm(cir[static_cast<std::size_t>(m)]);
        p += e;
        s1 += l * e;
        s2 += l * l * e;
    }
    if (!(p > 0.0))
        return std::nullopt;
    const double mean = s1 / p;
    double var = 0.0;
    for (int m = 0; m < n; ++m)
    {
        const double dl = (m - n / 2) - mean;
        var += dl * dl * std::norm(cir[static_cast<std::size_t>(m)]);
    }
    return ChannelParams{10.0 * std::log10(p), std::sqrt(var / p) / bandwidth};
}

std::optional<ChannelParams> extract_params(const Csi &csi, const OfdmConfig &ofdm)
{
    return params_from_cir(csi_to_cir(csi), ofdm.bandwidth);
}

TapedParams params_from_cir(std::span<const CVar> cir, double bandwidth)
{
    const int n = static_cast<int>(cir.size());
    Var p = 0.0, s1 = 0.0, s2 = 0.0;
    for (int m = 0; m < n; ++m)
    {
        const double l = m - n / 2;
        const Var e = ad::abs2(cir[static_cast<std::size_t>(m)]);
        p = p + e;
        s1 = s1 + e * l;
        s2 = s2 + e * (l * l);
    }
    if (!(p.v > 0.0))
        throw ad::DomainError("channel has zero energy");
    const Var mean = s1 / p;
    const Var var = s2 / p - mean * mean;
    const Var tau = var.v > 0.0 ? ad::sqrt(var) * (1.0 / bandwidth) : Var(0.0);
    return {ad::log(p) * (10.0 / std::numbers::ln10), tau};
}

std::vector<cdouble> unit_path_cir(double delay, const OfdmConfig &ofdm)
{
    const cdouble one(1.0, 0.0);
    return csi_to_cir(compute_csi(std::span(&one, 1), std::span(&delay, 1), ofdm));
}

TapedParams channel_params(ad::Tape &tape, std::span<const CVar> coeffs, std::span<const double> delays,
                           const OfdmConfig &ofdm)
{
    const std::size_t n_paths = coeffs.size();
    const auto n = static_cast<std::size_t>(ofdm.subcarriers);
    std::vector<std::vector<cdouble>> unit(n_paths);
    std::vector<cdouble> h(n, cdouble(0.0, 0.0));
    for (std::size_t i = 0; i < n_paths; ++i)
    {
        unit[i] = unit_path_cir(delays[i], ofdm);
        const cdouble a(coeffs[i].re.v, coeffs[i].im.v);
        for (std::size_t m = 0; m < n; ++m)
            h[m] += a * unit[i][m];
    }

    double p = 0.0, s1 = 0.0, s2 = 0.0;
    for (std::size_t m = 0; m < n; ++m)
    {
        const double l = static_cast<double>(m) - static_cast<double>(n / 2);
        const double e = std::norm(h[m]);
        p += e;
        s1 += l * e;
        s2 += l * l * e;
    }
    if (!(p > 0.0))
        throw ad::DomainError("channel has zero energy");
    const double mean = s1 / p;
    const double var = s2 / p - mean * mean;
    const double sd = var > 0.0 ? std::sqrt(var) : 0.0;
    const double p_db = 10.0 * std::log10(p);
    const double tau = sd / ofdm.bandwidth;

    // dS_w/dRe(a_i) = 2 Re(c_i), dS_w/dIm(a_i) = -2 Im(c_i), c_i = sum_l w_l conj(h_l) u_il.
    std::vector<Var> parents;
    std::vector<double> dp, dt;
    parents.reserve(2 * n_paths);
    dp.reserve(2 * n_paths);
    dt.reserve(2 * n_paths);
    const double kp = 10.0 / std::numbers::ln10 / p;
    for (std::size_t i = 0; i < n_paths; ++i)
    {
        cdouble c0(0.0, 0.0), c1(0.0, 0.0), c2(0.0, 0.0);
        for (std::size_t m = 0; m < n; ++m)
        {
            const double l = static_cast<double>(m) - static_cast<double>(n / 2);
            const cdouble t = std::conj(h[m]) * unit[i][m];
            c0 += t;
            c1 += l * t;
            c2 += l * l * t;
        }
        const double grads[2][3] = {{2.0 * c0.real(), 2.0 * c1.real(), 2.0 * c2.real()},
                                    {-2.0 * c0.imag(), -2.0 * c1.imag(), -2.0 * c2.imag()}};
        const Var comps[2] = {coeffs[i].re, coeffs[i].im};
        for (int r = 0; r < 2; ++r)
        {
            const double dP = grads[r][0], dS1 = grads[r][1], dS2 = grads[r][2];
            parents.push_back(comps[r]);
            dp.push_back(kp * dP);
            const double dvar = dS2 / p - s2 * dP / (p * p) - 2.0 * mean * (dS1 / p - s1 * dP / (p * p));
            dt.push_back(sd > 0.0 ? dvar / (2.0 * sd * ofdm.bandwidth) : 0.0);
        }
    }
    return {ad::custom(tape, p_db, parents, dp), ad::custom(tape, tau, parents, dt)};
}

} // namespace wedt
