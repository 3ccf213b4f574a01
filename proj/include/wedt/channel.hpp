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


#pragma once

#include "wedt/diffgraph.hpp"
#include "wedt/emfield.hpp"
#include "wedt/geometry.hpp"
#include "wedt/tracer.hpp"

#include <array>
#include <complex>
#include <optional>
#include <span>
#include <vector>

namespace wedt
{

using cdouble = std::complex<double>;

inline constexpr double kVacuumPermittivity = 8.8541878128e-12; // [F/m]

struct OfdmConfig
{
    double fc = 3.5e9;        // carrier [Hz]
    double bandwidth = 200e6; // W [Hz]
    int subcarriers = 256;    // N

    double spacing() const { return bandwidth / subcarriers; }
    /// Frequency of subcarrier n in [-N/2, N/2).
    double frequency(int n) const { return fc + n * spacing(); }
    /// Throws std::invalid_argument unless fc > W/2 > 0 and N is a power of two >= 8.
    void validate() const;
};

/// Directional antenna with a slanted linear polarization.
struct AntennaPattern
{
    double phi_3db = 2.0 * 3.14159265358979323846; // [rad]
    double theta_3db = 17.0 * 3.14159265358979323846 / 180.0;
    double g_max = 8.0; // [dBi]
    double a_max = 30.0; // [dB]
    double slant = 0.0;  // zeta [rad]

    static AntennaPattern isotropic(double slant = 0.0) { return {1.0, 1.0, 0.0, 0.0, slant}; }
};

struct Antennas
{
    AntennaPattern tx, rx;
};

/// Frequency response, index i holds subcarrier n = i - N/2.
struct Csi
{
    std::vector<cdouble> h;
};

struct ChannelParams
{
    double p = 0.0;   // [dB]
    double tau = 0.0; // RMS delay spread [s]
};

/// Orthonormal transverse pair (e0, e1) attached to a propagation direction.
using Basis = std::array<Vec3, 2>;
using Mat2 = std::array<std::array<double, 2>, 2>;

struct CMat2
{
    ad::CVar m[2][2];
};

double antenna_gain(const AntennaPattern &pattern, double phi, double theta);
std::array<double, 2> antenna_response(const AntennaPattern &pattern, double phi, double theta);

/// Spherical unit vectors (theta_hat, phi_hat) at (phi, theta).
Basis antenna_basis(double phi, double theta);

/// (TE, TM) axes for a ray travelling along `dir` at a facet: TE = normalize(dir x n), TM = TE x dir.
/// At normal incidence the TE axis is taken from the facet's first edge.
Basis incidence_basis(const Vec3 &dir, const Facet &facet);

/// T[i][j] = dot(next_i, prev_j).
Mat2 basis_transform(const Basis &prev, const Basis &next);

std::pair<ad::CVar, ad::CVar> fresnel_coeffs(const EmVars &props, double fc, double cos_theta_i);
std::pair<cdouble, cdouble> fresnel_coeffs(const EmProperties &props, double fc, double cos_theta_i);

/// Local interaction operator in the (incident basis -> outgoing basis) frame. Scatter matrices carry
/// the Lambertian amplitude but not the 1/d_out spreading, which path_coefficient applies.
CMat2 interaction_matrix(const Interaction &inter, const Facet &facet, const EmVars &props, double fc);

/// Complex path coefficient without delay phase. `props` holds one entry per interaction.
ad::CVar path_coefficient(const SceneGeometry &scene, const PropagationPath &path, std::span<const EmVars> props,
                          const Antennas &antennas, double fc);
cdouble path_coefficient(const SceneGeometry &scene, const PropagationPath &path,
                         std::span<const EmProperties> props, const Antennas &antennas, double fc);

/// Properties at each interaction of a path from a static table or a field network.
std::vector<EmProperties> interaction_props(const SceneGeometry &scene, const PropagationPath &path,
                                            const MaterialTable &table);
std::vector<EmProperties> interaction_props(const SceneGeometry &scene, const PropagationPath &path,
                                            const EmFieldNet &net);

Csi compute_csi(std::span<const cdouble> coeffs, std::span<const double> delays, const OfdmConfig &ofdm);
std::vector<ad::CVar> compute_csi(std::span<const ad::CVar> coeffs, std::span<const double> delays,
                                  const OfdmConfig &ofdm);

/// Channel of a traced path set under a static table or a field network.
Csi simulate_csi(const SceneGeometry &scene, const PathSet &paths, const MaterialTable &table,
                 const Antennas &antennas, const OfdmConfig &ofdm);
Csi simulate_csi(const SceneGeometry &scene, const PathSet &paths, const EmFieldNet &net, const Antennas &antennas,
                 const OfdmConfig &ofdm);

/// Unitary centered IDFT; output index m holds tap l = m - N/2.
std::vector<cdouble> csi_to_cir(const Csi &csi);
/// Direct O(N^2) taped transform.
std::vector<ad::CVar> csi_to_cir(std::span<const ad::CVar> csi);

/// Gain and RMS delay spread; nullopt for zero-energy input.
std::optional<ChannelParams> extract_params(const Csi &csi, const OfdmConfig &ofdm);
std::optional<ChannelParams> params_from_cir(std::span<const cdouble> cir, double bandwidth);

struct TapedParams
{
    ad::Var p;   // [dB]
    ad::Var tau; // [s]
};

/// Taped parameters from taped CIR taps (reference route).
TapedParams params_from_cir(std::span<const ad::CVar> cir, double bandwidth);

/// Fused node: p and tau of the channel sum_i a_i exp(-j 2 pi f_n tau_i) with analytic partials
/// with respect to the real and imaginary parts of every a_i. Throws ad::DomainError on zero energy.
TapedParams channel_params(ad::Tape &tape, std::span<const ad::CVar> coeffs, std::span<const double> delays,
                           const OfdmConfig &ofdm);

/// Per-path CIR of a unit coefficient at the given delay.
std::vector<cdouble> unit_path_cir(double delay, const OfdmConfig &ofdm);

} // namespace wedt
