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

#include "wedt/channel.hpp"
#include "wedt/emfield.hpp"
#include "wedt/geometry.hpp"
#include "wedt/tracer.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

// Bayesian channel map: geometric features, physical trend, GP residuals.
namespace wedt
{

inline constexpr int kFeatureDim = 9;
inline constexpr double kTauFloor = 0.1e-9;   // [s]
inline constexpr double kKappaPFloor = 0.25;  // [dB^2]
inline constexpr double kKappaTauFloor = 1.0; // [ns^2]

/// A position-labelled channel measurement.
struct MeasurementSample
{
    Vec3 r;
    Csi csi;
    ChannelParams params;
};

/// [x, y, z, los, log(1 + paths), mean order, max order, fade std (dB), dominance (dB)]
struct FusedFeature
{
    std::array<double, kFeatureDim> v{};
    bool reachable = true;
};

/// Everything needed to simulate the neutral probe channel on the geometric twin.
struct FeatureContext
{
    TraceConfig trace;
    OfdmConfig ofdm;
    Antennas antennas;
    MaterialTable probe = MaterialTable::uniform(EmProperties{});
};

FusedFeature features_from_paths(const SceneGeometry &scene, const PathSet &paths, const FeatureContext &ctx);
FusedFeature extract_features(const SceneGeometry &scene, const Vec3 &tx, const Vec3 &r, const FeatureContext &ctx);

struct PhysicalModel
{
    double g0 = 0.0;  // [dB]
    double n0 = 2.0;  // path-loss exponent
    double a0 = 1e-9; // [s]
    double b0 = 0.0;

    double gain(double d) const { return g0 - 10.0 * n0 * std::log10(d); }
    double spread(double d) const { return a0 * std::pow(d, b0); }
};

/// Least-squares trend fits on LOS samples (all samples when fewer than 4 are LOS).
/// `distances` are Tx-Rx distances [m], `los` the LOS indicator per sample.
PhysicalModel fit_physical(std::span<const ChannelParams> params, std::span<const double> distances,
                           std::span<const bool> los);

struct GprHyper
{
    std::vector<double> length; // per-dimension length scales
    double sf2 = 1.0;           // signal variance
    double sn2 = 1e-2;          // noise variance
};

/// Matern-3/2 ARD covariance without the noise term.
double matern_ard(std::span<const double> a, std::span<const double> b, const GprHyper &hyper);

/// Per-dimension standardization; constant dimensions keep std = 1.
struct FeatureNorm
{
    std::vector<double> mean, std;

    static FeatureNorm fit(const std::vector<std::vector<double>> &rows);
    std::vector<double> apply(std::span<const double> row) const;
};

class GprError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

struct GprModel
{
    GprHyper hyper;
    FeatureNorm norm;
    Eigen::MatrixXd x; // normalized inputs, one row per sample
    Eigen::VectorXd y;
    Eigen::MatrixXd chol; // lower factor of K_f + (sn2 + jitter) I
    Eigen::VectorXd alpha;
    double jitter = 0.0;
    double lml = 0.0;
};

struct GprFitConfig
{
    int restarts = 5;
    int steps = 200;
    double learning_rate = 0.05;
};

/// Log marginal likelihood and its gradient w.r.t. (log l_1..D, log sf2, log sn2) on normalized inputs.
double log_marginal_likelihood(const Eigen::MatrixXd &x, const Eigen::VectorXd &y, const GprHyper &hyper,
                               Eigen::VectorXd *grad = nullptr);

/// Conditions a GP with fixed hyperparameters on raw (unnormalized) features.
GprModel condition_gpr(const std::vector<std::vector<double>> &features, std::span<const double> targets,
                       const GprHyper &hyper, const FeatureNorm &norm);

/// Type-II maximum likelihood fit: seeded log-uniform restarts plus one data-driven start, Adam in log space.
GprModel fit_gpr(const std::vector<std::vector<double>> &features, std::span<const double> targets,
                 std::uint64_t seed, const GprFitConfig &config = {});

struct GprPrediction
{
    double mean = 0.0;
    double variance = 0.0;
};

GprPrediction gpr_predict(const GprModel &model, std::span<const double> feature);

struct BcmEntry
{
    Vec3 r;
    double p_hat = 0.0;     // [dB]
    double tau_hat = 0.0;   // [s]
    double kappa_p = 0.0;   // [dB^2]
    double kappa_tau = 0.0; // [s^2]
};

struct GridConfig
{
    double spacing = 0.25;  // [m]
    double height = 1.2;    // [m]
    double clearance = 0.05; // [m]
};

/// Cell-centered receiver grid over the scene footprint at fixed height, dropping points near facets.
std::vector<Vec3> make_grid(const SceneGeometry &scene, const GridConfig &grid);

struct BcmModel
{
    PhysicalModel physical;
    GprModel gp_p, gp_tau; // tau residuals in ns
    std::uint64_t seed = 0;
    int n_samples = 0;
    int n_los = 0;
};

struct BcmResult
{
    std::vector<BcmEntry> entries;
    BcmModel model;
    std::vector<Vec3> unreachable;
};

/// Builds the map over `targets`. Samples are canonically ordered first, so the result does not depend
/// on the order of `samples`.
BcmResult build_bcm(const SceneGeometry &scene, const Vec3 &tx, std::span<const MeasurementSample> samples,
                    std::span<const Vec3> targets, const FeatureContext &ctx, std::uint64_t seed,
                    const GprFitConfig &fit = {});

std::string bcm_to_csv(std::span<const BcmEntry> entries);
std::vector<BcmEntry> bcm_from_csv(const std::string &text);
nlohmann::json bcm_model_to_json(const BcmModel &model);

} // namespace wedt
