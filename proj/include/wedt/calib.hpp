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

#include "wedt/bcm.hpp"
#include "wedt/channel.hpp"
#include "wedt/diffgraph.hpp"
#include "wedt/emfield.hpp"
#include "wedt/geometry.hpp"
#include "wedt/tracer.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

// Calibration of the EM property field against a channel map.
namespace wedt
{

struct TrainConfig
{
    int batch_size = 32;
    double learning_rate = 1e-3;
    int iterations = 1000;
    double ema = 0.9;    // lambda of the bias moving average
    double eta_p = 1.0;  // loss weight of the gain term
    double eta_tau = 1.0; // loss weight of the delay-spread term (ns units)
    double kappa_p_floor = kKappaPFloor;     // [dB^2]
    double kappa_tau_floor = kKappaTauFloor; // [ns^2]
    std::uint64_t seed = 0;
    TraceConfig trace;

    /// Throws std::invalid_argument on B < 1, lambda outside [0, 1), negative weights or floors.
    void validate() const;
};

/// Global gain offset [dB] between the simulated and the mapped channel.
struct BiasState
{
    double beta = 0.0;
};

/// Traced paths of every trainable map entry for one fixed transmitter.
struct PathCache
{
    Vec3 tx;
    std::vector<std::size_t> entry; // index into the BCM entry list
    std::vector<PathSet> paths;     // one per retained entry
    std::vector<std::size_t> excluded; // entries without any path

    std::size_t size() const { return paths.size(); }
    std::uint64_t hash() const;
};

PathCache precompute_cache(const SceneGeometry &scene, const Vec3 &tx, std::span<const BcmEntry> entries,
                           const TraceConfig &trace);

/// One supervised term: simulated parameters on the tape and the mapped target.
struct LossInput
{
    ad::Var p;      // simulated gain [dB]
    ad::Var tau_ns; // simulated delay spread [ns]
    const BcmEntry *target = nullptr;
};

/// Uncertainty-weighted Gaussian negative log-likelihood averaged over the batch. `beta` enters as a constant.
ad::Var nll_loss(std::span<const LossInput> batch, double beta, const TrainConfig &config);

/// Batch least-squares gain offset: mean of (p_hat - p_sim).
double estimate_bias(std::span<const double> p_hat, std::span<const double> p_sim);

/// beta_t = lambda beta_{t-1} + (1 - lambda) beta_hat.
BiasState update_bias(const BiasState &state, double beta_hat, double lambda);

struct AdamState
{
    std::vector<double> m, v;
    std::int64_t step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

/// In-place bias-corrected Adam update; state vectors are sized on first use.
void adam_step(std::span<double> weights, std::span<const double> grads, AdamState &state, double lr);

class TrainError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Everything the per-iteration channel chain needs.
struct CalibrationProblem
{
    const SceneGeometry *scene = nullptr;
    const PathCache *cache = nullptr;
    std::span<const BcmEntry> entries;
    Antennas antennas;
    OfdmConfig ofdm;
};

struct BatchResult
{
    double loss = 0.0;
    double beta_hat = 0.0;
    BiasState bias;             // state used inside the loss
    std::vector<double> p_sim;  // [dB], per batch row
    std::vector<double> tau_sim; // [s]
    std::vector<double> grad;   // d loss / d params
};

struct BatchOptions
{
    bool with_grad = true;
    bool update_bias = true; // false: use `bias` as given (gradient checks)
};

/// Forward and backward pass over cache rows `rows`: estimates the bias, applies the moving average to `bias`,
/// then evaluates the loss with the updated offset. Throws TrainError on a non-finite loss.
BatchResult evaluate_batch(const CalibrationProblem &problem, const EmFieldNet &net, std::span<const std::size_t> rows,
                           const BiasState &bias, const TrainConfig &config, const BatchOptions &options = {});

struct IterationLog
{
    int iteration = 0;
    double loss = 0.0;
    double beta = 0.0;
    double beta_hat = 0.0;
    double wall_ms = 0.0;
};

struct TrainResult
{
    EmFieldNet net;
    BiasState bias;
    AdamState adam;
    std::vector<IterationLog> history;
};

/// Mini-batch calibration with per-epoch reshuffling.
TrainResult train(const CalibrationProblem &problem, EmFieldNet net, const TrainConfig &config);

/// CSV with columns iteration,loss,beta,wall_ms.
std::string training_log_csv(std::span<const IterationLog> history);

/// Network, optimizer state, bias and seed. Wall-clock data is excluded so checkpoints are reproducible.
nlohmann::json checkpoint_to_json(const TrainResult &result, const TrainConfig &config);
TrainResult checkpoint_from_json(const nlohmann::json &j);

} // namespace wedt
