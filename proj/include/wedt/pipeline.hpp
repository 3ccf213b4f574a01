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
#include "wedt/calib.hpp"
#include "wedt/channel.hpp"
#include "wedt/emfield.hpp"
#include "wedt/geometry.hpp"
#include "wedt/metrics.hpp"
#include "wedt/tracer.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

// Stage-level building blocks of the calibration workflow and their file formats.
namespace wedt
{

class PipelineError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

enum class SamplingMode
{
    Online,      // uniform random cells
    Offline,     // greedy farthest-point coverage
    Synchronous, // one random-walk track
};

SamplingMode sampling_mode_from_string(const std::string &s);
std::string to_string(SamplingMode mode);

struct SamplingConfig
{
    SamplingMode mode = SamplingMode::Online;
    int m = 30;
};

struct RunConfig
{
    std::string scene_path;        // scene JSON; takes precedence over scene_name
    std::string scene_name = "shoebox"; // generated scene when no path is given
    Vec3 tx{1.0, 1.0, 2.5};
    OfdmConfig ofdm;
    Antennas antennas;
    TraceConfig trace;
    SamplingConfig sampling;
    GridConfig grid;
    GprFitConfig gpr;
    TrainConfig train; // train.seed and train.trace are derived from the root seed and `trace`
    NetConfig net = {{64, 64}, 4, false, 8};
    std::uint64_t seed = 1;
    std::string output = "out";

    /// Throws PipelineError on inconsistent settings.
    void validate() const;
};

/// Missing keys keep their defaults; relative scene paths resolve against `base_dir`.
RunConfig config_from_json(const nlohmann::json &j, const std::string &base_dir = "");
nlohmann::json config_to_json(const RunConfig &config);
/// Hash of the canonical configuration; the output directory does not participate.
std::string config_hash(const RunConfig &config);

/// Scene named by the configuration.
SceneGeometry load_run_scene(const RunConfig &config);

/// Channels at a set of receiver positions for one transmitter.
struct ChannelDataset
{
    Vec3 tx;
    std::vector<int> cell; // grid cell index of each row
    std::vector<Vec3> r;
    std::vector<ChannelParams> params;
    std::vector<Csi> csi;

    std::size_t size() const { return r.size(); }
};

/// Simulates every cell of `points` that has at least one path and nonzero energy. `beta` [dB] scales the
/// field-based channels (gain bias).
ChannelDataset simulate_dataset(const SceneGeometry &scene, const Vec3 &tx, std::span<const Vec3> points,
                                const MaterialTable &table, const Antennas &antennas, const OfdmConfig &ofdm,
                                const TraceConfig &trace);
ChannelDataset simulate_dataset(const SceneGeometry &scene, const Vec3 &tx, std::span<const Vec3> points,
                                const EmFieldNet &net, double beta, const Antennas &antennas, const OfdmConfig &ofdm,
                                const TraceConfig &trace);

/// Picks `m` distinct rows of `points` (positions on a regular grid with the given spacing).
/// Throws PipelineError if m exceeds the number of points.
std::vector<std::size_t> sample_rows(std::span<const Vec3> points, const SamplingConfig &sampling,
                                     std::uint64_t seed, double spacing);

/// Neutral-initialized field for a scene.
EmFieldNet make_field(const SceneGeometry &scene, const RunConfig &config);

/// Traces the map entries and calibrates the field; the returned result holds the fitted net and bias.
TrainResult calibrate_field(const SceneGeometry &scene, const Vec3 &tx, std::span<const BcmEntry> entries,
                            const EmFieldNet &init, const RunConfig &config);

/// Gain map of a dataset on the configured receiver grid.
GainMap dataset_gain_map(const SceneGeometry &scene, const GridConfig &grid, const ChannelDataset &data);

/// Metrics of `pred` against `truth` on the cells of `truth` not listed in `exclude_cells`.
MetricsReport evaluate_datasets(const SceneGeometry &scene, const GridConfig &grid, const ChannelDataset &pred,
                                const ChannelDataset &truth, std::span<const int> exclude_cells = {});

/// Dataset CSV: a `# wedt-dataset` header carrying tx, lineage hash and subcarrier count, then one row per
/// receiver: cell,x,y,z,p_db,tau_s followed by re/im pairs of every subcarrier.
std::string dataset_to_csv(const ChannelDataset &data, const std::string &config_hash, bool with_csi = true);
ChannelDataset dataset_from_csv(const std::string &text, std::string *config_hash = nullptr);

// File-based stages; every stage reads and writes under config.output and updates manifest.json there.
struct StageOptions
{
    std::optional<Vec3> tx;           // simulate-truth / predict: override the transmitter
    bool neutral = false;             // predict: use the uncalibrated field
    std::string name;                 // output stem (stage default when empty)
    std::string truth = "truth";      // evaluate: reference dataset stem
    std::string prediction = "predict"; // evaluate / export-map: dataset stem
};

void stage_gen_scene(const RunConfig &config, const std::string &name);
void stage_simulate_truth(const RunConfig &config, const StageOptions &opts = {});
void stage_sample(const RunConfig &config);
void stage_build_bcm(const RunConfig &config);
void stage_calibrate(const RunConfig &config);
void stage_predict(const RunConfig &config, const StageOptions &opts = {});
void stage_evaluate(const RunConfig &config, const StageOptions &opts = {});
void stage_export_map(const RunConfig &config, const StageOptions &opts = {});

} // namespace wedt
