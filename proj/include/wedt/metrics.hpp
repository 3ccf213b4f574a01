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

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

// Consistency metrics between predicted and reference channels.
namespace wedt
{

class MetricError : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

/// Regular grid of gains; cell (ix, iy) is centered at origin + (ix, iy) * spacing and stored at iy * nx + ix.
struct GainMap
{
    int nx = 0, ny = 0;
    double x0 = 0.0, y0 = 0.0; // center of cell (0, 0) [m]
    double spacing = 1.0;      // [m]
    std::vector<double> values; // [dB]
    std::vector<std::uint8_t> mask; // 1 = valid

    GainMap() = default;
    GainMap(int nx_, int ny_, double x0_, double y0_, double spacing_);

    std::size_t index(int ix, int iy) const { return static_cast<std::size_t>(iy) * nx + ix; }
    bool valid(int ix, int iy) const { return mask[index(ix, iy)] != 0; }
    void set(int ix, int iy, double v)
    {
        values[index(ix, iy)] = v;
        mask[index(ix, iy)] = 1;
    }
};

/// Mean absolute gain error [dB].
double male(std::span<const double> pred, std::span<const double> truth);

/// SSIM with a 7x7 uniform window over jointly min-max normalized maps, averaged over windows that lie
/// entirely on valid cells. Maps with zero joint range score 1 when equal and 0 otherwise.
double ssim(const GainMap &a, const GainMap &b);

struct McsResult
{
    double value = 0.0;
    int used = 0;
    int skipped = 0; // receivers with a zero-norm vector
};

/// Mean magnitude of the normalized conjugate inner product between predicted and reference CSI.
McsResult mcs(std::span<const Csi> pred, std::span<const Csi> truth);

struct RenderInfo
{
    double clip_min = -160.0, clip_max = -30.0; // [dB]
    double lo = 0.0, hi = 0.0;                  // displayed range after clipping
};

/// 8-bit binary PGM (north up, masked cells black). The clipped valid range maps linearly onto 0..255;
/// a constant map renders uniformly at 128.
std::string render_pgm(const GainMap &map, RenderInfo &info);

/// Rows ix,iy,x,y,p_db; masked cells carry an empty p_db.
std::string gain_map_to_csv(const GainMap &map);
GainMap gain_map_from_csv(const std::string &text);

/// Writes <prefix>.pgm, <prefix>.csv and the <prefix>.json sidecar. Throws std::runtime_error on I/O failure.
void render_gain_map(const GainMap &map, const std::string &prefix, double clip_min = -160.0,
                     double clip_max = -30.0);

struct MetricsReport
{
    double male_db = 0.0;
    double ssim = 0.0;
    double mcs = 0.0;
    int n_points = 0;
    int mcs_skipped = 0;
};

nlohmann::json metrics_to_json(const MetricsReport &report, const std::string &config_hash);

} // namespace wedt
