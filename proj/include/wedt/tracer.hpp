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

#include "wedt/geometry.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace wedt
{

inline constexpr double kSpeedOfLight = 299792458.0; // [m/s]

enum class InteractionKind : std::uint8_t
{
    Reflection = 0,
    Scatter = 1
};

struct Interaction
{
    Vec3 point;
    int facet_id = -1;
    InteractionKind kind = InteractionKind::Reflection;
    Vec3 incident_dir; // propagation direction arriving at the point
    Vec3 outgoing_dir; // propagation direction leaving the point
    double cos_theta_i = 1.0;
    double cos_theta_o = 1.0;
};

/// Geometric skeleton of one propagation path. An empty interaction list is the LOS path.
struct PropagationPath
{
    std::vector<Interaction> interactions;
    std::vector<double> segment_lengths; // interactions.size() + 1 entries [m]
    double total_length = 0.0;           // [m]
    Vec3 departure_dir;                  // unit, leaving the Tx
    Vec3 arrival_dir;                    // unit, pointing from the Rx back along the incoming ray
    double phi_tx = 0.0, theta_tx = 0.0;
    double phi_rx = 0.0, theta_rx = 0.0;
    double delay = 0.0; // [s]

    std::size_t order() const { return interactions.size(); }
    bool is_los() const { return interactions.empty(); }
    bool has_scatter() const;

    /// Ordered (facet, kind) signature used for de-duplication.
    std::vector<std::int64_t> signature() const;
};

struct PathSet
{
    Vec3 tx, rx;
    std::vector<PropagationPath> paths;
};

struct TraceConfig
{
    int max_order = 2;
    bool enable_scatter = true;
};

/// Spherical angles of a unit direction: theta polar from +z in [0, pi], phi azimuth from +x in (-pi, pi].
void direction_angles(const Vec3 &dir, double &phi, double &theta);

/// Assembles a path through the given interaction points (no visibility checks).
PropagationPath make_path(const Vec3 &tx, const Vec3 &rx, std::vector<Interaction> interactions);

std::optional<PropagationPath> trace_los(const SceneGeometry &scene, const Vec3 &tx, const Vec3 &rx);

/// Image-method enumeration of pure specular paths with 1..max_order reflections.
std::vector<PropagationPath> trace_specular(const SceneGeometry &scene, const Vec3 &tx, const Vec3 &rx,
                                            int max_order);

/// Single-bounce diffuse paths through facet centroids.
std::vector<PropagationPath> trace_diffuse(const SceneGeometry &scene, const Vec3 &tx, const Vec3 &rx);

/// LOS + specular + diffuse, de-duplicated and sorted by delay.
PathSet trace_paths(const SceneGeometry &scene, const Vec3 &tx, const Vec3 &rx, const TraceConfig &config);

/// Number of trace_paths calls made by this process (instrumentation for cache tests).
std::uint64_t trace_paths_calls();

/// Path cache file: JSON list of path sets tagged with the scene content hash.
std::string save_pathsets(const std::vector<PathSet> &sets, std::uint64_t scene_hash);

/// Returns nullopt when the stored scene hash differs from `scene_hash` (stale cache).
std::optional<std::vector<PathSet>> load_pathsets(const std::string &text, std::uint64_t scene_hash);

} // namespace wedt
