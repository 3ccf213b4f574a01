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

#include <map>
#include <string>

// Procedural synthetic scenes with attached ground-truth materials.
namespace wedt
{

/// Category labels of the shoebox room.
enum ShoeboxCategory : int
{
    kFloor = 0,
    kCeiling = 1,
    kLongWall = 2,  // y = 0 and y = ly
    kShortWall = 3, // x = 0 and x = lx
};

/// Closed axis-aligned room [0,lx] x [0,ly] x [0,lz] with inward normals. Each face is split into
/// subdiv x subdiv quads of two triangles (subdiv = 1 gives 12 facets).
SceneGeometry make_shoebox(double lx, double ly, double lz, const std::map<int, MaterialSpec> &truth = {},
                           int subdiv = 1);

/// Hidden truth used by the demo room: concrete floor/ceiling, metal long walls, wood short walls.
std::map<int, MaterialSpec> shoebox_truth(double fc_hz);

/// Vertical wall in the plane x = 0 spanning y in [0, width], z in [0, height], tiled into unit-ish patches,
/// over an open floor of depth `depth`. Patches with y < width/2 carry category 0, the rest category 1;
/// the floor is category 2.
SceneGeometry make_split_wall(double width, double height, double depth, int tiles_y, int tiles_z,
                              const std::map<int, MaterialSpec> &truth = {});

/// Truth for the split wall: metal left half, wood right half, concrete floor.
std::map<int, MaterialSpec> split_wall_truth(double fc_hz);

/// Single horizontal ground square centered at the origin in the plane z = 0 (category 0).
SceneGeometry make_ground(double half_size);

/// Generates a named scene ("shoebox", "split_wall") with its truth table.
SceneGeometry make_named_scene(const std::string &name, double fc_hz);

} // namespace wedt
