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


#include "wedt/scenes.hpp"

#include "wedt/emfield.hpp"

#include <stdexcept>

namespace wedt
{

namespace
{
struct Builder
{
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<int> categories;

    // Quad origin + s*u + t*v, s,t in [0,1]; normal follows u x v.
    void quad(const Vec3 &origin, const Vec3 &u, const Vec3 &v, int nu, int nv, int category)
    {
        for (int i = 0; i < nu; ++i)
            for (int j = 0; j < nv; ++j)
            {
                const Vec3 p00 = origin + u * (double(i) / nu) + v * (double(j) / nv);
                const Vec3 p10 = origin + u * (double(i + 1) / nu) + v * (double(j) / nv);
                const Vec3 p11 = origin + u * (double(i + 1) / nu) + v * (double(j + 1) / nv);
                const Vec3 p01 = origin + u * (double(i) / nu) + v * (double(j + 1) / nv);
                const int b = static_cast<int>(vertices.size());
                vertices.insert(vertices.end(), {p00, p10, p11, p01});
                triangles.push_back({b, b + 1, b + 2});
                triangles.push_back({b, b + 2, b + 3});
                categories.push_back(category);
                categories.push_back(category);
            }
    }
};

MaterialSpec spec_of(const EmProperties &p) { return {p.eps_r, p.sigma, p.s, p.k_chi}; }
} // namespace

SceneGeometry make_shoebox(double lx, double ly, double lz, const std::map<int, MaterialSpec> &truth, int subdiv)
{
    if (!(lx > 0 && ly > 0 && lz > 0) || subdiv < 1)
        throw std::invalid_argument("make_shoebox: invalid dimensions");
    Builder b;
    const int n = subdiv;
    // Inward normals: floor +z, ceiling -z, y=0 wall +y, y=ly wall -y, x=0 wall +x, x=lx wall -x.
    b.quad({0, 0, 0}, {lx, 0, 0}, {0, ly, 0}, n, n, kFloor);
    b.quad({0, 0, lz}, {0, ly, 0}, {lx, 0, 0}, n, n, kCeiling);
    b.quad({0, 0, 0}, {0, 0, lz}, {lx, 0, 0}, n, n, kLongWall);
    b.quad({0, ly, 0}, {lx, 0, 0}, {0, 0, lz}, n, n, kLongWall);
    b.quad({0, 0, 0}, {0, ly, 0}, {0, 0, lz}, n, n, kShortWall);
    b.quad({lx, 0, 0}, {0, 0, lz}, {0, ly, 0}, n, n, kShortWall);
    return SceneGeometry(std::move(b.vertices), b.triangles, b.categories,
                         {{kFloor, "floor"}, {kCeiling, "ceiling"}, {kLongWall, "long_wall"}, {kShortWall, "short_wall"}},
                         truth);
}

std::map<int, MaterialSpec> shoebox_truth(double fc_hz)
{
    return {{kFloor, spec_of(itu_material("concrete", fc_hz))},
            {kCeiling, spec_of(itu_material("concrete", fc_hz))},
            {kLongWall, spec_of(itu_material("metal", fc_hz))},
            {kShortWall, spec_of(itu_material("wood", fc_hz))}};
}

SceneGeometry make_split_wall(double width, double height, double depth, int tiles_y, int tiles_z,
                              const std::map<int, MaterialSpec> &truth)
{
    if (!(width > 0 && height > 0 && depth > 0) || tiles_y < 2 || tiles_y % 2 != 0 || tiles_z < 1)
        throw std::invalid_argument("make_split_wall: invalid dimensions");
    Builder b;
    const double half = width / 2.0;
    const int half_tiles = tiles_y / 2;
    // Wall faces +x (towards the open half-space).
    b.quad({0, 0, 0}, {0, half, 0}, {0, 0, height}, half_tiles, tiles_z, 0);
    b.quad({0, half, 0}, {0, half, 0}, {0, 0, height}, half_tiles, tiles_z, 1);
    b.quad({0, 0, 0}, {depth, 0, 0}, {0, width, 0}, 1, 1, 2);
    return SceneGeometry(std::move(b.vertices), b.triangles, b.categories,
                         {{0, "wall_a"}, {1, "wall_b"}, {2, "floor"}}, truth);
}

std::map<int, MaterialSpec> split_wall_truth(double fc_hz)
{
    return {{0, spec_of(itu_material("metal", fc_hz))},
            {1, spec_of(itu_material("wood", fc_hz))},
            {2, spec_of(itu_material("concrete", fc_hz))}};
}

SceneGeometry make_ground(double half_size)
{
    Builder b;
    b.quad({-half_size, -half_size, 0}, {2 * half_size, 0, 0}, {0, 2 * half_size, 0}, 1, 1, 0);
    return SceneGeometry(std::move(b.vertices), b.triangles, b.categories, {{0, "ground"}});
}

SceneGeometry make_named_scene(const std::string &name, double fc_hz)
{
    if (name == "shoebox")
        return make_shoebox(10.0, 6.0, 3.0, shoebox_truth(fc_hz));
    if (name == "split_wall")
        return make_split_wall(8.0, 3.0, 8.0, 8, 3, split_wall_truth(fc_hz));
    throw std::invalid_argument("unknown scene '" + name + "'");
}

} // namespace wedt
