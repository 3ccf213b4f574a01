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

#include "wedt/geometry.hpp"
#include "wedt/scenes.hpp"

#include <random>

using namespace wedt;

namespace
{
SceneGeometry unit_floor()
{
    return SceneGeometry({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}}, {{0, 1, 2}, {0, 2, 3}}, {0, 0});
}

SceneGeometry wall_x(double x)
{
    return SceneGeometry({{x, -5, -5}, {x, 5, -5}, {x, 5, 5}, {x, -5, 5}}, {{0, 1, 2}, {0, 2, 3}}, {1, 1});
}
} // namespace

TEST_CASE("load_scene: unit square floor")
{
    const auto scene = load_scene(R"({"vertices": [[0,0,0],[1,0,0],[1,1,0],[0,1,0]],
        "facets": [{"v": [0,1,2], "category": 0}, {"v": [0,2,3], "category": 0}],
        "category_names": {"0": "floor"}})");
    REQUIRE(scene.size() == 2);
    CHECK(scene.bounds().min == Vec3{0, 0, 0});
    CHECK(scene.bounds().max == Vec3{1, 1, 0});
    for (const auto &f : scene.facets())
    {
        CHECK(f.normal.z == doctest::Approx(1.0));
        CHECK(f.patch_area == doctest::Approx(0.5));
    }
    CHECK(scene.category_names().at(0) == "floor");
}

TEST_CASE("load_scene: malformed input")
{
    CHECK_THROWS_AS(load_scene(R"({"vertices": [[0,0,0],[1,0,0],[0,1,0]], "facets": [{"v": [0,1,99], "category": 0}],
        "category_names": {}})"),
                    SceneError);
    CHECK_THROWS_AS(load_scene(R"({"vertices": [[0,0,0],[1,0,0],[2,0,0]], "facets": [{"v": [0,1,2], "category": 0}],
        "category_names": {}})"),
                    SceneError);
    CHECK_THROWS_AS(load_scene("{not json"), SceneError);
}

TEST_CASE("shoebox room extents")
{
    const auto room = make_shoebox(10, 6, 3);
    CHECK(room.size() == 12);
    const Vec3 ext = room.bounds().extent();
    CHECK(ext.x == doctest::Approx(10));
    CHECK(ext.y == doctest::Approx(6));
    CHECK(ext.z == doctest::Approx(3));
    // Inward normals: every facet normal points towards the room center.
    const Vec3 c = room.bounds().center();
    for (const auto &f : room.facets())
        CHECK(dot(f.normal, c - f.centroid()) > 0.0);
}

TEST_CASE("intersect_ray basics")
{
    const auto floor = unit_floor();
    SUBCASE("axis aligned hit")
    {
        const auto hit = intersect_ray(floor, {0.25, 0.5, 1}, {0, 0, -1}, 0.0, 10.0);
        REQUIRE(hit);
        CHECK(hit->distance == doctest::Approx(1.0));
        CHECK(hit->point.z == doctest::Approx(0.0));
    }
    SUBCASE("parallel ray misses")
    {
        CHECK_FALSE(intersect_ray(floor, {0, 0, 1}, {1, 0, 0}, 0.0, 10.0));
    }
    SUBCASE("shared edge resolves to the lowest id")
    {
        // The diagonal (0,0)-(1,1) is shared by both triangles.
        const auto hit = intersect_ray(floor, {0.5, 0.5, 1}, {0, 0, -1}, 0.0, 10.0);
        REQUIRE(hit);
        CHECK(hit->facet_id == 0);
    }
    SUBCASE("ray through a shared vertex")
    {
        const auto hit = intersect_ray(floor, {0, 0, 1}, {0, 0, -1}, 0.0, 10.0);
        REQUIRE(hit);
        CHECK(hit->point == Vec3{0, 0, 0});
        CHECK(hit->distance == doctest::Approx(1.0));
    }
}

TEST_CASE("is_visible")
{
    const SceneGeometry empty;
    CHECK(is_visible(empty, {0, 0, 0}, {1, 2, 3}));
    const auto wall = wall_x(0.0);
    CHECK_FALSE(is_visible(wall, {-1, 0, 0}, {1, 0, 0}));
    // Endpoint lying on the hosting facet.
    CHECK(is_visible(wall, {0, 0.3, 0.2}, {2, 0.3, 0.2}));
}

TEST_CASE("mirror_point")
{
    const auto floor = unit_floor();
    CHECK(mirror_point({0, 0, 1}, floor.facet(0)) == Vec3{0, 0, -1});
    CHECK(mirror_point({0.3, 0.2, 0}, floor.facet(0)) == Vec3{0.3, 0.2, 0});
    const auto m = mirror_point({1, 2, 3}, wall_x(2.0).facet(0));
    CHECK(m.x == doctest::Approx(3.0));
    CHECK(m.y == doctest::Approx(2.0));
    CHECK(m.z == doctest::Approx(3.0));
}

TEST_CASE("geometry properties on random inputs")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    const auto room = make_shoebox(4, 3, 2.5, {}, 2);
    for (int trial = 0; trial < 200; ++trial)
    {
        const Vec3 p{u(rng), u(rng), u(rng)};
        const Facet &f = room.facet(trial % static_cast<int>(room.size()));
        const Vec3 back = mirror_point(mirror_point(p, f), f);
        CHECK(distance(back, p) < 1e-9);

        const Vec3 a{0.2 + std::abs(u(rng)), 0.2 + std::abs(u(rng)) / 2, 0.1 + std::abs(u(rng)) / 2};
        const Vec3 b{u(rng), u(rng), u(rng)};
        if (distance(a, b) > 1e-3)
            CHECK(is_visible(room, a, b) == is_visible(room, b, a));

        const Vec3 dir = normalize(Vec3{u(rng), u(rng), u(rng)});
        if (const auto hit = intersect_ray(room, {2, 1.5, 1.2}, dir, 0.0, 100.0))
            CHECK(std::abs(hit->distance - distance(hit->point, Vec3{2, 1.5, 1.2})) < 1e-7);
    }
}

TEST_CASE("scene round trip")
{
    const auto room = make_shoebox(10, 6, 3, shoebox_truth(3.5e9));
    const auto again = load_scene(save_scene(room));
    REQUIRE(again.size() == room.size());
    for (std::size_t i = 0; i < room.vertices().size(); ++i)
        CHECK(distance(room.vertices()[i], again.vertices()[i]) < 1e-9);
    CHECK(again.content_hash() == room.content_hash());
    CHECK(again.truth_materials().size() == room.truth_materials().size());
    CHECK(again.truth_materials().at(kLongWall).sigma == room.truth_materials().at(kLongWall).sigma);
}

TEST_CASE("point_facet_distance")
{
    const SceneGeometry floor({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}}, {{0, 1, 2}, {0, 2, 3}}, {0, 0});
    const Facet &f = floor.facet(0); // (0,0,0), (1,0,0), (1,1,0)
    CHECK(point_facet_distance({0.7, 0.2, 0.5}, f) == doctest::Approx(0.5));
    CHECK(point_facet_distance({2, 0, 0}, f) == doctest::Approx(1.0));
    CHECK(point_facet_distance({0, 1, 0}, f) == doctest::Approx(std::sqrt(0.5)));
    CHECK(point_facet_distance({2, 2, 1}, f) == doctest::Approx(std::sqrt(3.0)));
}
