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

#include "wedt/scenes.hpp"
#include "wedt/tracer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

using namespace wedt;

namespace
{
double angle_between(const Vec3 &a, const Vec3 &b) { return std::acos(std::clamp(dot(a, b), -1.0, 1.0)); }

SceneGeometry blocking_wall()
{
    return SceneGeometry({{0, -5, -5}, {0, 5, -5}, {0, 5, 5}, {0, -5, 5}}, {{0, 1, 2}, {0, 2, 3}}, {0, 0});
}
} // namespace

TEST_CASE("trace_los")
{
    const SceneGeometry empty;
    SUBCASE("delay of one microsecond")
    {
        const auto p = trace_los(empty, {0, 0, 0}, {299.792458, 0, 0});
        REQUIRE(p);
        CHECK(p->delay == doctest::Approx(1e-6).epsilon(1e-14));
        CHECK(p->segment_lengths.size() == 1);
    }
    SUBCASE("blocked pair")
    {
        CHECK_FALSE(trace_los(blocking_wall(), {-1, 0, 0}, {1, 0, 0}));
    }
    SUBCASE("angles of a horizontal link")
    {
        const auto p = trace_los(empty, {0, 0, 1.5}, {10, 0, 1.5});
        REQUIRE(p);
        CHECK(p->theta_tx == doctest::Approx(std::numbers::pi / 2));
        CHECK(p->theta_rx == doctest::Approx(std::numbers::pi / 2));
        CHECK(p->phi_tx == doctest::Approx(0.0));
        CHECK(p->phi_rx == doctest::Approx(std::numbers::pi));
    }
}

TEST_CASE("trace_specular: two-ray ground geometry")
{
    const auto ground = make_ground(200.0);
    const Vec3 tx{-50, 0, 10}, rx{50, 0, 2};
    const auto paths = trace_specular(ground, tx, rx, 1);
    REQUIRE(paths.size() == 1);
    CHECK(paths[0].total_length == doctest::Approx(std::sqrt(100.0 * 100.0 + 12.0 * 12.0)).epsilon(1e-12));
    CHECK(paths[0].interactions[0].point.z == doctest::Approx(0.0));
    // The bounce sits where the heights split the horizontal distance 10:2.
    CHECK(paths[0].interactions[0].point.x == doctest::Approx(-50.0 + 100.0 * 10.0 / 12.0));
}

TEST_CASE("trace_specular: shoebox first order")
{
    const auto room = make_shoebox(10, 6, 3);
    const auto paths = trace_specular(room, {2, 2, 2}, {7, 4, 1.2}, 1);
    CHECK(paths.size() == 6);
    std::set<int> planes;
    for (const auto &p : paths)
    {
        REQUIRE(p.order() == 1);
        const auto &in = p.interactions[0];
        const Vec3 n = room.facet(in.facet_id).normal;
        CHECK(std::abs(angle_between(-in.incident_dir, n) - angle_between(in.outgoing_dir, n)) < 1e-9);
        const Vec3 mirrored = in.incident_dir - n * (2.0 * dot(in.incident_dir, n));
        CHECK(distance(mirrored, in.outgoing_dir) < 1e-9);
        planes.insert(static_cast<int>(std::lround(n.x * 4 + n.y * 2 + n.z)));
    }
    CHECK(planes.size() == 6);
}

TEST_CASE("trace_specular: no reflective route")
{
    CHECK(trace_specular(blocking_wall(), {-1, 0, 0}, {1, 0, 0}, 2).empty());
}

TEST_CASE("trace_diffuse")
{
    const auto ground = make_ground(5.0);
    SUBCASE("single floor facet below the pair")
    {
        // make_ground produces two triangles; only check that each front-facing facet yields one path.
        const auto paths = trace_diffuse(ground, {-1, 0, 1}, {1, 0, 1});
        CHECK(paths.size() == ground.size());
        for (const auto &p : paths)
        {
            CHECK(p.order() == 1);
            CHECK(p.interactions[0].kind == InteractionKind::Scatter);
            CHECK(distance(p.interactions[0].point, ground.facet(p.interactions[0].facet_id).centroid()) < 1e-12);
        }
    }
    SUBCASE("receiver behind the facet")
    {
        CHECK(trace_diffuse(ground, {-1, 0, 1}, {1, 0, -1}).empty());
    }
    SUBCASE("shoebox interior pair sees all 12 facets")
    {
        const auto room = make_shoebox(10, 6, 3);
        CHECK(trace_diffuse(room, {2, 2, 2}, {7, 4, 1.2}).size() == 12);
    }
}

TEST_CASE("trace_paths")
{
    SUBCASE("empty scene is LOS only")
    {
        const auto set = trace_paths(SceneGeometry{}, {0, 0, 0}, {3, 4, 0}, {});
        REQUIRE(set.paths.size() == 1);
        CHECK(set.paths[0].is_los());
    }
    SUBCASE("two-ray with scatter disabled")
    {
        const auto set = trace_paths(make_ground(200.0), {-50, 0, 10}, {50, 0, 2}, {1, false});
        REQUIRE(set.paths.size() == 2);
        CHECK(set.paths[0].is_los());
        CHECK(set.paths[0].total_length == doctest::Approx(std::sqrt(100.0 * 100.0 + 8.0 * 8.0)));
    }
    SUBCASE("deterministic")
    {
        const auto room = make_shoebox(10, 6, 3);
        const auto a = save_pathsets({trace_paths(room, {2, 2, 2}, {7, 4, 1.2}, {})}, room.content_hash());
        const auto b = save_pathsets({trace_paths(room, {2, 2, 2}, {7, 4, 1.2}, {})}, room.content_hash());
        CHECK(a == b);
    }
}

TEST_CASE("tracer invariants in a subdivided room")
{
    const auto room = make_shoebox(6, 5, 3, {}, 2);
    const Vec3 tx{1.2, 1.1, 2.0};
    const Vec3 rxs[] = {{4.5, 3.7, 1.2}, {0.6, 4.2, 1.0}, {5.1, 0.8, 1.5}};
    for (const auto &rx : rxs)
    {
        const auto k1 = trace_paths(room, tx, rx, {1, true});
        const auto k2 = trace_paths(room, tx, rx, {2, true});
        REQUIRE(!k2.paths.empty());
        CHECK(k2.paths.front().is_los());

        std::set<std::vector<std::int64_t>> sigs2;
        for (const auto &p : k2.paths)
        {
            CHECK(p.delay > 0.0);
            CHECK(p.delay >= k2.paths.front().delay);
            CHECK(sigs2.insert(p.signature()).second);
            double sum = 0.0;
            for (double s : p.segment_lengths)
                sum += s;
            CHECK(sum == doctest::Approx(p.total_length).epsilon(1e-12));
            CHECK(p.delay == doctest::Approx(p.total_length / kSpeedOfLight).epsilon(1e-14));
            int scatters = 0;
            Vec3 prev = tx;
            for (const auto &in : p.interactions)
            {
                scatters += in.kind == InteractionKind::Scatter;
                const Facet &f = room.facet(in.facet_id);
                CHECK(std::abs(dot(in.point - f.v0, f.normal)) < 1e-6);
                CHECK(is_visible(room, prev, in.point));
                CHECK(in.cos_theta_i > 0.0);
                CHECK(in.cos_theta_i <= 1.0);
                if (in.kind == InteractionKind::Reflection)
                {
                    const Vec3 mirrored = in.incident_dir - f.normal * (2.0 * dot(in.incident_dir, f.normal));
                    CHECK(distance(mirrored, in.outgoing_dir) < 1e-9);
                }
                prev = in.point;
            }
            CHECK(is_visible(room, prev, rx));
            CHECK(scatters <= 1);
        }
        for (const auto &p : k1.paths)
            CHECK(sigs2.count(p.signature()) == 1);
    }
}

TEST_CASE("path cache round trip and invalidation")
{
    const auto room = make_shoebox(10, 6, 3);
    const std::vector<PathSet> sets = {trace_paths(room, {2, 2, 2}, {7, 4, 1.2}, {}),
                                       trace_paths(room, {2, 2, 2}, {3, 5, 1.2}, {})};
    const auto text = save_pathsets(sets, room.content_hash());
    const auto loaded = load_pathsets(text, room.content_hash());
    REQUIRE(loaded);
    REQUIRE(loaded->size() == 2);
    CHECK(save_pathsets(*loaded, room.content_hash()) == text);
    CHECK_FALSE(load_pathsets(text, room.content_hash() ^ 1U));
}
