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

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wedt
{

/// Self-intersection guard for meter-scale scenes [m].
inline constexpr double kHitEpsilon = 1e-6;

/// Smallest admissible triangle area [m^2].
inline constexpr double kMinFacetArea = 1e-9;

struct Vec3
{
    double x = 0.0, y = 0.0, z = 0.0;

    constexpr Vec3 operator+(const Vec3 &o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3 &o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    constexpr bool operator==(const Vec3 &) const = default;

    double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
    double &operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }
};

inline constexpr Vec3 operator*(double s, const Vec3 &v) { return v * s; }
inline constexpr double dot(const Vec3 &a, const Vec3 &b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline constexpr Vec3 cross(const Vec3 &a, const Vec3 &b)
{
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3 &v) { return std::sqrt(dot(v, v)); }
inline double distance(const Vec3 &a, const Vec3 &b) { return norm(a - b); }
inline Vec3 normalize(const Vec3 &v) { return v / norm(v); }
inline bool is_finite(const Vec3 &v) { return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z); }

/// Triangle facet. Normal follows the counter-clockwise winding of (v0, v1, v2).
struct Facet
{
    int id = 0;
    Vec3 v0, v1, v2;
    Vec3 normal;
    int category = -1; // -1 = unlabeled
    double patch_area = 0.0;

    Vec3 centroid() const { return (v0 + v1 + v2) / 3.0; }
};

/// Reference EM properties attached to a category in the scene file. Only
/// used to synthesize ground truth.
struct MaterialSpec
{
    double eps_r = 1.0, sigma = 0.0, s = 0.0, k_chi = 0.0;
};

struct Bounds
{
    Vec3 min, max;

    Vec3 center() const { return (min + max) * 0.5; }
    Vec3 extent() const { return max - min; }
    bool contains(const Vec3 &p, double tol = 0.0) const
    {
        return p.x >= min.x - tol && p.y >= min.y - tol && p.z >= min.z - tol &&
               p.x <= max.x + tol && p.y <= max.y + tol && p.z <= max.z + tol;
    }
};

struct Hit
{
    int facet_id = -1;
    Vec3 point;
    double distance = 0.0;
};

class SceneError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Immutable triangle scene (the geometric twin).
class SceneGeometry
{
  public:
    SceneGeometry() = default;

    /// Builds facets from an indexed triangle list. Throws SceneError on
    /// degenerate triangles or bad indices.
    SceneGeometry(std::vector<Vec3> vertices, const std::vector<std::array<int, 3>> &triangles,
                  const std::vector<int> &categories, std::map<int, std::string> category_names = {},
                  std::map<int, MaterialSpec> truth_materials = {});

    const std::vector<Facet> &facets() const { return facets_; }
    const Facet &facet(int id) const { return facets_.at(static_cast<std::size_t>(id)); }
    std::size_t size() const { return facets_.size(); }
    const Bounds &bounds() const { return bounds_; }
    const std::vector<Vec3> &vertices() const { return vertices_; }
    const std::vector<std::array<int, 3>> &triangles() const { return triangles_; }
    const std::map<int, std::string> &category_names() const { return category_names_; }
    const std::map<int, MaterialSpec> &truth_materials() const { return truth_materials_; }

    /// Ids of facets lying in the same plane as `id` (excluding itself).
    const std::vector<int> &coplanar(int id) const { return coplanar_.at(static_cast<std::size_t>(id)); }

    /// 64-bit content hash over vertices, triangles and labels.
    std::uint64_t content_hash() const;

  private:
    std::vector<Vec3> vertices_;
    std::vector<std::array<int, 3>> triangles_;
    std::vector<Facet> facets_;
    std::vector<std::vector<int>> coplanar_;
    Bounds bounds_;
    std::map<int, std::string> category_names_;
    std::map<int, MaterialSpec> truth_materials_;
};

/// Parses the scene JSON format (vertices, facets, category_names, optional truth_materials).
SceneGeometry load_scene(std::string_view text);
SceneGeometry load_scene_file(const std::string &path);

/// Serializes back to the scene JSON format.
std::string save_scene(const SceneGeometry &scene);

/// Nearest facet hit with distance in (t_min, t_max). Ties go to the lowest facet id.
std::optional<Hit> intersect_ray(const SceneGeometry &scene, const Vec3 &origin, const Vec3 &dir, double t_min,
                                 double t_max);

/// Line-of-sight test between two points; endpoints lying on facets do not block.
bool is_visible(const SceneGeometry &scene, const Vec3 &p, const Vec3 &q);

/// Reflection of p across the supporting plane of the facet.
Vec3 mirror_point(const Vec3 &p, const Facet &facet);

/// True if p (assumed on the facet plane) lies inside the triangle, edges included.
bool point_in_facet(const Vec3 &p, const Facet &facet, double tol = 1e-9);

/// Euclidean distance from p to the closed triangle.
double point_facet_distance(const Vec3 &p, const Facet &facet);

} // namespace wedt
