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


#include "wedt/geometry.hpp"
#include "wedt/hash.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace wedt
{

SceneGeometry::SceneGeometry(std::vector<Vec3> vertices, const std::vector<std::array<int, 3>> &triangles,
                             const std::vector<int> &categories, std::map<int, std::string> category_names,
                             std::map<int, MaterialSpec> truth_materials)
    : vertices_(std::move(vertices)), triangles_(triangles), category_names_(std::move(category_names)),
      truth_materials_(std::move(truth_materials))
{
    if (!categories.empty() && categories.size() != triangles.size())
        throw SceneError("category list length does not match facet count");

    const auto n_vert = static_cast<int>(vertices_.size());
    for (const auto &v : vertices_)
        if (!is_finite(v))
            throw SceneError("non-finite vertex coordinate");

    facets_.reserve(triangles.size());
    for (std::size_t i = 0; i < triangles.size(); ++i)
    {
        const auto &tri = triangles[i];
        for (int k : tri)
            if (k < 0 || k >= n_vert)
                throw SceneError("facet " + std::to_string(i) + " references vertex index " + std::to_string(k) +
                                 " of " + std::to_string(n_vert));

        Facet f;
        f.id = static_cast<int>(i);
        f.v0 = vertices_[static_cast<std::size_t>(tri[0])];
        f.v1 = vertices_[static_cast<std::size_t>(tri[1])];
        f.v2 = vertices_[static_cast<std::size_t>(tri[2])];
        const Vec3 n = cross(f.v1 - f.v0, f.v2 - f.v0);
        f.patch_area = 0.5 * norm(n);
        if (!(f.patch_area >= kMinFacetArea))
            throw SceneError("degenerate facet " + std::to_string(i));
        f.normal = normalize(n);
        f.category = categories.empty() ? -1 : categories[i];
        facets_.push_back(f);
    }

    if (!vertices_.empty())
    {
        bounds_.min = bounds_.max = vertices_.front();
        for (const auto &v : vertices_)
            for (int a = 0; a < 3; ++a)
            {
                bounds_.min[a] = std::min(bounds_.min[a], v[a]);
                bounds_.max[a] = std::max(bounds_.max[a], v[a]);
            }
    }

    coplanar_.resize(facets_.size());
    for (std::size_t i = 0; i < facets_.size(); ++i)
        for (std::size_t j = 0; j < facets_.size(); ++j)
        {
            if (i == j)
                continue;
            const auto &a = facets_[i];
            const auto &b = facets_[j];
            if (std::abs(std::abs(dot(a.normal, b.normal)) - 1.0) < 1e-12 && std::abs(dot(a.normal, b.v0 - a.v0)) < 1e-9)
                coplanar_[i].push_back(static_cast<int>(j));
        }
}

std::uint64_t SceneGeometry::content_hash() const
{
    Hasher h;
    h.u64(vertices_.size());
    for (const auto &v : vertices_)
        h.f64(v.x).f64(v.y).f64(v.z);
    h.u64(facets_.size());
    for (std::size_t i = 0; i < facets_.size(); ++i)
        h.i64(triangles_[i][0]).i64(triangles_[i][1]).i64(triangles_[i][2]).i64(facets_[i].category);
    for (const auto &[k, name] : category_names_)
        h.i64(k).str(name);
    for (const auto &[k, m] : truth_materials_)
        h.i64(k).f64(m.eps_r).f64(m.sigma).f64(m.s).f64(m.k_chi);
    return h.digest();
}

SceneGeometry load_scene(std::string_view text)
{
    nlohmann::json j;
    try
    {
        j = nlohmann::json::parse(text);
    }
    catch (const nlohmann::json::parse_error &e)
    {
        throw SceneError(std::string("scene parse failure: ") + e.what());
    }

    try
    {
        std::vector<Vec3> vertices;
        for (const auto &v : j.at("vertices"))
        {
            if (v.size() != 3)
                throw SceneError("vertex must have three coordinates");
            vertices.push_back({v[0].get<double>(), v[1].get<double>(), v[2].get<double>()});
        }

        std::vector<std::array<int, 3>> triangles;
        std::vector<int> categories;
        for (const auto &f : j.at("facets"))
        {
            const auto &idx = f.at("v");
            if (idx.size() != 3)
                throw SceneError("facet must reference three vertices");
            triangles.push_back({idx[0].get<int>(), idx[1].get<int>(), idx[2].get<int>()});
            categories.push_back(f.value("category", -1));
        }

        std::map<int, std::string> names;
        if (j.contains("category_names"))
            for (const auto &[k, v] : j.at("category_names").items())
                names[std::stoi(k)] = v.get<std::string>();

        std::map<int, MaterialSpec> truth;
        if (j.contains("truth_materials"))
            for (const auto &[k, v] : j.at("truth_materials").items())
                truth[std::stoi(k)] = {v.at("eps_r").get<double>(), v.at("sigma").get<double>(), v.at("s").get<double>(),
                                       v.at("k_chi").get<double>()};

        return SceneGeometry(std::move(vertices), triangles, categories, std::move(names), std::move(truth));
    }
    catch (const nlohmann::json::exception &e)
    {
        throw SceneError(std::string("scene schema error: ") + e.what());
    }
}

SceneGeometry load_scene_file(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw SceneError("cannot open scene file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_scene(ss.str());
}

std::string save_scene(const SceneGeometry &scene)
{
    nlohmann::ordered_json j;
    j["vertices"] = nlohmann::json::array();
    for (const auto &v : scene.vertices())
        j["vertices"].push_back({v.x, v.y, v.z});
    j["facets"] = nlohmann::json::array();
    for (const auto &f : scene.facets())
    {
        const auto &t = scene.triangles()[static_cast<std::size_t>(f.id)];
        j["facets"].push_back({{"v", {t[0], t[1], t[2]}}, {"category", f.category}});
    }
    j["category_names"] = nlohmann::json::object();
    for (const auto &[k, name] : scene.category_names())
        j["category_names"][std::to_string(k)] = name;
    if (!scene.truth_materials().empty())
    {
        j["truth_materials"] = nlohmann::json::object();
        for (const auto &[k, m] : scene.truth_materials())
            j["truth_materials"][std::to_string(k)] = {{"eps_r", m.eps_r}, {"sigma", m.sigma}, {"s", m.s}, {"k_chi", m.k_chi}};
    }
    return j.dump(1);
}

namespace
{
// Moller-Trumbore; returns ray parameter or NaN.
double ray_triangle(const Vec3 &origin, const Vec3 &dir, const Facet &f)
{
    constexpr double bary_tol = 1e-12;
    const Vec3 e1 = f.v1 - f.v0;
    const Vec3 e2 = f.v2 - f.v0;
    const Vec3 pvec = cross(dir, e2);
    const double det = dot(e1, pvec);
    if (std::abs(det) < 1e-15)
        return std::numeric_limits<double>::quiet_NaN();
    const double inv = 1.0 / det;
    const Vec3 tvec = origin - f.v0;
    const double u = dot(tvec, pvec) * inv;
    if (u < -bary_tol || u > 1.0 + bary_tol)
        return std::numeric_limits<double>::quiet_NaN();
    const Vec3 qvec = cross(tvec, e1);
    const double v = dot(dir, qvec) * inv;
    if (v < -bary_tol || u + v > 1.0 + bary_tol)
        return std::numeric_limits<double>::quiet_NaN();
    return dot(e2, qvec) * inv;
}
} // namespace

std::optional<Hit> intersect_ray(const SceneGeometry &scene, const Vec3 &origin, const Vec3 &dir, double t_min,
                                 double t_max)
{
    std::optional<Hit> best;
    double best_t = t_max;
    for (const auto &f : scene.facets())
    {
        const double t = ray_triangle(origin, dir, f);
        if (!(t > t_min && t < t_max))
            continue;
        // A later facet must be strictly nearer to displace an earlier (lower id) hit.
        if (!best || t < best_t - 1e-12)
        {
            best_t = t;
            best = Hit{f.id, origin + dir * t, t};
        }
    }
    return best;
}

bool is_visible(const SceneGeometry &scene, const Vec3 &p, const Vec3 &q)
{
    const Vec3 d = q - p;
    const double len = norm(d);
    if (len <= 2.0 * kHitEpsilon)
        return true;
    return !intersect_ray(scene, p, d / len, kHitEpsilon, len - kHitEpsilon).has_value();
}

Vec3 mirror_point(const Vec3 &p, const Facet &facet)
{
    const double offset = dot(facet.normal, p - facet.v0);
    return p - facet.normal * (2.0 * offset);
}

bool point_in_facet(const Vec3 &p, const Facet &facet, double tol)
{
    const Vec3 e1 = facet.v1 - facet.v0;
    const Vec3 e2 = facet.v2 - facet.v0;
    const Vec3 w = p - facet.v0;
    const double d11 = dot(e1, e1), d12 = dot(e1, e2), d22 = dot(e2, e2);
    const double w1 = dot(w, e1), w2 = dot(w, e2);
    const double den = d11 * d22 - d12 * d12;
    const double u = (d22 * w1 - d12 * w2) / den;
    const double v = (d11 * w2 - d12 * w1) / den;
    return u >= -tol && v >= -tol && u + v <= 1.0 + tol;
}

namespace
{
double point_segment_distance(const Vec3 &p, const Vec3 &a, const Vec3 &b)
{
    const Vec3 ab = b - a;
    const double t = std::clamp(dot(p - a, ab) / dot(ab, ab), 0.0, 1.0);
    return distance(p, a + ab * t);
}
} // namespace

double point_facet_distance(const Vec3 &p, const Facet &facet)
{
    const double h = dot(p - facet.v0, facet.normal);
    const Vec3 foot = p - facet.normal * h;
    if (point_in_facet(foot, facet, 0.0))
        return std::abs(h);
    return std::min({point_segment_distance(p, facet.v0, facet.v1), point_segment_distance(p, facet.v1, facet.v2),
                     point_segment_distance(p, facet.v2, facet.v0)});
}

} // namespace wedt
