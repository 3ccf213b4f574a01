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


#include "wedt/tracer.hpp"
#include "wedt/hash.hpp"

#include <algorithm>
#include <atomic>
#include <numbers>

#include <nlohmann/json.hpp>

namespace wedt
{

bool PropagationPath::has_scatter() const
{
    return std::any_of(interactions.begin(), interactions.end(),
                       [](const Interaction &i) { return i.kind == InteractionKind::Scatter; });
}

std::vector<std::int64_t> PropagationPath::signature() const
{
    std::vector<std::int64_t> sig;
    sig.reserve(interactions.size());
    for (const auto &i : interactions)
        sig.push_back(2 * static_cast<std::int64_t>(i.facet_id) + static_cast<std::int64_t>(i.kind));
    return sig;
}

void direction_angles(const Vec3 &dir, double &phi, double &theta)
{
    theta = std::acos(std::clamp(dir.z, -1.0, 1.0));
    phi = std::atan2(dir.y, dir.x);
    if (phi <= -std::numbers::pi)
        phi = std::numbers::pi;
}

PropagationPath make_path(const Vec3 &tx, const Vec3 &rx, std::vector<Interaction> interactions)
{
    PropagationPath path;
    path.interactions = std::move(interactions);

    Vec3 prev = tx;
    for (const auto &inter : path.interactions)
    {
        path.segment_lengths.push_back(distance(prev, inter.point));
        prev = inter.point;
    }
    path.segment_lengths.push_back(distance(prev, rx));

    path.total_length = 0.0;
    for (double s : path.segment_lengths)
        path.total_length += s;

    const Vec3 first = path.interactions.empty() ? rx : path.interactions.front().point;
    const Vec3 last = path.interactions.empty() ? tx : path.interactions.back().point;
    path.departure_dir = normalize(first - tx);
    path.arrival_dir = normalize(last - rx);
    direction_angles(path.departure_dir, path.phi_tx, path.theta_tx);
    direction_angles(path.arrival_dir, path.phi_rx, path.theta_rx);
    path.delay = path.total_length / kSpeedOfLight;
    return path;
}

std::optional<PropagationPath> trace_los(const SceneGeometry &scene, const Vec3 &tx, const Vec3 &rx)
{
    if (distance(tx, rx) <= 2.0 * kHitEpsilon || !is_visible(scene, tx, rx))
        return std::nullopt;
    return make_path(tx, rx, {});
}

namespace
{

// Lowest-id facet among `f` and its coplanar neighbours that contains p.
int owning_facet(const SceneGeometry &scene, int f, const Vec3 &p)
{
    int owner = f;
    for (int other : scene.coplanar(f))
        if (other < owner && point_in_facet(p, scene.facet(other)))
            owner = other;
    return owner;
}

bool same_plane(const SceneGeometry &scene, int a, int b)
{
    if (a == b)
        return true;
    const auto &cp = scene.coplanar(a);
    return std::find(cp.begin(), cp.end(), b) != cp.end();
}

class SpecularSearch
{
  public:
    SpecularSearch(const SceneGeometry &scene, const Vec3 &tx, const Vec3 &rx)
        : scene_(scene), tx_(tx), rx_(rx)
    {
    }

    std::vector<PropagationPath> run(int max_order)
    {
        seq_.clear();
        images_.assign(1, tx_);
        recurse(max_order);
        return std::move(out_);
    }

  private:
    void recurse(int remaining)
    {
        if (remaining == 0)
            return;
        for (const auto &f : scene_.facets())
        {
            if (!seq_.empty() && same_plane(scene_, seq_.back(), f.id))
                continue;
            const Vec3 image = mirror_point(images_.back(), f);
            seq_.push_back(f.id);
            images_.push_back(image);
            try_sequence();
            recurse(remaining - 1);
            images_.pop_back();
            seq_.pop_back();
        }
    }

    void try_sequence()
    {
        const std::size_t k = seq_.size();
        std::vector<Vec3> points(k);
        Vec3 target = rx_;
        for (std::size_t j = k; j-- > 0;)
        {
            const Facet &f = scene_.facet(seq_[j]);
            const Vec3 &img = images_[j + 1];
            const double a = dot(f.normal, img - f.v0);
            const double b = dot(f.normal, target - f.v0);
            if (!(a * b < 0.0) || std::abs(a) < 1e-12 || std::abs(b) < 1e-12)
                return;
            const double t = a / (a - b);
            const Vec3 q = img + (target - img) * t;
            if (!point_in_facet(q, f) || owning_facet(scene_, f.id, q) != f.id)
                return;
            points[j] = q;
            target = q;
        }

        // Real neighbours of each reflection point must sit strictly on the same side of its plane.
        for (std::size_t j = 0; j < k; ++j)
        {
            const Facet &f = scene_.facet(seq_[j]);
            const Vec3 &prev = j == 0 ? tx_ : points[j - 1];
            const Vec3 &next = j + 1 == k ? rx_ : points[j + 1];
            const double sp = dot(f.normal, prev - f.v0);
            const double sn = dot(f.normal, next - f.v0);
            if (!(sp * sn > 0.0) || std::abs(sp) < kHitEpsilon || std::abs(sn) < kHitEpsilon)
                return;
        }

        Vec3 prev = tx_;
        for (std::size_t j = 0; j <= k; ++j)
        {
            const Vec3 &next = j == k ? rx_ : points[j];
            if (distance(prev, next) <= 2.0 * kHitEpsilon || !is_visible(scene_, prev, next))
                return;
            prev = next;
        }

        std::vector<Interaction> inters(k);
        for (std::size_t j = 0; j < k; ++j)
        {
            const Facet &f = scene_.facet(seq_[j]);
            const Vec3 &p = j == 0 ? tx_ : points[j - 1];
            const Vec3 &n = j + 1 == k ? rx_ : points[j + 1];
            auto &in = inters[j];
            in.point = points[j];
            in.facet_id = f.id;
            in.kind = InteractionKind::Reflection;
            in.incident_dir = normalize(points[j] - p);
            in.outgoing_dir = normalize(n - points[j]);
            in.cos_theta_i = std::abs(dot(in.incident_dir, f.normal));
            in.cos_theta_o = std::abs(dot(in.outgoing_dir, f.normal));
        }
        out_.push_back(make_path(tx_, rx_, std::move(inters)));
    }

    const SceneGeometry &scene_;
    Vec3 tx_, rx_;
    std::vector<int> seq_;
    std::vector<Vec3> images_;
    std::vector<PropagationPath> out_;
};

} // namespace

std::vector<PropagationPath> trace_specular(const SceneGeometry &scene, const Vec3 &tx, const Vec3 &rx,
                                            int max_order)
{
    if (max_order < 1)
        return {};
    return SpecularSearch(scene, tx, rx).run(max_order);
}

std::vector<PropagationPath> trace_diffuse(const SceneGeometry &scene, const Vec3 &tx, const Vec3 &rx)
{
    std::vector<PropagationPath> out;
    for (const auto &f : scene.facets())
    {
        const Vec3 c = f.centroid();
        const Vec3 to_tx = tx - c;
        const Vec3 to_rx = rx - c;
        const double d_in = norm(to_tx);
        const double d_out = norm(to_rx);
        if (d_in <= 2.0 * kHitEpsilon || d_out <= 2.0 * kHitEpsilon)
            continue;
        const double cos_i = dot(f.normal, to_tx) / d_in;
        const double cos_o = dot(f.normal, to_rx) / d_out;
        if (!(cos_i > 0.0) || !(cos_o > 0.0))
            continue;
        if (!is_visible(scene, tx, c) || !is_visible(scene, c, rx))
            continue;

        Interaction in;
        in.point = c;
        in.facet_id = f.id;
        in.kind = InteractionKind::Scatter;
        in.incident_dir = -to_tx / d_in;
        in.outgoing_dir = to_rx / d_out;
        in.cos_theta_i = cos_i;
        in.cos_theta_o = cos_o;
        out.push_back(make_path(tx, rx, {in}));
    }
    return out;
}

namespace
{
std::atomic<std::uint64_t> g_trace_calls{0};
}

std::uint64_t trace_paths_calls() { return g_trace_calls.load(); }

PathSet trace_paths(const SceneGeometry &scene, const Vec3 &tx, const Vec3 &rx, const TraceConfig &config)
{
    ++g_trace_calls;
    PathSet set{tx, rx, {}};
    if (auto los = trace_los(scene, tx, rx))
        set.paths.push_back(std::move(*los));
    if (config.max_order >= 1)
        for (auto &p : trace_specular(scene, tx, rx, config.max_order))
            set.paths.push_back(std::move(p));
    if (config.enable_scatter)
        for (auto &p : trace_diffuse(scene, tx, rx))
            set.paths.push_back(std::move(p));

    // Stable sort keeps enumeration order among equal delays; duplicates are adjacent after sorting by signature.
    std::vector<std::size_t> order(set.paths.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return set.paths[a].signature() < set.paths[b].signature(); });
    std::vector<PropagationPath> unique;
    unique.reserve(order.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        if (i == 0 || set.paths[order[i]].signature() != set.paths[order[i - 1]].signature())
            unique.push_back(std::move(set.paths[order[i]]));
    std::stable_sort(unique.begin(), unique.end(), [](const PropagationPath &a, const PropagationPath &b) {
        if (a.delay != b.delay)
            return a.delay < b.delay;
        return a.signature() < b.signature();
    });
    set.paths = std::move(unique);
    return set;
}

namespace
{
nlohmann::json vec_json(const Vec3 &v) { return {v.x, v.y, v.z}; }
Vec3 json_vec(const nlohmann::json &j) { return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()}; }
} // namespace

std::string save_pathsets(const std::vector<PathSet> &sets, std::uint64_t scene_hash)
{
    nlohmann::ordered_json j;
    j["scene_hash"] = to_hex(scene_hash);
    auto &entries = j["entries"] = nlohmann::ordered_json::array();
    for (const auto &set : sets)
    {
        nlohmann::ordered_json e;
        e["tx"] = vec_json(set.tx);
        e["rx"] = vec_json(set.rx);
        auto &paths = e["paths"] = nlohmann::ordered_json::array();
        for (const auto &p : set.paths)
        {
            nlohmann::ordered_json pj = nlohmann::ordered_json::array();
            for (const auto &in : p.interactions)
                pj.push_back({{"facet", in.facet_id},
                              {"kind", in.kind == InteractionKind::Scatter ? "scatter" : "reflection"},
                              {"point", vec_json(in.point)},
                              {"in", vec_json(in.incident_dir)},
                              {"out", vec_json(in.outgoing_dir)},
                              {"cos_i", in.cos_theta_i},
                              {"cos_o", in.cos_theta_o}});
            paths.push_back(std::move(pj));
        }
        entries.push_back(std::move(e));
    }
    return j.dump();
}

std::optional<std::vector<PathSet>> load_pathsets(const std::string &text, std::uint64_t scene_hash)
{
    const auto j = nlohmann::json::parse(text);
    if (j.at("scene_hash").get<std::string>() != to_hex(scene_hash))
        return std::nullopt;
    std::vector<PathSet> sets;
    for (const auto &e : j.at("entries"))
    {
        PathSet set;
        set.tx = json_vec(e.at("tx"));
        set.rx = json_vec(e.at("rx"));
        for (const auto &pj : e.at("paths"))
        {
            std::vector<Interaction> inters;
            for (const auto &ij : pj)
            {
                Interaction in;
                in.facet_id = ij.at("facet").get<int>();
                in.kind = ij.at("kind").get<std::string>() == "scatter" ? InteractionKind::Scatter
                                                                         : InteractionKind::Reflection;
                in.point = json_vec(ij.at("point"));
                in.incident_dir = json_vec(ij.at("in"));
                in.outgoing_dir = json_vec(ij.at("out"));
                in.cos_theta_i = ij.at("cos_i").get<double>();
                in.cos_theta_o = ij.at("cos_o").get<double>();
                inters.push_back(in);
            }
            set.paths.push_back(make_path(set.tx, set.rx, std::move(inters)));
        }
        sets.push_back(std::move(set));
    }
    return sets;
}

} // namespace wedt
