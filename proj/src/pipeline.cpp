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


#include "wedt/pipeline.hpp"
#include "wedt/hash.hpp"
#include "wedt/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace wedt
{

namespace
{
constexpr double kDeg = std::numbers::pi / 180.0;

nlohmann::json antenna_to_json(const AntennaPattern &a)
{
    return {{"phi_3db_deg", a.phi_3db / kDeg},
            {"theta_3db_deg", a.theta_3db / kDeg},
            {"g_max_dbi", a.g_max},
            {"a_max_db", a.a_max},
            {"slant_deg", a.slant / kDeg}};
}

AntennaPattern antenna_from_json(const nlohmann::json &j, AntennaPattern a)
{
    a.phi_3db = j.value("phi_3db_deg", a.phi_3db / kDeg) * kDeg;
    a.theta_3db = j.value("theta_3db_deg", a.theta_3db / kDeg) * kDeg;
    a.g_max = j.value("g_max_dbi", a.g_max);
    a.a_max = j.value("a_max_db", a.a_max);
    a.slant = j.value("slant_deg", a.slant / kDeg) * kDeg;
    return a;
}

Vec3 vec_from_json(const nlohmann::json &j)
{
    if (!j.is_array() || j.size() != 3)
        throw PipelineError("expected a 3-element position array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::string read_file(const fs::path &path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw PipelineError("missing input '" + path.string() + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const fs::path &path, const std::string &data)
{
    fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw PipelineError("cannot write '" + path.string() + "'");
    f << data;
    if (!f)
        throw PipelineError("write failed for '" + path.string() + "'");
}

std::string fmt_vec(const Vec3 &v)
{
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", v.x, v.y, v.z);
    return buf;
}

} // namespace

SamplingMode sampling_mode_from_string(const std::string &s)
{
    if (s == "online")
        return SamplingMode::Online;
    if (s == "offline")
        return SamplingMode::Offline;
    if (s == "synchronous")
        return SamplingMode::Synchronous;
    throw PipelineError("unknown sampling mode '" + s + "' (expected online, offline or synchronous)");
}

std::string to_string(SamplingMode mode)
{
    switch (mode)
    {
    case SamplingMode::Online:
        return "online";
    case SamplingMode::Offline:
        return "offline";
    case SamplingMode::Synchronous:
        return "synchronous";
    }
    return "online";
}

void RunConfig::validate() const
{
    if (sampling.m < 2)
        throw PipelineError("sampling.m must be >= 2");
    if (scene_path.empty() && scene_name.empty())
        throw PipelineError("config names no scene");
    if (!scene_path.empty() && !fs::exists(scene_path))
        throw PipelineError("scene file '" + scene_path + "' does not exist");
    try
    {
        ofdm.validate();
        train.validate();
    }
    catch (const std::invalid_argument &e)
    {
        throw PipelineError(e.what());
    }
    if (net.hidden.empty())
        throw PipelineError("net.hidden must list at least one layer");
}

RunConfig config_from_json(const nlohmann::json &j, const std::string &base_dir)
{
    RunConfig c;
    try
    {
        if (j.contains("scene"))
        {
            const auto &s = j.at("scene");
            c.scene_path = s.value("path", std::string());
            c.scene_name = s.value("name", c.scene_name);
            if (!c.scene_path.empty() && !base_dir.empty() && fs::path(c.scene_path).is_relative())
                c.scene_path = (fs::path(base_dir) / c.scene_path).lexically_normal().string();
        }
        if (j.contains("tx"))
            c.tx = vec_from_json(j.at("tx"));
        if (j.contains("ofdm"))
        {
            const auto &o = j.at("ofdm");
            c.ofdm.fc = o.value("fc", c.ofdm.fc);
            c.ofdm.bandwidth = o.value("bandwidth", c.ofdm.bandwidth);
            c.ofdm.subcarriers = o.value("subcarriers", c.ofdm.subcarriers);
        }
        if (j.contains("antennas"))
        {
            const auto &a = j.at("antennas");
            if (a.contains("tx"))
                c.antennas.tx = antenna_from_json(a.at("tx"), c.antennas.tx);
            if (a.contains("rx"))
                c.antennas.rx = antenna_from_json(a.at("rx"), c.antennas.rx);
        }
        if (j.contains("trace"))
        {
            c.trace.max_order = j.at("trace").value("max_order", c.trace.max_order);
            c.trace.enable_scatter = j.at("trace").value("enable_scatter", c.trace.enable_scatter);
        }
        if (j.contains("sampling"))
        {
            const auto &s = j.at("sampling");
            c.sampling.mode = sampling_mode_from_string(s.value("mode", to_string(c.sampling.mode)));
            c.sampling.m = s.value("m", c.sampling.m);
        }
        if (j.contains("grid"))
        {
            const auto &g = j.at("grid");
            c.grid.spacing = g.value("spacing", c.grid.spacing);
            c.grid.height = g.value("height", c.grid.height);
            c.grid.clearance = g.value("clearance", c.grid.clearance);
        }
        if (j.contains("gpr"))
        {
            const auto &g = j.at("gpr");
            c.gpr.restarts = g.value("restarts", c.gpr.restarts);
            c.gpr.steps = g.value("steps", c.gpr.steps);
            c.gpr.learning_rate = g.value("learning_rate", c.gpr.learning_rate);
        }
        if (j.contains("train"))
        {
            const auto &t = j.at("train");
            c.train.batch_size = t.value("batch_size", c.train.batch_size);
            c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
            c.train.iterations = t.value("iterations", c.train.iterations);
            c.train.ema = t.value("ema", c.train.ema);
            c.train.eta_p = t.value("eta_p", c.train.eta_p);
            c.train.eta_tau = t.value("eta_tau", c.train.eta_tau);
            c.train.kappa_p_floor = t.value("kappa_p_floor", c.train.kappa_p_floor);
            c.train.kappa_tau_floor = t.value("kappa_tau_floor", c.train.kappa_tau_floor);
        }
        if (j.contains("net"))
        {
            const auto &n = j.at("net");
            c.net.hidden = n.value("hidden", c.net.hidden);
            c.net.num_freqs = n.value("num_freqs", c.net.num_freqs);
            c.net.use_categories = n.value("use_categories", c.net.use_categories);
            c.net.embed_dim = n.value("embed_dim", c.net.embed_dim);
        }
        c.seed = j.value("seed", c.seed);
        c.output = j.value("output", c.output);
        if (!base_dir.empty() && fs::path(c.output).is_relative() && j.contains("output"))
            c.output = (fs::path(base_dir) / c.output).lexically_normal().string();
    }
    catch (const nlohmann::json::exception &e)
    {
        throw PipelineError(std::string("malformed config: ") + e.what());
    }
    return c;
}

nlohmann::json config_to_json(const RunConfig &c)
{
    return {{"scene", {{"path", c.scene_path}, {"name", c.scene_name}}},
            {"tx", {c.tx.x, c.tx.y, c.tx.z}},
            {"ofdm", {{"fc", c.ofdm.fc}, {"bandwidth", c.ofdm.bandwidth}, {"subcarriers", c.ofdm.subcarriers}}},
            {"antennas", {{"tx", antenna_to_json(c.antennas.tx)}, {"rx", antenna_to_json(c.antennas.rx)}}},
            {"trace", {{"max_order", c.trace.max_order}, {"enable_scatter", c.trace.enable_scatter}}},
            {"sampling", {{"mode", to_string(c.sampling.mode)}, {"m", c.sampling.m}}},
            {"grid", {{"spacing", c.grid.spacing}, {"height", c.grid.height}, {"clearance", c.grid.clearance}}},
            {"gpr", {{"restarts", c.gpr.restarts}, {"steps", c.gpr.steps}, {"learning_rate", c.gpr.learning_rate}}},
            {"train",
             {{"batch_size", c.train.batch_size},
              {"learning_rate", c.train.learning_rate},
              {"iterations", c.train.iterations},
              {"ema", c.train.ema},
              {"eta_p", c.train.eta_p},
              {"eta_tau", c.train.eta_tau},
              {"kappa_p_floor", c.train.kappa_p_floor},
              {"kappa_tau_floor", c.train.kappa_tau_floor}}},
            {"net",
             {{"hidden", c.net.hidden},
              {"num_freqs", c.net.num_freqs},
              {"use_categories", c.net.use_categories},
              {"embed_dim", c.net.embed_dim}}},
            {"seed", c.seed},
            {"output", c.output}};
}

std::string config_hash(const RunConfig &config)
{
    nlohmann::json j = config_to_json(config);
    j.erase("output");
    return to_hex(fnv1a(j.dump()));
}

SceneGeometry load_run_scene(const RunConfig &config)
{
    try
    {
        if (!config.scene_path.empty())
            return load_scene_file(config.scene_path);
        return make_named_scene(config.scene_name, config.ofdm.fc);
    }
    catch (const std::exception &e)
    {
        throw PipelineError(std::string("cannot load scene: ") + e.what());
    }
}

namespace
{
template <typename Simulate>
ChannelDataset simulate_impl(const SceneGeometry &scene, const Vec3 &tx, std::span<const Vec3> points,
                             const OfdmConfig &ofdm, const TraceConfig &trace, Simulate &&simulate)
{
    ChannelDataset out;
    out.tx = tx;
    for (std::size_t i = 0; i < points.size(); ++i)
    {
        const PathSet ps = trace_paths(scene, tx, points[i], trace);
        if (ps.paths.empty())
            continue;
        Csi csi = simulate(ps);
        const auto prm = extract_params(csi, ofdm);
        if (!prm)
            continue;
        out.cell.push_back(static_cast<int>(i));
        out.r.push_back(points[i]);
        out.params.push_back(*prm);
        out.csi.push_back(std::move(csi));
    }
    return out;
}
} // namespace

ChannelDataset simulate_dataset(const SceneGeometry &scene, const Vec3 &tx, std::span<const Vec3> points,
                                const MaterialTable &table, const Antennas &antennas, const OfdmConfig &ofdm,
                                const TraceConfig &trace)
{
    return simulate_impl(scene, tx, points, ofdm, trace,
                         [&](const PathSet &ps) { return simulate_csi(scene, ps, table, antennas, ofdm); });
}

ChannelDataset simulate_dataset(const SceneGeometry &scene, const Vec3 &tx, std::span<const Vec3> points,
                                const EmFieldNet &net, double beta, const Antennas &antennas, const OfdmConfig &ofdm,
                                const TraceConfig &trace)
{
    const double scale = std::pow(10.0, beta / 20.0);
    return simulate_impl(scene, tx, points, ofdm, trace, [&](const PathSet &ps) {
        Csi csi = simulate_csi(scene, ps, net, antennas, ofdm);
        if (beta != 0.0)
            for (auto &h : csi.h)
                h *= scale;
        return csi;
    });
}

std::vector<std::size_t> sample_rows(std::span<const Vec3> points, const SamplingConfig &sampling,
                                     std::uint64_t seed, double spacing)
{
    const std::size_t n = points.size();
    const auto m = static_cast<std::size_t>(std::max(sampling.m, 0));
    if (m > n)
        throw PipelineError("requested " + std::to_string(m) + " samples but only " + std::to_string(n) +
                            " reachable cells exist");
    std::vector<std::size_t> out;
    if (m == 0)
        return out;
    std::mt19937_64 rng(seed);

    switch (sampling.mode)
    {
    case SamplingMode::Online: {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i)
            idx[i] = i;
        std::shuffle(idx.begin(), idx.end(), rng);
        out.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m));
        break;
    }
    case SamplingMode::Offline: {
        // The cell nearest the centroid only anchors the sweep: the first sample is the cell farthest from it,
        // then each step adds the cell with the largest distance to the chosen set (ties: lowest index).
        Vec3 centroid{0, 0, 0};
        for (const auto &p : points)
            centroid = centroid + p;
        centroid = centroid / static_cast<double>(n);
        auto argmax = [&](const std::vector<double> &score) {
            std::size_t best = 0;
            for (std::size_t i = 1; i < n; ++i)
                if (score[i] > score[best])
                    best = i;
            return best;
        };
        std::vector<double> d(n);
        for (std::size_t i = 0; i < n; ++i)
            d[i] = -distance(points[i], centroid);
        const std::size_t anchor = argmax(d);
        for (std::size_t i = 0; i < n; ++i)
            d[i] = distance(points[i], points[anchor]);
        std::vector<double> mind(n, INFINITY);
        std::size_t next = argmax(d);
        while (out.size() < m)
        {
            out.push_back(next);
            for (std::size_t i = 0; i < n; ++i)
                mind[i] = std::min(mind[i], distance(points[i], points[next]));
            next = argmax(mind);
        }
        break;
    }
    case SamplingMode::Synchronous: {
        // Random walk over 4-neighbour grid cells; the track records each cell the first time it is entered.
        if (!(spacing > 0.0))
            throw PipelineError("synchronous sampling needs a positive grid spacing");
        Vec3 lo = points[0];
        for (const auto &p : points)
        {
            lo.x = std::min(lo.x, p.x);
            lo.y = std::min(lo.y, p.y);
        }
        std::map<std::pair<long, long>, std::size_t> at;
        std::vector<std::pair<long, long>> key(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            key[i] = {std::lround((points[i].x - lo.x) / spacing), std::lround((points[i].y - lo.y) / spacing)};
            at.emplace(key[i], i);
        }
        std::vector<char> seen(n, 0);
        std::size_t cur = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        seen[cur] = 1;
        out.push_back(cur);
        const long steps_max = 1000L * static_cast<long>(n) + 1000L;
        for (long step = 0; out.size() < m; ++step)
        {
            if (step > steps_max)
                throw PipelineError("synchronous track could not reach " + std::to_string(m) + " distinct cells");
            std::vector<std::size_t> fresh, all;
            for (const auto &[dx, dy] : {std::pair{1L, 0L}, {-1L, 0L}, {0L, 1L}, {0L, -1L}})
            {
                const auto it = at.find({key[cur].first + dx, key[cur].second + dy});
                if (it == at.end())
                    continue;
                all.push_back(it->second);
                if (!seen[it->second])
                    fresh.push_back(it->second);
            }
            if (all.empty())
                throw PipelineError("synchronous track started on an isolated cell");
            const auto &pool = fresh.empty() ? all : fresh;
            cur = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
            if (!seen[cur])
            {
                seen[cur] = 1;
                out.push_back(cur);
            }
        }
        break;
    }
    }
    return out;
}

EmFieldNet make_field(const SceneGeometry &scene, const RunConfig &config)
{
    std::vector<int> labels;
    if (config.net.use_categories)
    {
        std::set<int> cats;
        for (const auto &f : scene.facets())
            cats.insert(f.category);
        labels.assign(cats.begin(), cats.end());
    }
    return init_net(split_seed(config.seed, "net_init"), config.net, FourierEncoder(config.net.num_freqs, scene.bounds()),
                    labels);
}

TrainResult calibrate_field(const SceneGeometry &scene, const Vec3 &tx, std::span<const BcmEntry> entries,
                            const EmFieldNet &init, const RunConfig &config)
{
    const PathCache cache = precompute_cache(scene, tx, entries, config.trace);
    const CalibrationProblem problem{&scene, &cache, entries, config.antennas, config.ofdm};
    TrainConfig t = config.train;
    t.seed = split_seed(config.seed, "train");
    t.trace = config.trace;
    return train(problem, init, t);
}

GainMap dataset_gain_map(const SceneGeometry &scene, const GridConfig &grid, const ChannelDataset &data)
{
    const Bounds &b = scene.bounds();
    const int nx = std::max(1, static_cast<int>(std::floor((b.max.x - b.min.x) / grid.spacing + 1e-9)));
    const int ny = std::max(1, static_cast<int>(std::floor((b.max.y - b.min.y) / grid.spacing + 1e-9)));
    GainMap map(nx, ny, b.min.x + 0.5 * grid.spacing, b.min.y + 0.5 * grid.spacing, grid.spacing);
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        const long ix = std::lround((data.r[i].x - map.x0) / grid.spacing);
        const long iy = std::lround((data.r[i].y - map.y0) / grid.spacing);
        if (ix >= 0 && iy >= 0 && ix < nx && iy < ny)
            map.set(static_cast<int>(ix), static_cast<int>(iy), data.params[i].p);
    }
    return map;
}

MetricsReport evaluate_datasets(const SceneGeometry &scene, const GridConfig &grid, const ChannelDataset &pred,
                                const ChannelDataset &truth, std::span<const int> exclude_cells)
{
    std::map<int, std::size_t> pred_row;
    for (std::size_t i = 0; i < pred.size(); ++i)
        pred_row[pred.cell[i]] = i;
    const std::set<int> excluded(exclude_cells.begin(), exclude_cells.end());

    // MALE and MCS use held-out cells; SSIM compares the maps over every cell present in both datasets.
    std::vector<double> p_pred, p_true;
    std::vector<Csi> h_pred, h_true;
    ChannelDataset common_pred, common_truth;
    for (std::size_t i = 0; i < truth.size(); ++i)
    {
        const auto it = pred_row.find(truth.cell[i]);
        if (it == pred_row.end())
            continue;
        const std::size_t k = it->second;
        common_truth.r.push_back(truth.r[i]);
        common_truth.params.push_back(truth.params[i]);
        common_pred.r.push_back(truth.r[i]);
        common_pred.params.push_back(pred.params[k]);
        if (excluded.count(truth.cell[i]))
            continue;
        p_pred.push_back(pred.params[k].p);
        p_true.push_back(truth.params[i].p);
        h_pred.push_back(pred.csi[k]);
        h_true.push_back(truth.csi[i]);
    }
    if (p_true.empty())
        throw PipelineError("no common held-out cells between prediction and truth");

    MetricsReport r;
    r.male_db = male(p_pred, p_true);
    r.n_points = static_cast<int>(p_true.size());
    const auto m = mcs(h_pred, h_true);
    r.mcs = m.value;
    r.mcs_skipped = m.skipped;
    try
    {
        r.ssim = ssim(dataset_gain_map(scene, grid, common_pred), dataset_gain_map(scene, grid, common_truth));
    }
    catch (const MetricError &)
    {
        r.ssim = std::numeric_limits<double>::quiet_NaN(); // map too small or too sparse for a full window
    }
    return r;
}

std::string dataset_to_csv(const ChannelDataset &data, const std::string &config_hash, bool with_csi)
{
    const std::size_t n_sc = with_csi && !data.csi.empty() ? data.csi.front().h.size() : 0;
    std::string out = "# wedt-dataset config_hash=" + config_hash + " tx=" + fmt_vec(data.tx) +
                      " subcarriers=" + std::to_string(n_sc) + " rows=" + std::to_string(data.size()) + "\n";
    out += "cell,x,y,z,p_db,tau_s";
    for (std::size_t k = 0; k < n_sc; ++k)
        out += ",re" + std::to_string(k) + ",im" + std::to_string(k);
    out += "\n";
    char buf[512];
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g", data.cell[i], data.r[i].x, data.r[i].y,
                      data.r[i].z, data.params[i].p, data.params[i].tau);
        out += buf;
        for (std::size_t k = 0; k < n_sc; ++k)
        {
            std::snprintf(buf, sizeof buf, ",%.17g,%.17g", data.csi[i].h[k].real(), data.csi[i].h[k].imag());
            out += buf;
        }
        out += "\n";
    }
    return out;
}

ChannelDataset dataset_from_csv(const std::string &text, std::string *hash)
{
    std::istringstream in(text);
    std::string line;
    char hbuf[64] = {0};
    double tx[3];
    std::size_t n_sc = 0, rows = 0;
    if (!std::getline(in, line) ||
        std::sscanf(line.c_str(), "# wedt-dataset config_hash=%63s tx=%lf,%lf,%lf subcarriers=%zu rows=%zu", hbuf,
                    &tx[0], &tx[1], &tx[2], &n_sc, &rows) != 6)
        throw PipelineError("dataset csv: missing or malformed header");
    if (hash)
        *hash = hbuf;
    ChannelDataset d;
    d.tx = {tx[0], tx[1], tx[2]};
    std::getline(in, line); // column names
    while (std::getline(in, line))
    {
        if (line.empty())
            continue;
        const char *p = line.c_str();
        char *end = nullptr;
        auto next = [&]() {
            const double v = std::strtod(p, &end);
            if (end == p)
                throw PipelineError("dataset csv: malformed row");
            p = *end == ',' ? end + 1 : end;
            return v;
        };
        d.cell.push_back(static_cast<int>(next()));
        const double x = next(), y = next(), z = next();
        d.r.push_back({x, y, z});
        const double pdb = next(), tau = next();
        d.params.push_back({pdb, tau});
        Csi csi;
        csi.h.resize(n_sc);
        for (std::size_t k = 0; k < n_sc; ++k)
        {
            const double re = next(), im = next();
            csi.h[k] = {re, im};
        }
        d.csi.push_back(std::move(csi));
    }
    if (d.size() != rows)
        throw PipelineError("dataset csv: row count does not match header");
    return d;
}

// ---------------------------------------------------------------------------------------------------------------
// File stages

namespace
{

fs::path out_dir(const RunConfig &c) { return fs::path(c.output); }

void check_lineage(const std::string &found, const RunConfig &config, const std::string &what)
{
    if (found != config_hash(config))
        throw PipelineError("lineage mismatch: " + what + " was produced under config " + found +
                            ", current config is " + config_hash(config));
}

/// Records the stage outputs (content hashes) in manifest.json. Wall-clock artifacts are listed without a hash.
void update_manifest(const RunConfig &config, const std::string &stage, const std::vector<std::string> &outputs,
                     const std::vector<std::string> &volatile_outputs = {})
{
    const fs::path path = out_dir(config) / "manifest.json";
    nlohmann::json m = nlohmann::json::object();
    if (fs::exists(path))
        m = nlohmann::json::parse(read_file(path));
    if (m.value("config_hash", config_hash(config)) != config_hash(config))
        m = nlohmann::json::object(); // a new lineage starts a fresh manifest
    nlohmann::json cfg = config_to_json(config);
    cfg.erase("output");
    m["config_hash"] = config_hash(config);
    m["config"] = cfg;
    m["seed"] = config.seed;
    nlohmann::json files = nlohmann::json::object();
    for (const auto &f : outputs)
        files[f] = to_hex(fnv1a(read_file(out_dir(config) / f)));
    for (const auto &f : volatile_outputs)
        files[f] = "volatile";
    m["stages"][stage] = {{"outputs", files}};
    write_file(path, m.dump(2) + "\n");
}

std::string csv_hash_line(const std::string &text)
{
    const auto pos = text.find("config_hash=");
    if (pos == std::string::npos)
        throw PipelineError("input lacks a lineage tag");
    const auto end = text.find_first_of(" \n", pos);
    return text.substr(pos + 12, end - pos - 12);
}

struct SampleSet
{
    Vec3 tx;
    std::vector<int> cell;
    std::vector<MeasurementSample> samples;
};

SampleSet read_samples(const RunConfig &config)
{
    const std::string text = read_file(out_dir(config) / "samples.csv");
    check_lineage(csv_hash_line(text), config, "samples.csv");
    SampleSet s;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    const auto t = line.find("tx=");
    if (t == std::string::npos || std::sscanf(line.c_str() + t, "tx=%lf,%lf,%lf", &s.tx.x, &s.tx.y, &s.tx.z) != 3)
        throw PipelineError("samples.csv: malformed header");
    std::getline(in, line);
    while (std::getline(in, line))
    {
        if (line.empty())
            continue;
        int cell = 0;
        MeasurementSample m;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf", &cell, &m.r.x, &m.r.y, &m.r.z, &m.params.p,
                        &m.params.tau) != 6)
            throw PipelineError("samples.csv: malformed row");
        s.cell.push_back(cell);
        s.samples.push_back(m);
    }
    return s;
}

FeatureContext feature_context(const RunConfig &c)
{
    FeatureContext ctx;
    ctx.trace = c.trace;
    ctx.ofdm = c.ofdm;
    ctx.antennas = c.antennas;
    return ctx;
}

std::string stem_or(const StageOptions &o, const std::string &fallback) { return o.name.empty() ? fallback : o.name; }

void write_map(const RunConfig &config, const SceneGeometry &scene, const ChannelDataset &data, const std::string &stem)
{
    try
    {
        render_gain_map(dataset_gain_map(scene, config.grid, data), (out_dir(config) / stem).string());
    }
    catch (const std::runtime_error &e)
    {
        throw PipelineError(e.what());
    }
}

} // namespace

void stage_gen_scene(const RunConfig &config, const std::string &name)
{
    SceneGeometry scene;
    try
    {
        scene = make_named_scene(name, config.ofdm.fc);
    }
    catch (const std::exception &e)
    {
        throw PipelineError(e.what());
    }
    write_file(out_dir(config) / (name + ".json"), save_scene(scene));
    update_manifest(config, "gen-scene", {name + ".json"});
}

void stage_simulate_truth(const RunConfig &config, const StageOptions &opts)
{
    config.validate();
    const SceneGeometry scene = load_run_scene(config);
    if (scene.truth_materials().empty())
        throw PipelineError("scene carries no truth_materials; cannot synthesize reference channels");
    const std::string stem = stem_or(opts, "truth");
    const auto grid = make_grid(scene, config.grid);
    const auto data = simulate_dataset(scene, opts.tx.value_or(config.tx), grid, MaterialTable::from_truth(scene),
                                       config.antennas, config.ofdm, config.trace);
    write_file(out_dir(config) / (stem + ".csv"), dataset_to_csv(data, config_hash(config)));
    write_map(config, scene, data, stem + "_map");
    update_manifest(config, "simulate-truth:" + stem,
                    {stem + ".csv", stem + "_map.pgm", stem + "_map.csv", stem + "_map.json"});
}

void stage_sample(const RunConfig &config)
{
    config.validate();
    std::string hash;
    const ChannelDataset truth = dataset_from_csv(read_file(out_dir(config) / "truth.csv"), &hash);
    check_lineage(hash, config, "truth.csv");
    const auto rows = sample_rows(truth.r, config.sampling, split_seed(config.seed, "sampling"), config.grid.spacing);
    std::string out = "# wedt-samples config_hash=" + config_hash(config) + " tx=" + fmt_vec(truth.tx) +
                      " mode=" + to_string(config.sampling.mode) + " m=" + std::to_string(rows.size()) +
                      "\ncell,x,y,z,p_db,tau_s\n";
    char buf[256];
    for (std::size_t k : rows)
    {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", truth.cell[k], truth.r[k].x,
                      truth.r[k].y, truth.r[k].z, truth.params[k].p, truth.params[k].tau);
        out += buf;
    }
    write_file(out_dir(config) / "samples.csv", out);
    update_manifest(config, "sample", {"samples.csv"});
}

void stage_build_bcm(const RunConfig &config)
{
    config.validate();
    const SceneGeometry scene = load_run_scene(config);
    const SampleSet s = read_samples(config);
    const auto grid = make_grid(scene, config.grid);
    BcmResult bcm;
    try
    {
        bcm = build_bcm(scene, s.tx, s.samples, grid, feature_context(config), split_seed(config.seed, "bcm"),
                        config.gpr);
    }
    catch (const std::exception &e)
    {
        throw PipelineError(std::string("build-bcm failed: ") + e.what());
    }
    write_file(out_dir(config) / "bcm.csv", bcm_to_csv(bcm.entries));
    const nlohmann::json model = {{"config_hash", config_hash(config)},
                                  {"tx", {s.tx.x, s.tx.y, s.tx.z}},
                                  {"model", bcm_model_to_json(bcm.model)},
                                  {"entries", bcm.entries.size()},
                                  {"unreachable", bcm.unreachable.size()}};
    write_file(out_dir(config) / "bcm_model.json", model.dump(2) + "\n");
    update_manifest(config, "build-bcm", {"bcm.csv", "bcm_model.json"});
}

void stage_calibrate(const RunConfig &config)
{
    config.validate();
    const auto model = nlohmann::json::parse(read_file(out_dir(config) / "bcm_model.json"));
    check_lineage(model.at("config_hash").get<std::string>(), config, "bcm_model.json");
    const Vec3 tx = vec_from_json(model.at("tx"));
    const auto entries = bcm_from_csv(read_file(out_dir(config) / "bcm.csv"));
    const SceneGeometry scene = load_run_scene(config);
    TrainResult res;
    try
    {
        res = calibrate_field(scene, tx, entries, make_field(scene, config), config);
    }
    catch (const TrainError &e)
    {
        throw PipelineError(std::string("calibration failed: ") + e.what());
    }
    TrainConfig t = config.train;
    t.seed = split_seed(config.seed, "train");
    t.trace = config.trace;
    nlohmann::json ck = checkpoint_to_json(res, t);
    ck["config_hash"] = config_hash(config);
    ck["tx"] = {tx.x, tx.y, tx.z};
    write_file(out_dir(config) / "checkpoint.json", ck.dump() + "\n");
    write_file(out_dir(config) / "train_log.csv", training_log_csv(res.history));
    update_manifest(config, "calibrate", {"checkpoint.json"}, {"train_log.csv"});
}

void stage_predict(const RunConfig &config, const StageOptions &opts)
{
    config.validate();
    const SceneGeometry scene = load_run_scene(config);
    EmFieldNet net;
    double beta = 0.0;
    if (opts.neutral)
        net = make_field(scene, config);
    else
    {
        const auto ck = nlohmann::json::parse(read_file(out_dir(config) / "checkpoint.json"));
        check_lineage(ck.at("config_hash").get<std::string>(), config, "checkpoint.json");
        const TrainResult res = checkpoint_from_json(ck);
        net = res.net;
        beta = res.bias.beta;
    }
    const std::string stem = stem_or(opts, opts.neutral ? "predict_neutral" : "predict");
    const auto grid = make_grid(scene, config.grid);
    const auto data =
        simulate_dataset(scene, opts.tx.value_or(config.tx), grid, net, beta, config.antennas, config.ofdm, config.trace);
    write_file(out_dir(config) / (stem + ".csv"), dataset_to_csv(data, config_hash(config)));
    write_map(config, scene, data, stem + "_map");
    update_manifest(config, "predict:" + stem,
                    {stem + ".csv", stem + "_map.pgm", stem + "_map.csv", stem + "_map.json"});
}

void stage_evaluate(const RunConfig &config, const StageOptions &opts)
{
    config.validate();
    std::string h_truth, h_pred;
    const auto truth = dataset_from_csv(read_file(out_dir(config) / (opts.truth + ".csv")), &h_truth);
    const auto pred = dataset_from_csv(read_file(out_dir(config) / (opts.prediction + ".csv")), &h_pred);
    check_lineage(h_truth, config, opts.truth + ".csv");
    check_lineage(h_pred, config, opts.prediction + ".csv");
    if (!(truth.tx == pred.tx))
        throw PipelineError("transmitter mismatch between '" + opts.truth + "' and '" + opts.prediction + "'");

    // Cells measured for the map are held out when evaluating at the measurement transmitter.
    std::vector<int> exclude;
    if (fs::exists(out_dir(config) / "samples.csv"))
    {
        const SampleSet s = read_samples(config);
        if (s.tx == truth.tx)
            exclude = s.cell;
    }
    const SceneGeometry scene = load_run_scene(config);
    const MetricsReport r = evaluate_datasets(scene, config.grid, pred, truth, exclude);
    const std::string stem = stem_or(opts, "metrics");
    nlohmann::json j = metrics_to_json(r, config_hash(config));
    j["truth"] = opts.truth;
    j["prediction"] = opts.prediction;
    write_file(out_dir(config) / (stem + ".json"), j.dump(2) + "\n");

    // Per-point absolute gain errors for distribution analysis.
    std::map<int, std::size_t> pred_row;
    for (std::size_t i = 0; i < pred.size(); ++i)
        pred_row[pred.cell[i]] = i;
    const std::set<int> ex(exclude.begin(), exclude.end());
    std::string errs = "cell,x,y,p_pred_db,p_truth_db,abs_err_db\n";
    char buf[256];
    for (std::size_t i = 0; i < truth.size(); ++i)
    {
        const auto it = pred_row.find(truth.cell[i]);
        if (it == pred_row.end() || ex.count(truth.cell[i]))
            continue;
        const double pp = pred.params[it->second].p, pt = truth.params[i].p;
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", truth.cell[i], truth.r[i].x,
                      truth.r[i].y, pp, pt, std::abs(pp - pt));
        errs += buf;
    }
    write_file(out_dir(config) / (stem + "_errors.csv"), errs);
    update_manifest(config, "evaluate:" + stem, {stem + ".json", stem + "_errors.csv"});
}

void stage_export_map(const RunConfig &config, const StageOptions &opts)
{
    std::string hash;
    const auto data = dataset_from_csv(read_file(out_dir(config) / (opts.prediction + ".csv")), &hash);
    check_lineage(hash, config, opts.prediction + ".csv");
    const SceneGeometry scene = load_run_scene(config);
    const std::string stem = stem_or(opts, opts.prediction + "_map");
    write_map(config, scene, data, stem);
    update_manifest(config, "export-map:" + stem, {stem + ".pgm", stem + ".csv", stem + ".json"});
}

} // namespace wedt
