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


#include "wedt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace wedt
{

GainMap::GainMap(int nx_, int ny_, double x0_, double y0_, double spacing_)
    : nx(nx_), ny(ny_), x0(x0_), y0(y0_), spacing(spacing_)
{
    if (nx < 1 || ny < 1)
        throw MetricError("gain map dimensions must be >= 1");
    values.assign(static_cast<std::size_t>(nx) * ny, 0.0);
    mask.assign(values.size(), 0);
}

double male(std::span<const double> pred, std::span<const double> truth)
{
    if (pred.size() != truth.size())
        throw MetricError("male: length mismatch");
    if (pred.empty())
        throw MetricError("male: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        s += std::abs(pred[i] - truth[i]);
    return s / static_cast<double>(pred.size());
}

double ssim(const GainMap &a, const GainMap &b)
{
    constexpr int kWin = 7;
    constexpr double kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
    if (a.nx != b.nx || a.ny != b.ny)
        throw MetricError("ssim: map dimensions differ");
    if (a.mask != b.mask)
        throw MetricError("ssim: validity masks differ");

    double lo = INFINITY, hi = -INFINITY;
    bool equal = true;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        if (a.mask[i])
        {
            lo = std::min({lo, a.values[i], b.values[i]});
            hi = std::max({hi, a.values[i], b.values[i]});
            equal = equal && a.values[i] == b.values[i];
        }

    // Window origins whose 7x7 footprint is entirely valid.
    std::vector<std::pair<int, int>> windows;
    for (int y = 0; y + kWin <= a.ny; ++y)
        for (int x = 0; x + kWin <= a.nx; ++x)
        {
            bool ok = true;
            for (int j = 0; j < kWin && ok; ++j)
                for (int i = 0; i < kWin && ok; ++i)
                    ok = a.valid(x + i, y + j);
            if (ok)
                windows.emplace_back(x, y);
        }
    if (windows.empty())
        throw MetricError("ssim: no 7x7 window lies fully inside the valid region");
    if (!(hi > lo))
        return equal ? 1.0 : 0.0;

    const double range = hi - lo;
    std::vector<double> na(a.values.size()), nb(b.values.size());
    for (std::size_t i = 0; i < na.size(); ++i)
    {
        na[i] = (a.values[i] - lo) / range;
        nb[i] = (b.values[i] - lo) / range;
    }

    constexpr double inv_n = 1.0 / (kWin * kWin);
    double total = 0.0;
    for (const auto &[x, y] : windows)
    {
        double ma = 0.0, mb = 0.0;
        for (int j = 0; j < kWin; ++j)
            for (int i = 0; i < kWin; ++i)
            {
                ma += na[a.index(x + i, y + j)];
                mb += nb[a.index(x + i, y + j)];
            }
        ma *= inv_n;
        mb *= inv_n;
        double va = 0.0, vb = 0.0, cab = 0.0;
        for (int j = 0; j < kWin; ++j)
            for (int i = 0; i < kWin; ++i)
            {
                const double da = na[a.index(x + i, y + j)] - ma, db = nb[a.index(x + i, y + j)] - mb;
                va += da * da;
                vb += db * db;
                cab += da * db;
            }
        va *= inv_n;
        vb *= inv_n;
        cab *= inv_n;
        total += ((2.0 * ma * mb + kC1) * (2.0 * cab + kC2)) / ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
    }
    return total / static_cast<double>(windows.size());
}

McsResult mcs(std::span<const Csi> pred, std::span<const Csi> truth)
{
    if (pred.size() != truth.size())
        throw MetricError("mcs: receiver count mismatch");
    McsResult r;
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
    {
        const auto &p = pred[i].h, &t = truth[i].h;
        if (p.size() != t.size())
            throw MetricError("mcs: subcarrier count mismatch");
        cdouble inner(0.0, 0.0);
        double np = 0.0, nt = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k)
        {
            inner += p[k] * std::conj(t[k]);
            np += std::norm(p[k]);
            nt += std::norm(t[k]);
        }
        if (!(np > 0.0) || !(nt > 0.0))
        {
            ++r.skipped;
            continue;
        }
        sum += std::abs(inner) / std::sqrt(np * nt);
        ++r.used;
    }
    if (r.used == 0)
        throw MetricError("mcs: every receiver has a zero-norm vector");
    r.value = sum / r.used;
    return r;
}

std::string render_pgm(const GainMap &map, RenderInfo &info)
{
    auto clip = [&](double v) { return std::clamp(v, info.clip_min, info.clip_max); };
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < map.values.size(); ++i)
        if (map.mask[i])
        {
            lo = std::min(lo, clip(map.values[i]));
            hi = std::max(hi, clip(map.values[i]));
        }
    if (!std::isfinite(lo))
        lo = hi = info.clip_min;
    info.lo = lo;
    info.hi = hi;

    std::string out = "P5\n" + std::to_string(map.nx) + " " + std::to_string(map.ny) + "\n255\n";
    for (int iy = map.ny - 1; iy >= 0; --iy)
        for (int ix = 0; ix < map.nx; ++ix)
        {
            int level = 0;
            if (map.valid(ix, iy))
                level = hi > lo ? static_cast<int>(std::lround(255.0 * (clip(map.values[map.index(ix, iy)]) - lo) /
                                                               (hi - lo)))
                                : 128;
            out.push_back(static_cast<char>(static_cast<unsigned char>(level)));
        }
    return out;
}

std::string gain_map_to_csv(const GainMap &map)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, "# gain_map %d %d %.17g %.17g %.17g\nix,iy,x,y,p_db\n", map.nx, map.ny, map.x0,
                  map.y0, map.spacing);
    std::string out = buf;
    for (int iy = 0; iy < map.ny; ++iy)
        for (int ix = 0; ix < map.nx; ++ix)
        {
            const double x = map.x0 + ix * map.spacing, y = map.y0 + iy * map.spacing;
            if (map.valid(ix, iy))
                std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g\n", ix, iy, x, y,
                              map.values[map.index(ix, iy)]);
            else
                std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,\n", ix, iy, x, y);
            out += buf;
        }
    return out;
}

GainMap gain_map_from_csv(const std::string &text)
{
    std::istringstream in(text);
    std::string line;
    int nx = 0, ny = 0;
    double x0 = 0, y0 = 0, sp = 1;
    if (!std::getline(in, line) || std::sscanf(line.c_str(), "# gain_map %d %d %lf %lf %lf", &nx, &ny, &x0, &y0, &sp) != 5)
        throw MetricError("gain map csv: missing grid header");
    GainMap map(nx, ny, x0, y0, sp);
    std::getline(in, line); // column names
    while (std::getline(in, line))
    {
        if (line.empty())
            continue;
        int ix = 0, iy = 0;
        double x = 0, y = 0, v = 0;
        const int n = std::sscanf(line.c_str(), "%d,%d,%lf,%lf,%lf", &ix, &iy, &x, &y, &v);
        if (n < 4 || ix < 0 || iy < 0 || ix >= nx || iy >= ny)
            throw MetricError("gain map csv: malformed row '" + line + "'");
        if (n == 5)
            map.set(ix, iy, v);
    }
    return map;
}

void render_gain_map(const GainMap &map, const std::string &prefix, double clip_min, double clip_max)
{
    RenderInfo info;
    info.clip_min = clip_min;
    info.clip_max = clip_max;
    const std::string pgm = render_pgm(map, info);
    const nlohmann::json side = {{"nx", map.nx},           {"ny", map.ny},           {"x0", map.x0},
                                 {"y0", map.y0},           {"spacing", map.spacing}, {"clip_min", info.clip_min},
                                 {"clip_max", info.clip_max}, {"display_lo", info.lo}, {"display_hi", info.hi},
                                 {"unit", "dB"}};
    auto write = [](const std::string &path, const std::string &data) {
        std::ofstream f(path, std::ios::binary);
        if (!f)
            throw std::runtime_error("cannot open '" + path + "' for writing");
        f << data;
        if (!f)
            throw std::runtime_error("write failed for '" + path + "'");
    };
    write(prefix + ".pgm", pgm);
    write(prefix + ".csv", gain_map_to_csv(map));
    write(prefix + ".json", side.dump(2) + "\n");
}

nlohmann::json metrics_to_json(const MetricsReport &report, const std::string &config_hash)
{
    return {{"male_db", report.male_db},         {"ssim", report.ssim},
            {"mcs", report.mcs},                 {"n_points", report.n_points},
            {"mcs_skipped", report.mcs_skipped}, {"config_hash", config_hash}};
}

} // namespace wedt
