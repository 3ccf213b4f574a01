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


#include "wedt/bcm.hpp"

#include "wedt/hash.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

namespace wedt
{

// ---------------------------------------------------------------------------------------------
// Features

FusedFeature features_from_paths(const SceneGeometry &scene, const PathSet &paths, const FeatureContext &ctx)
{
    FusedFeature f;
    f.v[0] = paths.rx.x;
    f.v[1] = paths.rx.y;
    f.v[2] = paths.rx.z;
    if (paths.paths.empty())
    {
        f.reachable = false;
        f.v[7] = 0.0;
        f.v[8] = -60.0;
        return f;
    }

    bool los = false;
    double order_sum = 0.0, order_max = 0.0;
    std::vector<cdouble> coeffs;
    std::vector<double> delays;
    for (const auto &p : paths.paths)
    {
        los = los || p.is_los();
        order_sum += static_cast<double>(p.order());
        order_max = std::max(order_max, static_cast<double>(p.order()));
        coeffs.push_back(path_coefficient(scene, p, interaction_props(scene, p, ctx.probe), ctx.antennas, ctx.ofdm.fc));
        delays.push_back(p.delay);
    }
    const auto n_paths = static_cast<double>(paths.paths.size());
    f.v[3] = los ? 1.0 : 0.0;
    f.v[4] = std::log(1.0 + n_paths);
    f.v[5] = order_sum / n_paths;
    f.v[6] = order_max;

    const Csi csi = compute_csi(coeffs, delays, ctx.ofdm);
    double mean = 0.0, sq = 0.0;
    bool finite = true;
    std::vector<double> db;
    db.reserve(csi.h.size());
    for (const auto &h : csi.h)
    {
        const double a = std::abs(h);
        finite = finite && a > 0.0;
        db.push_back(20.0 * std::log10(std::max(a, 1e-300)));
    }
    for (double x : db)
        mean += x;
    mean /= static_cast<double>(db.size());
    for (double x : db)
        sq += (x - mean) * (x - mean);
    f.v[7] = std::sqrt(sq / static_cast<double>(db.size()));

    std::vector<double> powers;
    for (const auto &a : coeffs)
        powers.push_back(std::norm(a));
    const auto strongest = std::max_element(powers.begin(), powers.end());
    double rest = 0.0;
    for (auto it = powers.begin(); it != powers.end(); ++it)
        if (it != strongest)
            rest += *it;
    f.v[8] = *strongest > 0.0 ? 10.0 * std::log10(*strongest / (rest + 1e-15)) : -60.0;
    if (!finite)
        f.v[7] = std::min(f.v[7], 300.0);
    return f;
}

FusedFeature extract_features(const SceneGeometry &scene, const Vec3 &tx, const Vec3 &r, const FeatureContext &ctx)
{
    return features_from_paths(scene, trace_paths(scene, tx, r, ctx.trace), ctx);
}

// ---------------------------------------------------------------------------------------------
// Physical trend

namespace
{
struct LineFit
{
    double slope = 0.0, intercept = 0.0;
    bool ok = false;
};

LineFit least_squares(const std::vector<double> &x, const std::vector<double> &y)
{
    LineFit fit;
    const auto n = static_cast<double>(x.size());
    if (x.size() < 2)
        return fit;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx < 1e-12 * n)
        return fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.ok = true;
    return fit;
}
} // namespace

PhysicalModel fit_physical(std::span<const ChannelParams> params, std::span<const double> distances,
                           std::span<const bool> los)
{
    if (params.size() != distances.size() || params.size() != los.size())
        throw std::invalid_argument("fit_physical: input sizes differ");
    std::vector<std::size_t> use;
    for (std::size_t i = 0; i < params.size(); ++i)
        if (los[i])
            use.push_back(i);
    if (use.size() < 4)
    {
        use.clear();
        for (std::size_t i = 0; i < params.size(); ++i)
            use.push_back(i);
    }
    if (use.size() < 2)
        throw std::invalid_argument("fit_physical: at least two samples required");

    PhysicalModel m;
    std::vector<double> x, y;
    for (std::size_t i : use)
    {
        x.push_back(std::log10(distances[i]));
        y.push_back(params[i].p);
    }
    if (const auto fit = least_squares(x, y); fit.ok)
    {
        m.g0 = fit.intercept;
        m.n0 = -fit.slope / 10.0;
    }
    else
    {
        m.n0 = 2.0;
        double acc = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            acc += y[i] + 20.0 * x[i];
        m.g0 = acc / static_cast<double>(x.size());
    }

    x.clear();
    y.clear();
    for (std::size_t i : use)
        if (params[i].tau >= kTauFloor)
        {
            x.push_back(std::log(distances[i]));
            y.push_back(std::log(params[i].tau));
        }
    if (const auto fit = least_squares(x, y); fit.ok)
    {
        m.a0 = std::exp(fit.intercept);
        m.b0 = fit.slope;
    }
    else if (!y.empty())
    {
        double acc = 0.0;
        for (double v : y)
            acc += v;
        m.a0 = std::exp(acc / static_cast<double>(y.size()));
        m.b0 = 0.0;
    }
    else
    {
        m.a0 = kTauFloor;
        m.b0 = 0.0;
    }
    return m;
}

// ---------------------------------------------------------------------------------------------
// Gaussian process

namespace
{
constexpr double kLogLenMin = -4.605170185988091, kLogLenMax = 6.907755278982137; // 1e-2, 1e3
constexpr double kLogSfMin = -13.815510557964274, kLogSfMax = 9.210340371976184;  // 1e-6, 1e4
constexpr double kLogSnMin = -18.420680743952367, kLogSnMax = 4.605170185988092;  // 1e-8, 1e2
constexpr double kJitterStart = 1e-8, kJitterMax = 1e-4;
const double kSqrt3 = std::sqrt(3.0);

double scaled_r2(const double *a, const double *b, const std::vector<double> &len)
{
    double r2 = 0.0;
    for (std::size_t d = 0; d < len.size(); ++d)
    {
        const double t = (a[d] - b[d]) / len[d];
        r2 += t * t;
    }
    return r2;
}

Eigen::MatrixXd gram(const Eigen::MatrixXd &x, const GprHyper &h)
{
    const Eigen::Index m = x.rows();
    Eigen::MatrixXd k(m, m);
    // Row-major copy keeps each input contiguous.
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> xr = x;
    for (Eigen::Index i = 0; i < m; ++i)
    {
        k(i, i) = h.sf2;
        for (Eigen::Index j = 0; j < i; ++j)
        {
            const double r = kSqrt3 * std::sqrt(scaled_r2(xr.row(i).data(), xr.row(j).data(), h.length));
            k(i, j) = k(j, i) = h.sf2 * (1.0 + r) * std::exp(-r);
        }
    }
    return k;
}

// Cholesky of k + (sn2 + jitter) I; returns false if even the largest jitter fails.
bool factorize(const Eigen::MatrixXd &kf, double sn2, Eigen::LLT<Eigen::MatrixXd> &llt, double &jitter)
{
    // Plain factorization first, then jitter 1e-8, 1e-7, ..., 1e-4.
    for (jitter = 0.0; jitter <= kJitterMax * 1.0000001; jitter = jitter == 0.0 ? kJitterStart : jitter * 10.0)
    {
        Eigen::MatrixXd k = kf;
        k.diagonal().array() += sn2 + jitter;
        llt.compute(k);
        if (llt.info() == Eigen::Success)
            return true;
    }
    return false;
}

std::vector<double> theta_of(const GprHyper &h)
{
    std::vector<double> t;
    for (double l : h.length)
        t.push_back(std::log(l));
    t.push_back(std::log(h.sf2));
    t.push_back(std::log(h.sn2));
    return t;
}

GprHyper hyper_of(const std::vector<double> &t)
{
    GprHyper h;
    const std::size_t dim = t.size() - 2;
    for (std::size_t d = 0; d < dim; ++d)
        h.length.push_back(std::exp(t[d]));
    h.sf2 = std::exp(t[dim]);
    h.sn2 = std::exp(t[dim + 1]);
    return h;
}

void clamp_theta(std::vector<double> &t)
{
    const std::size_t dim = t.size() - 2;
    for (std::size_t d = 0; d < dim; ++d)
        t[d] = std::clamp(t[d], kLogLenMin, kLogLenMax);
    t[dim] = std::clamp(t[dim], kLogSfMin, kLogSfMax);
    t[dim + 1] = std::clamp(t[dim + 1], kLogSnMin, kLogSnMax);
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>> &rows, const FeatureNorm &norm)
{
    const auto m = static_cast<Eigen::Index>(rows.size());
    const auto dim = static_cast<Eigen::Index>(norm.mean.size());
    Eigen::MatrixXd x(m, dim);
    for (Eigen::Index i = 0; i < m; ++i)
    {
        const auto z = norm.apply(rows[static_cast<std::size_t>(i)]);
        for (Eigen::Index d = 0; d < dim; ++d)
            x(i, d) = z[static_cast<std::size_t>(d)];
    }
    return x;
}
} // namespace

double matern_ard(std::span<const double> a, std::span<const double> b, const GprHyper &hyper)
{
    if (a.size() != b.size() || a.size() != hyper.length.size())
        throw std::invalid_argument("matern_ard: dimension mismatch");
    const double r = kSqrt3 * std::sqrt(scaled_r2(a.data(), b.data(), hyper.length));
    return hyper.sf2 * (1.0 + r) * std::exp(-r);
}

FeatureNorm FeatureNorm::fit(const std::vector<std::vector<double>> &rows)
{
    if (rows.empty())
        throw std::invalid_argument("FeatureNorm::fit: no rows");
    const std::size_t dim = rows[0].size();
    FeatureNorm n;
    n.mean.assign(dim, 0.0);
    n.std.assign(dim, 0.0);
    const auto m = static_cast<double>(rows.size());
    for (const auto &r : rows)
        for (std::size_t d = 0; d < dim; ++d)
            n.mean[d] += r[d];
    for (double &v : n.mean)
        v /= m;
    for (const auto &r : rows)
        for (std::size_t d = 0; d < dim; ++d)
            n.std[d] += (r[d] - n.mean[d]) * (r[d] - n.mean[d]);
    for (std::size_t d = 0; d < dim; ++d)
    {
        const double s = std::sqrt(n.std[d] / m);
        n.std[d] = s > 1e-12 * std::max(1.0, std::abs(n.mean[d])) ? s : 1.0;
    }
    return n;
}

std::vector<double> FeatureNorm::apply(std::span<const double> row) const
{
    std::vector<double> z(row.size());
    for (std::size_t d = 0; d < row.size(); ++d)
        z[d] = (row[d] - mean[d]) / std[d];
    return z;
}

double log_marginal_likelihood(const Eigen::MatrixXd &x, const Eigen::VectorXd &y, const GprHyper &hyper,
                               Eigen::VectorXd *grad)
{
    const Eigen::Index m = x.rows();
    const auto dim = static_cast<Eigen::Index>(hyper.length.size());
    const Eigen::MatrixXd kf = gram(x, hyper);
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;
    if (!factorize(kf, hyper.sn2, llt, jitter))
        throw GprError("Cholesky failed after jitter escalation to 1e-4");
    const Eigen::VectorXd alpha = llt.solve(y);
    const Eigen::MatrixXd l = llt.matrixL();
    const double logdet = 2.0 * l.diagonal().array().log().sum();
    const double lml = -0.5 * y.dot(alpha) - 0.5 * logdet - 0.5 * static_cast<double>(m) * std::log(2.0 * std::numbers::pi);
    if (!grad)
        return lml;

    const Eigen::MatrixXd w = alpha * alpha.transpose() - llt.solve(Eigen::MatrixXd::Identity(m, m));
    grad->setZero(dim + 2);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> xr = x;
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < i; ++j)
        {
            const double r = kSqrt3 * std::sqrt(scaled_r2(xr.row(i).data(), xr.row(j).data(), hyper.length));
            const double c = w(i, j) * 3.0 * hyper.sf2 * std::exp(-r); // factor 2 (symmetry) times 1/2
            for (Eigen::Index d = 0; d < dim; ++d)
            {
                const double t = (xr(i, d) - xr(j, d)) / hyper.length[static_cast<std::size_t>(d)];
                (*grad)(d) += c * t * t;
            }
        }
    (*grad)(dim) = 0.5 * (w.array() * kf.array()).sum();
    (*grad)(dim + 1) = 0.5 * hyper.sn2 * w.trace();
    return lml;
}

GprModel condition_gpr(const std::vector<std::vector<double>> &features, std::span<const double> targets,
                       const GprHyper &hyper, const FeatureNorm &norm)
{
    if (features.size() != targets.size() || features.empty())
        throw std::invalid_argument("condition_gpr: need matching, non-empty features and targets");
    GprModel model;
    model.hyper = hyper;
    model.norm = norm;
    model.x = to_matrix(features, norm);
    model.y = Eigen::Map<const Eigen::VectorXd>(targets.data(), static_cast<Eigen::Index>(targets.size()));
    const Eigen::MatrixXd kf = gram(model.x, hyper);
    Eigen::LLT<Eigen::MatrixXd> llt;
    if (!factorize(kf, hyper.sn2, llt, model.jitter))
        throw GprError("Cholesky failed after jitter escalation to 1e-4");
    model.chol = llt.matrixL();
    model.alpha = llt.solve(model.y);
    const double logdet = 2.0 * model.chol.diagonal().array().log().sum();
    model.lml = -0.5 * model.y.dot(model.alpha) - 0.5 * logdet -
                0.5 * static_cast<double>(model.y.size()) * std::log(2.0 * std::numbers::pi);
    return model;
}

GprModel fit_gpr(const std::vector<std::vector<double>> &features, std::span<const double> targets,
                 std::uint64_t seed, const GprFitConfig &config)
{
    if (features.size() < 2 || features.size() != targets.size())
        throw std::invalid_argument("fit_gpr: at least two samples required");
    const FeatureNorm norm = FeatureNorm::fit(features);
    const Eigen::MatrixXd x = to_matrix(features, norm);
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(targets.data(), static_cast<Eigen::Index>(targets.size()));
    const std::size_t dim = norm.mean.size();

    const double var_y = y.size() > 1 ? (y.array() - y.mean()).square().mean() : 1.0;
    std::vector<std::vector<double>> starts;
    {
        GprHyper h;
        h.length.assign(dim, 1.0);
        h.sf2 = std::max(var_y, 1e-6);
        h.sn2 = std::max(0.01 * var_y, 1e-8);
        auto t = theta_of(h);
        clamp_theta(t);
        starts.push_back(t);
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ul(kLogLenMin, kLogLenMax), us(kLogSfMin, kLogSfMax), un(kLogSnMin, kLogSnMax);
    for (int r = 0; r < config.restarts; ++r)
    {
        std::vector<double> t(dim + 2);
        for (std::size_t d = 0; d < dim; ++d)
            t[d] = ul(rng);
        t[dim] = us(rng);
        t[dim + 1] = un(rng);
        starts.push_back(t);
    }

    double best_lml = -std::numeric_limits<double>::infinity();
    std::vector<double> best;
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (auto theta : starts)
    {
        std::vector<double> mom(theta.size(), 0.0), vel(theta.size(), 0.0);
        Eigen::VectorXd grad;
        for (int step = 0; step <= config.steps; ++step)
        {
            double lml = 0.0;
            try
            {
                lml = log_marginal_likelihood(x, y, hyper_of(theta), &grad);
            }
            catch (const GprError &)
            {
                break;
            }
            if (std::isfinite(lml) && lml > best_lml)
            {
                best_lml = lml;
                best = theta;
            }
            if (step == config.steps)
                break;
            const double c1 = 1.0 - std::pow(b1, step + 1), c2 = 1.0 - std::pow(b2, step + 1);
            for (std::size_t k = 0; k < theta.size(); ++k)
            {
                const double g = grad(static_cast<Eigen::Index>(k));
                mom[k] = b1 * mom[k] + (1.0 - b1) * g;
                vel[k] = b2 * vel[k] + (1.0 - b2) * g * g;
                theta[k] += config.learning_rate * (mom[k] / c1) / (std::sqrt(vel[k] / c2) + eps);
            }
            clamp_theta(theta);
        }
    }
    if (best.empty())
        throw GprError("GP fit failed for every restart");
    return condition_gpr(features, targets, hyper_of(best), norm);
}

GprPrediction gpr_predict(const GprModel &model, std::span<const double> feature)
{
    const auto z = model.norm.apply(feature);
    const Eigen::Index m = model.x.rows();
    Eigen::VectorXd k(m);
    for (Eigen::Index i = 0; i < m; ++i)
    {
        double r2 = 0.0;
        for (std::size_t d = 0; d < z.size(); ++d)
        {
            const double t = (model.x(i, static_cast<Eigen::Index>(d)) - z[d]) / model.hyper.length[d];
            r2 += t * t;
        }
        const double r = kSqrt3 * std::sqrt(r2);
        k(i) = model.hyper.sf2 * (1.0 + r) * std::exp(-r);
    }
    const Eigen::VectorXd v = model.chol.triangularView<Eigen::Lower>().solve(k);
    return {k.dot(model.alpha), std::max(model.hyper.sf2 - v.squaredNorm(), 0.0)};
}

// ---------------------------------------------------------------------------------------------
// Map construction

std::vector<Vec3> make_grid(const SceneGeometry &scene, const GridConfig &grid)
{
    if (!(grid.spacing > 0.0))
        throw std::invalid_argument("make_grid: spacing must be positive");
    const Bounds &b = scene.bounds();
    const auto nx = static_cast<int>(std::floor((b.max.x - b.min.x) / grid.spacing + 1e-9));
    const auto ny = static_cast<int>(std::floor((b.max.y - b.min.y) / grid.spacing + 1e-9));
    std::vector<Vec3> out;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
        {
            const Vec3 p{b.min.x + (i + 0.5) * grid.spacing, b.min.y + (j + 0.5) * grid.spacing, grid.height};
            bool clear = true;
            for (const auto &f : scene.facets())
                if (point_facet_distance(p, f) < grid.clearance)
                {
                    clear = false;
                    break;
                }
            if (clear)
                out.push_back(p);
        }
    return out;
}

BcmResult build_bcm(const SceneGeometry &scene, const Vec3 &tx, std::span<const MeasurementSample> samples,
                    std::span<const Vec3> targets, const FeatureContext &ctx, std::uint64_t seed,
                    const GprFitConfig &fit)
{
    std::vector<const MeasurementSample *> order;
    for (const auto &s : samples)
        order.push_back(&s);
    std::sort(order.begin(), order.end(), [](const MeasurementSample *a, const MeasurementSample *b) {
        return std::tie(a->r.x, a->r.y, a->r.z, a->params.p, a->params.tau) <
               std::tie(b->r.x, b->r.y, b->r.z, b->params.p, b->params.tau);
    });

    std::vector<std::vector<double>> rows;
    std::vector<ChannelParams> params;
    std::vector<double> dist;
    std::vector<char> los;
    for (const MeasurementSample *s : order)
    {
        const auto f = extract_features(scene, tx, s->r, ctx);
        if (!f.reachable)
            continue;
        rows.emplace_back(f.v.begin(), f.v.end());
        params.push_back(s->params);
        dist.push_back(std::max(distance(tx, s->r), 1e-3));
        los.push_back(f.v[3] > 0.5 ? 1 : 0);
    }
    if (rows.size() < 2)
        throw std::invalid_argument("build_bcm: fewer than two usable samples");

    BcmResult res;
    BcmModel &model = res.model;
    model.seed = seed;
    model.n_samples = static_cast<int>(rows.size());
    model.n_los = static_cast<int>(std::count(los.begin(), los.end(), 1));
    model.physical =
        fit_physical(params, dist, std::span<const bool>(reinterpret_cast<const bool *>(los.data()), los.size()));

    std::vector<double> res_p, res_t;
    for (std::size_t i = 0; i < rows.size(); ++i)
    {
        res_p.push_back(params[i].p - model.physical.gain(dist[i]));
        res_t.push_back((params[i].tau - model.physical.spread(dist[i])) * 1e9);
    }
    model.gp_p = fit_gpr(rows, res_p, split_seed(seed, "gpr_p"), fit);
    model.gp_tau = fit_gpr(rows, res_t, split_seed(seed, "gpr_tau"), fit);

    for (const Vec3 &r : targets)
    {
        const auto f = extract_features(scene, tx, r, ctx);
        if (!f.reachable)
        {
            res.unreachable.push_back(r);
            continue;
        }
        const double d = std::max(distance(tx, r), 1e-3);
        const auto gp = gpr_predict(model.gp_p, f.v);
        const auto gt = gpr_predict(model.gp_tau, f.v);
        BcmEntry e;
        e.r = r;
        e.p_hat = model.physical.gain(d) + gp.mean;
        e.tau_hat = std::max(model.physical.spread(d) + gt.mean * 1e-9, 0.0);
        e.kappa_p = std::max(gp.variance, kKappaPFloor);
        e.kappa_tau = std::max(gt.variance, kKappaTauFloor) * 1e-18;
        res.entries.push_back(e);
    }
    return res;
}

// ---------------------------------------------------------------------------------------------
// Files

std::string bcm_to_csv(std::span<const BcmEntry> entries)
{
    std::string out = "x,y,z,p_hat_db,tau_hat_ns,kappa_p_db2,kappa_tau_ns2\n";
    char line[512];
    for (const auto &e : entries)
    {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.r.x, e.r.y, e.r.z, e.p_hat,
                      e.tau_hat * 1e9, e.kappa_p, e.kappa_tau * 1e18);
        out += line;
    }
    return out;
}

std::vector<BcmEntry> bcm_from_csv(const std::string &text)
{
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    if (line.rfind("x,y,z,p_hat_db", 0) != 0)
        throw std::runtime_error("BCM CSV: unexpected header");
    std::vector<BcmEntry> out;
    while (std::getline(in, line))
    {
        if (line.empty())
            continue;
        BcmEntry e;
        double tau_ns = 0.0, kt_ns2 = 0.0;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf", &e.r.x, &e.r.y, &e.r.z, &e.p_hat, &tau_ns,
                        &e.kappa_p, &kt_ns2) != 7)
            throw std::runtime_error("BCM CSV: malformed row '" + line + "'");
        e.tau_hat = tau_ns * 1e-9;
        e.kappa_tau = kt_ns2 * 1e-18;
        out.push_back(e);
    }
    return out;
}

namespace
{
nlohmann::ordered_json gp_json(const GprModel &m)
{
    return {{"length_scales", m.hyper.length}, {"signal_variance", m.hyper.sf2}, {"noise_variance", m.hyper.sn2},
            {"jitter", m.jitter},              {"log_marginal_likelihood", m.lml}, {"feature_mean", m.norm.mean},
            {"feature_std", m.norm.std}};
}
} // namespace

nlohmann::json bcm_model_to_json(const BcmModel &model)
{
    nlohmann::ordered_json j;
    j["physical"] = {{"g0_db", model.physical.g0},
                     {"n0", model.physical.n0},
                     {"a0_s", model.physical.a0},
                     {"b0", model.physical.b0}};
    j["gpr_p_db"] = gp_json(model.gp_p);
    j["gpr_tau_ns"] = gp_json(model.gp_tau);
    j["n_samples"] = model.n_samples;
    j["n_los"] = model.n_los;
    j["seed"] = model.seed;
    return j;
}

} // namespace wedt
