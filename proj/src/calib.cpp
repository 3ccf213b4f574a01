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


#include "wedt/calib.hpp"
#include "wedt/hash.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>
#include <tuple>

namespace wedt
{

void TrainConfig::validate() const
{
    if (batch_size < 1)
        throw std::invalid_argument("batch_size must be >= 1");
    if (!(learning_rate > 0.0))
        throw std::invalid_argument("learning_rate must be positive");
    if (iterations < 0)
        throw std::invalid_argument("iterations must be >= 0");
    if (!(ema >= 0.0 && ema < 1.0))
        throw std::invalid_argument("ema factor must lie in [0, 1)");
    if (!(eta_p >= 0.0 && eta_tau >= 0.0))
        throw std::invalid_argument("loss weights must be non-negative");
    if (!(kappa_p_floor >= 0.0 && kappa_tau_floor >= 0.0))
        throw std::invalid_argument("variance floors must be non-negative");
}

std::uint64_t PathCache::hash() const
{
    Hasher h;
    h.f64(tx.x).f64(tx.y).f64(tx.z).u64(paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i)
    {
        const PathSet &ps = paths[i];
        h.u64(entry[i]).f64(ps.rx.x).f64(ps.rx.y).f64(ps.rx.z).u64(ps.paths.size());
        for (const auto &p : ps.paths)
        {
            h.f64(p.delay).u64(p.interactions.size());
            for (const auto &in : p.interactions)
                h.i64(in.facet_id).i64(static_cast<int>(in.kind)).f64(in.point.x).f64(in.point.y).f64(in.point.z);
        }
    }
    for (std::size_t e : excluded)
        h.u64(e);
    return h.digest();
}

PathCache precompute_cache(const SceneGeometry &scene, const Vec3 &tx, std::span<const BcmEntry> entries,
                           const TraceConfig &trace)
{
    PathCache cache;
    cache.tx = tx;
    for (std::size_t i = 0; i < entries.size(); ++i)
    {
        PathSet ps = trace_paths(scene, tx, entries[i].r, trace);
        if (ps.paths.empty())
        {
            cache.excluded.push_back(i);
            continue;
        }
        cache.entry.push_back(i);
        cache.paths.push_back(std::move(ps));
    }
    return cache;
}

ad::Var nll_loss(std::span<const LossInput> batch, double beta, const TrainConfig &config)
{
    if (batch.empty())
        throw std::invalid_argument("nll_loss: empty batch");
    const double log2pi = std::log(2.0 * std::numbers::pi);
    ad::Var sum(0.0);
    for (const auto &in : batch)
    {
        const BcmEntry &t = *in.target;
        if (config.eta_p > 0.0)
        {
            const double k = std::max(t.kappa_p, config.kappa_p_floor);
            const ad::Var r = in.p + beta - t.p_hat;
            sum += config.eta_p * (r * r * (0.5 / k) + 0.5 * (log2pi + std::log(k)));
        }
        if (config.eta_tau > 0.0)
        {
            const double k = std::max(t.kappa_tau * 1e18, config.kappa_tau_floor);
            const ad::Var r = in.tau_ns - t.tau_hat * 1e9;
            sum += config.eta_tau * (r * r * (0.5 / k) + 0.5 * (log2pi + std::log(k)));
        }
    }
    return sum * (1.0 / static_cast<double>(batch.size()));
}

double estimate_bias(std::span<const double> p_hat, std::span<const double> p_sim)
{
    if (p_hat.empty() || p_hat.size() != p_sim.size())
        throw std::invalid_argument("estimate_bias: need equally sized non-empty inputs");
    double s = 0.0;
    for (std::size_t i = 0; i < p_hat.size(); ++i)
        s += p_hat[i] - p_sim[i];
    return s / static_cast<double>(p_hat.size());
}

BiasState update_bias(const BiasState &state, double beta_hat, double lambda)
{
    if (!(lambda >= 0.0 && lambda < 1.0))
        throw std::invalid_argument("update_bias: lambda must lie in [0, 1)");
    return {lambda * state.beta + (1.0 - lambda) * beta_hat};
}

void adam_step(std::span<double> weights, std::span<const double> grads, AdamState &state, double lr)
{
    if (weights.size() != grads.size())
        throw std::invalid_argument("adam_step: weight/gradient size mismatch");
    if (state.m.empty())
    {
        state.m.assign(weights.size(), 0.0);
        state.v.assign(weights.size(), 0.0);
    }
    if (state.m.size() != weights.size())
        throw std::invalid_argument("adam_step: optimizer state size mismatch");
    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < weights.size(); ++i)
    {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double mh = state.m[i] / c1, vh = state.v[i] / c2;
        weights[i] -= lr * mh / (std::sqrt(vh) + state.eps);
    }
}

namespace
{

std::string id_list(std::span<const std::size_t> ids)
{
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i)
        s += (i ? "," : "") + std::to_string(ids[i]);
    return s;
}

} // namespace

BatchResult evaluate_batch(const CalibrationProblem &problem, const EmFieldNet &net, std::span<const std::size_t> rows,
                           const BiasState &bias, const TrainConfig &config, const BatchOptions &options)
{
    if (rows.empty())
        throw std::invalid_argument("evaluate_batch: empty batch");
    const PathCache &cache = *problem.cache;
    const SceneGeometry &scene = *problem.scene;

    // Interaction points shared between receivers (scatter centroids, common reflection spots) are queried once.
    std::map<std::tuple<int, double, double, double>, int> point_index;
    std::vector<Vec3> points;
    std::vector<int> categories;
    std::vector<std::vector<std::vector<int>>> slot(rows.size()); // row -> path -> interaction -> point
    for (std::size_t k = 0; k < rows.size(); ++k)
    {
        const PathSet &ps = cache.paths.at(rows[k]);
        slot[k].resize(ps.paths.size());
        for (std::size_t i = 0; i < ps.paths.size(); ++i)
            for (const auto &in : ps.paths[i].interactions)
            {
                const auto key = std::make_tuple(in.facet_id, in.point.x, in.point.y, in.point.z);
                auto [it, fresh] = point_index.try_emplace(key, static_cast<int>(points.size()));
                if (fresh)
                {
                    points.push_back(in.point);
                    categories.push_back(scene.facet(in.facet_id).category);
                }
                slot[k][i].push_back(it->second);
            }
    }

    ForwardCache fwd;
    net.forward_batch(points, categories, fwd);

    ad::Tape tape;
    std::vector<ad::Var> leaves(points.size() * 4);
    std::vector<EmVars> props(points.size());
    for (std::size_t u = 0; u < points.size(); ++u)
    {
        std::array<ad::Var, 4> raw;
        for (std::size_t c = 0; c < 4; ++c)
            raw[c] = leaves[u * 4 + c] = tape.leaf(fwd.raw[u * 4 + c]);
        props[u] = activation_map(raw);
    }

    BatchResult out;
    std::vector<TapedParams> sim(rows.size());
    std::vector<EmVars> path_props;
    std::vector<ad::CVar> coeffs;
    std::vector<double> delays;
    for (std::size_t k = 0; k < rows.size(); ++k)
    {
        const PathSet &ps = cache.paths[rows[k]];
        coeffs.clear();
        delays.clear();
        for (std::size_t i = 0; i < ps.paths.size(); ++i)
        {
            path_props.clear();
            for (int u : slot[k][i])
                path_props.push_back(props[static_cast<std::size_t>(u)]);
            coeffs.push_back(path_coefficient(scene, ps.paths[i], path_props, problem.antennas, problem.ofdm.fc));
            delays.push_back(ps.paths[i].delay);
        }
        try
        {
            sim[k] = channel_params(tape, coeffs, delays, problem.ofdm);
        }
        catch (const ad::DomainError &e)
        {
            throw TrainError(std::string("channel evaluation failed for entry ") +
                             std::to_string(cache.entry[rows[k]]) + ": " + e.what());
        }
        out.p_sim.push_back(sim[k].p.value());
        out.tau_sim.push_back(sim[k].tau.value());
    }

    std::vector<double> p_hat(rows.size());
    std::vector<LossInput> inputs(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k)
    {
        const BcmEntry &t = problem.entries[cache.entry[rows[k]]];
        p_hat[k] = t.p_hat;
        inputs[k] = {sim[k].p, sim[k].tau * 1e9, &t};
    }
    out.beta_hat = estimate_bias(p_hat, out.p_sim);
    out.bias = options.update_bias ? update_bias(bias, out.beta_hat, config.ema) : bias;

    const ad::Var loss = nll_loss(inputs, out.bias.beta, config);
    out.loss = loss.value();
    if (!std::isfinite(out.loss))
    {
        std::vector<std::size_t> bad;
        for (std::size_t k = 0; k < rows.size(); ++k)
        {
            const BcmEntry &t = *inputs[k].target;
            if (!std::isfinite(out.p_sim[k]) || !std::isfinite(out.tau_sim[k]) || !std::isfinite(t.p_hat) ||
                !std::isfinite(t.tau_hat) || !std::isfinite(t.kappa_p) || !std::isfinite(t.kappa_tau))
                bad.push_back(cache.entry[rows[k]]);
        }
        if (bad.empty())
            for (std::size_t r : rows)
                bad.push_back(cache.entry[r]);
        throw TrainError("non-finite loss; offending entries: " + id_list(bad));
    }

    if (options.with_grad)
    {
        std::vector<double> d_raw(leaves.size());
        if (!loss.is_const())
        {
            const ad::Gradient g = ad::backward(tape, loss);
            for (std::size_t i = 0; i < leaves.size(); ++i)
                d_raw[i] = g[leaves[i]];
        }
        out.grad.assign(net.num_params(), 0.0);
        net.backward_batch(fwd, d_raw, out.grad);
    }
    return out;
}

TrainResult train(const CalibrationProblem &problem, EmFieldNet net, const TrainConfig &config)
{
    config.validate();
    const std::size_t n = problem.cache->size();
    if (n == 0)
        throw TrainError("no trainable map entries (all path sets empty)");

    TrainResult res;
    res.net = std::move(net);
    std::mt19937_64 rng(split_seed(config.seed, "calib_batches"));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i)
        order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;
    const std::size_t bs = std::min(n, static_cast<std::size_t>(config.batch_size));
    std::vector<std::size_t> rows(bs);

    for (int it = 0; it < config.iterations; ++it)
    {
        const auto t0 = std::chrono::steady_clock::now();
        for (auto &r : rows)
        {
            if (cursor == n)
            {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            r = order[cursor++];
        }
        BatchResult b = evaluate_batch(problem, res.net, rows, res.bias, config);
        res.bias = b.bias;
        adam_step(res.net.params(), b.grad, res.adam, config.learning_rate);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        res.history.push_back({it, b.loss, res.bias.beta, b.beta_hat, ms});
    }
    return res;
}

std::string training_log_csv(std::span<const IterationLog> history)
{
    std::string out = "iteration,loss,beta,wall_ms\n";
    char buf[128];
    for (const auto &h : history)
    {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.3f\n", h.iteration, h.loss, h.beta, h.wall_ms);
        out += buf;
    }
    return out;
}

nlohmann::json checkpoint_to_json(const TrainResult &result, const TrainConfig &config)
{
    nlohmann::json j;
    j["net"] = net_to_json(result.net);
    j["optimizer"] = {{"step", result.adam.step}, {"beta1", result.adam.beta1}, {"beta2", result.adam.beta2},
                      {"eps", result.adam.eps},   {"m", result.adam.m},         {"v", result.adam.v}};
    j["beta"] = result.bias.beta;
    j["seed"] = config.seed;
    j["train"] = {{"batch_size", config.batch_size},
                  {"learning_rate", config.learning_rate},
                  {"iterations", config.iterations},
                  {"ema", config.ema},
                  {"eta_p", config.eta_p},
                  {"eta_tau", config.eta_tau},
                  {"kappa_p_floor", config.kappa_p_floor},
                  {"kappa_tau_floor", config.kappa_tau_floor},
                  {"max_order", config.trace.max_order},
                  {"enable_scatter", config.trace.enable_scatter}};
    return j;
}

TrainResult checkpoint_from_json(const nlohmann::json &j)
{
    TrainResult r;
    r.net = net_from_json(j.at("net"));
    const auto &o = j.at("optimizer");
    r.adam.step = o.at("step").get<std::int64_t>();
    r.adam.beta1 = o.at("beta1").get<double>();
    r.adam.beta2 = o.at("beta2").get<double>();
    r.adam.eps = o.at("eps").get<double>();
    r.adam.m = o.at("m").get<std::vector<double>>();
    r.adam.v = o.at("v").get<std::vector<double>>();
    r.bias.beta = j.at("beta").get<double>();
    return r;
}

} // namespace wedt
