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


#include "wedt/emfield.hpp"

#include <algorithm>
#include <numbers>
#include <random>

namespace wedt
{

EmProperties activation_map(const std::array<double, 4> &raw)
{
    const auto sig = [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); };
    return {1.0 + std::exp(raw[0]), std::exp(raw[1]), sig(raw[2]), sig(raw[3])};
}

EmVars activation_map(const std::array<ad::Var, 4> &raw)
{
    return {1.0 + ad::exp(raw[0]), ad::exp(raw[1]), ad::sigmoid(raw[2]), ad::sigmoid(raw[3])};
}

// ---------------------------------------------------------------------------------------------
// Encoder

FourierEncoder::FourierEncoder(int num_freqs, const Bounds &bounds) : num_freqs_(num_freqs), bounds_(bounds)
{
    if (num_freqs < 0)
        throw std::invalid_argument("FourierEncoder: num_freqs must be >= 0");
    for (int a = 0; a < 3; ++a)
        if (bounds_.max[a] - bounds_.min[a] < 1e-6)
        {
            bounds_.min[a] -= 0.5;
            bounds_.max[a] += 0.5;
        }
}

void FourierEncoder::encode(const Vec3 &q, std::span<double> out) const
{
    double u[3];
    for (int a = 0; a < 3; ++a)
    {
        const double t = 2.0 * (q[a] - bounds_.min[a]) / (bounds_.max[a] - bounds_.min[a]) - 1.0;
        u[a] = std::clamp(t, -1.0, 1.0);
        out[static_cast<std::size_t>(a)] = u[a];
    }
    std::size_t k = 3;
    double scale = std::numbers::pi;
    for (int f = 0; f < num_freqs_; ++f, scale *= 2.0)
        for (int a = 0; a < 3; ++a)
        {
            out[k++] = std::sin(scale * u[a]);
            out[k++] = std::cos(scale * u[a]);
        }
}

std::vector<double> FourierEncoder::encode(const Vec3 &q) const
{
    std::vector<double> out(static_cast<std::size_t>(dim()));
    encode(q, out);
    return out;
}

// ---------------------------------------------------------------------------------------------
// Network

EmFieldNet::EmFieldNet(const NetConfig &config, FourierEncoder encoder, std::vector<int> category_labels)
    : config_(config), encoder_(std::move(encoder)), category_labels_(std::move(category_labels))
{
    std::sort(category_labels_.begin(), category_labels_.end());
    category_labels_.erase(std::unique(category_labels_.begin(), category_labels_.end()), category_labels_.end());

    int in = input_dim();
    std::size_t off = 0;
    auto add_layer = [&](int out) {
        layer_in_.push_back(in);
        layer_out_.push_back(out);
        kernel_off_.push_back(off);
        off += static_cast<std::size_t>(in) * static_cast<std::size_t>(out);
        bias_off_.push_back(off);
        off += static_cast<std::size_t>(out);
        in = out;
    };
    for (int h : config_.hidden)
    {
        if (h < 1)
            throw std::invalid_argument("EmFieldNet: hidden width must be >= 1");
        add_layer(h);
    }
    add_layer(4);
    embed_off_ = off;
    if (config_.use_categories)
        off += (category_labels_.size() + 1) * static_cast<std::size_t>(config_.embed_dim);
    params_.assign(off, 0.0);
}

int EmFieldNet::input_dim() const { return encoder_.dim() + (config_.use_categories ? config_.embed_dim : 0); }

std::span<double> EmFieldNet::kernel(std::size_t l)
{
    return {params_.data() + kernel_off_[l], static_cast<std::size_t>(layer_in_[l] * layer_out_[l])};
}
std::span<const double> EmFieldNet::kernel(std::size_t l) const
{
    return {params_.data() + kernel_off_[l], static_cast<std::size_t>(layer_in_[l] * layer_out_[l])};
}
std::span<double> EmFieldNet::bias(std::size_t l)
{
    return {params_.data() + bias_off_[l], static_cast<std::size_t>(layer_out_[l])};
}
std::span<const double> EmFieldNet::bias(std::size_t l) const
{
    return {params_.data() + bias_off_[l], static_cast<std::size_t>(layer_out_[l])};
}
std::span<double> EmFieldNet::embeddings() { return {params_.data() + embed_off_, params_.size() - embed_off_}; }
std::span<const double> EmFieldNet::embeddings() const
{
    return {params_.data() + embed_off_, params_.size() - embed_off_};
}

int EmFieldNet::category_row(int category) const
{
    const auto it = std::lower_bound(category_labels_.begin(), category_labels_.end(), category);
    if (it != category_labels_.end() && *it == category)
        return static_cast<int>(it - category_labels_.begin());
    return static_cast<int>(category_labels_.size());
}

void EmFieldNet::build_input(const Vec3 &q, int category, std::span<double> out) const
{
    encoder_.encode(q, out.first(static_cast<std::size_t>(encoder_.dim())));
    if (config_.use_categories)
    {
        const auto e = static_cast<std::size_t>(config_.embed_dim);
        const auto row = static_cast<std::size_t>(category_row(category));
        const auto emb = embeddings();
        std::copy_n(emb.begin() + static_cast<std::ptrdiff_t>(row * e), e,
                    out.begin() + static_cast<std::ptrdiff_t>(encoder_.dim()));
    }
}

namespace
{
// y = b + sum_i x_i * W[i, :], accumulated in input order.
void dense_forward(std::span<const double> x, std::span<const double> w, std::span<const double> b, double *y)
{
    const std::size_t n_out = b.size();
    std::copy(b.begin(), b.end(), y);
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        const double xi = x[i];
        if (xi == 0.0)
            continue;
        const double *wr = w.data() + i * n_out;
        for (std::size_t o = 0; o < n_out; ++o)
            y[o] += xi * wr[o];
    }
}

double dot4(const double *a, const double *b, std::size_t n)
{
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
    {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i)
        s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}
} // namespace

std::array<double, 4> EmFieldNet::raw(const Vec3 &q, int category) const
{
    ForwardCache cache;
    forward_batch(std::span(&q, 1), std::span(&category, 1), cache);
    return {cache.raw[0], cache.raw[1], cache.raw[2], cache.raw[3]};
}

EmProperties EmFieldNet::query(const Vec3 &q, int category) const { return activation_map(raw(q, category)); }

void EmFieldNet::forward_batch(std::span<const Vec3> points, std::span<const int> categories, ForwardCache &cache) const
{
    const std::size_t rows = points.size();
    const std::size_t n_layers = num_layers();
    cache.rows = rows;
    cache.inputs.resize(n_layers);
    cache.category_rows.resize(rows);

    const auto in0 = static_cast<std::size_t>(input_dim());
    cache.inputs[0].resize(rows * in0);
    for (std::size_t r = 0; r < rows; ++r)
    {
        const int cat = categories.empty() ? -1 : categories[r];
        cache.category_rows[r] = category_row(cat);
        build_input(points[r], cat, std::span(cache.inputs[0]).subspan(r * in0, in0));
    }

    for (std::size_t l = 0; l < n_layers; ++l)
    {
        const auto n_in = static_cast<std::size_t>(layer_in_[l]);
        const auto n_out = static_cast<std::size_t>(layer_out_[l]);
        const bool last = l + 1 == n_layers;
        std::vector<double> &out = last ? cache.raw : cache.inputs[l + 1];
        out.resize(rows * n_out);
        const auto w = kernel(l);
        const auto b = bias(l);
        for (std::size_t r = 0; r < rows; ++r)
        {
            double *y = out.data() + r * n_out;
            dense_forward(std::span(cache.inputs[l]).subspan(r * n_in, n_in), w, b, y);
            if (!last)
                for (std::size_t o = 0; o < n_out; ++o)
                    y[o] = y[o] > 0.0 ? y[o] : 0.0;
        }
    }
}

void EmFieldNet::backward_batch(const ForwardCache &cache, std::span<const double> d_raw, std::span<double> grad) const
{
    const std::size_t rows = cache.rows;
    const std::size_t n_layers = num_layers();
    std::vector<double> d_out(d_raw.begin(), d_raw.end());
    std::vector<double> d_in;
    const auto enc_dim = static_cast<std::size_t>(encoder_.dim());

    for (std::size_t l = n_layers; l-- > 0;)
    {
        const auto n_in = static_cast<std::size_t>(layer_in_[l]);
        const auto n_out = static_cast<std::size_t>(layer_out_[l]);
        const auto w = kernel(l);
        double *gw = grad.data() + kernel_off_[l];
        double *gb = grad.data() + bias_off_[l];
        const bool need_dx = l > 0 || config_.use_categories;
        const std::size_t dx_begin = l > 0 ? 0 : enc_dim;
        if (need_dx)
            d_in.assign(rows * n_in, 0.0);

        for (std::size_t r = 0; r < rows; ++r)
        {
            const double *x = cache.inputs[l].data() + r * n_in;
            const double *dy = d_out.data() + r * n_out;
            for (std::size_t o = 0; o < n_out; ++o)
                gb[o] += dy[o];
            for (std::size_t i = 0; i < n_in; ++i)
            {
                const double xi = x[i];
                if (xi == 0.0)
                    continue;
                double *g = gw + i * n_out;
                for (std::size_t o = 0; o < n_out; ++o)
                    g[o] += xi * dy[o];
            }
            if (need_dx)
            {
                double *dx = d_in.data() + r * n_in;
                for (std::size_t i = dx_begin; i < n_in; ++i)
                {
                    // ReLU gate: inputs of layers > 0 are post-activation values.
                    if (l > 0 && !(x[i] > 0.0))
                        continue;
                    dx[i] = dot4(w.data() + i * n_out, dy, n_out);
                }
            }
        }

        if (l == 0 && config_.use_categories)
        {
            const auto e = static_cast<std::size_t>(config_.embed_dim);
            double *ge = grad.data() + embed_off_;
            for (std::size_t r = 0; r < rows; ++r)
            {
                const auto row = static_cast<std::size_t>(cache.category_rows[r]);
                for (std::size_t k = 0; k < e; ++k)
                    ge[row * e + k] += d_in[r * n_in + enc_dim + k];
            }
        }
        d_out.swap(d_in);
    }
}

std::vector<ad::Var> EmFieldNet::register_params(ad::Tape &tape) const
{
    std::vector<ad::Var> leaves;
    leaves.reserve(params_.size());
    for (double p : params_)
        leaves.push_back(tape.leaf(p));
    return leaves;
}

EmVars EmFieldNet::query(const Vec3 &q, int category, std::span<const ad::Var> param_leaves) const
{
    using ad::Var;
    if (param_leaves.size() != params_.size())
        throw std::invalid_argument("EmFieldNet::query: parameter leaf count mismatch");

    const auto enc = encoder_.encode(q);
    std::vector<Var> x(enc.begin(), enc.end());
    if (config_.use_categories)
    {
        const auto e = static_cast<std::size_t>(config_.embed_dim);
        const auto row = static_cast<std::size_t>(category_row(category));
        for (std::size_t k = 0; k < e; ++k)
            x.push_back(param_leaves[embed_off_ + row * e + k]);
    }

    for (std::size_t l = 0; l < num_layers(); ++l)
    {
        const auto n_in = static_cast<std::size_t>(layer_in_[l]);
        const auto n_out = static_cast<std::size_t>(layer_out_[l]);
        std::vector<Var> y(n_out);
        for (std::size_t o = 0; o < n_out; ++o)
        {
            Var acc = param_leaves[bias_off_[l] + o];
            for (std::size_t i = 0; i < n_in; ++i)
                if (x[i].is_const() && x[i].v == 0.0)
                    continue;
                else
                    acc = acc + x[i] * param_leaves[kernel_off_[l] + i * n_out + o];
            y[o] = acc;
        }
        if (l + 1 < num_layers())
            for (auto &v : y)
                if (!(v.v > 0.0))
                    v = Var(0.0);
        x = std::move(y);
    }
    return activation_map(std::array<Var, 4>{x[0], x[1], x[2], x[3]});
}

EmFieldNet init_net(std::uint64_t seed, const NetConfig &config, const FourierEncoder &encoder,
                    std::vector<int> category_labels)
{
    EmFieldNet net(config, encoder, std::move(category_labels));
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < net.num_layers(); ++l)
    {
        const double limit = std::sqrt(6.0 / net.layer_in(l));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (double &w : net.kernel(l))
            w = dist(rng);
    }
    if (config.use_categories)
    {
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        for (double &e : net.embeddings())
            e = dist(rng);
    }
    return net;
}

nlohmann::json net_to_json(const EmFieldNet &net)
{
    nlohmann::ordered_json j;
    const auto &c = net.config();
    j["arch"] = {{"hidden", c.hidden},
                 {"num_freqs", c.num_freqs},
                 {"use_categories", c.use_categories},
                 {"embed_dim", c.embed_dim},
                 {"category_labels", net.category_labels()}};
    const auto &b = net.encoder().bounds();
    j["encoder"] = {{"num_freqs", net.encoder().num_freqs()},
                    {"min", {b.min.x, b.min.y, b.min.z}},
                    {"max", {b.max.x, b.max.y, b.max.z}}};
    auto &layers = j["layers"] = nlohmann::ordered_json::array();
    for (std::size_t l = 0; l < net.num_layers(); ++l)
    {
        const auto k = net.kernel(l);
        const auto bb = net.bias(l);
        layers.push_back({{"in", net.layer_in(l)},
                          {"out", net.layer_out(l)},
                          {"kernel", std::vector<double>(k.begin(), k.end())},
                          {"bias", std::vector<double>(bb.begin(), bb.end())}});
    }
    const auto e = net.embeddings();
    j["embeddings"] = std::vector<double>(e.begin(), e.end());
    return j;
}

EmFieldNet net_from_json(const nlohmann::json &j)
{
    NetConfig c;
    const auto &a = j.at("arch");
    c.hidden = a.at("hidden").get<std::vector<int>>();
    c.num_freqs = a.at("num_freqs").get<int>();
    c.use_categories = a.at("use_categories").get<bool>();
    c.embed_dim = a.at("embed_dim").get<int>();
    const auto labels = a.at("category_labels").get<std::vector<int>>();
    const auto &e = j.at("encoder");
    const auto mn = e.at("min").get<std::vector<double>>();
    const auto mx = e.at("max").get<std::vector<double>>();
    FourierEncoder enc(e.at("num_freqs").get<int>(), Bounds{{mn[0], mn[1], mn[2]}, {mx[0], mx[1], mx[2]}});

    EmFieldNet net(c, enc, labels);
    const auto &layers = j.at("layers");
    if (layers.size() != net.num_layers())
        throw std::invalid_argument("checkpoint layer count does not match architecture");
    for (std::size_t l = 0; l < net.num_layers(); ++l)
    {
        const auto k = layers[l].at("kernel").get<std::vector<double>>();
        const auto b = layers[l].at("bias").get<std::vector<double>>();
        auto dk = net.kernel(l);
        auto db = net.bias(l);
        if (k.size() != dk.size() || b.size() != db.size())
            throw std::invalid_argument("checkpoint weight shape mismatch");
        std::copy(k.begin(), k.end(), dk.begin());
        std::copy(b.begin(), b.end(), db.begin());
    }
    const auto emb = j.at("embeddings").get<std::vector<double>>();
    auto de = net.embeddings();
    if (emb.size() != de.size())
        throw std::invalid_argument("checkpoint embedding shape mismatch");
    std::copy(emb.begin(), emb.end(), de.begin());
    return net;
}

// ---------------------------------------------------------------------------------------------
// Static tables

MaterialTable MaterialTable::from_truth(const SceneGeometry &scene)
{
    MaterialTable t;
    for (const auto &[k, m] : scene.truth_materials())
        t.entries[k] = {m.eps_r, m.sigma, m.s, m.k_chi};
    return t;
}

EmProperties table_lookup(const MaterialTable &table, const Facet &facet)
{
    if (const auto it = table.entries.find(facet.category); it != table.entries.end())
        return it->second;
    if (table.fallback)
        return *table.fallback;
    throw MaterialError("no material for category " + std::to_string(facet.category) + " of facet " +
                        std::to_string(facet.id));
}

EmProperties itu_material(const std::string &name, double fc_hz)
{
    struct Row
    {
        const char *name;
        double a, b, c, d, s, k_chi;
    };
    static constexpr Row rows[] = {
        {"concrete", 5.24, 0.0, 0.0462, 0.7822, 0.3, 0.1},     {"brick", 3.91, 0.0, 0.0238, 0.16, 0.3, 0.1},
        {"plasterboard", 2.73, 0.0, 0.0085, 0.9395, 0.2, 0.1}, {"wood", 1.99, 0.0, 0.0047, 1.0718, 0.2, 0.1},
        {"glass", 6.31, 0.0, 0.0036, 1.3394, 0.05, 0.05},      {"ceiling_board", 1.48, 0.0, 0.0011, 1.075, 0.2, 0.1},
        {"chipboard", 2.58, 0.0, 0.0217, 0.78, 0.2, 0.1},      {"floorboard", 3.66, 0.0, 0.0044, 1.3515, 0.2, 0.1},
        {"metal", 1.0, 0.0, 1e7, 0.0, 0.05, 0.05},
    };
    const double f_ghz = fc_hz / 1e9;
    for (const auto &r : rows)
        if (name == r.name)
            return {r.a * std::pow(f_ghz, r.b), r.c * std::pow(f_ghz, r.d), r.s, r.k_chi};
    throw MaterialError("unknown ITU material '" + name + "'");
}

} // namespace wedt
