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

#include "wedt/diffgraph.hpp"
#include "wedt/geometry.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace wedt
{

/// Effective EM properties of a surface point.
struct EmProperties
{
    double eps_r = 2.0; // relative permittivity, >= 1
    double sigma = 1.0; // conductivity [S/m], >= 0
    double s = 0.5;     // scattering coefficient, [0, 1]
    double k_chi = 0.5; // cross-polarization discrimination factor, [0, 1]

    bool valid() const { return eps_r >= 1.0 && sigma >= 0.0 && s >= 0.0 && s <= 1.0 && k_chi >= 0.0 && k_chi <= 1.0; }
};

/// Tape-carried counterpart of EmProperties.
struct EmVars
{
    ad::Var eps_r, sigma, s, k_chi;

    static EmVars constant(const EmProperties &p) { return {p.eps_r, p.sigma, p.s, p.k_chi}; }
    EmProperties value() const { return {eps_r.v, sigma.v, s.v, k_chi.v}; }
};

/// eps_r = 1 + exp(r0), sigma = exp(r1), s = sigmoid(r2), k_chi = sigmoid(r3).
EmProperties activation_map(const std::array<double, 4> &raw);
EmVars activation_map(const std::array<ad::Var, 4> &raw);

/// Coordinate normalization to [-1, 1]^3 followed by sin/cos octaves.
class FourierEncoder
{
  public:
    FourierEncoder() = default;
    /// Degenerate axes (extent below 1e-6 m) are padded by +-0.5 m.
    FourierEncoder(int num_freqs, const Bounds &bounds);

    int num_freqs() const { return num_freqs_; }
    const Bounds &bounds() const { return bounds_; }
    int dim() const { return 3 + 6 * num_freqs_; }

    /// Writes dim() features: u_x, u_y, u_z, then per octave k: sin/cos(2^k pi u_d) for d = x, y, z.
    void encode(const Vec3 &q, std::span<double> out) const;
    std::vector<double> encode(const Vec3 &q) const;

  private:
    int num_freqs_ = 8;
    Bounds bounds_{{-1, -1, -1}, {1, 1, 1}};
};

struct NetConfig
{
    std::vector<int> hidden = {128, 128, 128};
    int num_freqs = 8;
    bool use_categories = false;
    int embed_dim = 8;
};

/// Intermediate activations kept for the batched backward pass.
struct ForwardCache
{
    std::size_t rows = 0;
    std::vector<std::vector<double>> inputs; // per layer: rows x in
    std::vector<int> category_rows;
    std::vector<double> raw; // rows x 4
};

/// Coordinate MLP producing the four EM properties. All trainables live in one flat
/// parameter vector: per layer the kernel [in x out] row-major then the bias, followed
/// by the category embedding table.
class EmFieldNet
{
  public:
    EmFieldNet() = default;
    EmFieldNet(const NetConfig &config, FourierEncoder encoder, std::vector<int> category_labels = {});

    const NetConfig &config() const { return config_; }
    const FourierEncoder &encoder() const { return encoder_; }
    const std::vector<int> &category_labels() const { return category_labels_; }
    int input_dim() const;
    std::size_t num_layers() const { return layer_in_.size(); }
    int layer_in(std::size_t l) const { return layer_in_[l]; }
    int layer_out(std::size_t l) const { return layer_out_[l]; }

    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }
    std::size_t num_params() const { return params_.size(); }

    std::span<double> kernel(std::size_t l);
    std::span<const double> kernel(std::size_t l) const;
    std::span<double> bias(std::size_t l);
    std::span<const double> bias(std::size_t l) const;
    std::span<double> embeddings();
    std::span<const double> embeddings() const;

    /// Row of the embedding table for a category label (unknown labels share the last row).
    int category_row(int category) const;

    std::array<double, 4> raw(const Vec3 &q, int category = -1) const;
    EmProperties query(const Vec3 &q, int category = -1) const;

    /// Fully taped evaluation; `param_leaves` must come from register_params on the same tape.
    EmVars query(const Vec3 &q, int category, std::span<const ad::Var> param_leaves) const;
    std::vector<ad::Var> register_params(ad::Tape &tape) const;

    void forward_batch(std::span<const Vec3> points, std::span<const int> categories, ForwardCache &cache) const;
    /// Accumulates dLoss/dparams into `grad` given dLoss/draw (rows x 4).
    void backward_batch(const ForwardCache &cache, std::span<const double> d_raw, std::span<double> grad) const;

  private:
    void build_input(const Vec3 &q, int category, std::span<double> out) const;

    NetConfig config_;
    FourierEncoder encoder_;
    std::vector<int> category_labels_;
    std::vector<int> layer_in_, layer_out_;
    std::vector<std::size_t> kernel_off_, bias_off_;
    std::size_t embed_off_ = 0;
    std::vector<double> params_;
};

/// He-uniform hidden kernels, zero biases, zero output layer (neutral field (2, 1, 0.5, 0.5)).
EmFieldNet init_net(std::uint64_t seed, const NetConfig &config, const FourierEncoder &encoder,
                    std::vector<int> category_labels = {});

nlohmann::json net_to_json(const EmFieldNet &net);
EmFieldNet net_from_json(const nlohmann::json &j);

class MaterialError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Static category -> properties assignment with an optional default entry.
struct MaterialTable
{
    std::map<int, EmProperties> entries;
    std::optional<EmProperties> fallback;

    static MaterialTable uniform(const EmProperties &p) { return {{}, p}; }
    static MaterialTable from_truth(const SceneGeometry &scene);
};

EmProperties table_lookup(const MaterialTable &table, const Facet &facet);

/// ITU-R P.2040 style reference material (eps = a f^b, sigma = c f^d, f in GHz) with authored
/// scattering/XPD values. Known names: concrete, brick, plasterboard, wood, glass, ceiling_board,
/// chipboard, floorboard, metal.
EmProperties itu_material(const std::string &name, double fc_hz);

} // namespace wedt
