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


#include "wedt/diffgraph.hpp"

#include <algorithm>

namespace wedt::ad
{

Gradient backward(const Tape &tape, const Var &root)
{
    std::vector<double> adj;
    if (root.is_const())
        return Gradient(std::vector<double>(tape.size(), 0.0));
    const std::pair<std::int32_t, double> seed{root.id, 1.0};
    backward_seeded(tape, std::span(&seed, 1), adj);
    return Gradient(std::move(adj));
}

void backward_seeded(const Tape &tape, std::span<const std::pair<std::int32_t, double>> seeds, std::vector<double> &adj)
{
    adj.assign(tape.size(), 0.0);
    std::int32_t top = -1;
    for (const auto &[id, s] : seeds)
    {
        adj[static_cast<std::size_t>(id)] += s;
        top = std::max(top, id);
    }
    for (std::int32_t i = top; i >= 0; --i)
    {
        const double a = adj[static_cast<std::size_t>(i)];
        if (a == 0.0)
            continue;
        const auto parents = tape.parents(i);
        const auto partials = tape.partials(i);
        for (std::size_t k = 0; k < parents.size(); ++k)
            adj[static_cast<std::size_t>(parents[k])] += partials[k] * a;
    }
}

Var custom(Tape &tape, double value, std::span<const Var> parents, std::span<const double> partials)
{
    if (parents.size() != partials.size())
        throw std::invalid_argument("custom node: parents/partials size mismatch");
    std::vector<std::int32_t> ids;
    std::vector<double> d;
    ids.reserve(parents.size());
    d.reserve(parents.size());
    for (std::size_t i = 0; i < parents.size(); ++i)
    {
        if (parents[i].is_const())
            continue;
        if (parents[i].tape != &tape)
            throw std::logic_error("custom node parent lives on a different tape");
        ids.push_back(parents[i].id);
        d.push_back(partials[i]);
    }
    return tape.push_span(Op::Custom, value, ids, d);
}

FdReport finite_diff_check(const ScalarFn &f, std::span<const double> point, double h)
{
    FdReport rep;
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(point.size());
    for (double x : point)
        leaves.push_back(tape.leaf(x));
    const Var root = f(leaves);
    const Gradient g = backward(tape, root);

    std::vector<Var> probe(point.begin(), point.end());
    for (std::size_t i = 0; i < point.size(); ++i)
    {
        probe[i] = Var(point[i] + h);
        const double fp = f(probe).v;
        probe[i] = Var(point[i] - h);
        const double fm = f(probe).v;
        probe[i] = Var(point[i]);

        const double fd = (fp - fm) / (2.0 * h);
        const double an = g[leaves[i]];
        rep.analytic.push_back(an);
        rep.numeric.push_back(fd);
        const double err = std::abs(an - fd);
        const double scale = std::max(std::abs(an), std::abs(fd));
        rep.max_abs_error = std::max(rep.max_abs_error, err);
        if (scale > 1e-300)
            rep.max_rel_error = std::max(rep.max_rel_error, err / scale);
    }
    return rep;
}

} // namespace wedt::ad
