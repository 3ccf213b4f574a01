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


// wedt: command line front end for the file-based calibration pipeline.

#include "wedt/pipeline.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace wedt;

namespace
{

struct GlobalArgs
{
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
};

RunConfig load_config(const GlobalArgs &g)
{
    RunConfig c;
    if (!g.config_path.empty())
    {
        std::ifstream f(g.config_path);
        if (!f)
            throw PipelineError("cannot open config '" + g.config_path + "'");
        nlohmann::json j;
        try
        {
            j = nlohmann::json::parse(f);
        }
        catch (const nlohmann::json::parse_error &e)
        {
            throw PipelineError(std::string("config is not valid JSON: ") + e.what());
        }
        c = config_from_json(j, fs::path(g.config_path).parent_path().string());
    }
    if (g.seed)
        c.seed = *g.seed;
    if (!g.out.empty())
        c.output = g.out;
    return c;
}

Vec3 parse_tx(const std::vector<double> &v)
{
    if (v.size() != 3)
        throw PipelineError("--tx expects three coordinates");
    return {v[0], v[1], v[2]};
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"wedt: wireless environment digital twin calibration toolkit"};
    app.require_subcommand(1);

    GlobalArgs g;
    app.add_option("-c,--config", g.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "override the root seed");
    app.add_option("-o,--out", g.out, "output directory (overrides the config)");

    std::string scene_name = "shoebox";
    auto *gen = app.add_subcommand("gen-scene", "write a built-in synthetic scene with its truth materials");
    gen->add_option("name", scene_name, "scene name (shoebox, split_wall, ground)");

    std::vector<double> tx;
    bool neutral = false;
    std::string stem, truth = "truth", prediction = "predict";

    auto *sim = app.add_subcommand("simulate-truth", "trace the evaluation grid under the truth materials");
    sim->add_option("--tx", tx, "transmitter position x y z")->expected(3);
    sim->add_option("--name", stem, "output stem (default truth)");

    auto *sample = app.add_subcommand("sample", "draw sparse measurements from the truth dataset");
    auto *bcm = app.add_subcommand("build-bcm", "build the Bayesian channel map from the samples");
    auto *cal = app.add_subcommand("calibrate", "fit the material field to the channel map");

    auto *pred = app.add_subcommand("predict", "simulate the grid with the calibrated (or neutral) field");
    pred->add_option("--tx", tx, "transmitter position x y z")->expected(3);
    pred->add_flag("--neutral", neutral, "use the untrained field and no bias");
    pred->add_option("--name", stem, "output stem (default predict)");

    auto *eval = app.add_subcommand("evaluate", "compare a prediction against a truth dataset");
    eval->add_option("--truth", truth, "truth dataset stem");
    eval->add_option("--prediction", prediction, "prediction dataset stem");
    eval->add_option("--name", stem, "metrics stem (default metrics)");

    auto *exp = app.add_subcommand("export-map", "render a dataset as a gain map");
    exp->add_option("--prediction", prediction, "dataset stem");
    exp->add_option("--name", stem, "output stem (default <dataset>_map)");

    CLI11_PARSE(app, argc, argv);

    try
    {
        const RunConfig config = load_config(g);
        StageOptions o;
        if (!tx.empty())
            o.tx = parse_tx(tx);
        o.neutral = neutral;
        o.name = stem;
        o.truth = truth;
        o.prediction = prediction;

        if (*gen)
            stage_gen_scene(config, scene_name);
        else if (*sim)
            stage_simulate_truth(config, o);
        else if (*sample)
            stage_sample(config);
        else if (*bcm)
            stage_build_bcm(config);
        else if (*cal)
            stage_calibrate(config);
        else if (*pred)
            stage_predict(config, o);
        else if (*eval)
        {
            stage_evaluate(config, o);
            const std::string file = (o.name.empty() ? "metrics" : o.name) + ".json";
            std::ifstream f(fs::path(config.output) / file);
            std::printf("%s", std::string(std::istreambuf_iterator<char>(f), {}).c_str());
        }
        else if (*exp)
            stage_export_map(config, o);
    }
    catch (const std::exception &e)
    {
        std::fprintf(stderr, "wedt: error: %s\n", e.what());
        return 1;
    }
    return 0;
}
