// horolab: run one registered experiment and write results.csv + manifest.json.

#include "horolab/errors.hpp"
#include "horolab/harness.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

using horolab::ConfigError;
using horolab::ExperimentConfig;

namespace {

ExperimentConfig read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path + "' is not JSON: " + e.what());
    }
    return horolab::config_from_json(j);
}

std::uint64_t parse_seed(const std::string& text) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(text, &used, 10);
    } catch (const std::exception&) {
        used = 0;
    }
    if (text.empty() || used != text.size() || text[0] == '-') {
        throw ConfigError("seed must be a decimal u64, got '" + text + "'");
    }
    return v;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Horospherical foliation experiments on Schottky surfaces"};
    app.allow_extras(false);

    std::vector<std::string> positional;
    std::string config_path, preset, group_file, t_list, r_list, seed_text, out;
    int k = 0, threads = 0, frames = 0;
    double r0 = 0.0;
    bool list = false;

    app.add_option("experiment", positional, "[run] EXPERIMENT");
    app.add_option("--config", config_path, "JSON config or run manifest");
    auto* preset_opt = app.add_option("--preset", preset, "default, thin or asym");
    app.add_option("--group", group_file, "Schottky group JSON file")->excludes(preset_opt);
    app.add_option("--k", k, "word length cutoff");
    app.add_option("--t", t_list, "comma separated times (eN means e^N)");
    app.add_option("--r", r_list, "comma separated radii (eN means e^N)");
    app.add_option("--seed", seed_text, "decimal u64");
    app.add_option("--out", out, "output directory");
    app.add_option("--threads", threads, "worker threads");
    app.add_option("--frames", frames, "number of base frames");
    app.add_option("--r0", r0, "plaque / annulus radius");
    app.add_flag("--list", list, "list experiments and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (list) {
        for (const auto& name : horolab::experiment_names()) std::cout << name << '\n';
        return 0;
    }
    if (!positional.empty() && positional.front() == "run") positional.erase(positional.begin());

    ExperimentConfig c;
    try {
        if (!config_path.empty()) c = read_config_file(config_path);
        if (const char* env = std::getenv("HOROLAB_SEED")) c.seed = parse_seed(env);
        if (positional.size() > 1) throw ConfigError("expected one experiment name");
        if (!positional.empty()) c.experiment = positional.front();
        if (!preset.empty()) {
            c.preset = preset;
            c.group_file.clear();
        }
        if (!group_file.empty()) c.group_file = group_file;
        if (app.count("--k")) c.k = k;
        if (!t_list.empty()) c.t = horolab::parse_list(t_list);
        if (!r_list.empty()) c.r = horolab::parse_list(r_list);
        if (!seed_text.empty()) c.seed = parse_seed(seed_text);
        if (!out.empty()) c.out = out;
        if (app.count("--threads")) c.threads = threads;
        if (app.count("--frames")) c.frames = frames;
        if (app.count("--r0")) c.r0 = r0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
    return horolab::run(c, std::cerr);
}
