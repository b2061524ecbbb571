#pragma once

// Experiment configuration, the registered experiments and their artifacts
// (results CSV and run manifest).

#include "horolab/dynamics.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace horolab {

struct ExperimentConfig {
    std::string experiment;
    std::string preset = "default";
    std::string group_file; ///< overrides preset when non-empty
    int k = 12;
    int cylinder_depth = 4;
    int lebesgue_resolution = 512;
    double t_min = -3.0;
    double t_max = 3.0;
    double t_step = 0.05;
    std::vector<double> t = {2.0, 4.0, 6.0};
    std::vector<double> r = {403.4287934927351}; // e^6
    int frames = 3;
    double r0 = 1.0;
    std::optional<FlowBox> box; ///< transverse experiment; derived from the test suite when absent
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out = "horolab-out";
};

const std::vector<std::string>& experiment_names();

nlohmann::json to_json(const ExperimentConfig& c);
/// Missing fields keep their defaults; a run manifest is accepted through its
/// "config" member. Throws ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
/// Throws ConfigError unless every field is in range and the experiment is registered.
void validate(const ExperimentConfig& c);

/// FNV-1a 64 of the canonical JSON dump without `out` and `threads`, as 16
/// hex digits.
std::string config_hash(const ExperimentConfig& c);

/// "e6" -> e^6, otherwise a plain number. Throws ConfigError.
double parse_real(const std::string& text);
/// Comma separated list of parse_real values.
std::vector<double> parse_list(const std::string& text);

struct ResultRow {
    std::string experiment;
    std::string group_id;
    int frame_id = -1;
    double r = 0.0;
    double t = 0.0;
    std::string weighting;
    std::string phi_id;
    std::string psi_id;
    double value = 0.0;
    double target = 0.0;
    double rel_err = 0.0;
    std::size_t atoms = 0;
};

/// The configured group: the preset, or the JSON file when group_file is set.
/// Throws ConfigError.
SchottkyData load_group(const ExperimentConfig& c);

/// Runs the configured experiment in-process.
std::vector<ResultRow> run_experiment(const ExperimentConfig& c);

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows,
                       const ExperimentConfig& c);

/// Validates, runs, writes <out>/results.csv and <out>/manifest.json.
/// Returns 0 on success, 2 on configuration errors (nothing written),
/// 3 on numerical failures. Diagnostics go to `log`.
int run(const ExperimentConfig& c, std::ostream& log);

} // namespace horolab
