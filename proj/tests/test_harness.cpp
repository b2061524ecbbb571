#include "horolab/errors.hpp"
#include "horolab/harness.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace horolab;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("horolab-test-" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("real numbers and lists parse with the e-shorthand") {
    CHECK(parse_real("e6") == doctest::Approx(std::exp(6.0)).epsilon(1e-15));
    CHECK(parse_real("2.5") == 2.5);
    CHECK(parse_real("-1e-3") == -1e-3);
    CHECK_THROWS_AS(parse_real("six"), ConfigError);
    CHECK_THROWS_AS(parse_real(""), ConfigError);
    const auto l = parse_list("2,4, e1");
    REQUIRE(l.size() == 3);
    CHECK(l[2] == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("configs round-trip through JSON and reject unknown fields") {
    ExperimentConfig c;
    c.experiment = "mixing";
    c.k = 10;
    c.t = {1.0, 3.0};
    const ExperimentConfig back = config_from_json(to_json(c));
    CHECK(back.experiment == "mixing");
    CHECK(back.k == 10);
    CHECK(back.t == c.t);
    CHECK(config_hash(back) == config_hash(c));

    nlohmann::json manifest;
    manifest["config"] = to_json(c);
    manifest["rows"] = 3;
    CHECK(config_from_json(manifest).k == 10);

    nlohmann::json bad = to_json(c);
    bad["kk"] = 3;
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
}

TEST_CASE("validation and hashing") {
    ExperimentConfig c;
    c.experiment = "mixing";
    CHECK_NOTHROW(validate(c));
    ExperimentConfig bad = c;
    bad.experiment = "nope";
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = c;
    bad.k = 2;
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = c;
    bad.frames = 0;
    CHECK_THROWS_AS(validate(bad), ConfigError);

    const std::string h = config_hash(c);
    CHECK(h.size() == 16);
    ExperimentConfig other = c;
    other.threads = 4;
    other.out = "elsewhere";
    CHECK(config_hash(other) == h);
    other.seed = 2;
    CHECK(config_hash(other) != h);
    CHECK(experiment_names().size() == 12);
}

TEST_CASE("configuration errors exit 2 and write nothing") {
    std::ostringstream log;
    ExperimentConfig c;
    c.experiment = "no-such-experiment";
    c.out = scratch_dir("unknown").string();
    CHECK(run(c, log) == 2);
    CHECK_FALSE(fs::exists(c.out));

    c.experiment = "lebesgue-cocycle";
    c.k = 1;
    CHECK(run(c, log) == 2);
    CHECK_FALSE(fs::exists(c.out));
}

TEST_CASE("runs are byte-reproducible") {
    ExperimentConfig c;
    c.experiment = "lebesgue-cocycle";
    c.k = 8;
    std::ostringstream log;
    c.out = scratch_dir("rep-a").string();
    REQUIRE(run(c, log) == 0);
    const std::string a = slurp(fs::path(c.out) / "results.csv");
    c.out = scratch_dir("rep-b").string();
    REQUIRE(run(c, log) == 0);
    const std::string b = slurp(fs::path(c.out) / "results.csv");
    CHECK(a == b);
    CHECK(a.rfind("experiment,group_id,frame_id,r,t,weighting,phi_id,psi_id,value,target,rel_err,atoms,seed,config_hash\n", 0) == 0);

    const auto manifest = nlohmann::json::parse(slurp(fs::path(c.out) / "manifest.json"));
    CHECK(manifest.at("config_hash").get<std::string>() == config_hash(c));
    CHECK(config_from_json(manifest).experiment == "lebesgue-cocycle");
}

TEST_CASE("a leaky flow box is a numerical failure") {
    ExperimentConfig c;
    c.experiment = "transverse";
    c.k = 8;
    c.cylinder_depth = 3;
    c.frames = 1;
    c.r = {20.0};
    c.r0 = 1000.0;
    c.out = scratch_dir("leaky").string();
    std::ostringstream log;
    CHECK(run(c, log) == 3);
}
