#include "stabledrift/cli.hpp"
#include "stabledrift/config.hpp"
#include "stabledrift/errors.hpp"
#include "stabledrift/io.hpp"
#include "stabledrift/validate.hpp"

#include "doctest.h"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sdrift;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("sdrift_cli_test") / name;
    fs::remove_all(p);
    fs::create_directories(p.parent_path());
    return p;
}

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "stabledrift");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream is(slurp(p));
    for (std::string line; std::getline(is, line);) {
        rows.emplace_back();
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) rows.back().push_back(cell);
    }
    return rows;
}

}  // namespace

TEST_CASE("density at t = 1, x = 0 reproduces the closed form") {
    const auto dir = scratch("density");
    const auto r = run({"density", "--out", dir.string(), "--x", "0,0.5"});
    REQUIRE(r.code == 0);
    const auto rows = csv(dir / "density.csv");
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == std::vector<std::string>{"x", "p", "grad_norm"});
    const double p0 = std::stod(rows[1][1]);
    CHECK(std::fabs(p0 - std::tgamma(5.0 / 3.0) / M_PI) < 1e-12);
    CHECK(std::fabs(p0 - 0.287338) < 2e-5);
    // 17 significant digits, scientific
    CHECK(rows[1][1].size() == std::string("2.8735275145216399e-01").size());
    CHECK(rows[1][1].find('e') != std::string::npos);
}

TEST_CASE("density rejects t = 0 with the configuration exit code") {
    const auto r = run({"density", "--out", scratch("density_t0").string(), "--t", "0"});
    CHECK(r.code == kExitConfigError);
    CHECK(r.err.find("t must be > 0") != std::string::npos);
}

TEST_CASE("two runs with the same config produce identical bytes") {
    const auto a = scratch("det_a"), b = scratch("det_b");
    REQUIRE(run({"density", "--out", a.string()}).code == 0);
    REQUIRE(run({"density", "--out", b.string()}).code == 0);
    CHECK(slurp(a / "density.csv") == slurp(b / "density.csv"));
    CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
}

TEST_CASE("config errors name the field and line, and exit with 2") {
    const auto dir = scratch("cfg");
    fs::create_directories(dir);
    std::ofstream(dir / "bad.ini") << "[model]\nd = 1\n\n[drift]\nkind = sin\namplitude = half\n";
    auto r = run({"density", "--config", (dir / "bad.ini").string(), "--out", (dir / "o").string()});
    CHECK(r.code == kExitConfigError);
    CHECK(r.err.find("drift.amplitude") != std::string::npos);
    CHECK(r.err.find("bad.ini:6") != std::string::npos);

    std::ofstream(dir / "unknown.ini") << "[grid]\nhh = 0.1\n";
    r = run({"density", "--config", (dir / "unknown.ini").string(), "--out", (dir / "o").string()});
    CHECK(r.code == kExitConfigError);
    CHECK(r.err.find("grid.hh") != std::string::npos);

    r = run({"density", "--set", "model.alpha=2.5", "--out", (dir / "o").string()});
    CHECK(r.code == kExitConfigError);
    CHECK(r.err.find("model.alpha") != std::string::npos);

    r = run({"nonsense"});
    CHECK(r.code == kExitConfigError);
}

TEST_CASE("flags win over file values") {
    const auto dir = scratch("flags");
    fs::create_directories(dir);
    std::ofstream(dir / "c.ini") << "[run]\nseed = 5\nthreads = 2\n[density]\nt = 2\n";
    const auto r = run({"density", "--config", (dir / "c.ini").string(), "--seed", "9", "--t", "0.5", "--out",
                        (dir / "o").string()});
    REQUIRE(r.code == 0);
    const auto c = cli::load_config((dir / "o" / "config.resolved.ini").string());
    CHECK(c.seed == 9);
    CHECK(c.threads == 2);
    CHECK(c.density.t == 0.5);
}

TEST_CASE("resolved config text parses back to itself") {
    const auto c = cli::parse_config_text("[drift]\nkind = gaussian_bump\nsigma = 0.3\n[simulate]\nlevy_rho = 1, 2, 4\n");
    const auto text = cli::resolved_text(c);
    CHECK(cli::resolved_text(cli::parse_config_text(text)) == text);
    CHECK(c.simulate.levy_rho.size() == 3);
    CHECK(c.field().kind() == kato::DriftKind::gaussian_bump);
}

TEST_CASE("manifest hashes every artifact") {
    const auto dir = scratch("manifest");
    REQUIRE(run({"density", "--out", dir.string()}).code == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(j.at("schema_version") == 1);
    CHECK(j.at("config_hash") == io::sha256_hex(slurp(dir / "config.resolved.ini")));
    for (const auto& f : j.at("files")) CHECK(f.at("sha256") == io::sha256_file((dir / f.at("name").get<std::string>()).string()));
    CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("kernel command: zero drift passes the identity report; injected failure exits 1") {
    const auto dir = scratch("kernel");
    auto r = run({"kernel", "--out", dir.string(), "--set", "grid.horizon=0.25"});
    INFO(r.out << r.err);
    CHECK(r.code == 0);
    const auto rep = validate::from_json_string(slurp(dir / "report_identity.json"));
    CHECK(rep.passed());
    CHECK(fs::file_size(dir / "kernel.bin") > 0);

    const auto bad = scratch("kernel_bad");
    r = run({"kernel", "--out", bad.string(), "--set", "grid.horizon=0.25", "--set", "validate.inject_failure=true"});
    CHECK(r.code == kExitValidationFailure);
    CHECK(fs::exists(bad / "manifest.json"));
}

TEST_CASE("resolvent command tabulates lambda0 with factor 8 per doubling") {
    const auto dir = scratch("resolvent");
    const auto r = run({"resolvent", "--out", dir.string(), "--set", "drift.kind=constant", "--set", "drift.value=0.5",
                        "--set", "resolvent.lambda0_scan=0.25,0.5,1"});
    REQUIRE(r.code == 0);
    const auto rows = csv(dir / "lambda0_table.csv");
    REQUIRE(rows.size() == 4);
    for (int i : {2, 3}) CHECK(std::stod(rows[i][2]) == doctest::Approx(8.0).epsilon(0.03));
    const auto res = csv(dir / "resolvent.csv");
    CHECK(res.size() == 4);
}

TEST_CASE("simulate command is reproducible from the seed") {
    const auto a = scratch("sim_a"), b = scratch("sim_b"), c = scratch("sim_c");
    const std::vector<std::string> common = {"--set", "simulate.n_paths=2000", "--set", "simulate.dt=0.02"};
    auto args = [&](const fs::path& d, const std::string& seed) {
        std::vector<std::string> v = {"simulate", "--out", d.string(), "--seed", seed};
        v.insert(v.end(), common.begin(), common.end());
        return v;
    };
    REQUIRE(run(args(a, "3")).code == 0);
    REQUIRE(run(args(b, "3")).code == 0);
    REQUIRE(run(args(c, "4")).code != kExitConfigError);
    CHECK(slurp(a / "paths.bin") == slurp(b / "paths.bin"));
    CHECK(slurp(a / "paths.bin") != slurp(c / "paths.bin"));
    const auto rep = validate::from_json_string(slurp(a / "report_simulate.json"));
    CHECK(rep.find("ks_vs_exact_cdf") != nullptr);
}

TEST_CASE("validate command: zero drift identity and noise suites pass, injected failure exits 1") {
    const auto dir = scratch("validate");
    auto r = run({"validate", "--out", dir.string(), "--set", "grid.horizon=0.25", "--set", "validate.suites=identity,noise",
                  "--set", "validate.noise_paths=4000"});
    INFO(r.out << r.err);
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "report_identity.json"));
    CHECK(fs::exists(dir / "report_noise.txt"));
    const auto bad = scratch("validate_bad");
    r = run({"validate", "--out", bad.string(), "--set", "grid.horizon=0.25", "--set", "validate.inject_failure=true"});
    CHECK(r.code == kExitValidationFailure);
}
