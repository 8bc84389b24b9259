#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
// End-to-end checks of the installed command-line tool: exit codes, file
// outputs, schemas, and byte-identical reruns. The binary and config paths
// arrive through AOISCHED_CLI and AOISCHED_CONFIGS (set by CTest).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;

std::string cli() {
    const char* path = std::getenv("AOISCHED_CLI");
    REQUIRE(path != nullptr);
    return path;
}

std::string config(const std::string& name) {
    const char* dir = std::getenv("AOISCHED_CONFIGS");
    REQUIRE(dir != nullptr);
    return (fs::path(dir) / name).string();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "aoisched_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run(const std::string& args) {
    const std::string command = cli() + " " + args + " > /dev/null 2> /dev/null";
    const int status = std::system(command.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("solve writes the declared files and exits zero") {
    const fs::path dir = fresh_dir("solve");
    const int rc = run("solve --config " + config("single_device.json") + " --out " +
                       dir.string());
    CHECK(rc == 0);

    const auto solve = nlohmann::json::parse(slurp(dir / "solve.json"));
    CHECK(solve["objective"] == "aoi");
    CHECK(solve["gain"].get<double>() > 1.0);
    CHECK(solve["gain"].get<double>() < 10.0);
    CHECK(solve.contains("iterations"));
    CHECK(solve.contains("residual"));
    CHECK(solve["per_device_avg_aoi"].size() == 1);
    CHECK(solve.contains("throughput_bits_per_slot"));

    std::istringstream policy(slurp(dir / "policy.csv"));
    std::string header;
    std::getline(policy, header);
    CHECK(header == "state_idx,b_1,h_1,a_1,action");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(policy, line)) ++rows;
    CHECK(rows == 1000);

    const auto manifest = nlohmann::json::parse(slurp(dir / "solve_manifest.json"));
    CHECK(manifest["command"] == "solve");
    CHECK(manifest["outputs"].size() == 2);
    CHECK(manifest["config_hash"].get<std::string>().size() == 16);
    CHECK(manifest.contains("duration_seconds"));
}

TEST_CASE("identical runs produce byte-identical data outputs") {
    const fs::path a = fresh_dir("repeat_a");
    const fs::path b = fresh_dir("repeat_b");
    const std::string base = "solve --config " + config("single_device.json") + " --out ";
    REQUIRE(run(base + a.string()) == 0);
    REQUIRE(run(base + b.string()) == 0);
    CHECK(slurp(a / "solve.json") == slurp(b / "solve.json"));
    CHECK(slurp(a / "policy.csv") == slurp(b / "policy.csv"));

    const fs::path sa = fresh_dir("sim_a"), sb = fresh_dir("sim_b");
    const std::string sim = "simulate --config " + config("single_device.json") +
                            " --horizon 20000 --seed 5 --out ";
    REQUIRE(run(sim + sa.string()) == 0);
    REQUIRE(run(sim + sb.string()) == 0);
    CHECK(slurp(sa / "simulate_summary.json") == slurp(sb / "simulate_summary.json"));
}

TEST_CASE("exit codes follow the error taxonomy") {
    const fs::path dir = fresh_dir("errors");

    SUBCASE("invalid config is exit 2") {
        const fs::path bad = dir / "bad.json";
        std::ofstream(bad) << "{\"slot_duration\": -1}";
        CHECK(run("solve --config " + bad.string() + " --out " + dir.string()) == 2);
    }
    SUBCASE("missing file is treated as an IO failure") {
        CHECK(run("solve --config /nonexistent.json --out " + dir.string()) == 1);
    }
    SUBCASE("capacity overflow is exit 3") {
        nlohmann::json big = nlohmann::json::parse(slurp(config("two_device.json")));
        big["channel_mode"] = "independent";  // squares the channel dimension
        const fs::path path = dir / "big.json";
        std::ofstream(path) << big.dump();
        CHECK(run("solve --config " + path.string() + " --out " + dir.string()) == 3);
    }
    SUBCASE("starved iteration budget is exit 4") {
        CHECK(run("solve --config " + config("single_device.json") +
                  " --tol 1e-14 --max-iter 2 --out " + dir.string()) == 4);
    }
}

TEST_CASE("validate reports derived values and warns about dead devices") {
    const fs::path dir = fresh_dir("validate");
    REQUIRE(run("validate --config " + config("single_device.json") + " --out " +
                dir.string()) == 0);
    const auto report = nlohmann::json::parse(slurp(dir / "validate.json"));
    CHECK(report["state_count"] == 1000);
    CHECK(report["per_device"][0]["tx_quanta"] ==
          nlohmann::json::parse("[12,4,3,2,2,1,1,1,1,1]"));
    CHECK(report["warnings"].empty());

    // a storage-free battery with big packets can never transmit: still exit
    // 0, but with a warning in the report and on the diagnostic stream
    nlohmann::json dead = nlohmann::json::parse(slurp(config("single_device.json")));
    dead["battery_levels"] = 1;
    const fs::path path = dir / "dead.json";
    std::ofstream(path) << dead.dump();
    const std::string err_file = (dir / "stderr.txt").string();
    const std::string command = cli() + " validate --config " + path.string() + " --out " +
                                dir.string() + " > /dev/null 2> " + err_file;
    REQUIRE(WEXITSTATUS(std::system(command.c_str())) == 0);
    const std::string diagnostics = slurp(err_file);
    CHECK(diagnostics.find("can never transmit") != std::string::npos);
}

TEST_CASE("region emits sweep, frontier and operating points") {
    const fs::path dir = fresh_dir("region");
    REQUIRE(run("region --config " + config("tiny_two_device.json") +
                " --grid 9 --refine 2 --threads 2 --out " + dir.string()) == 0);

    std::istringstream sweep(slurp(dir / "region_sweep.csv"));
    std::string header;
    std::getline(sweep, header);
    CHECK(header == "w_1,w_2,aoi_1,aoi_2,gain,label");
    std::size_t rows = 0, s_labels = 0, f_labels = 0;
    std::string line;
    while (std::getline(sweep, line)) {
        ++rows;
        const std::string label = line.substr(line.rfind(',') + 1);
        if (label.find('S') != std::string::npos) ++s_labels;
        if (label.find('F') != std::string::npos) ++f_labels;
    }
    CHECK(rows == 9);
    CHECK(s_labels == 1);
    CHECK(f_labels == 1);

    std::istringstream points(slurp(dir / "region_points.csv"));
    std::getline(points, header);
    rows = 0;
    while (std::getline(points, line)) ++rows;
    CHECK(rows == 2);  // S and the refined F
    CHECK(fs::exists(dir / "region_frontier.csv"));
}

TEST_CASE("metrics round-trips a trace through the summary CSVs") {
    const fs::path dir = fresh_dir("metrics");
    const fs::path trace = dir / "trace.csv";
    std::ofstream(trace) << "n,t_gen,t_recv\n1,0,1\n2,2,3\n3,4,5\n4,6,7\n";
    REQUIRE(run("metrics --trace " + trace.string() + " --from 1 --to 5 --out " +
                dir.string()) == 0);

    std::istringstream summary(slurp(dir / "metrics_summary.csv"));
    std::string line;
    std::getline(summary, line);
    CHECK(line == "metric,value");
    double average_aoi = -1.0, average_coud = -1.0;
    while (std::getline(summary, line)) {
        const auto comma = line.find(',');
        if (line.substr(0, comma) == "average_aoi")
            average_aoi = std::stod(line.substr(comma + 1));
        if (line.substr(0, comma) == "average_coud")
            average_coud = std::stod(line.substr(comma + 1));
    }
    CHECK(average_aoi == doctest::Approx(2.0));
    CHECK(average_coud == doctest::Approx(average_aoi));  // linear penalty

    std::istringstream packets(slurp(dir / "metrics_packets.csv"));
    std::getline(packets, line);
    CHECK(line == "n,X,T,A,voiu");

    CHECK(run("metrics --trace /nowhere.csv --out " + dir.string()) == 1);
    const fs::path bad = dir / "bad_trace.csv";
    std::ofstream(bad) << "n,t_gen,t_recv\n1,0,2\n2,1,1\n";
    CHECK(run("metrics --trace " + bad.string() + " --out " + dir.string()) == 1);
}

TEST_CASE("slice emits the action grid for requested ages") {
    const fs::path dir = fresh_dir("slice");
    REQUIRE(run("slice --config " + config("single_device.json") +
                " --aoi-slice 1,10 --out " + dir.string()) == 0);
    std::istringstream slice(slurp(dir / "slice.csv"));
    std::string header;
    std::getline(slice, header);
    CHECK(header == "aoi,battery,channel,action");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(slice, line)) ++rows;
    CHECK(rows == 2u * 10u * 10u);

    // a two-device slice relies on the fixing flags
    REQUIRE(run("slice --config " + config("tiny_two_device.json") +
                " --device 2 --aoi-slice 1 --fix-battery 0 --fix-channel 1 --out " +
                dir.string()) == 0);
    std::istringstream pair_slice(slurp(dir / "slice.csv"));
    std::getline(pair_slice, header);
    rows = 0;
    while (std::getline(pair_slice, line)) ++rows;
    CHECK(rows == 4u * 3u);
}
