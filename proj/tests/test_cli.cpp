#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "volcal_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

// Runs the tool with the working directory set to work_dir(); returns the exit status.
int volcal(const std::string& args) {
    const std::string cmd = "cd '" + work_dir().string() + "' && '" VOLCAL_EXE "' " + args + " > last.log 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string last_log() { return slurp(work_dir() / "last.log"); }

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    return n;
}

nlohmann::json manifest(const fs::path& dir) { return nlohmann::json::parse(slurp(work_dir() / dir / "run_manifest.json")); }

const char* kGen = "generate --n-train 60 --n-test 12 --seed 5 --out-dir data";
const char* kTrain = "train --data data/train.csv --hidden 16 --max-epochs 20 --patience 20";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors and help") {
    CHECK(volcal("--help") == 0);
    CHECK(last_log().find("generate") != std::string::npos);
    CHECK(volcal("generate --help") == 0);
    CHECK(last_log().find("1275") != std::string::npos);
    CHECK(volcal("--version") == 0);
    CHECK(volcal("") == 2);
    CHECK(volcal("frobnicate") == 2);
    CHECK(volcal("generate --n-train 0 --out-dir bad") == 2);
    CHECK(volcal("generate --model black76") == 2);
    CHECK(volcal("train --mode direct") == 2);
}

TEST_CASE("generate, train, calibrate and benchmark") {
    REQUIRE(volcal(kGen) == 0);
    CHECK(line_count(work_dir() / "data/train.csv") == 62);
    CHECK(line_count(work_dir() / "data/test.csv") == 14);
    const auto gen = manifest("data");
    CHECK(gen["command"] == "generate");
    CHECK(gen["grid_points"] == 88);
    CHECK(gen["seed"] == 5);

    REQUIRE(volcal(std::string(kTrain) + " --mode direct --out-dir m1") == 0);
    REQUIRE(volcal(std::string(kTrain) + " --mode pricing --out-dir m1") == 0);
    CHECK(fs::exists(work_dir() / "m1/direct.model"));
    CHECK(fs::exists(work_dir() / "m1/pricing.model"));
    CHECK(line_count(work_dir() / "m1/loss_curve.csv") == 21);

    REQUIRE(volcal("calibrate --method direct --model m1/direct.model --surfaces data/test.csv --out-dir c1") == 0);
    CHECK(line_count(work_dir() / "c1/parameters.csv") == 13);
    CHECK(volcal("calibrate --method two-step --surfaces data/test.csv --out-dir c2") == 2);
    CHECK(last_log().find("--pricing-model") != std::string::npos);
    CHECK(volcal("calibrate --method direct --model m1/pricing.model --surfaces data/test.csv --out-dir c2") == 2);
    CHECK(volcal("calibrate --method direct --model m1/missing.model --surfaces data/test.csv --out-dir c2") == 2);
    REQUIRE(volcal("calibrate --method two-step --pricing-model m1/pricing.model --surfaces data/test.csv "
                   "--restarts 2 --out-dir c2") == 0);
    CHECK(line_count(work_dir() / "c2/parameters.csv") == 13);

    REQUIRE(volcal("benchmark --train-data data/train.csv --test-data data/test.csv --direct-model m1/direct.model "
                   "--pricing-model m1/pricing.model --limit 10 --restarts 1 --out-dir report") == 0);
    CHECK(fs::exists(work_dir() / "report/summary.csv"));
    CHECK(fs::exists(work_dir() / "report/timing.csv"));
    CHECK(line_count(work_dir() / "report/scatter_two_step_test_p4.csv") == 11);
}

TEST_CASE("runs are reproducible from their manifest") {
    REQUIRE(volcal(kGen) == 0);
    REQUIRE(volcal(std::string(kTrain) + " --mode direct --out-dir m2") == 0);
    REQUIRE(volcal(std::string(kTrain) + " --mode direct --out-dir m3") == 0);
    CHECK(slurp(work_dir() / "m2/direct.model") == slurp(work_dir() / "m3/direct.model"));
    const std::string checksum = manifest("m2")["model_checksum"];

    // Re-run from the recorded configuration.
    auto cfg = manifest("m2");
    cfg["out-dir"] = "m4";
    {
        std::ofstream out(work_dir() / "m2.json");
        out << cfg.dump(2);
    }
    REQUIRE(volcal("train --config m2.json") == 0);
    CHECK(manifest("m4")["model_checksum"] == checksum);

    REQUIRE(volcal("train --config m2.json --seed 8 --out-dir m5") == 0);
    CHECK(manifest("m5")["model_checksum"] != checksum);

    cfg["bogus"] = 1;
    {
        std::ofstream out(work_dir() / "bad.json");
        out << cfg.dump(2);
    }
    CHECK(volcal("train --config bad.json") == 2);
}

TEST_CASE("seed from the environment") {
    REQUIRE(volcal("generate --n-train 3 --n-test 1 --out-dir e1") == 0);
    REQUIRE(std::system(("cd '" + work_dir().string() + "' && VOLCAL_SEED=5 '" VOLCAL_EXE
                         "' generate --n-train 3 --n-test 1 --out-dir e2 > /dev/null 2>&1")
                            .c_str()) == 0);
    CHECK(manifest("e2")["seed"] == 5);
    CHECK(slurp(work_dir() / "e1/train.csv") != slurp(work_dir() / "e2/train.csv"));
}

}  // TEST_SUITE
