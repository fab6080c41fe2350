// End-to-end checks of the command-line tool: exit codes and output files.
// The binary path comes from the ACCOSIM_BIN environment variable (set by
// ctest).

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

std::string bin() {
    const char* p = std::getenv("ACCOSIM_BIN");
    REQUIRE(p != nullptr);
    return p;
}

int run_cmd(const std::string& args) {
    std::string cmd = bin() + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() /
               ("accosim_cli_" + std::to_string(std::rand()));
    std::filesystem::create_directories(dir);
    return dir;
}

void write(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

const char* kGoodConfig = R"({
  "problem": {"kind": "quadratic", "dimension": 3, "l_smooth": 1.0, "mu": 0.2,
              "noise_sigma": 0.2, "seed": 3},
  "method_name": "acco",
  "optimizer": {"kind": "sgd", "learning_rate": 0.2},
  "n_workers": 2,
  "batch_size": 2,
  "t_updates": 6,
  "master_seed": 9
})";

}  // namespace

TEST_CASE("run writes outputs and exits 0") {
    auto dir = temp_dir();
    write(dir / "cfg.json", kGoodConfig);
    int code = run_cmd("run --config " + (dir / "cfg.json").string() + " --out " +
                       (dir / "out").string());
    CHECK(code == 0);
    CHECK(std::filesystem::exists(dir / "out" / "metrics.csv"));
    CHECK(std::filesystem::exists(dir / "out" / "timeline.csv"));
    CHECK(std::filesystem::exists(dir / "out" / "manifest.json"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("invalid config exits 2") {
    auto dir = temp_dir();
    write(dir / "bad.json", R"({"method_name": "acco", "t_updates": 0})");
    CHECK(run_cmd("run --config " + (dir / "bad.json").string() + " --out " +
                  (dir / "out").string()) == 2);
    write(dir / "nojson.json", "not json at all");
    CHECK(run_cmd("run --config " + (dir / "nojson.json").string()) == 2);
    CHECK(run_cmd("run --config " + (dir / "missing.json").string()) == 2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("diverging run exits 3 but still writes partial outputs") {
    auto dir = temp_dir();
    write(dir / "cfg.json", R"({
      "problem": {"kind": "quadratic", "dimension": 1, "l_smooth": 1.0, "mu": 1.0},
      "method_name": "ddp",
      "optimizer": {"kind": "sgd", "learning_rate": 1e8},
      "t_updates": 200
    })");
    CHECK(run_cmd("run --config " + (dir / "cfg.json").string() + " --out " +
                  (dir / "out").string()) == 3);
    CHECK(std::filesystem::exists(dir / "out" / "metrics.csv"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("sweep aggregates seeds") {
    auto dir = temp_dir();
    write(dir / "cfg.json", kGoodConfig);
    int code = run_cmd("sweep --config " + (dir / "cfg.json").string() +
                       " --seeds 1,2,3 --out " + (dir / "sweep").string());
    CHECK(code == 0);
    std::ifstream csv(dir / "sweep" / "sweep.csv");
    REQUIRE(csv.good());
    std::string header;
    std::getline(csv, header);
    CHECK(header == "update,mean_loss,std_loss,n_seeds");
    int rows = 0;
    for (std::string line; std::getline(csv, line);) ++rows;
    CHECK(rows == 6);
    std::filesystem::remove_all(dir);
}

TEST_CASE("repeated seeds give zero spread and the single-run mean") {
    auto dir = temp_dir();
    write(dir / "cfg.json", kGoodConfig);
    REQUIRE(run_cmd("sweep --config " + (dir / "cfg.json").string() + " --seeds 5,5,5 --out " +
                    (dir / "s3").string()) == 0);
    REQUIRE(run_cmd("sweep --config " + (dir / "cfg.json").string() + " --seeds 5 --out " +
                    (dir / "s1").string()) == 0);
    auto read_all = [](const std::filesystem::path& p) {
        std::ifstream in(p);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };
    std::string three = read_all(dir / "s3" / "sweep.csv");
    std::string one = read_all(dir / "s1" / "sweep.csv");
    // identical means, std column all zeros in both
    std::istringstream a(three), b(one);
    std::string la, lb;
    std::getline(a, la);
    std::getline(b, lb);
    while (std::getline(a, la) && std::getline(b, lb)) {
        auto cut = [](const std::string& s, int field) {
            std::size_t pos = 0;
            for (int f = 0; f < field; ++f) pos = s.find(',', pos) + 1;
            return s.substr(pos, s.find(',', pos) - pos);
        };
        CHECK(cut(la, 1) == cut(lb, 1));  // mean_loss
        CHECK(std::strtod(cut(la, 2).c_str(), nullptr) == 0.0);
        CHECK(std::strtod(cut(lb, 2).c_str(), nullptr) == 0.0);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("ACCOSIM_OUT provides the default output root") {
    auto dir = temp_dir();
    write(dir / "cfg.json", kGoodConfig);
    std::string cmd = "ACCOSIM_OUT=" + (dir / "root").string() + " " + bin() +
                      " run --config " + (dir / "cfg.json").string() + " > /dev/null 2>&1";
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    bool found = false;
    for (const auto& e : std::filesystem::directory_iterator(dir / "root"))
        found = found || std::filesystem::exists(e.path() / "metrics.csv");
    CHECK(found);
    std::filesystem::remove_all(dir);
}

TEST_CASE("verify exits 0 on a passing suite and 2 on unknown names") {
    CHECK(run_cmd("verify --suite memory") == 0);
    CHECK(run_cmd("verify --suite no-such-suite") == 2);
}

TEST_CASE("memory subcommand prints the model") {
    auto dir = temp_dir();
    std::string cmd = bin() + " memory --method acco --k 12 --n 64 --psi 7.5e9 > " +
                      (dir / "mem.json").string() + " 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    std::ifstream in(dir / "mem.json");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text.find("\"gb\": 46") != std::string::npos);
    CHECK(text.find("bytes") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("shipped example configs run clean") {
    const char* dir = std::getenv("ACCOSIM_CONFIGS");
    REQUIRE(dir != nullptr);
    auto out = temp_dir();
    int count = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        CHECK(run_cmd("run --config " + entry.path().string() + " --out " +
                      (out / entry.path().stem()).string()) == 0);
        ++count;
    }
    CHECK(count >= 4);
    std::filesystem::remove_all(out);
}

TEST_CASE("missing subcommand is a usage error") { CHECK(run_cmd("") == 2); }
