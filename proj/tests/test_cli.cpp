#include <ahofm/dataset.hpp>
#include <ahofm/model_io.hpp>

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Sandbox
{
    fs::path dir;
    Sandbox()
    {
        dir = fs::temp_directory_path() / ("ahofm_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(dir);
    }
    ~Sandbox() { fs::remove_all(dir); }
    std::string operator()(const std::string& name) const { return (dir / name).string(); }

    /// Runs the CLI with stdout/stderr captured; returns the exit status.
    int run(const std::string& args, std::string* out = nullptr) const
    {
        const auto log = (dir / "stdout.txt").string();
        const auto cmd = std::string(AHOFM_CLI_PATH) + " " + args + " > " + log + " 2> " + (dir / "stderr.txt").string();
        const int raw = std::system(cmd.c_str());
        if (out) *out = read(log);
        return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    }

    static std::string read(const std::string& path)
    {
        std::ifstream in(path);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }
};

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n') + 1); }

} // namespace

TEST_CASE("exit codes")
{
    Sandbox sb;
    CHECK(sb.run("") == 2);
    CHECK(sb.run("frobnicate") == 2);
    CHECK(sb.run("fit") == 2);
    CHECK(sb.run("fit --data " + sb("missing.csv")) == 2);
    CHECK(sb.run("--help") == 0);
    CHECK(sb.run("simulate --kind nonsense --out " + sb("x.csv")) == 1);
}

TEST_CASE("simulate, fit, predict, effects round trip")
{
    Sandbox sb;
    REQUIRE(sb.run("simulate --kind bivariate_study --n 600 --n-test 50 --seed 7 --out " + sb("d.csv") +
                   " --test-out " + sb("t.csv") + " --truth " + sb("truth.csv")) == 0);
    REQUIRE(sb.run("simulate --kind bivariate_study --n 600 --n-test 50 --seed 7 --out " + sb("d2.csv")) == 0);
    CHECK(Sandbox::read(sb("d.csv")) == Sandbox::read(sb("d2.csv")));
    CHECK(first_line(Sandbox::read(sb("truth.csv"))) == "term,x_a,x_b,value\n");

    std::ofstream(sb("run.cfg")) << "degree = 2\nfactors = 3\nnum_basis = 6\nepochs = 50\nseed = 3\n";
    REQUIRE(sb.run("fit --data " + sb("d.csv") + " --config " + sb("run.cfg") + " --epochs 4 --model " + sb("m.json")) == 0);
    REQUIRE(sb.run("fit --data " + sb("d.csv") + " --config " + sb("run.cfg") + " --epochs 4 --model " + sb("m2.json")) == 0);
    CHECK(Sandbox::read(sb("m.json")) == Sandbox::read(sb("m2.json")));
    const auto log = Sandbox::read(sb("m.json.log.csv"));
    CHECK(first_line(log) == "epoch,train_loss,valid_loss,penalty,seconds\n");
    CHECK(std::count(log.begin(), log.end(), '\n') == 5); // --epochs overrides the file

    const auto model = ahofm::load_model(sb("m.json"));
    CHECK(model.config.factors(2) == 3);
    CHECK(model.specs[0].num_basis == 6);

    std::string pred;
    REQUIRE(sb.run("predict --model " + sb("m.json") + " --data " + sb("t.csv"), &pred) == 0);
    CHECK(first_line(pred) == "eta,prediction\n");
    const auto test = ahofm::ingest_csv(sb("t.csv"), "y");
    std::istringstream lines(pred);
    std::string line;
    std::getline(lines, line);
    for (Eigen::Index i = 0; i < test.rows(); ++i) {
        REQUIRE(std::getline(lines, line));
        std::vector<double> x(5);
        for (int j = 0; j < 5; ++j) x[static_cast<std::size_t>(j)] = test.features(i, j);
        CHECK(std::stod(line.substr(0, line.find(','))) == ahofm::predict_row(x, model));
    }

    std::string eff;
    REQUIRE(sb.run("effects --model " + sb("m.json") + " --grid-size 4 --draws 16 --surface x1:x3 --surface-out " +
                       sb("s.csv"),
                   &eff) == 0);
    CHECK(first_line(eff) == "term,feature,grid_value,mean,q05,q95\n");
    CHECK(std::count(eff.begin(), eff.end(), '\n') == 1 + 10 * 2 * 4);
    const auto surf = Sandbox::read(sb("s.csv"));
    CHECK(first_line(surf) == "x_a,x_b,value\n");
    CHECK(std::count(surf.begin(), surf.end(), '\n') == 17);
    CHECK(sb.run("effects --model " + sb("m.json") + " --term x1:zz") == 1);

    std::string smooth;
    REQUIRE(sb.run("smooth --data " + sb("d.csv") + " --num-basis 6 --factors 2", &smooth) == 0);
    CHECK(first_line(smooth) == Sandbox::read(std::string(AHOFM_GOLDEN_DIR) + "/smooth_header.csv"));
    CHECK(std::count(smooth.begin(), smooth.end(), '\n') == 1 + 5 + 5 * 2);

    // loading a file from a future format fails cleanly
    auto text = Sandbox::read(sb("m.json"));
    text.replace(text.find("\"format_version\": 1"), 19, "\"format_version\": 2");
    std::ofstream(sb("future.json")) << text;
    CHECK(sb.run("predict --model " + sb("future.json") + " --data " + sb("t.csv")) == 1);
    CHECK(Sandbox::read(sb("stderr.txt")).find("format_version") != std::string::npos);

    CHECK(sb.run("fit --data " + sb("d.csv") + " --target nope --model " + sb("bad.json")) == 1);
    CHECK(sb.run("fit --data " + sb("d.csv") + " --set bogus=1 --model " + sb("bad.json")) == 1);
}

TEST_CASE("bench csv schema matches the golden header")
{
    Sandbox sb;
    std::string out;
    REQUIRE(sb.run("bench --p-list 2,3 --n-list 300 --bench-epochs 1 --repeats 1 --num-basis 6", &out) == 0);
    const auto golden = Sandbox::read(std::string(AHOFM_GOLDEN_DIR) + "/bench_header.csv");
    CHECK(first_line(out) == golden);
    std::istringstream in(out);
    std::string line;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
        CHECK(std::count(line.begin(), line.end(), ',') == 4);
        ++rows;
    }
    CHECK(rows == 2);
    CHECK(sb.run("bench --p-list 2 --n-list 300 --memory-ceiling-mb 0.001") == 1);
}
