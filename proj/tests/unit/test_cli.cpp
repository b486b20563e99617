#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <stablesem/io.hpp>

namespace fs = std::filesystem;
using namespace stablesem;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

struct ScratchDir {
    fs::path path = fs::temp_directory_path() / ("stablesem_cli_" + std::to_string(::getpid()));
    ScratchDir()
    {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~ScratchDir()
    {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

fs::path scratch()
{
    static const ScratchDir dir;
    return dir.path;
}

Run cli(const std::string& args)
{
    const auto out = scratch() / "stdout.txt";
    const auto err = scratch() / "stderr.txt";
    const std::string cmd = std::string("\"") + STABLESEM_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                            err.string() + "\"";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_text(out);
    r.err = read_text(err);
    return r;
}

std::string trimmed(std::string s)
{
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s;
}

// one small simulated data set shared by the tests below
const fs::path& simulated()
{
    static const fs::path dir = [] {
        const auto target = scratch() / "sim";
        const auto r = cli("simulate --scheme C3-3 --latents 3 --n 600 --replicates 1 --seed 4 --out \"" +
                           target.string() + "\"");
        EXPECT_EQ(r.code, 0) << r.err;
        return target / "n600" / "rep001";
    }();
    return dir;
}

} // namespace

TEST(Cli, HelpAndUsage)
{
    EXPECT_EQ(cli("--help").code, 0);
    EXPECT_EQ(cli("").code, 2);
    EXPECT_EQ(cli("search --bogus 1").code, 2);
}

TEST(Cli, SimulateWritesArtifacts)
{
    const auto& dir = simulated();
    EXPECT_TRUE(fs::exists(dir / "data.csv"));
    EXPECT_TRUE(fs::exists(dir / "sem.json"));
    EXPECT_TRUE(fs::exists(dir / "truth_cpdag.json"));
    const auto sem = Json::parse(read_text(dir / "sem.json"));
    EXPECT_EQ(sem.at("scheme").at("n"), 600);
    EXPECT_EQ(sem.at("latents").size(), 3U);
}

TEST(Cli, EmptyCsvFails)
{
    const auto& dir = simulated();
    write_text(scratch() / "empty.csv", "");
    const auto r = cli("fit --data \"" + (scratch() / "empty.csv").string() + "\" --spec \"" +
                       (dir / "sem.json").string() + "\"");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("no rows"), std::string::npos) << r.err;
}

TEST(Cli, FitPrintsResult)
{
    const auto& dir = simulated();
    const auto r = cli("fit --data \"" + (dir / "data.csv").string() + "\" --spec \"" + (dir / "sem.json").string() +
                       "\"");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = Json::parse(r.out);
    EXPECT_TRUE(j.at("converged").get<bool>());
    // true structure on its own data: chi-square is of the order of the degrees of freedom
    EXPECT_LT(j.at("chi_square").get<double>(), 200.0);

    const auto with_structure = cli("fit --data \"" + (dir / "data.csv").string() + "\" --spec \"" +
                                    (dir / "sem.json").string() + "\" --structure \"" +
                                    (dir / "sem.json").string() + "\"");
    ASSERT_EQ(with_structure.code, 0) << with_structure.err;
    EXPECT_EQ(Json::parse(with_structure.out).at("chi_square"), j.at("chi_square"));
}

TEST(Cli, MissingSpecFileIsInputError)
{
    const auto r = cli("fit --data \"" + (simulated() / "data.csv").string() + "\" --spec /nonexistent/m.json");
    EXPECT_EQ(r.code, 2);
}

TEST(Cli, SearchIsDeterministicAndEvaluates)
{
    const auto& dir = simulated();
    const std::string common = "search --data \"" + (dir / "data.csv").string() + "\" --spec \"" +
                               (dir / "sem.json").string() + "\" --subsets 4 --iterations 6 --population 12 --seed 9";
    const auto first = cli(common + " --out \"" + (scratch() / "runs_a").string() + "\"");
    ASSERT_EQ(first.code, 0) << first.err;
    const auto second = cli(common + " --workers 1 --out \"" + (scratch() / "runs_b").string() + "\"");
    ASSERT_EQ(second.code, 0) << second.err;
    const fs::path a = trimmed(first.out), b = trimmed(second.out);
    for (const char* f : {"stability.csv", "relevant.json", "effects.json"}) {
        EXPECT_EQ(read_text(a / f), read_text(b / f)) << f;
    }
    EXPECT_TRUE(fs::exists(a / "plots" / "edge_stability.svg"));
    EXPECT_TRUE(fs::exists(a / "run_meta.json"));

    const auto eval = cli("evaluate --stability \"" + (a / "stability.csv").string() + "\" --truth \"" +
                          (dir / "truth_cpdag.json").string() + "\" --pi-bic auto");
    ASSERT_EQ(eval.code, 0) << eval.err;
    const auto j = Json::parse(eval.out);
    EXPECT_EQ(j.at("replicates").size(), 1U);

    const auto plot = cli("plot --run \"" + a.string() + "\" --out \"" + (scratch() / "replot").string() + "\"");
    ASSERT_EQ(plot.code, 0) << plot.err;
    EXPECT_TRUE(fs::exists(scratch() / "replot" / "causal_path_stability.svg"));
}

TEST(Cli, EvaluatePerfectStability)
{
    const auto& dir = simulated();
    std::vector<std::string> names;
    const auto truth = cpdag_from_json(Json::parse(read_text(dir / "truth_cpdag.json")), names);
    const int n = static_cast<int>(names.size());
    StabilityGraph edge(StabilityKind::edge, n, 1), path(StabilityKind::causal_path, n, 1);
    edge.set_counts({1, 1});
    path.set_counts({1, 1});
    for (int x = 0; x < n; ++x) {
        for (int y = 0; y < n; ++y) {
            if (x == y) continue;
            edge.set(x, y, 1, has_edge(truth, x, y) ? 1.0 : 0.0);
            path.set(x, y, 1, has_directed_path(truth, x, y) ? 1.0 : 0.0);
        }
    }
    std::ostringstream csv;
    write_stability_csv(csv, edge, path, names);
    write_text(scratch() / "perfect.csv", csv.str());
    const auto r = cli("evaluate --stability \"" + (scratch() / "perfect.csv").string() + "\" --truth \"" +
                       (dir / "truth_cpdag.json").string() + "\"");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = Json::parse(r.out);
    const auto& rep = j.at("replicates").at(0);
    if (rep.at("edge").at("defined").get<bool>()) EXPECT_DOUBLE_EQ(rep.at("edge").at("auc").get<double>(), 1.0);
    if (rep.at("causal_path").at("defined").get<bool>()) {
        EXPECT_DOUBLE_EQ(rep.at("causal_path").at("auc").get<double>(), 1.0);
    }
}

TEST(Cli, JsonLogs)
{
    const auto r = cli("--json-logs fit --data /nonexistent.csv --spec /nonexistent.json");
    EXPECT_EQ(r.code, 2);
    const auto line = r.err.substr(0, r.err.find('\n'));
    const auto j = Json::parse(line);
    EXPECT_EQ(j.at("event"), "error");
    EXPECT_EQ(j.at("exit_code"), 2);
}
