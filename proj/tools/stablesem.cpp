// stablesem: stable causal structure search for latent-variable structural equation models.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>
#include <tbb/global_control.h>

#include "stablesem/correlations.hpp"
#include "stablesem/errors.hpp"
#include "stablesem/estimator.hpp"
#include "stablesem/io.hpp"
#include "stablesem/pipeline.hpp"
#include "stablesem/simgen.hpp"
#include "stablesem/svg.hpp"

namespace fs = std::filesystem;
using namespace stablesem;

namespace {

enum ExitCode { kOk = 0, kInputError = 2, kNumericError = 3, kPartialRun = 4 };

class Logger {
public:
    explicit Logger(bool json) : json_(json)
    {
        logger_ = spdlog::stderr_color_mt("stablesem");
        logger_->set_pattern(json ? "%v" : "[%H:%M:%S] %^%l%$ %v");
    }

    void info(const std::string& event, const std::string& message, const Json& fields = Json::object())
    {
        if (json_) {
            Json j = fields;
            j["event"] = event;
            j["message"] = message;
            logger_->info(j.dump());
        } else {
            logger_->info(message);
        }
    }

    void error(const std::string& message, int code)
    {
        if (json_) {
            logger_->error(Json{{"event", "error"}, {"message", message}, {"exit_code", code}}.dump());
        } else {
            logger_->error(message);
        }
    }

private:
    bool json_;
    std::shared_ptr<spdlog::logger> logger_;
};

struct SearchFlags {
    std::string data, spec, config, out;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers, subsets, iterations, population;
    std::optional<double> pi_sel, crossover, mutation;
    bool covariance = false;
    bool no_plots = false;
};

RunConfig resolve_config(const SearchFlags& f)
{
    RunConfig c;
    if (!f.config.empty()) c.merge(Json::parse(read_text(f.config)));
    if (!f.data.empty()) c.data_path = f.data;
    if (!f.spec.empty()) c.spec_path = f.spec;
    if (!f.out.empty()) c.out_dir = f.out;
    if (f.seed) c.seed = *f.seed;
    if (f.workers) c.workers = *f.workers;
    if (f.subsets) c.subsets = *f.subsets;
    if (f.iterations) c.iterations = *f.iterations;
    if (f.population) c.population = *f.population;
    if (f.pi_sel) c.pi_sel = *f.pi_sel;
    if (f.crossover) c.crossover = *f.crossover;
    if (f.mutation) c.mutation = *f.mutation;
    if (f.covariance) c.prefer_covariance = true;
    if (f.no_plots) c.plots = false;
    if (c.data_path.empty()) throw SpecError("no data file given (--data or config 'data')");
    if (c.spec_path.empty()) throw SpecError("no model description given (--spec or config 'spec')");
    c.validate();
    return c;
}

int cmd_search(const SearchFlags& flags, Logger& log)
{
    const auto config = resolve_config(flags);
    const auto spec = read_sem_spec(config.spec_path);
    const auto data = bind_dataset(read_csv(config.data_path), spec.measurement);
    log.info("start",
             fmt::format("search: {} rows, {} indicators, {} subsets, P={}, I={}, C={}, M={}, seed={}", data.rows(),
                         data.cols(), config.subsets, config.population, config.iterations, config.crossover,
                         config.mutation, config.seed),
             {{"config", config.to_json()}});
    const auto outcome = run_search(data, spec, config, [&](const ProgressEvent& e) {
        log.info(e.completed ? "subset_done" : "subset_failed", e.message,
                 {{"subset", e.subset}, {"total", e.total}, {"completed", e.completed}});
    });
    const auto dir = write_run(outcome, config, spec);
    log.info("done", fmt::format("pi_bic = {}, {} relevant structures, written to {}", outcome.threshold.level,
                                 outcome.relevant.size(), dir.string()),
             {{"run_dir", dir.string()}});
    std::cout << dir.string() << '\n';
    return kOk;
}

int cmd_fit(const std::string& data_path, const std::string& spec_path, const std::string& structure_path,
            const std::string& out, std::uint64_t seed, bool covariance)
{
    auto spec = read_sem_spec(spec_path);
    if (!structure_path.empty()) {
        auto j = Json::parse(read_text(structure_path));
        if (j.contains("structure")) j = j.at("structure");
        spec.structure = dag_from_json(j, spec.measurement.node_names());
    }
    if (!spec.structure) throw SpecError("fit needs --structure or a 'structure' entry in the model description");
    const auto data = bind_dataset(read_csv(data_path), spec.measurement);
    CorrelationOptions options;
    options.prefer_covariance = covariance;
    const auto sample = mixed_correlation_matrix(data, options);
    Rng rng(seed);
    const auto model = apply_identification(spec.measurement, {*spec.structure, spec.measurement.node_roles()}, rng);
    const auto result = fit(model.pattern, sample.S, static_cast<long>(data.rows()));

    auto j = to_json(result, static_cast<long>(data.rows()));
    j["structure"] = to_json(model.structure.graph, spec.measurement.node_names());
    j["identification"] = model.plan.log;
    j["matrix"] = sample.kind == MatrixKind::covariance ? "covariance" : "correlation";
    j["matrix_repaired"] = sample.repaired;
    const auto text = j.dump(2) + "\n";
    if (out.empty()) {
        std::cout << text;
    } else {
        write_text(out, text);
    }
    return result.converged ? kOk : kNumericError;
}

int cmd_simulate(const std::string& scheme_name, int latents, const std::vector<long>& sizes, int replicates,
                 std::uint64_t seed, const std::string& out, Logger& log)
{
    auto scheme = SimScheme::parse(scheme_name, latents);
    scheme.sample_sizes = sizes;
    scheme.replicates = replicates;
    scheme.validate();
    Rng rng(seed);
    for (int r = 1; r <= scheme.replicates; ++r) {
        const auto sem = random_sem(scheme.n_latents, scheme.min_indicators, scheme.max_indicators, rng);
        const auto names = sem.measurement.node_names();
        for (long n : scheme.sample_sizes) {
            const fs::path dir = fs::path(out) / fmt::format("n{}", n) / fmt::format("rep{:03d}", r);
            fs::create_directories(dir);
            auto data = simulate(sem.measurement, sem.params, n, rng);
            SemSpec spec{sem.measurement, {}, sem.structure.graph};
            Json cuts = nullptr;
            if (scheme.kind == IndicatorKind::ordinal) {
                auto d = discretize(data, rng);
                for (std::size_t c = 0; c < d.data.cols(); ++c) {
                    spec.measurement.indicator_types[c] = d.data.columns[c].type;
                }
                cuts = d.cut_probabilities;
                data = std::move(d.data);
            }
            std::ostringstream csv;
            write_csv(csv, data);
            write_text(dir / "data.csv", csv.str());
            auto sem_json = to_json(spec);
            sem_json["parameters"] = to_json(sem.params);
            sem_json["scheme"] = {{"name", scheme.name},
                                  {"n_latents", scheme.n_latents},
                                  {"indicator_range", {scheme.min_indicators, scheme.max_indicators}},
                                  {"n", n},
                                  {"replicate", r},
                                  {"seed", seed},
                                  {"loadings", "+-U[0.5, 1.5], reference loading 1"},
                                  {"coefficients", "+-U[0.3, 0.9]"},
                                  {"reliability", "U[0.4, 0.8]"}};
            if (!cuts.is_null()) sem_json["cut_probabilities"] = cuts;
            write_text(dir / "sem.json", sem_json.dump(2) + "\n");
            write_text(dir / "truth_cpdag.json", to_json(dag_to_cpdag(sem.structure.graph), names).dump(2) + "\n");
        }
        log.info("replicate", fmt::format("replicate {}/{} written", r, scheme.replicates), {{"replicate", r}});
    }
    std::cout << out << '\n';
    return kOk;
}

std::optional<int> run_pi_bic(const fs::path& stability_file)
{
    const auto relevant = stability_file.parent_path() / "relevant.json";
    if (!fs::exists(relevant)) throw InputError(fmt::format("--pi-bic auto: '{}' not found", relevant.string()));
    return Json::parse(read_text(relevant)).at("pi_bic").get<int>();
}

int cmd_evaluate(const std::vector<std::string>& stability_files, const std::vector<std::string>& truth_files,
                 const std::string& pi_bic)
{
    if (stability_files.size() != truth_files.size()) {
        throw SpecError("--stability and --truth must be given the same number of times");
    }
    Json reps = Json::array();
    double edge_sum = 0.0, path_sum = 0.0;
    int edge_n = 0, path_n = 0;
    for (std::size_t k = 0; k < stability_files.size(); ++k) {
        std::vector<std::string> names;
        const auto truth = cpdag_from_json(Json::parse(read_text(truth_files[k])), names);
        std::istringstream in(read_text(stability_files[k]));
        const auto [edge, path] = read_stability_csv(in, names);
        std::optional<int> cap;
        if (pi_bic == "auto") {
            cap = run_pi_bic(stability_files[k]);
        } else if (!pi_bic.empty()) {
            cap = std::stoi(pi_bic);
        }
        const auto edge_roc = roc_auc(edge, truth, cap);
        const auto path_roc = roc_auc(path, truth, cap);
        if (edge_roc.defined) {
            edge_sum += edge_roc.auc;
            ++edge_n;
        }
        if (path_roc.defined) {
            path_sum += path_roc.auc;
            ++path_n;
        }
        Json rep{{"stability", stability_files[k]}, {"truth", truth_files[k]}, {"edge", to_json(edge_roc)},
                 {"causal_path", to_json(path_roc)}};
        rep["max_level"] = cap ? Json(*cap) : Json(nullptr);
        reps.push_back(std::move(rep));
    }
    Json mean{{"edge", edge_n > 0 ? Json(edge_sum / edge_n) : Json(nullptr)},
              {"causal_path", path_n > 0 ? Json(path_sum / path_n) : Json(nullptr)},
              {"edge_replicates", edge_n},
              {"causal_path_replicates", path_n}};
    std::cout << Json{{"schema_version", kSchemaVersion}, {"replicates", reps}, {"mean_auc", mean}}.dump(2) << '\n';
    std::cerr << fmt::format("{:<14}{:>10}{:>12}\n", "kind", "mean AUC", "replicates");
    std::cerr << fmt::format("{:<14}{:>10}{:>12}\n", "edge", edge_n > 0 ? fmt::format("{:.3f}", edge_sum / edge_n) : "NA",
                             edge_n);
    std::cerr << fmt::format("{:<14}{:>10}{:>12}\n", "causal path",
                             path_n > 0 ? fmt::format("{:.3f}", path_sum / path_n) : "NA", path_n);
    return kOk;
}

int cmd_plot(const std::string& run_dir, const std::string& out)
{
    const fs::path dir(run_dir);
    const auto relevant = Json::parse(read_text(dir / "relevant.json"));
    const auto names = relevant.at("nodes").get<std::vector<std::string>>();
    const double pi_sel = relevant.at("pi_sel").get<double>();
    const int level = relevant.at("pi_bic").get<int>();
    std::istringstream in(read_text(dir / "stability.csv"));
    const auto [edge, path] = read_stability_csv(in, names);
    const fs::path target = out.empty() ? dir / "plots" : fs::path(out);
    fs::create_directories(target);
    write_text(target / "edge_stability.svg", stability_svg(edge, names, pi_sel, level, "Edge stability"));
    write_text(target / "causal_path_stability.svg",
               stability_svg(path, names, pi_sel, level, "Causal path stability"));
    std::cout << target.string() << '\n';
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Stable causal structure search for latent-variable structural equation models"};
    app.require_subcommand(1);
    bool json_logs = false;
    app.add_flag("--json-logs", json_logs, "Machine-readable log lines on stderr");

    SearchFlags sf;
    auto* search = app.add_subcommand("search", "Subsample, search, and report stable structures");
    search->add_option("--data", sf.data, "CSV with one column per indicator");
    search->add_option("--spec", sf.spec, "JSON model description");
    search->add_option("--config", sf.config, "JSON run configuration (flags override it)");
    search->add_option("--seed", sf.seed, "Random seed");
    search->add_option("--out", sf.out, "Directory receiving the run directory");
    search->add_option("--workers", sf.workers, "Worker threads (default: available parallelism)");
    search->add_option("--pi-sel", sf.pi_sel, "Selection probability threshold");
    search->add_option("--subsets", sf.subsets, "Number of subsamples S");
    search->add_option("--iterations", sf.iterations, "Generations I");
    search->add_option("--population", sf.population, "Population size P");
    search->add_option("--crossover", sf.crossover, "Crossover probability C");
    search->add_option("--mutation", sf.mutation, "Mutation probability M");
    search->add_flag("--covariance", sf.covariance, "Use the covariance matrix when all columns are continuous");
    search->add_flag("--no-plots", sf.no_plots, "Skip SVG plots");

    std::string fit_data, fit_spec, fit_structure, fit_out;
    std::uint64_t fit_seed = 1;
    bool fit_cov = false;
    std::optional<int> fit_workers;
    auto* fit_cmd = app.add_subcommand("fit", "Fit one structure given in the model description");
    fit_cmd->add_option("--data", fit_data, "CSV data")->required();
    fit_cmd->add_option("--spec", fit_spec, "JSON model description")->required();
    fit_cmd->add_option("--structure", fit_structure, "JSON structure (default: the description's 'structure' entry)");
    fit_cmd->add_option("--out", fit_out, "Output JSON file (default: stdout)");
    fit_cmd->add_option("--seed", fit_seed, "Seed for the identification plan");
    fit_cmd->add_option("--workers", fit_workers, "Worker threads");
    fit_cmd->add_flag("--covariance", fit_cov, "Use the covariance matrix when all columns are continuous");

    std::string scheme = "C3-5", sim_out;
    int latents = 4, replicates = 20;
    std::vector<long> sizes{1000};
    std::uint64_t sim_seed = 1;
    auto* sim = app.add_subcommand("simulate", "Generate random SEMs and data sets");
    sim->add_option("--scheme", scheme, "Scheme such as C3-5, O3-5, C1-4, O1-4")->capture_default_str();
    sim->add_option("--latents", latents, "Number of latents")->capture_default_str();
    sim->add_option("--n", sizes, "Sample size(s)")->capture_default_str();
    sim->add_option("--replicates", replicates, "Data sets per sample size")->capture_default_str();
    sim->add_option("--seed", sim_seed, "Random seed")->capture_default_str();
    sim->add_option("--out", sim_out, "Output directory")->required();

    std::vector<std::string> stab_files, truth_files;
    std::string pi_bic_arg;
    auto* eval = app.add_subcommand("evaluate", "ROC/AUC of stability graphs against true CPDAGs");
    eval->add_option("--stability", stab_files, "stability.csv (repeatable)")->required();
    eval->add_option("--truth", truth_files, "truth_cpdag.json (repeatable, paired with --stability)")->required();
    eval->add_option("--pi-bic", pi_bic_arg,
                     "Only levels up to this complexity count; 'auto' reads relevant.json next to each stability file");

    std::string plot_run, plot_out;
    auto* plot = app.add_subcommand("plot", "Redraw stability plots of a run directory");
    plot->add_option("--run", plot_run, "Run directory")->required();
    plot->add_option("--out", plot_out, "Output directory (default: <run>/plots)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInputError;
    }

    Logger log(json_logs);
    try {
        if (*search) return cmd_search(sf, log);
        if (*fit_cmd) {
            std::unique_ptr<tbb::global_control> limit;
            if (fit_workers && *fit_workers > 0) {
                limit = std::make_unique<tbb::global_control>(tbb::global_control::max_allowed_parallelism,
                                                              static_cast<std::size_t>(*fit_workers));
            }
            return cmd_fit(fit_data, fit_spec, fit_structure, fit_out, fit_seed, fit_cov);
        }
        if (*sim) return cmd_simulate(scheme, latents, sizes, replicates, sim_seed, sim_out, log);
        if (*eval) return cmd_evaluate(stab_files, truth_files, pi_bic_arg);
        if (*plot) return cmd_plot(plot_run, plot_out);
    } catch (const InputError& e) {
        log.error(e.what(), kInputError);
        return kInputError;
    } catch (const SpecError& e) {
        log.error(e.what(), kInputError);
        return kInputError;
    } catch (const PartialRunError& e) {
        log.error(e.what(), kPartialRun);
        return kPartialRun;
    } catch (const Error& e) {
        log.error(e.what(), kNumericError);
        return kNumericError;
    } catch (const Json::exception& e) {
        log.error(fmt::format("malformed JSON: {}", e.what()), kInputError);
        return kInputError;
    } catch (const std::filesystem::filesystem_error& e) {
        log.error(e.what(), kInputError);
        return kInputError;
    } catch (const std::invalid_argument& e) {
        log.error(e.what(), kInputError);
        return kInputError;
    } catch (const std::exception& e) {
        log.error(fmt::format("internal error: {}", e.what()), kNumericError);
        return kNumericError;
    }
    return kOk;
}
