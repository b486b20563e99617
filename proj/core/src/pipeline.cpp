#include "stablesem/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <memory>
#include <mutex>
#include <sstream>

#include <fmt/format.h>
#include <tbb/global_control.h>
#include <tbb/parallel_for.h>

#include "stablesem/effects.hpp"
#include "stablesem/errors.hpp"
#include "stablesem/svg.hpp"

#ifndef STABLESEM_VERSION
#define STABLESEM_VERSION "0.0.0"
#endif

namespace stablesem {

void RunConfig::merge(const Json& j)
{
    if (!j.is_object()) throw SpecError("config must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "schema_version") continue;
            if (key == "data") data_path = value.get<std::string>();
            else if (key == "spec") spec_path = value.get<std::string>();
            else if (key == "out") out_dir = value.get<std::string>();
            else if (key == "subsets") subsets = value.get<int>();
            else if (key == "iterations") iterations = value.get<int>();
            else if (key == "population") population = value.get<int>();
            else if (key == "crossover") crossover = value.get<double>();
            else if (key == "mutation") mutation = value.get<double>();
            else if (key == "pi_sel") pi_sel = value.get<double>();
            else if (key == "seed") seed = value.get<std::uint64_t>();
            else if (key == "workers") workers = value.get<int>();
            else if (key == "subsample_fraction") subsample_fraction = value.get<double>();
            else if (key == "covariance") prefer_covariance = value.get<bool>();
            else if (key == "free_exogenous_covariances") free_exogenous_covariances = value.get<bool>();
            else if (key == "plots") plots = value.get<bool>();
            else if (key == "min_completed_fraction") min_completed_fraction = value.get<double>();
            else throw SpecError(fmt::format("unknown config key '{}'", key));
        }
    } catch (const Json::exception& e) {
        throw SpecError(fmt::format("malformed config: {}", e.what()));
    }
}

Json RunConfig::to_json() const
{
    return {{"data", data_path.string()},
            {"spec", spec_path.string()},
            {"out", out_dir.string()},
            {"subsets", subsets},
            {"iterations", iterations},
            {"population", population},
            {"crossover", crossover},
            {"mutation", mutation},
            {"pi_sel", pi_sel},
            {"seed", seed},
            {"workers", workers},
            {"subsample_fraction", subsample_fraction},
            {"covariance", prefer_covariance},
            {"free_exogenous_covariances", free_exogenous_covariances},
            {"plots", plots},
            {"min_completed_fraction", min_completed_fraction}};
}

void RunConfig::validate() const
{
    if (subsets < 1) throw SpecError("subsets must be positive");
    if (!(pi_sel > 0.0 && pi_sel <= 1.0)) throw SpecError("pi_sel must lie in (0, 1]");
    if (workers < 0) throw SpecError("workers must be non-negative");
    if (!(min_completed_fraction >= 0.0 && min_completed_fraction <= 1.0)) {
        throw SpecError("min_completed_fraction must lie in [0, 1]");
    }
    SearchParams{population, iterations, crossover, mutation, seed}.validate();
}

namespace {

bool node_is_continuous(const MeasurementSpec& m, int node)
{
    if (node < m.latent_count()) return true;
    return !m.indicator_types[static_cast<std::size_t>(m.indicators_of(node).front())].is_ordinal();
}

std::string utc_timestamp()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

} // namespace

SearchOutcome run_search(const Dataset& data, const SemSpec& spec, const RunConfig& config,
                         const ProgressCallback& progress)
{
    config.validate();
    spec.measurement.validate();
    if (data.rows() == 0) throw InputError("no rows");
    std::unique_ptr<tbb::global_control> limit;
    if (config.workers > 0) {
        limit = std::make_unique<tbb::global_control>(tbb::global_control::max_allowed_parallelism,
                                                      static_cast<std::size_t>(config.workers));
    }

    SearchOutcome out;
    out.node_names = spec.measurement.node_names();
    Rng rng(config.seed);
    out.plan = plan_identification(spec.measurement, rng);
    const auto rows = subsample_indices(data.rows(), config.subsets, rng, config.subsample_fraction);
    std::vector<std::uint64_t> seeds(rows.size());
    for (auto& s : seeds) s = rng();

    SearchProblem problem{spec.measurement, out.plan, spec.prior, {}, {}};
    problem.pattern_options.free_exogenous_covariances = config.free_exogenous_covariances;
    CorrelationOptions corr_options;
    corr_options.prefer_covariance = config.prefer_covariance;

    out.subsets.resize(rows.size());
    std::mutex progress_mutex;
    int finished = 0;
    tbb::parallel_for(std::size_t{0}, rows.size(), [&](std::size_t s) {
        auto& sub = out.subsets[s];
        sub.index = static_cast<int>(s);
        sub.rows = rows[s];
        try {
            const auto subset = data.select_rows(sub.rows);
            sub.sample = mixed_correlation_matrix(subset, corr_options);
            SearchParams params{config.population, config.iterations, config.crossover, config.mutation, seeds[s]};
            sub.front = evolve(sub.sample.S, static_cast<long>(sub.rows.size()), problem, params);
            sub.completed = true;
        } catch (const Error& e) {
            sub.error = e.what();
        }
        if (progress) {
            std::lock_guard lock(progress_mutex);
            ++finished;
            progress({static_cast<int>(s), static_cast<int>(rows.size()), sub.completed,
                      sub.completed ? fmt::format("subset {} done ({}/{})", s, finished, rows.size())
                                    : fmt::format("subset {} failed: {}", s, sub.error)});
        }
    });

    std::vector<ParetoFront> fronts;
    for (const auto& sub : out.subsets) {
        if (sub.completed) fronts.push_back(sub.front);
    }
    out.completed = static_cast<int>(fronts.size());
    const double fraction = static_cast<double>(out.completed) / static_cast<double>(rows.size());
    if (out.completed == 0 || fraction < config.min_completed_fraction) {
        std::string first_error;
        for (const auto& sub : out.subsets) {
            if (!sub.completed) {
                first_error = sub.error;
                break;
            }
        }
        throw PartialRunError(fmt::format("only {} of {} subsets completed (first failure: {})", out.completed,
                                          rows.size(), first_error));
    }

    const int n = spec.measurement.node_count();
    out.bag = accumulate(fronts);
    out.edge = edge_stability(out.bag, n);
    out.path = causal_path_stability(out.bag, n);
    out.threshold = pi_bic(fronts);
    out.relevant = relevant_structures(out.edge, out.path, config.pi_sel, out.threshold.level);
    out.effects = estimate_effects(data, spec, out, seeds.empty() ? config.seed : seeds.front() ^ 0x5eedULL);
    return out;
}

std::vector<PairEffect> estimate_effects(const Dataset& data, const SemSpec& spec, const SearchOutcome& outcome,
                                         std::uint64_t seed)
{
    std::vector<PairEffect> effects;
    for (const auto& r : outcome.relevant) {
        if (r.direction == Direction::directed) effects.push_back({r.from, r.to, {}, 1.0, 1.0, false, std::nullopt});
    }
    if (effects.empty()) return effects;

    const int n = spec.measurement.node_count();
    std::vector<Matrix> pooled;
    Rng master(seed);
    for (const auto& sub : outcome.subsets) {
        const std::uint64_t sub_seed = master();
        if (!sub.completed) continue;
        const auto levels = sub.front.front_levels();
        const auto it = levels.find(outcome.threshold.level);
        if (it == levels.end() || !it->second->fit) continue;
        const auto cpdag = dag_to_cpdag(it->second->structure);
        Matrix scores;
        try {
            Rng rng(sub_seed);
            scores = structural_scores(spec.measurement, it->second->fit->theta_hat, data.select_rows(sub.rows), rng);
        } catch (const Error&) {
            continue;
        }
        for (auto& e : effects) e.per_subset.push_back(ida_effects_from_scores(cpdag, scores, e.from, e.to));
        pooled.push_back(std::move(scores));
    }

    Vector sd = Vector::Ones(n);
    if (!pooled.empty()) {
        Eigen::Index total_rows = 0;
        for (const auto& m : pooled) total_rows += m.rows();
        Matrix all(total_rows, n);
        Eigen::Index at = 0;
        for (const auto& m : pooled) {
            all.middleRows(at, m.rows()) = m;
            at += m.rows();
        }
        sd = sample_covariance(all).diagonal().cwiseSqrt();
    }
    for (auto& e : effects) {
        e.sigma_from = sd[e.from];
        e.sigma_to = sd[e.to];
        e.standardized = node_is_continuous(spec.measurement, e.from) && node_is_continuous(spec.measurement, e.to);
        try {
            e.total = total_effect(e.per_subset, e.sigma_from, e.sigma_to, e.standardized);
        } catch (const NoEstimateError&) {
            e.total.reset();
        }
    }
    return effects;
}

namespace {

const PairEffect* find_effect(const SearchOutcome& o, int from, int to)
{
    for (const auto& e : o.effects) {
        if (e.from == from && e.to == to) return &e;
    }
    return nullptr;
}

std::string annotation(double reliability, const PairEffect* e)
{
    if (e == nullptr || !e->total) return fmt::format("{:.2f}", reliability);
    return fmt::format("{:.2f}/{:.3g}", reliability, *e->total);
}

} // namespace

Json relevant_to_json(const SearchOutcome& o, double pi_sel)
{
    Json structures = Json::array();
    for (const auto& r : o.relevant) {
        const auto* e = r.direction == Direction::directed ? find_effect(o, r.from, r.to) : nullptr;
        Json item{{"from", o.node_names[r.from]},
                  {"to", o.node_names[r.to]},
                  {"direction", r.direction == Direction::directed ? "directed" : "undirected"},
                  {"kind", to_string(r.kind)},
                  {"reliability", r.reliability},
                  {"annotation", annotation(r.reliability, e)}};
        item["total_effect"] = e != nullptr && e->total ? Json(*e->total) : Json(nullptr);
        structures.push_back(std::move(item));
    }
    Json medians = Json::array();
    for (const auto& [level, median] : o.threshold.median_by_level) {
        medians.push_back({{"complexity", level}, {"median_bic", median}});
    }
    return {{"schema_version", kSchemaVersion},
            {"nodes", o.node_names},
            {"pi_sel", pi_sel},
            {"pi_bic", o.threshold.level},
            {"pi_bic_contributing_subsets", o.threshold.contributing},
            {"pi_bic_warning", o.threshold.warning},
            {"bic_formula", bic_formula()},
            {"median_bic", medians},
            {"subsets_completed", o.completed},
            {"subsets_total", o.subsets.size()},
            {"structures", structures}};
}

Json effects_to_json(const SearchOutcome& o)
{
    Json items = Json::array();
    for (const auto& e : o.effects) {
        std::size_t count = 0;
        for (const auto& s : e.per_subset) count += s.size();
        Json item{{"from", o.node_names[e.from]},
                  {"to", o.node_names[e.to]},
                  {"estimates_per_subset", e.per_subset},
                  {"n_estimates", count},
                  {"sigma_from", e.sigma_from},
                  {"sigma_to", e.sigma_to},
                  {"standardized", e.standardized}};
        item["total_effect"] = e.total ? Json(*e.total) : Json(nullptr);
        items.push_back(std::move(item));
    }
    return {{"schema_version", kSchemaVersion}, {"pi_bic", o.threshold.level}, {"effects", items}};
}

std::string relevant_to_text(const SearchOutcome& o, double pi_sel)
{
    std::string text = fmt::format("pi_sel = {}, pi_bic = {}{}\n", pi_sel, o.threshold.level,
                                   o.threshold.warning ? " (fewer than half the subsets reach this level)" : "");
    if (o.relevant.empty()) text += "no relevant structures\n";
    for (const auto& r : o.relevant) {
        const bool directed = r.direction == Direction::directed;
        const auto* e = directed ? find_effect(o, r.from, r.to) : nullptr;
        text += fmt::format("{} {} {}  {}\n", o.node_names[r.from], directed ? "->" : "--", o.node_names[r.to],
                            annotation(r.reliability, e));
    }
    return text;
}

std::string stability_csv(const SearchOutcome& o)
{
    std::ostringstream ss;
    write_stability_csv(ss, o.edge, o.path, o.node_names);
    return ss.str();
}

std::filesystem::path write_run(const SearchOutcome& o, const RunConfig& config, const SemSpec& spec,
                                const Json& extra_meta)
{
    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir);
    const auto base = fmt::format("{}_seed{}", utc_timestamp(), config.seed);
    fs::path dir = config.out_dir / base;
    for (int k = 2; !fs::create_directory(dir); ++k) dir = config.out_dir / fmt::format("{}-{}", base, k);

    write_text(dir / "stability.csv", stability_csv(o));
    write_text(dir / "stability.json",
               Json{{"schema_version", kSchemaVersion},
                    {"edge", to_json(o.edge, o.node_names)},
                    {"causal_path", to_json(o.path, o.node_names)}}
                       .dump(2) + "\n");
    write_text(dir / "relevant.json", relevant_to_json(o, config.pi_sel).dump(2) + "\n");
    write_text(dir / "relevant.txt", relevant_to_text(o, config.pi_sel));
    write_text(dir / "effects.json", effects_to_json(o).dump(2) + "\n");

    Json fronts = Json::array();
    Json failures = Json::array();
    for (const auto& sub : o.subsets) {
        if (!sub.completed) {
            failures.push_back({{"subset", sub.index}, {"error", sub.error}});
            continue;
        }
        Json members = Json::array();
        for (const auto& [level, m] : sub.front.front_levels()) {
            members.push_back({{"complexity", level},
                               {"chi_square", m->chi_square},
                               {"bic", m->bic},
                               {"structure", to_json(m->structure, o.node_names)}});
        }
        fronts.push_back({{"subset", sub.index},
                          {"rows", sub.rows.size()},
                          {"matrix_repaired", sub.sample.repaired},
                          {"evaluations", sub.front.evaluations},
                          {"unique_structures", sub.front.unique_structures},
                          {"front", members}});
    }
    write_text(dir / "fronts.json", Json{{"schema_version", kSchemaVersion}, {"subsets", fronts}}.dump(2) + "\n");

    if (config.plots) {
        fs::create_directories(dir / "plots");
        write_text(dir / "plots" / "edge_stability.svg",
                   stability_svg(o.edge, o.node_names, config.pi_sel, o.threshold.level, "Edge stability"));
        write_text(dir / "plots" / "causal_path_stability.svg",
                   stability_svg(o.path, o.node_names, config.pi_sel, o.threshold.level, "Causal path stability"));
    }

    Json meta{{"schema_version", kSchemaVersion},
              {"versions",
               {{"stablesem", STABLESEM_VERSION},
                {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)}}},
              {"seed", config.seed},
              {"config", config.to_json()},
              {"search",
               {{"population", config.population},
                {"iterations", config.iterations},
                {"crossover", config.crossover},
                {"mutation", config.mutation},
                {"subsets", config.subsets}}},
              {"decisions",
               {{"crossover_operator", "uniform per-gene swap"},
                {"mutation_operator", "independent bit flip"},
                {"repair", "drop forbidden genes, then delete a random edge of a detected cycle until acyclic"},
                {"initial_edge_probability", "min(1, 2/(n-1))"},
                {"non_converged_chi_square", kFailedFitChiSquare},
                {"free_exogenous_covariances", config.free_exogenous_covariances},
                {"gradient", "analytic"},
                {"subsample_fraction", config.subsample_fraction},
                {"per_complexity_representative", "lowest chi-square model per level on each subset's nondominated set"},
                {"pi_bic_rule", "argmin of the median BIC over subsets having the level; ties to the smaller level"},
                {"effects", "local IDA on the pi_bic models; factor scores from standardized loadings"},
                {"matrix", config.prefer_covariance ? "covariance when all columns are continuous" : "correlation"}}},
              {"identification", {{"log", o.plan.log}}},
              {"subsets", {{"total", o.subsets.size()}, {"completed", o.completed}, {"failures", failures}}},
              {"model", to_json(spec)}};
    if (!extra_meta.is_null()) meta["extra"] = extra_meta;
    write_text(dir / "run_meta.json", meta.dump(2) + "\n");
    return dir;
}

} // namespace stablesem
