#include "stablesem/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "stablesem/errors.hpp"

namespace stablesem {

namespace {

IndicatorType type_from_json(const Json& j, const std::string& owner)
{
    if (!j.is_object() || !j.contains("type")) return IndicatorType::continuous();
    const auto kind = j.at("type").get<std::string>();
    if (kind == "continuous") return IndicatorType::continuous();
    if (kind == "ordinal") {
        if (!j.contains("categories")) throw SpecError(fmt::format("'{}': ordinal entries need 'categories'", owner));
        return IndicatorType::ordinal(j.at("categories").get<int>());
    }
    throw SpecError(fmt::format("'{}': unknown type '{}'", owner, kind));
}

Json type_to_json(const std::string& name, const IndicatorType& t)
{
    Json j{{"name", name}, {"type", t.is_ordinal() ? "ordinal" : "continuous"}};
    if (t.is_ordinal()) j["categories"] = t.categories;
    return j;
}

std::pair<std::string, IndicatorType> named_entry(const Json& j)
{
    if (j.is_string()) return {j.get<std::string>(), IndicatorType::continuous()};
    if (!j.is_object() || !j.contains("name")) throw SpecError("entries must be names or objects with 'name'");
    const auto name = j.at("name").get<std::string>();
    return {name, type_from_json(j, name)};
}

int node_index(const std::vector<std::string>& names, const std::string& name)
{
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw SpecError(fmt::format("unknown node '{}'", name));
    return static_cast<int>(it - names.begin());
}

Json matrix_to_json(const Matrix& m)
{
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json mask_to_json(const Mask& m)
{
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(static_cast<bool>(m(r, c)));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\"");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\"");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (char ch : line) {
        if (ch == '"') {
            quoted = !quoted;
        } else if (ch == ',' && !quoted) {
            out.push_back(trim(cell));
            cell.clear();
        } else {
            cell += ch;
        }
    }
    out.push_back(trim(cell));
    return out;
}

bool is_missing(const std::string& cell)
{
    return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan" || cell == "null";
}

std::string edge_label(const std::vector<std::string>& names, int a, int b)
{
    return names[a] + "--" + names[b];
}

std::string path_label(const std::vector<std::string>& names, int a, int b)
{
    return names[a] + "->" + names[b];
}

} // namespace

std::string format_number(double v)
{
    if (std::isnan(v)) return "NA";
    if (v == 0.0) return "0";
    return fmt::format("{}", v);
}

SemSpec sem_spec_from_json(const Json& j)
{
    if (!j.is_object()) throw SpecError("model description must be a JSON object");
    SemSpec spec;
    std::set<std::string> seen;
    auto claim = [&](const std::string& name) {
        if (name.empty()) throw SpecError("empty name in model description");
        if (!seen.insert(name).second) throw SpecError(fmt::format("duplicate name '{}'", name));
    };
    try {
        for (const auto& latent : j.value("latents", Json::array())) {
            const auto name = latent.at("name").get<std::string>();
            claim(name);
            std::vector<std::pair<std::string, IndicatorType>> indicators;
            for (const auto& ind : latent.at("indicators")) {
                auto entry = named_entry(ind);
                claim(entry.first);
                indicators.push_back(std::move(entry));
            }
            spec.measurement.add_latent(name, indicators);
        }
        for (const auto& cov : j.value("covariates", Json::array())) {
            auto [name, type] = named_entry(cov);
            claim(name);
            spec.measurement.add_covariate(name, type);
        }
    } catch (const Json::exception& e) {
        throw SpecError(fmt::format("malformed model description: {}", e.what()));
    }
    spec.measurement.validate();
    const auto names = spec.measurement.node_names();

    try {
        if (j.contains("prior")) {
            const auto& prior = j.at("prior");
            for (const auto& pair : prior.value("forbidden", Json::array())) {
                if (!pair.is_array() || pair.size() != 2) throw SpecError("forbidden entries must be [from, to] pairs");
                spec.prior.forbidden.emplace_back(node_index(names, pair[0].get<std::string>()),
                                                  node_index(names, pair[1].get<std::string>()));
            }
            for (const auto& name : prior.value("exogenous_only", Json::array())) {
                spec.prior.exogenous_only.push_back(node_index(names, name.get<std::string>()));
            }
        }
        if (j.contains("structure")) spec.structure = dag_from_json(j.at("structure"), names);
    } catch (const Json::exception& e) {
        throw SpecError(fmt::format("malformed model description: {}", e.what()));
    }
    spec.prior.validate(spec.measurement.node_count());
    return spec;
}

Json to_json(const SemSpec& spec)
{
    const auto& m = spec.measurement;
    Json j{{"schema_version", kSchemaVersion}};
    Json latents = Json::array();
    for (int node = 0; node < m.latent_count(); ++node) {
        Json indicators = Json::array();
        for (int i : m.indicators_of(node)) indicators.push_back(type_to_json(m.indicator_names[i], m.indicator_types[i]));
        latents.push_back({{"name", m.latent_names[node]}, {"indicators", indicators}});
    }
    j["latents"] = latents;
    Json covariates = Json::array();
    for (int c = 0; c < static_cast<int>(m.covariate_names.size()); ++c) {
        const int ind = m.indicators_of(m.latent_count() + c).front();
        covariates.push_back(type_to_json(m.covariate_names[c], m.indicator_types[ind]));
    }
    j["covariates"] = covariates;
    const auto names = m.node_names();
    Json forbidden = Json::array();
    for (const auto& [a, b] : spec.prior.forbidden) forbidden.push_back({names[a], names[b]});
    Json exo = Json::array();
    for (int v : spec.prior.exogenous_only) exo.push_back(names[v]);
    j["prior"] = {{"forbidden", forbidden}, {"exogenous_only", exo}};
    if (spec.structure) j["structure"] = to_json(*spec.structure, names);
    return j;
}

SemSpec read_sem_spec(const std::filesystem::path& path)
{
    Json j;
    try {
        j = Json::parse(read_text(path));
    } catch (const Json::parse_error& e) {
        throw SpecError(fmt::format("{}: {}", path.string(), e.what()));
    }
    return sem_spec_from_json(j);
}

Dataset read_csv(std::istream& in, const std::string& source)
{
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split_csv_line(line);
            break;
        }
    }
    if (header.empty()) throw InputError(fmt::format("{}: no rows", source));
    Dataset d;
    for (const auto& name : header) {
        if (name.empty()) throw InputError(fmt::format("{}:{}: empty column name", source, line_no));
        d.columns.push_back({name, IndicatorType::continuous(), {}});
    }
    std::vector<std::size_t> missing_rows;
    std::vector<std::size_t> missing_lines;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw InputError(fmt::format("{}:{}: expected {} fields, found {}", source, line_no, header.size(),
                                         cells.size()),
                             {row});
        }
        bool missing = false;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double v = std::numeric_limits<double>::quiet_NaN();
            if (is_missing(cells[c])) {
                missing = true;
            } else {
                std::size_t used = 0;
                try {
                    v = std::stod(cells[c], &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used != cells[c].size()) {
                    throw InputError(fmt::format("{}:{}: column '{}' has non-numeric value '{}'", source, line_no,
                                                 header[c], cells[c]),
                                     {row});
                }
            }
            d.columns[c].values.push_back(v);
        }
        if (missing) {
            missing_rows.push_back(row);
            missing_lines.push_back(line_no);
        }
        ++row;
    }
    if (row == 0) throw InputError(fmt::format("{}: no rows", source));
    if (!missing_rows.empty()) {
        std::string lines;
        for (std::size_t k = 0; k < std::min<std::size_t>(missing_lines.size(), 20); ++k) {
            lines += (k == 0 ? "" : ", ") + std::to_string(missing_lines[k]);
        }
        if (missing_lines.size() > 20) lines += ", ...";
        throw InputError(fmt::format("{}: {} rows have missing values (lines {})", source, missing_rows.size(), lines),
                         std::move(missing_rows));
    }
    return d;
}

Dataset read_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw InputError(fmt::format("cannot open '{}'", path.string()));
    return read_csv(in, path.string());
}

void write_csv(std::ostream& out, const Dataset& d)
{
    for (std::size_t c = 0; c < d.cols(); ++c) out << (c == 0 ? "" : ",") << d.columns[c].name;
    out << '\n';
    for (std::size_t r = 0; r < d.rows(); ++r) {
        for (std::size_t c = 0; c < d.cols(); ++c) out << (c == 0 ? "" : ",") << format_number(d.columns[c].values[r]);
        out << '\n';
    }
}

Dataset bind_dataset(const Dataset& raw, const MeasurementSpec& measurement)
{
    Dataset out;
    std::vector<std::string> absent;
    for (int i = 0; i < measurement.indicator_count(); ++i) {
        const int c = raw.find(measurement.indicator_names[i]);
        if (c < 0) {
            absent.push_back(measurement.indicator_names[i]);
            continue;
        }
        Column col = raw.columns[static_cast<std::size_t>(c)];
        col.type = measurement.indicator_types[i];
        out.columns.push_back(std::move(col));
    }
    if (!absent.empty()) {
        std::string list;
        for (const auto& a : absent) list += (list.empty() ? "" : ", ") + a;
        throw InputError(fmt::format("data has no column for: {}", list));
    }
    out.validate();
    return out;
}

Json to_json(const Dag& g, const std::vector<std::string>& names)
{
    Json edges = Json::array();
    for (const auto& [a, b] : g.edges()) edges.push_back({names[a], names[b]});
    return {{"nodes", names}, {"edges", edges}};
}

Dag dag_from_json(const Json& j, const std::vector<std::string>& names)
{
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) {
        if (!e.is_array() || e.size() != 2) throw SpecError("edges must be [from, to] pairs");
        edges.emplace_back(node_index(names, e[0].get<std::string>()), node_index(names, e[1].get<std::string>()));
    }
    return Dag::from_edges(static_cast<int>(names.size()), edges);
}

Json to_json(const Cpdag& c, const std::vector<std::string>& names)
{
    Json directed = Json::array();
    for (const auto& [a, b] : c.directed_edges()) directed.push_back({names[a], names[b]});
    Json undirected = Json::array();
    for (const auto& [a, b] : c.undirected_edges()) undirected.push_back({names[a], names[b]});
    return {{"schema_version", kSchemaVersion}, {"nodes", names}, {"directed", directed}, {"undirected", undirected}};
}

Cpdag cpdag_from_json(const Json& j, std::vector<std::string>& names)
{
    try {
        names = j.at("nodes").get<std::vector<std::string>>();
        Cpdag c(static_cast<int>(names.size()));
        for (const auto& e : j.value("directed", Json::array())) {
            c.set_directed(node_index(names, e.at(0).get<std::string>()), node_index(names, e.at(1).get<std::string>()));
        }
        for (const auto& e : j.value("undirected", Json::array())) {
            c.set_undirected(node_index(names, e.at(0).get<std::string>()),
                             node_index(names, e.at(1).get<std::string>()));
        }
        return c;
    } catch (const Json::exception& e) {
        throw SpecError(fmt::format("malformed CPDAG document: {}", e.what()));
    }
}

Json to_json(const SemParameters& p)
{
    Json values{{"B", matrix_to_json(p.B)},           {"Gamma", matrix_to_json(p.Gamma)},
                {"Phi", matrix_to_json(p.Phi)},       {"Psi", matrix_to_json(p.Psi)},
                {"LambdaX", matrix_to_json(p.LambdaX)}, {"LambdaY", matrix_to_json(p.LambdaY)},
                {"ThetaDelta", matrix_to_json(p.ThetaDelta)}, {"ThetaEpsilon", matrix_to_json(p.ThetaEpsilon)}};
    Json free{{"B", mask_to_json(p.free.B)},           {"Gamma", mask_to_json(p.free.Gamma)},
              {"Phi", mask_to_json(p.free.Phi)},       {"Psi", mask_to_json(p.free.Psi)},
              {"LambdaX", mask_to_json(p.free.LambdaX)}, {"LambdaY", mask_to_json(p.free.LambdaY)},
              {"ThetaDelta", mask_to_json(p.free.ThetaDelta)}, {"ThetaEpsilon", mask_to_json(p.free.ThetaEpsilon)}};
    Json layout{{"endogenous", p.layout.endogenous},
                {"exogenous", p.layout.exogenous},
                {"y_indicators", p.layout.y_indicators},
                {"x_indicators", p.layout.x_indicators}};
    return {{"layout", layout}, {"values", values}, {"free", free}};
}

Json to_json(const FitResult& fit, long n_samples)
{
    Json flags = Json::array();
    for (auto f : fit.condition_flags) flags.push_back(to_string(f));
    return {{"schema_version", kSchemaVersion},
            {"n", n_samples},
            {"f_ml", fit.f_ml},
            {"chi_square", fit.chi_square},
            {"t", fit.t},
            {"bic", bic(fit.chi_square, fit.t, n_samples)},
            {"bic_formula", bic_formula()},
            {"converged", fit.converged},
            {"iterations", fit.iterations},
            {"condition_flags", flags},
            {"parameters", to_json(fit.theta_hat)}};
}

Json to_json(const RocResult& roc)
{
    Json points = Json::array();
    for (const auto& [fpr, tpr] : roc.points) points.push_back({fpr, tpr});
    Json j{{"schema_version", kSchemaVersion},
           {"positives", roc.positives},
           {"negatives", roc.negatives},
           {"defined", roc.defined},
           {"points", points}};
    j["auc"] = roc.defined ? Json(roc.auc) : Json(nullptr);
    return j;
}

void write_stability_csv(std::ostream& out, const StabilityGraph& edge, const StabilityGraph& path,
                         const std::vector<std::string>& names)
{
    out << "pair,kind,complexity,probability,n_models\n";
    const int n = edge.nodes();
    auto emit = [&](const std::string& label, const StabilityGraph& g, int a, int b) {
        for (int c = 0; c <= g.max_level(); ++c) {
            const auto v = g.at(a, b, c);
            out << label << ',' << to_string(g.kind()) << ',' << c << ',' << (v ? format_number(*v) : "NA") << ','
                << g.models_at(c) << '\n';
        }
    };
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) emit(edge_label(names, a, b), edge, a, b);
    }
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            if (a != b) emit(path_label(names, a, b), path, a, b);
        }
    }
}

std::pair<StabilityGraph, StabilityGraph> read_stability_csv(std::istream& in, const std::vector<std::string>& names)
{
    const int n = static_cast<int>(names.size());
    std::map<std::string, Edge> edge_pairs;
    std::map<std::string, Edge> path_pairs;
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            if (a == b) continue;
            if (a < b) edge_pairs[edge_label(names, a, b)] = {a, b};
            path_pairs[path_label(names, a, b)] = {a, b};
        }
    }
    struct Row {
        bool edge;
        Edge pair;
        int level;
        std::optional<double> p;
        int models;
    };
    std::vector<Row> rows;
    std::string line;
    std::size_t line_no = 0;
    int top = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 5) throw InputError(fmt::format("stability csv line {}: expected 5 fields", line_no));
        Row r{};
        r.edge = cells[1] == "edge";
        if (!r.edge && cells[1] != "causal_path") {
            throw InputError(fmt::format("stability csv line {}: unknown kind '{}'", line_no, cells[1]));
        }
        const auto& lookup = r.edge ? edge_pairs : path_pairs;
        const auto it = lookup.find(cells[0]);
        if (it == lookup.end()) {
            throw InputError(fmt::format("stability csv line {}: pair '{}' does not match the node names", line_no,
                                         cells[0]));
        }
        r.pair = it->second;
        try {
            r.level = std::stoi(cells[2]);
            if (!is_missing(cells[3])) r.p = std::stod(cells[3]);
            r.models = std::stoi(cells[4]);
        } catch (const std::exception&) {
            throw InputError(fmt::format("stability csv line {}: malformed number", line_no));
        }
        if (r.level < 0) throw InputError(fmt::format("stability csv line {}: negative complexity", line_no));
        top = std::max(top, r.level);
        rows.push_back(r);
    }
    if (rows.empty()) throw InputError("stability csv: no rows");
    StabilityGraph edge(StabilityKind::edge, n, top);
    StabilityGraph path(StabilityKind::causal_path, n, top);
    std::vector<int> edge_counts(static_cast<std::size_t>(top + 1), 0);
    std::vector<int> path_counts(static_cast<std::size_t>(top + 1), 0);
    for (const auto& r : rows) (r.edge ? edge_counts : path_counts)[r.level] = r.models;
    edge.set_counts(edge_counts);
    path.set_counts(path_counts);
    for (const auto& r : rows) {
        if (!r.p) continue;
        if (r.edge) {
            edge.set(r.pair.first, r.pair.second, r.level, *r.p);
            edge.set(r.pair.second, r.pair.first, r.level, *r.p);
        } else {
            path.set(r.pair.first, r.pair.second, r.level, *r.p);
        }
    }
    return {edge, path};
}

Json to_json(const StabilityGraph& g, const std::vector<std::string>& names)
{
    Json levels = Json::array();
    for (int c = 0; c <= g.max_level(); ++c) levels.push_back(g.models_at(c));
    Json values = Json::array();
    const int n = g.nodes();
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            if (a == b || (g.kind() == StabilityKind::edge && b < a)) continue;
            Json probs = Json::array();
            for (int c = 0; c <= g.max_level(); ++c) {
                const auto v = g.at(a, b, c);
                probs.push_back(v ? Json(*v) : Json(nullptr));
            }
            values.push_back({{"from", names[a]}, {"to", names[b]}, {"probability", probs}});
        }
    }
    return {{"kind", to_string(g.kind())}, {"n_models", levels}, {"pairs", values}};
}

std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(fmt::format("cannot open '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
    out << text;
    if (!out) throw InputError(fmt::format("write to '{}' failed", path.string()));
}

} // namespace stablesem
