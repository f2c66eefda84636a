#pragma once

// Refinement studies: build grid, evaluate data, assemble, solve, measure.

#include "nonlocal/assembly.hpp"
#include "nonlocal/diagnostics.hpp"
#include "nonlocal/grid.hpp"
#include "nonlocal/linsolve.hpp"
#include "nonlocal/problems.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace nonlocal {

enum class GridFamily {
    /// N cells on every axis.
    uniform,
    /// (N_1, ..., N_d) cells per axis.
    anisotropic,
    /// (N_left, N_right, N_y): x split at the midpoint, y uniform.
    split,
};

inline const char* to_string(GridFamily f) {
    switch (f) {
    case GridFamily::uniform:
        return "uniform";
    case GridFamily::anisotropic:
        return "anisotropic";
    case GridFamily::split:
        return "split";
    }
    return "?";
}

inline GridFamily family_from_string(const std::string& s) {
    if (s == "uniform")
        return GridFamily::uniform;
    if (s == "anisotropic")
        return GridFamily::anisotropic;
    if (s == "split")
        return GridFamily::split;
    throw InvalidArgument("unknown grid family '" + s + "'");
}

struct ExperimentConfig {
    std::string case_name;
    Scheme scheme = Scheme::collocation;
    GridFamily family = GridFamily::uniform;
    std::vector<std::vector<std::size_t>> levels;
    /// Fixed horizon; when absent delta = ratio * h_max.
    std::optional<double> delta;
    double ratio = 1.0;
    double chi2 = 36.0;
    double tol = 1e-12;
    std::string out;
    std::string dump_field;
    std::string dump_matrix;
    /// When false wall_ms is written as 0 so reruns are byte-identical.
    bool timing = true;
    /// Prepended to grid_desc (used by parameter sweeps).
    std::string label;

    void validate() const {
        if (case_name.empty())
            throw InvalidArgument("config needs a case name");
        if (levels.empty())
            throw InvalidArgument("config needs at least one grid level");
        if (delta && !(*delta > 0.0))
            throw InvalidArgument("delta must be positive");
        if (!delta && !(ratio > 0.0))
            throw InvalidArgument("delta ratio must be positive");
        if (!(chi2 > 0.0))
            throw InvalidArgument("chi2 must be positive");
        if (!(tol > 0.0))
            throw InvalidArgument("solver tolerance must be positive");
        std::size_t want = family == GridFamily::split ? 3 : 0;
        double prev = 0.0;
        for (const auto& l : levels) {
            if (l.empty() || (want && l.size() != want))
                throw InvalidArgument("grid level has the wrong number of counts for family " +
                                      std::string(to_string(family)));
            for (auto n : l)
                if (n == 0)
                    throw InvalidArgument("grid levels need positive cell counts");
            const double size = refinement_measure(l);
            if (!(size > prev))
                throw InvalidArgument("grid levels must increase");
            prev = size;
        }
    }

    /// Refinement measure used for rates: N, N_1, or N_left + N_right.
    double refinement_measure(const std::vector<std::size_t>& level) const {
        if (family == GridFamily::split)
            return static_cast<double>(level.at(0) + level.at(1));
        return static_cast<double>(level.at(0));
    }
};

struct LevelResult {
    std::string grid_desc;
    double refinement = 0.0;
    double h_max = 0.0;
    double delta = 0.0;
    std::optional<double> error_linf;
    std::optional<double> rate;
    std::size_t solve_iters = 0;
    double wall_ms = 0.0;
    bool mmatrix_ok = false;
    std::optional<bool> maxprin_ok;
    double solution_min = 0.0;
    double solution_max = 0.0;
    std::size_t unknowns = 0;
    std::size_t stencils = 0;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<LevelResult> rows;
};

inline std::string level_description(const ExperimentConfig& cfg, const std::vector<std::size_t>& l,
                                     int dim) {
    std::string s;
    auto join = [&](std::size_t count) {
        for (std::size_t k = 0; k < count; ++k)
            s += (k ? "x" : "") + std::to_string(k < l.size() ? l[k] : l.back());
    };
    if (cfg.family == GridFamily::split)
        s = std::to_string(l[0]) + "+" + std::to_string(l[1]) + "x" + std::to_string(l[2]);
    else if (cfg.family == GridFamily::uniform)
        join(static_cast<std::size_t>(dim));
    else
        join(l.size());
    return cfg.label.empty() ? s : cfg.label + " " + s;
}

inline Partition level_partition(const ExperimentConfig& cfg, const std::vector<std::size_t>& l,
                                 const Box& box) {
    Partition p;
    const int d = box.dim;
    switch (cfg.family) {
    case GridFamily::uniform:
        for (int k = 0; k < d; ++k)
            p[k] = uniform_partition(box.lo[k], box.hi[k], l.at(0));
        break;
    case GridFamily::anisotropic:
        require_same_size(l.size(), static_cast<std::size_t>(d), "anisotropic level vs dimension");
        for (int k = 0; k < d; ++k)
            p[k] = uniform_partition(box.lo[k], box.hi[k], l[k]);
        break;
    case GridFamily::split: {
        if (d != 2)
            throw InvalidArgument("split grids are two-dimensional");
        const double mid = 0.5 * (box.lo[0] + box.hi[0]);
        p[0] = split_partition(box.lo[0], mid, box.hi[0], l.at(0), l.at(1));
        p[1] = uniform_partition(box.lo[1], box.hi[1], l.at(2));
        break;
    }
    }
    return p;
}

/// Largest cell width of a level, computed from the cell counts rather than
/// from rounded breakpoint differences.
inline double nominal_spacing(const ExperimentConfig& cfg, const std::vector<std::size_t>& l,
                              const Box& box) {
    double h = 0.0;
    for (int k = 0; k < box.dim; ++k) {
        const double len = box.hi[k] - box.lo[k];
        switch (cfg.family) {
        case GridFamily::uniform:
            h = std::max(h, len / static_cast<double>(l.at(0)));
            break;
        case GridFamily::anisotropic:
            h = std::max(h, len / static_cast<double>(l.at(k)));
            break;
        case GridFamily::split:
            if (k == 0)
                h = std::max({h, 0.5 * len / static_cast<double>(l.at(0)),
                              0.5 * len / static_cast<double>(l.at(1))});
            else
                h = std::max(h, len / static_cast<double>(l.at(2)));
            break;
        }
    }
    return h;
}

/// Nodal solution over the whole grid: interior values then the collar data.
inline void write_field(std::ostream& out, const TensorGrid& grid, const LatticeOperator& op,
                        std::span<const double> u, std::span<const double> g) {
    const std::vector<double> full = op.scatter(u, g);
    char buf[160];
    for (std::size_t f = 0; f < grid.node_count(); ++f) {
        const Vec x = grid.coord(f);
        if (grid.dim() == 2)
            std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", x[0], x[1], full[f]);
        else
            std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g\n", x[0], x[1], x[2], full[f]);
        out << buf;
    }
}

struct LevelData {
    TensorGrid grid;
    KernelParams params;
    std::vector<double> f;
    std::vector<double> g;
    std::vector<double> exact;
};

inline LevelData prepare_level(const ExperimentConfig& cfg, const ManufacturedCase& c,
                               const std::vector<std::size_t>& level) {
    const Partition p = level_partition(cfg, level, c.domain);
    const double h_max = nominal_spacing(cfg, level, c.domain);
    KernelParams params{cfg.delta ? *cfg.delta : cfg.ratio * h_max, cfg.chi2, c.dim};
    TensorGrid grid = build_grid(c.domain, p, params, c.field);
    LevelData d{std::move(grid), params, {}, {}, {}};
    const auto& interior = d.grid.interior_nodes();
    d.f.resize(interior.size());
    parallel_for(interior.size(),
                 [&](std::size_t r) { d.f[r] = source_value(c, d.grid.coord(interior[r]), params); });
    const auto& collar = d.grid.collar_nodes();
    d.g.resize(collar.size());
    for (std::size_t i = 0; i < collar.size(); ++i)
        d.g[i] = c.boundary_value(d.grid.coord(collar[i]));
    if (c.exact) {
        d.exact.resize(interior.size());
        for (std::size_t r = 0; r < interior.size(); ++r)
            d.exact[r] = c.exact->value(d.grid.coord(interior[r]));
    }
    return d;
}

inline ExperimentResult run(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
    cfg.validate();
    const ManufacturedCase c = find_case(cfg.case_name);
    ExperimentResult result{cfg, {}};
    for (std::size_t li = 0; li < cfg.levels.size(); ++li) {
        const auto& level = cfg.levels[li];
        const std::string desc = level_description(cfg, level, c.dim);
        try {
            LevelData d = prepare_level(cfg, c, level);
            const auto t0 = std::chrono::steady_clock::now();
            const CollocationSystem sys =
                assemble(d.grid, c.field, d.params, cfg.scheme, d.f, d.g);
            SolveOptions opt;
            opt.tol = cfg.tol;
            const SolveResult sol = solve(sys.matrix, sys.rhs, opt);
            const auto t1 = std::chrono::steady_clock::now();

            LevelResult row;
            row.grid_desc = desc;
            row.refinement = cfg.refinement_measure(level);
            row.h_max = nominal_spacing(cfg, level, c.domain);
            row.delta = d.params.delta;
            row.solve_iters = sol.iterations;
            row.wall_ms =
                cfg.timing ? std::chrono::duration<double, std::milli>(t1 - t0).count() : 0.0;
            row.mmatrix_ok = m_matrix_report(sys).pass;
            row.unknowns = sys.matrix.size();
            row.stencils = sys.matrix.stencil_count();
            const MaxPrincipleReport ext = max_principle_report(sol.x, -INFINITY, INFINITY);
            row.solution_min = ext.min;
            row.solution_max = ext.max;
            if (c.solution_range)
                row.maxprin_ok =
                    max_principle_report(sol.x, c.solution_range->first, c.solution_range->second)
                        .pass;
            if (c.exact)
                row.error_linf = linf_error(sol.x, d.exact);
            if (li > 0 && row.error_linf && result.rows.back().error_linf &&
                *row.error_linf > 0.0 && *result.rows.back().error_linf > 0.0) {
                const double e[2] = {*result.rows.back().error_linf, *row.error_linf};
                const double n[2] = {result.rows.back().refinement, row.refinement};
                row.rate = convergence_rate(e, n)[0];
            }
            if (log) {
                *log << desc << ": unknowns " << row.unknowns << ", stencils " << row.stencils
                     << ", iterations " << row.solve_iters << " (" << sol.method << ")";
                if (row.error_linf)
                    *log << ", error " << *row.error_linf;
                *log << "\n";
            }
            if (li + 1 == cfg.levels.size()) {
                if (!cfg.dump_field.empty()) {
                    std::ofstream f(cfg.dump_field);
                    if (!f)
                        throw InvalidArgument("cannot write " + cfg.dump_field);
                    write_field(f, d.grid, sys.matrix, sol.x, d.g);
                }
                if (!cfg.dump_matrix.empty()) {
                    std::ofstream f(cfg.dump_matrix);
                    if (!f)
                        throw InvalidArgument("cannot write " + cfg.dump_matrix);
                    write_triplets(f, sys.matrix);
                }
            }
            result.rows.push_back(std::move(row));
        } catch (const NotConverged& e) {
            throw NotConverged("grid " + desc + ": " + e.what());
        } catch (const Error& e) {
            throw Error("grid " + desc + ": " + e.what());
        }
    }
    return result;
}

inline std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_csv_header(std::ostream& out) {
    out << "grid_desc,h_max,delta,error_linf,rate,solve_iters,wall_ms,mmatrix_ok,maxprin_ok\n";
}

inline void write_csv_rows(std::ostream& out, const ExperimentResult& r) {
    for (const auto& row : r.rows) {
        out << row.grid_desc << ',' << format_number(row.h_max) << ',' << format_number(row.delta)
            << ',' << (row.error_linf ? format_number(*row.error_linf) : "") << ','
            << (row.rate ? format_number(*row.rate) : "") << ',' << row.solve_iters << ','
            << format_number(row.wall_ms) << ',' << (row.mmatrix_ok ? "true" : "false") << ','
            << (row.maxprin_ok ? (*row.maxprin_ok ? "true" : "false") : "") << '\n';
    }
}

inline void write_csv(std::ostream& out, const ExperimentResult& r) {
    write_csv_header(out);
    write_csv_rows(out, r);
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    try {
        cfg.case_name = j.at("case").get<std::string>();
        if (j.contains("scheme"))
            cfg.scheme = scheme_from_string(j["scheme"].get<std::string>());
        if (j.contains("family"))
            cfg.family = family_from_string(j["family"].get<std::string>());
        for (const auto& l : j.at("levels")) {
            if (l.is_array())
                cfg.levels.push_back(l.get<std::vector<std::size_t>>());
            else
                cfg.levels.push_back({l.get<std::size_t>()});
        }
        if (j.contains("delta"))
            cfg.delta = j["delta"].get<double>();
        if (j.contains("ratio"))
            cfg.ratio = j["ratio"].get<double>();
        if (j.contains("chi2"))
            cfg.chi2 = j["chi2"].get<double>();
        if (j.contains("tol"))
            cfg.tol = j["tol"].get<double>();
        if (j.contains("out"))
            cfg.out = j["out"].get<std::string>();
        if (j.contains("dump_field"))
            cfg.dump_field = j["dump_field"].get<std::string>();
        if (j.contains("dump_matrix"))
            cfg.dump_matrix = j["dump_matrix"].get<std::string>();
        if (j.contains("timing"))
            cfg.timing = j["timing"].get<bool>();
        if (j.contains("label"))
            cfg.label = j["label"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed config: ") + e.what());
    }
    return cfg;
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["case"] = cfg.case_name;
    j["scheme"] = to_string(cfg.scheme);
    j["family"] = to_string(cfg.family);
    j["levels"] = cfg.levels;
    if (cfg.delta)
        j["delta"] = *cfg.delta;
    else
        j["ratio"] = cfg.ratio;
    j["chi2"] = cfg.chi2;
    j["tol"] = cfg.tol;
    j["timing"] = cfg.timing;
    if (!cfg.out.empty())
        j["out"] = cfg.out;
    if (!cfg.dump_field.empty())
        j["dump_field"] = cfg.dump_field;
    if (!cfg.dump_matrix.empty())
        j["dump_matrix"] = cfg.dump_matrix;
    if (!cfg.label.empty())
        j["label"] = cfg.label;
    return j;
}

/// Default study for an example id and case, matching the published setups.
/// Example 6 expands into one configuration per truncation level.
inline std::vector<ExperimentConfig> example_configs(int example, const std::string& case_name,
                                                     GridFamily family = GridFamily::uniform) {
    const ManufacturedCase c = find_case(case_name);
    const int expected = example == 6 ? 2 : example;
    if (c.example != expected)
        throw InvalidArgument("case '" + case_name + "' does not belong to example " +
                              std::to_string(example));
    ExperimentConfig cfg;
    cfg.case_name = case_name;
    cfg.family = family;
    cfg.delta = c.fixed_delta;
    using L = std::vector<std::vector<std::size_t>>;
    switch (example) {
    case 1:
        if (family == GridFamily::uniform)
            cfg.levels = L{{20}, {25}, {30}, {35}, {40}, {50}};
        else if (family == GridFamily::anisotropic)
            cfg.levels = L{{40, 20}, {50, 25}, {60, 30}, {70, 35}, {80, 40}};
        else
            cfg.levels = L{{10, 15, 20}, {20, 30, 40}, {40, 60, 80}, {80, 120, 160}, {160, 240, 320}};
        break;
    case 2:
    case 4:
        cfg.levels = L{{40}, {80}, {160}, {320}};
        break;
    case 3:
        cfg.levels = L{{20}, {30}, {40}, {50}};
        break;
    case 5:
        cfg.levels = L{{80}};
        break;
    case 6: {
        std::vector<ExperimentConfig> sweep;
        for (double chi2 : {9.0, 16.0, 25.0, 36.0, 49.0}) {
            ExperimentConfig s = cfg;
            s.levels = L{{40}, {80}, {160}};
            s.chi2 = chi2;
            s.label = "chi2=" + format_number(chi2);
            sweep.push_back(s);
        }
        return sweep;
    }
    default:
        throw InvalidArgument("unknown example " + std::to_string(example));
    }
    if (family != GridFamily::uniform && example != 1)
        throw InvalidArgument("only example 1 defines non-uniform grid families");
    return {cfg};
}

struct ExampleInfo {
    int example;
    std::string case_name;
    std::string description;
    std::string defaults;
};

inline std::vector<ExampleInfo> list_examples() {
    std::vector<ExampleInfo> out;
    for (const auto& c : catalog()) {
        std::string defaults = c.fixed_delta ? "delta=" + format_number(*c.fixed_delta)
                                             : std::string("delta=h");
        defaults += " chi2=36 source=" + std::string(to_string(c.mode));
        out.push_back({c.example, c.name, c.description, defaults});
        if (c.example == 2)
            out.push_back({6, c.name, c.description + ", truncation sweep chi2 in {9,16,25,36,49}",
                           "delta=h"});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const ExampleInfo& a, const ExampleInfo& b) { return a.example < b.example; });
    return out;
}

} // namespace nonlocal
