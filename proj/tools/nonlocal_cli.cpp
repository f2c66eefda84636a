// Experiment runner: `nonlocal_cli run ...` and `nonlocal_cli list`.

#include "nonlocal/nonlocal.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

std::vector<std::vector<std::size_t>> parse_levels(const std::string& text) {
    // "40,80,160" or "40x20,50x25" or "10+15x20,20+30x40"
    std::vector<std::vector<std::size_t>> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::vector<std::size_t> level;
        std::string num;
        for (char ch : item + "x") {
            if (ch == 'x' || ch == '+') {
                if (num.empty())
                    throw nonlocal::InvalidArgument("malformed level '" + item + "'");
                level.push_back(std::stoul(num));
                num.clear();
            } else if (std::isdigit(static_cast<unsigned char>(ch))) {
                num += ch;
            } else if (!std::isspace(static_cast<unsigned char>(ch))) {
                throw nonlocal::InvalidArgument("malformed level '" + item + "'");
            }
        }
        out.push_back(level);
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nonlocal diffusion experiments with truncated Gaussian kernels"};
    app.require_subcommand(1);

    auto* list = app.add_subcommand("list", "List examples and cases");

    auto* run = app.add_subcommand("run", "Run a refinement study and write CSV");
    std::string config_path, case_name, scheme, family, out, levels, dump_field, dump_matrix;
    int example = 0;
    double delta = 0.0, ratio = 0.0, chi2 = 0.0, tol = 0.0;
    bool no_timing = false, verbose = false;
    run->add_option("--config", config_path, "JSON config file");
    run->add_option("--example", example, "Example id (1-6)")->check(CLI::Range(1, 6));
    run->add_option("--case", case_name, "Case name (see `list`)");
    run->add_option("--scheme", scheme, "collocation | fd-quadrature");
    run->add_option("--family", family, "uniform | anisotropic | split");
    run->add_option("--levels", levels, "Grid levels, e.g. 40,80 or 40x20,50x25 or 10+15x20");
    run->add_option("--delta", delta, "Fixed horizon");
    run->add_option("--ratio", ratio, "Horizon as a multiple of h");
    run->add_option("--chi2", chi2, "Truncation level");
    run->add_option("--tol", tol, "Solver tolerance");
    run->add_option("--out", out, "CSV output path (default stdout)");
    run->add_option("--dump-field", dump_field, "Write 'x y value' lines for the finest grid");
    run->add_option("--dump-matrix", dump_matrix, "Write 'row col value' triplets for the finest grid");
    run->add_flag("--no-timing", no_timing, "Write wall_ms as 0 for reproducible output");
    run->add_flag("-v,--verbose", verbose, "Log per-level progress to stderr");

    CLI11_PARSE(app, argc, argv);

    try {
        if (list->parsed()) {
            for (const auto& e : nonlocal::list_examples())
                std::cout << e.example << '\t' << e.case_name << '\t' << e.description << '\t'
                          << e.defaults << '\n';
            return 0;
        }

        std::vector<nonlocal::ExperimentConfig> configs;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in)
                throw nonlocal::InvalidArgument("cannot read " + config_path);
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(in);
            } catch (const nlohmann::json::exception& e) {
                throw nonlocal::InvalidArgument(std::string("config parse error: ") + e.what());
            }
            configs.push_back(nonlocal::config_from_json(j));
        } else if (example != 0) {
            if (case_name.empty())
                throw nonlocal::InvalidArgument("--example needs --case");
            const auto fam = family.empty() ? nonlocal::GridFamily::uniform
                                            : nonlocal::family_from_string(family);
            configs = nonlocal::example_configs(example, case_name, fam);
        } else if (!case_name.empty()) {
            nonlocal::ExperimentConfig cfg;
            cfg.case_name = case_name;
            cfg.delta = nonlocal::find_case(case_name).fixed_delta;
            configs.push_back(cfg);
        } else {
            throw nonlocal::InvalidArgument("run needs --config, --example or --case");
        }

        for (auto& cfg : configs) {
            if (!case_name.empty())
                cfg.case_name = case_name;
            if (!scheme.empty())
                cfg.scheme = nonlocal::scheme_from_string(scheme);
            if (!family.empty())
                cfg.family = nonlocal::family_from_string(family);
            if (!levels.empty())
                cfg.levels = parse_levels(levels);
            if (*run->get_option("--delta"))
                cfg.delta = delta;
            if (*run->get_option("--ratio")) {
                cfg.ratio = ratio;
                cfg.delta.reset();
            }
            if (*run->get_option("--chi2"))
                cfg.chi2 = chi2;
            if (*run->get_option("--tol"))
                cfg.tol = tol;
            if (!out.empty())
                cfg.out = out;
            if (!dump_field.empty())
                cfg.dump_field = dump_field;
            if (!dump_matrix.empty())
                cfg.dump_matrix = dump_matrix;
            if (no_timing)
                cfg.timing = false;
        }

        std::ofstream file;
        std::ostream* csv = &std::cout;
        if (!configs.front().out.empty()) {
            file.open(configs.front().out);
            if (!file)
                throw nonlocal::InvalidArgument("cannot write " + configs.front().out);
            csv = &file;
        }
        nonlocal::write_csv_header(*csv);
        for (const auto& cfg : configs) {
            const auto result = nonlocal::run(cfg, verbose ? &std::cerr : nullptr);
            nonlocal::write_csv_rows(*csv, result);
            csv->flush();
        }
        return 0;
    } catch (const nonlocal::NotConverged& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const nonlocal::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
