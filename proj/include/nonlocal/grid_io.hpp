#pragma once

// JSON form of a tensor grid: {"dim", "axes": [[...], ...], "solution": {"lo", "hi"}}.

#include "nonlocal/grid.hpp"

#include <nlohmann/json.hpp>

namespace nonlocal {

inline nlohmann::json grid_to_json(const TensorGrid& grid) {
    nlohmann::json j;
    j["dim"] = grid.dim();
    auto& axes = j["axes"] = nlohmann::json::array();
    auto& lo = j["solution"]["lo"] = nlohmann::json::array();
    auto& hi = j["solution"]["hi"] = nlohmann::json::array();
    for (int k = 0; k < grid.dim(); ++k) {
        axes.push_back(grid.axis(k));
        lo.push_back(grid.solution_box().lo[k]);
        hi.push_back(grid.solution_box().hi[k]);
    }
    return j;
}

inline TensorGrid grid_from_json(const nlohmann::json& j) {
    try {
        const int dim = j.at("dim").get<int>();
        require_dim(dim);
        const auto& axes = j.at("axes");
        const auto& lo = j.at("solution").at("lo");
        const auto& hi = j.at("solution").at("hi");
        if (axes.size() != static_cast<std::size_t>(dim) || lo.size() != axes.size() ||
            hi.size() != axes.size())
            throw DimensionMismatch("grid document lists do not match dim");
        Partition p;
        Box box;
        box.dim = dim;
        for (int k = 0; k < dim; ++k) {
            p[k] = axes[k].get<std::vector<double>>();
            box.lo[k] = lo[k].get<double>();
            box.hi[k] = hi[k].get<double>();
        }
        return TensorGrid(dim, std::move(p), box);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed grid document: ") + e.what());
    }
}

} // namespace nonlocal
