#pragma once

// JSON form of a SolveResult:
//   {converged, iters, final_residual, avg_stress (9 numbers, row-major), energy_residual, u (3N numbers)}
// energy_residual is null when the energy ledger was off.

#include "drbatch/microsolver.hpp"

#include <json.hpp>

#include <cmath>
#include <string>

namespace drb {

inline nlohmann::json to_json(const SolveResult& r) {
    nlohmann::json j;
    j["converged"] = r.converged;
    j["iters"] = r.iters;
    j["final_residual"] = r.final_residual;
    auto stress = nlohmann::json::array();
    for (const auto& row : r.avg_stress)
        for (double x : row)
            stress.push_back(x);
    j["avg_stress"] = std::move(stress);
    j["energy_residual"] = std::isnan(r.energy_residual) ? nlohmann::json(nullptr) : nlohmann::json(r.energy_residual);
    j["u"] = r.u;
    return j;
}

inline SolveResult solve_result_from_json(const nlohmann::json& j) {
    SolveResult r;
    r.converged = j.at("converged").get<bool>();
    r.iters = j.at("iters").get<std::size_t>();
    r.final_residual = j.at("final_residual").get<double>();
    const auto& s = j.at("avg_stress");
    for (int k = 0; k < 9; ++k)
        r.avg_stress[k / 3][k % 3] = s.at(k).get<double>();
    const auto& e = j.at("energy_residual");
    r.energy_residual = e.is_null() ? std::nan("") : e.get<double>();
    r.u = j.at("u").get<std::vector<double>>();
    return r;
}

} // namespace drb
