#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "lcvx/conditions.hpp"
#include "lcvx/micp.hpp"
#include "lcvx/solver.hpp"

namespace lcvx
{

/// "%.17g"; identical doubles always print identically.
std::string format_real(double v);

/// One row per node k = 0..N with columns
///
///     t, x0..x{n-1}, then per input i: u{i}_0..u{i}_{m-1}, unorm{i}, sigma{i}, gamma{i}, gain{i}
///
/// Input columns of the final node (k = N) are empty; gain columns are empty when no adjoint is given.
void write_trajectory_csv(std::ostream& out, const Solution& sol, const AdjointTrace* trace = nullptr);

/// Plot-ready tables: states over time, input norms, normalized gains.
void write_states_csv(std::ostream& out, const Solution& sol);
void write_input_norms_csv(std::ostream& out, const Solution& sol);
void write_gains_csv(std::ostream& out, const Solution& sol, const AdjointTrace& trace);

nlohmann::json to_json(const ConditionReport& rep);
nlohmann::json to_json(const VerificationReport& rep);
nlohmann::json to_json(const BnbStats& stats);
nlohmann::json solution_summary(const Solution& sol);

}  // namespace lcvx
