#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmflow/convex.hpp"
#include "mmflow/measures.hpp"
#include "mmflow/moment_solver.hpp"
#include "mmflow/ot_core.hpp"
#include "mmflow/primal_verify.hpp"

namespace mmflow::io {

using Json = nlohmann::json;

/// Discrete: {"atoms": [[...], ...], "weights": [...]}.
/// Grid: {"origin": [...], "spacing": [...], "shape": [...], "values": [...]}.
/// Scalars are accepted for one-dimensional atoms.
Json to_json(const DiscreteMeasure& m);
Json to_json(const GridDensity& g);
Json to_json(const Measure& m);
Measure measure_from_json(const Json& j);
DiscreteMeasure discrete_from_json(const Json& j);
GridDensity grid_from_json(const Json& j);

/// {"sites": [[...]], "offsets": [...], "active": [...]}; "active" optional.
Json to_json(const MaxAffineConvex& u);
MaxAffineConvex convex_from_json(const Json& j);

Json to_json(const CorrelationResult& r);
Json to_json(const SolveReport& r);
Json to_json(const PrimalReport& r);

Json read_json_file(const std::string& path);
/// Pretty-printed with a trailing newline. "-" writes to stdout.
void write_json_file(const std::string& path, const Json& j);
std::string dump(const Json& j);

void write_hyperplane_csv(std::ostream& out, const std::vector<HyperplaneRow>& rows);

}  // namespace mmflow::io
