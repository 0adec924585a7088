#include "mmflow/io.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "mmflow/error.hpp"

namespace mmflow::io {

namespace {

Point point_from_json(const Json& j) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array()) throw ValidationError("expected a number or an array of numbers");
  Point p;
  for (const auto& c : j) {
    if (!c.is_number()) throw ValidationError("expected numeric coordinates");
    p.push_back(c.get<double>());
  }
  return p;
}

std::vector<double> numbers(const Json& j, const char* what) {
  if (!j.is_array()) throw ValidationError(std::string("'") + what + "' must be an array");
  std::vector<double> out;
  for (const auto& c : j) {
    if (!c.is_number()) throw ValidationError(std::string("'") + what + "' must contain numbers");
    out.push_back(c.get<double>());
  }
  return out;
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
  return j.at(key);
}

}  // namespace

Json to_json(const DiscreteMeasure& m) {
  return Json{{"atoms", m.atoms()}, {"weights", m.weights()}};
}

Json to_json(const GridDensity& g) {
  return Json{{"origin", g.origin()}, {"spacing", g.spacing()}, {"shape", g.shape()}, {"values", g.values()}};
}

Json to_json(const Measure& m) {
  return std::visit([](const auto& x) { return to_json(x); }, m);
}

DiscreteMeasure discrete_from_json(const Json& j) {
  const Json& atoms = field(j, "atoms");
  if (!atoms.is_array()) throw ValidationError("'atoms' must be an array");
  std::vector<Point> pts;
  for (const auto& a : atoms) pts.push_back(point_from_json(a));
  return DiscreteMeasure::from_atoms(std::move(pts), numbers(field(j, "weights"), "weights"));
}

GridDensity grid_from_json(const Json& j) {
  std::vector<std::size_t> shape;
  const Json& s = field(j, "shape");
  if (!s.is_array()) throw ValidationError("'shape' must be an array");
  for (const auto& c : s) {
    if (!c.is_number_integer() || c.get<long long>() <= 0) throw ValidationError("'shape' must hold positive integers");
    shape.push_back(c.get<std::size_t>());
  }
  return GridDensity::make(numbers(field(j, "origin"), "origin"), numbers(field(j, "spacing"), "spacing"),
                           std::move(shape), numbers(field(j, "values"), "values"));
}

Measure measure_from_json(const Json& j) {
  if (j.is_object() && j.contains("atoms")) return discrete_from_json(j);
  if (j.is_object() && j.contains("values")) return grid_from_json(j);
  throw ValidationError("unrecognized measure: expected 'atoms'/'weights' or a grid");
}

Json to_json(const MaxAffineConvex& u) {
  return Json{{"sites", u.sites()}, {"offsets", u.offsets()}, {"active", u.active()}};
}

MaxAffineConvex convex_from_json(const Json& j) {
  const Json& sites = field(j, "sites");
  if (!sites.is_array()) throw ValidationError("'sites' must be an array");
  std::vector<Point> pts;
  for (const auto& a : sites) pts.push_back(point_from_json(a));
  std::vector<bool> active;
  if (j.contains("active")) {
    for (const auto& a : j.at("active")) {
      if (!a.is_boolean()) throw ValidationError("'active' must contain booleans");
      active.push_back(a.get<bool>());
    }
  }
  return MaxAffineConvex(std::move(pts), numbers(field(j, "offsets"), "offsets"), std::move(active));
}

Json to_json(const CorrelationResult& r) {
  Json entries = Json::array();
  for (const auto& e : r.plan.entries) entries.push_back(Json{e.source, e.target, e.mass});
  return Json{{"value", r.value},
              {"dual_value", r.dual_value},
              {"entries", entries},
              {"duals", {{"u", r.duals.u_source}, {"u_star", r.duals.u_star_target}}}};
}

Json to_json(const SolveReport& r) {
  Json trace = Json::array();
  for (const auto& t : r.trace) trace.push_back(Json{t.iteration, t.objective});
  return Json{{"sites", r.sites},
              {"offsets", r.offsets},
              {"gauge_offsets", r.gauge_offsets},
              {"logZ", r.log_z},
              {"objective", r.objective},
              {"gradient_norm", r.gradient_norm},
              {"residual", r.residual},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"gauge", r.gauge},
              {"trace", trace}};
}

Json to_json(const PrimalReport& r) {
  return Json{{"final_density", to_json(r.final_density)},
              {"grid", {{"lo", r.grid.lo}, {"hi", r.grid.hi}, {"cells", r.grid.cells}}},
              {"objective_trace", r.objective_trace},
              {"fixed_point_residual", r.fixed_point_residual},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"expanded", r.expanded}};
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ValidationError("invalid JSON in '" + path + "': " + e.what());
  }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void write_json_file(const std::string& path, const Json& j) {
  if (path == "-") {
    std::cout << dump(j);
    return;
  }
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << dump(j);
}

void write_hyperplane_csv(std::ostream& out, const std::vector<HyperplaneRow>& rows) {
  std::ostringstream text;
  text << std::setprecision(17);
  text << "n, entropy, correlation_bound, objective_upper_bound\n";
  for (const auto& r : rows) {
    text << r.n << ", " << r.entropy << ", " << r.correlation_bound << ", " << r.objective_upper_bound << "\n";
  }
  out << text.str();
}

}  // namespace mmflow::io
