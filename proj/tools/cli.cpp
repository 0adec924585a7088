#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "mmflow/entropy.hpp"
#include "mmflow/error.hpp"
#include "mmflow/io.hpp"
#include "mmflow/moment_solver.hpp"
#include "mmflow/ot_core.hpp"
#include "mmflow/primal_verify.hpp"
#include "mmflow/suites.hpp"

namespace mmflow::cli {

namespace {

using io::Json;

struct Context {
  std::ostream& out;
  int threads = 1;
  std::uint64_t seed = 1;

  IntegrationOptions integration() const {
    IntegrationOptions o;
    o.threads = threads;
    o.seed = seed;
    return o;
  }

  void emit(const std::string& path, const Json& j) const {
    if (path.empty() || path == "-") {
      out << io::dump(j);
    } else {
      io::write_json_file(path, j);
    }
  }
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &pos);
    } catch (const std::logic_error&) {
      throw ValidationError("not a number: '" + item + "'");
    }
    if (pos != item.size()) throw ValidationError("not a number: '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError("empty number list");
  return out;
}

DiscreteMeasure load_discrete(const std::string& path) { return io::discrete_from_json(io::read_json_file(path)); }

Json cells_json(const CellDecomposition& dec) {
  Json j{{"dim", dec.dim}};
  if (dec.dim == 1) {
    Json list = Json::array();
    for (const auto& iv : dec.intervals) {
      // JSON has no infinities: unbounded ends are null.
      Json lo = std::isfinite(iv.lo) ? Json(iv.lo) : Json(nullptr);
      Json hi = std::isfinite(iv.hi) ? Json(iv.hi) : Json(nullptr);
      list.push_back({{"piece", iv.piece}, {"lo", lo}, {"hi", hi}});
    }
    j["intervals"] = list;
  } else {
    Json list = Json::array();
    for (const auto& p : dec.polygons) {
      Json verts = Json::array();
      for (const auto& v : p.vertices) verts.push_back({v[0], v[1]});
      Json halfplanes = Json::array();
      for (const auto& h : p.halfplanes) halfplanes.push_back({{"normal", {h.normal[0], h.normal[1]}}, {"bound", h.bound}});
      list.push_back({{"piece", p.piece}, {"bounded", p.bounded}, {"vertices", verts}, {"halfplanes", halfplanes}});
    }
    j["polygons"] = list;
    j["box_half_width"] = dec.box_half_width;
  }
  return j;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"mmflow: moment measures, maximal correlation and optimal transport"};
  app.require_subcommand(1);
  Context ctx{out};
  int threads_flag = 0;
  app.add_option("--threads", threads_flag, "worker threads for integration (default: MMFLOW_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", ctx.seed, "seed for every stochastic routine");

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "find u with (grad u)_# e^{-u} = mu");
  std::string solve_mu, solve_out = "-", emit_density, solve_grid;
  SolveOptions solve_opts;
  solve_cmd->add_option("--mu", solve_mu, "target measure (JSON)")->required();
  solve_cmd->add_option("--tol", solve_opts.tol, "residual tolerance")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--max-iter", solve_opts.max_iter, "iteration limit");
  solve_cmd->add_option("--out", solve_out, "report path ('-' for stdout)");
  solve_cmd->add_option("--emit-density", emit_density, "write e^{-u} on a grid (d = 1)");
  solve_cmd->add_option("--grid", solve_grid, "grid lo:hi:cells for --emit-density (default: automatic)");

  // transport
  auto* transport_cmd = app.add_subcommand("transport", "maximal correlation / W2 between two measures");
  std::string tr_rho, tr_mu, tr_out = "-", tr_cost = "dot";
  transport_cmd->add_option("--rho", tr_rho, "source measure (JSON, discrete or 1D grid)")->required();
  transport_cmd->add_option("--mu", tr_mu, "target measure (JSON, discrete)")->required();
  transport_cmd->add_option("--cost", tr_cost, "dot (maximal correlation) or sq (quadratic)")
      ->check(CLI::IsMember({"dot", "sq"}));
  transport_cmd->add_option("--out", tr_out, "output path ('-' for stdout)");

  // primal
  auto* primal_cmd = app.add_subcommand("primal", "grid fixed point for min E(rho) + T(rho, mu)");
  std::string pr_mu, pr_grid = "-10:10:2048", pr_out = "-";
  PrimalOptions pr_opts;
  bool no_expand = false;
  primal_cmd->add_option("--mu", pr_mu, "target measure (JSON)")->required();
  primal_cmd->add_option("--grid", pr_grid, "grid lo:hi:cells");
  primal_cmd->add_option("--damping", pr_opts.damping, "damping theta in (0, 1]");
  primal_cmd->add_option("--tol", pr_opts.tol, "fixed-point tolerance")->check(CLI::PositiveNumber);
  primal_cmd->add_option("--max-iter", pr_opts.max_iter, "iteration limit");
  primal_cmd->add_flag("--no-expand", no_expand, "never enlarge the grid");
  primal_cmd->add_option("--out", pr_out, "report path ('-' for stdout)");

  // verify
  auto* verify_cmd = app.add_subcommand("verify", "property checks");
  verify_cmd->require_subcommand(1);
  auto* v_suites = verify_cmd->add_subcommand("suites", "run the invariant suites of every module");
  std::size_t v_samples = 20;
  std::vector<std::string> v_modules;
  v_suites->add_option("--samples", v_samples, "random cases per check");
  v_suites->add_option("--module", v_modules, "restrict to these modules");
  v_suites->add_option("--seed", ctx.seed, "seed");
  auto* v_entropy = verify_cmd->add_subcommand("entropy", "entropy, its lower bound and decomposition");
  std::string ve_rho;
  v_entropy->add_option("--rho", ve_rho, "grid density (JSON)")->required();
  auto* v_identity = verify_cmd->add_subcommand("identity", "d Z = sum_i y_i . int_cell x e^{-u}");
  std::string vi_u;
  v_identity->add_option("--u", vi_u, "convex function (JSON)")->required();
  auto* v_gap = verify_cmd->add_subcommand("gap", "solve and compare E + T with J (d = 1)");
  std::string vg_mu, vg_grid;
  std::size_t vg_cells = 8192;
  v_gap->add_option("--mu", vg_mu, "target measure (JSON)")->required();
  v_gap->add_option("--grid", vg_grid, "grid lo:hi:cells (default: automatic)");
  v_gap->add_option("--cells", vg_cells, "cells of the automatic grid");

  // demo
  auto* demo_cmd = app.add_subcommand("demo", "demonstrations");
  demo_cmd->require_subcommand(1);
  auto* d_hyper = demo_cmd->add_subcommand("hyperplane", "objective unbounded below when mu lies on a hyperplane");
  std::string dh_n = "1,5,50,500", dh_mu, dh_out = "-";
  d_hyper->add_option("--n", dh_n, "comma-separated slab half-lengths");
  d_hyper->add_option("--mu", dh_mu, "measure on {x_d = 0} (default: delta_0 in d = 1)");
  d_hyper->add_option("--out", dh_out, "CSV path ('-' for stdout)");

  // u
  auto* u_cmd = app.add_subcommand("u", "max-affine convex functions");
  u_cmd->require_subcommand(1);
  std::string u_path;
  std::vector<std::string> u_points;
  auto* u_eval = u_cmd->add_subcommand("eval", "evaluate u at points");
  u_eval->add_option("--u", u_path, "convex function (JSON)")->required();
  u_eval->add_option("--x", u_points, "point, coordinates separated by commas (repeatable)")->required();
  auto* u_cells = u_cmd->add_subcommand("cells", "cell decomposition of the pruned u");
  u_cells->add_option("--u", u_path, "convex function (JSON)")->required();
  auto* u_mass = u_cmd->add_subcommand("mass", "Z, cell masses and barycenter of e^{-u}");
  u_mass->add_option("--u", u_path, "convex function (JSON)")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (threads_flag > 0) {
      ctx.threads = threads_flag;
    } else if (const char* env = std::getenv("MMFLOW_THREADS")) {
      try {
        ctx.threads = std::max(1, std::stoi(env));
      } catch (const std::logic_error&) {
        throw ValidationError("MMFLOW_THREADS must be a positive integer");
      }
    }

    if (*solve_cmd) {
      const auto mu = load_discrete(solve_mu);
      solve_opts.integration = ctx.integration();
      const auto rep = solve(mu, solve_opts);
      ctx.emit(solve_out, io::to_json(rep));
      if (!emit_density.empty()) {
        const auto u = rep.u_final();
        const GridSpec g = solve_grid.empty() ? grid_for(u, 2048) : GridSpec::parse(solve_grid);
        io::write_json_file(emit_density, io::to_json(density_on_grid(u, g)));
      }
      if (!rep.converged) {
        err << "solve: not converged after " << rep.iterations << " iterations (residual " << rep.residual << ")\n";
        return 2;
      }
      return 0;
    }

    if (*transport_cmd) {
      const Measure rho = io::measure_from_json(io::read_json_file(tr_rho));
      const auto mu = load_discrete(tr_mu);
      if (const auto* grid = std::get_if<GridDensity>(&rho)) {
        if (tr_cost != "dot") throw ValidationError("grid sources support --cost dot only");
        const auto r = max_correlation_grid(*grid, mu);
        ctx.emit(tr_out, Json{{"cost", "dot"},
                              {"value", r.value},
                              {"dual_value", r.dual_value},
                              {"potential", io::to_json(r.potential)},
                              {"node_x", r.node_x},
                              {"node_u", r.node_u}});
        return 0;
      }
      const auto& src = std::get<DiscreteMeasure>(rho);
      const auto r = max_correlation(src, mu);
      Json j = io::to_json(r);
      j["cost"] = tr_cost;
      if (tr_cost == "sq") {
        const double w = w2_distance(src, mu);
        j["value"] = w * w;
        j["distance"] = w;
        j["correlation"] = r.value;
      }
      ctx.emit(tr_out, j);
      return 0;
    }

    if (*primal_cmd) {
      const auto mu = load_discrete(pr_mu);
      pr_opts.auto_expand = !no_expand;
      const auto rep = solve_fixed_point(mu, GridSpec::parse(pr_grid), pr_opts);
      Json j = io::to_json(rep);
      j["objective"] = objective_P(rep.final_density, mu);
      ctx.emit(pr_out, j);
      if (!rep.converged) {
        err << "primal: not converged (residual " << rep.fixed_point_residual << ")\n";
        return 2;
      }
      return 0;
    }

    if (*verify_cmd) {
      if (*v_suites) {
        SuiteOptions so;
        so.seed = ctx.seed;
        so.samples = v_samples;
        so.threads = ctx.threads;
        so.modules = v_modules;
        const auto checks = run_invariant_suites(so);
        Json list = Json::array();
        bool all = true;
        for (const auto& c : checks) {
          list.push_back({{"module", c.module}, {"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
          all = all && c.passed;
        }
        ctx.emit("-", Json{{"seed", ctx.seed}, {"passed", all}, {"checks", list}});
        return all ? 0 : 2;
      }
      if (*v_entropy) {
        const auto rho = io::grid_from_json(io::read_json_file(ve_rho));
        const double e = entropy(rho);
        const double c = entropy_lower_bound_constant(rho.dim());
        const double bound = -c - std::sqrt(first_moment(rho));
        const auto b = entropy_decomposition(rho);
        ctx.emit("-", Json{{"entropy", e},
                           {"C_d", c},
                           {"lower_bound", bound},
                           {"holds", e >= bound},
                           {"decomposition",
                            {{"e1", b.e1}, {"e2", b.e2}, {"e3", b.e3}, {"total", b.total}, {"box_tail", b.box_tail}}}});
        return 0;
      }
      if (*v_identity) {
        const auto u = io::convex_from_json(io::read_json_file(vi_u));
        const auto r = verify_moment_identity(u, ctx.integration());
        ctx.emit("-", Json{{"lhs", r.lhs}, {"rhs", r.rhs}, {"gap", r.gap}, {"Z", r.z}});
        return 0;
      }
      if (*v_gap) {
        const auto mu = load_discrete(vg_mu);
        const auto rep = solve(mu);
        const GridSpec g = vg_grid.empty() ? grid_for(rep.u_final(), vg_cells) : GridSpec::parse(vg_grid);
        ctx.emit("-", Json{{"J", rep.objective},
                           {"gap", duality_gap(mu, rep, g)},
                           {"grid", {{"lo", g.lo}, {"hi", g.hi}, {"cells", g.cells}}},
                           {"residual", rep.residual}});
        return rep.converged ? 0 : 2;
      }
    }

    if (*demo_cmd && *d_hyper) {
      const auto mu = dh_mu.empty() ? DiscreteMeasure::from_atoms({{0.0}}, {1.0}) : load_discrete(dh_mu);
      const auto rows = hyperplane_divergence_demo(mu, parse_list(dh_n));
      if (dh_out.empty() || dh_out == "-") {
        io::write_hyperplane_csv(out, rows);
      } else {
        std::ofstream f(dh_out);
        if (!f) throw ValidationError("cannot write '" + dh_out + "'");
        io::write_hyperplane_csv(f, rows);
      }
      return 0;
    }

    if (*u_cmd) {
      const auto u = io::convex_from_json(io::read_json_file(u_path));
      if (*u_eval) {
        Json list = Json::array();
        for (const auto& text : u_points) {
          const auto x = parse_list(text);
          if (static_cast<int>(x.size()) != u.dim()) throw ValidationError("point dimension does not match u");
          const auto ev = evaluate(u, x);
          list.push_back({{"x", x}, {"value", ev.value}, {"index", ev.index}});
        }
        ctx.emit("-", list);
        return 0;
      }
      if (*u_cells) {
        ctx.emit("-", cells_json(cells(prune(u))));
        return 0;
      }
      if (*u_mass) {
        const auto ci = integrate_cells(u, ctx.integration());
        const double z = std::exp(ci.log_z);
        std::vector<double> masses;
        for (double f : ci.mass_fraction) masses.push_back(f * z);
        ctx.emit("-", Json{{"Z", z},
                           {"log_Z", ci.log_z},
                           {"rel_error", ci.rel_error},
                           {"certified", ci.certified},
                           {"masses", masses},
                           {"barycenter", barycenter_exp_neg(u, ctx.integration())}});
        return 0;
      }
    }
    err << app.help();
    return 1;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << "\n";
    return 2;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace mmflow::cli
