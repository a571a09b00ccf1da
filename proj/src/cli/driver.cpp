#include "jetholo/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <sstream>

#include "jetholo/holonomy.hpp"
#include "jetholo/invariants.hpp"
#include "jetholo/prolong.hpp"
#include "jetholo/scene.hpp"

#ifndef JETHOLO_VERSION
#define JETHOLO_VERSION "0.0.0"
#endif

namespace jetholo::cli {

namespace {

using json = nlohmann::ordered_json;

// The command line names something the scene does not declare.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr double kValidatorTol = 1e-8;
constexpr double kGuardTime = 1.1;

struct Options {
  std::string scene_file;
  bool strict = false;
  std::optional<double> tol;
  std::uint64_t seed = kDefaultSeed;
  std::string out_file;
  std::string csv_file;
  int order = 1;
  int max_order = 2;
  std::string field;
  bool vertical = false;
  std::vector<double> point;
  int grid = 5;
  std::string path;
  std::string jet;
  std::vector<std::string> paths;
};

json vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (double x : v) a.push_back(x + 0.0);  // no negative zeros in reports
  return a;
}

json named(const std::vector<std::string>& names, const Eigen::VectorXd& v) {
  json o = json::object();
  for (std::size_t i = 0; i < names.size(); ++i) o[names[i]] = v[static_cast<Eigen::Index>(i)] + 0.0;
  return o;
}

std::string point_text(const Eigen::VectorXd& x) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < x.size(); ++i) s += (i ? "," : "") + format_number(x[i]);
  return s + ")";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read scene file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << text;
}

const PathDecl& require_path(const Scene& s, const std::string& name) {
  const PathDecl* p = s.find_path(name);
  if (!p) throw UsageError("scene has no path named '" + name + "'");
  return *p;
}

int require_generator(const Scene& s, const std::string& name) {
  const int g = s.foliation().find(name);
  if (g < 0) throw UsageError("scene has no generator named '" + name + "'");
  return g;
}

Eigen::VectorXd base_point(const Scene& s, const std::vector<double>& v) {
  if (static_cast<int>(v.size()) != s.chart().dim())
    throw UsageError("--point needs " + std::to_string(s.chart().dim()) + " coordinates");
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// ---- commands

json cmd_validate(const Scene& s, const Options& o, std::ostream& out) {
  const double tol = o.tol.value_or(kValidatorTol);
  const Connection& c = s.connection;
  const auto samples = sample_points(s.chart(), o.seed);
  const auto inv = involutivity_check(s.foliation(), samples, tol);
  const auto ri = validate_right_inverse(c, samples, tol);
  const auto br = validate_bracket_preserving(c, samples, tol);

  json failures = json::array();
  for (std::size_t i = 0; i < br.failures.size() && i < 10; ++i) {
    const auto& f = br.failures[i];
    failures.push_back({{"pair", {s.foliation().generator_names[f.i], s.foliation().generator_names[f.j]}},
                        {"point", vec(f.point)},
                        {"residual", f.residual}});
  }

  // Completeness probe: flow each lift from the chart centre at the quarter points of the fibre box.
  json guards = json::array();
  const Bundle& B = s.bundle();
  const Eigen::VectorXd centre = s.chart().domain().center();
  for (int g = 0; g < s.foliation().size(); ++g) {
    for (double frac : {0.25, 0.75}) {
      Eigen::VectorXd start(B.n_base() + B.n_fibre());
      start.head(B.n_base()) = centre;
      for (int a = 0; a < B.n_fibre(); ++a)
        start[B.n_base() + a] = B.fibre_domain()[a].lo + frac * B.fibre_domain()[a].width();
      const GuardReport r = flow_domain_guard(c, c.lifts()[g], start, kGuardTime);
      json entry = {{"generator", s.foliation().generator_names[g]},
                    {"start", vec(start)},
                    {"exited", r.exited},
                    {"status", to_string(r.status)},
                    {"t_stop", r.t_stop}};
      if (r.exited) entry["exit_time"] = r.exit_time;
      const std::string message = r.exited && r.message.empty()
                                      ? "fibre left the box at t = " + format_number(r.exit_time)
                                      : r.message;
      entry["message"] = message;
      guards.push_back(std::move(entry));
      if (r.exited || r.blowup())
        out << "completeness: lift of " << s.foliation().generator_names[g] << " from " << point_text(start) << ": "
            << message << '\n';
    }
  }

  out << "involutivity: " << (inv.passed ? "pass" : "FAIL") << " (worst " << format_number(inv.worst) << ", "
      << inv.points_checked << " points)\n";
  out << "right inverse: " << (ri.passed ? "pass" : "FAIL") << " (worst " << format_number(ri.worst) << ")\n";
  out << "bracket preserving: " << (br.passed ? "pass" : "FAIL") << " (worst " << format_number(br.worst) << ", "
      << br.failures.size() << " failing samples, " << br.indeterminate << " indeterminate)\n";
  out << "affine in fibre: " << (c.affine_fibre() ? "yes" : "no") << '\n';

  json per_gen = json::array();
  for (double w : ri.per_generator) per_gen.push_back(w);
  return {{"involutivity",
           {{"passed", inv.passed},
            {"worst", inv.worst},
            {"pairs_checked", inv.pairs_checked},
            {"points_checked", inv.points_checked},
            {"failures", inv.failures.size()},
            {"caveat", inv.caveat}}},
          {"right_inverse",
           {{"passed", ri.passed}, {"worst", ri.worst}, {"per_generator", per_gen}, {"points_checked", ri.points_checked}}},
          {"bracket_preserving",
           {{"passed", br.passed},
            {"worst", br.worst},
            {"pairs_checked", br.pairs_checked},
            {"points_checked", br.points_checked},
            {"indeterminate", br.indeterminate},
            {"outside_span", br.outside_span},
            {"failure_count", br.failures.size()},
            {"failures", failures},
            {"caveat", br.caveat}}},
          {"affine_fibre", c.affine_fibre()},
          {"completeness", guards}};
}

json cmd_prolong(const Scene& s, const Options& o, std::ostream& out) {
  if (o.field.empty()) throw UsageError("prolong needs --field");
  const int g = require_generator(s, o.field);
  const ProjField& X = s.connection.lifts()[g];
  const JetField V = o.vertical ? vertical_prolong(s.bundle(), X, o.order) : prolong(s.bundle(), X, o.order);
  out << (o.vertical ? "vertical prolongation" : "prolongation") << " of the lift of " << o.field << " to order "
      << o.order << ":\n"
      << format(V);
  json comps = json::array();
  const JetLayout& L = V.layout;
  for (int i = 0; i < L.n_base(); ++i)
    comps.push_back({{"coordinate", L.base_names()[i]}, {"expr", to_string(V.base[i])}});
  for (std::size_t i = 0; i < V.jet.size(); ++i)
    comps.push_back({{"coordinate", L.jet_names()[i]}, {"expr", to_string(V.jet[i])}});
  return {{"field", o.field}, {"order", o.order}, {"kind", o.vertical ? "vertical" : "full"}, {"components", comps}};
}

std::vector<Eigen::VectorXd> grid_points(const Chart& ch, int n) {
  std::vector<Eigen::VectorXd> pts;
  const int d = ch.dim();
  std::vector<int> idx(d, 0);
  for (;;) {
    Eigen::VectorXd p(d);
    for (int i = 0; i < d; ++i) {
      const Interval& I = ch.domain()[i];
      p[i] = n == 1 ? 0.5 * (I.lo + I.hi) : I.lo + I.width() * idx[i] / (n - 1);
    }
    pts.push_back(p);
    int i = d - 1;
    while (i >= 0 && ++idx[i] == n) idx[i--] = 0;
    if (i < 0) break;
  }
  return pts;
}

json cmd_invariants(const Scene& s, const Options& o, std::ostream& out, std::ostream* csv) {
  const Connection& c = s.connection;
  const JetLayout L = jet_layout(s.bundle(), o.order);
  if (o.grid < 1) throw UsageError("--grid must be >= 1");
  const std::vector<Eigen::VectorXd> pts =
      o.point.empty() ? grid_points(s.chart(), o.grid) : std::vector<Eigen::VectorXd>{base_point(s, o.point)};
  json points = json::array();
  bool enough = true;
  if (csv) {
    for (const auto& n : s.chart().names()) *csv << n << ',';
    *csv << "dimension,rank\n";
  }
  const auto names_of = [&](const std::vector<int>& idx) {
    std::vector<std::string> v;
    for (int j : idx) v.push_back(L.jet_names()[j]);
    return v;
  };
  for (const auto& x : pts) {
    json entry = {{"x", vec(x)}};
    int dim = -1;
    int rank = -1;
    if (c.affine_fibre()) {
      try {
        const InvariantFibre F = invariant_fibre(c, x, o.order);
        dim = F.dimension();
        rank = F.rank;
        json basis = json::array();
        for (int j = 0; j < F.dimension(); ++j) basis.push_back(vec(F.basis.col(j)));
        json rows = json::array();
        for (Eigen::Index r = 0; r < F.constraints.A.rows(); ++r) rows.push_back(vec(F.constraints.A.row(r).transpose()));
        entry["dimension"] = dim;
        entry["rank"] = rank;
        entry["free"] = names_of(F.free);
        entry["particular"] = vec(F.particular);
        entry["basis"] = basis;
        entry["singular_values"] = vec(F.singular_values);
        entry["constraints"] = {{"labels", F.constraints.labels}, {"matrix", rows}, {"offset", vec(F.constraints.offset)}};
        const auto free = names_of(F.free);
        std::string free_text;
        for (std::size_t i = 0; i < free.size(); ++i) free_text += (i ? ", " : "") + free[i];
        out << point_text(x) << ": dim " << dim << " of " << L.fibre_dim() << " (free: " << free_text << ")\n";
      } catch (const NoConservationLaws& e) {
        entry["dimension"] = -1;
        entry["rank"] = -1;
        entry["error"] = e.what();
        out << point_text(x) << ": " << e.what() << '\n';
      }
    } else {
      const std::vector<Eigen::VectorXd> one{x};
      const auto rep = has_enough_conservation_laws(c, one, o.order);
      dim = rep.dims[0];
      rank = rep.ranks[0];
      entry["dimension"] = dim;
      entry["rank"] = rank;
      entry["note"] = rep.notes[0];
      out << point_text(x) << ": local dim " << dim << " of " << L.fibre_dim() << " (" << rep.notes[0] << ")\n";
    }
    enough = enough && dim >= 0;
    if (csv) {
      for (double v : x) *csv << format_number(v) << ',';
      *csv << dim << ',' << rank << '\n';
    }
    points.push_back(std::move(entry));
  }
  out << (enough ? "nonempty" : "empty") << " invariant fibre at every point checked\n";
  return {{"order", o.order},
          {"fibre_dim", L.fibre_dim()},
          {"jet_names", L.jet_names()},
          {"affine", c.affine_fibre()},
          {"enough", enough},
          {"points", points}};
}

JetPoint initial_jet(const Scene& s, const Options& o, const Eigen::VectorXd& x) {
  if (o.jet.empty()) throw UsageError("transport needs --jet (a section name or jet values)");
  if (const SectionDecl* sec = s.find_section(o.jet)) return jet_of_section(s.bundle(), sec->components, x, o.order);
  const JetLayout L = jet_layout(s.bundle(), o.order);
  std::vector<double> vals;
  std::stringstream ss(o.jet);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("--jet '" + o.jet + "' is neither a section nor a list of numbers");
    }
  }
  if (static_cast<int>(vals.size()) != L.fibre_dim())
    throw UsageError("--jet needs " + std::to_string(L.fibre_dim()) + " values at order " + std::to_string(o.order));
  return JetPoint(L, x, Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size())));
}

json cmd_transport(const Scene& s, const Options& o, std::ostream& out, std::ostream* csv) {
  if (o.path.empty()) throw UsageError("transport needs --path");
  require_path(s, o.path);
  const LeafwisePath p = build_path(s, o.path);
  const JetPoint j0 = initial_jet(s, o, p.start());
  const Transporter T(s.connection);
  const JetPath jp = T.transport_ode(p, j0);
  const JetPoint j1 = jp.endpoint();
  const auto& names = j0.layout.jet_names();
  out << "transport along " << o.path << " at order " << o.order << ": " << point_text(p.start()) << " -> "
      << point_text(j1.x) << '\n';
  for (std::size_t i = 0; i < names.size(); ++i)
    out << "  " << names[i] << ": " << format_number(j0.jet[i]) << " -> " << format_number(j1.jet[i]) << '\n';
  if (csv) {
    *csv << "t";
    for (const auto& n : jp.layout.all_names()) *csv << ',' << n;
    *csv << '\n';
    for (std::size_t r = 0; r < jp.times.size(); ++r) {
      *csv << format_number(jp.times[r]);
      for (double v : jp.states[r]) *csv << ',' << format_number(v);
      *csv << '\n';
    }
  }
  json res = {{"path", o.path},
              {"order", o.order},
              {"start", vec(p.start())},
              {"end", vec(j1.x)},
              {"jet_in", named(names, j0.jet)},
              {"jet_out", named(names, j1.jet)},
              {"base_deviation", jp.base_deviation},
              {"accepted_steps", jp.accepted_steps},
              {"rejected_steps", jp.rejected_steps},
              {"samples", jp.times.size()}};
  res["invariance_residual"] = {{"start", residual_check(s.connection, j0, o.order)},
                                {"end", residual_check(s.connection, j1, o.order)}};
  return res;
}

std::pair<LeafwisePath, LeafwisePath> path_pair(const Scene& s, const Options& o) {
  if (o.paths.size() != 2) throw UsageError("--paths needs exactly two path names");
  require_path(s, o.paths[0]);
  require_path(s, o.paths[1]);
  return {build_path(s, o.paths[0]), build_path(s, o.paths[1])};
}

json holonomy_json(const HolonomyReport& r) {
  json probes = json::array();
  for (const auto& p : r.probes) {
    json e = {{"label", p.label}, {"discrepancy", p.discrepancy}};
    if (!p.error.empty()) e["error"] = p.error;
    probes.push_back(std::move(e));
  }
  return {{"order", r.order},
          {"verdict", to_string(r.verdict)},
          {"worst", r.worst},
          {"source_gap", r.source_gap},
          {"range_gap", r.range_gap},
          {"source_match", r.source_match},
          {"range_match", r.range_match},
          {"probe_description", r.probe_description},
          {"probes", probes},
          {"note", r.note}};
}

json cmd_holonomy(const Scene& s, const Options& o, std::ostream& out) {
  const auto [p1, p2] = path_pair(s, o);
  const double tol = o.tol.value_or(kHolonomyTol);
  const HolonomyReport r = holonomy_equivalent(Transporter(s.connection), p1, p2, o.order, tol, o.seed);
  out << o.paths[0] << " vs " << o.paths[1] << " at order " << o.order << ": " << to_string(r.verdict) << " (worst "
      << format_number(r.worst) << ", tol " << format_number(tol) << ")\n";
  if (!r.note.empty()) out << "  " << r.note << '\n';
  json res = {{"paths", o.paths}, {"tol", tol}};
  res.update(holonomy_json(r));
  return res;
}

json cmd_hierarchy(const Scene& s, const Options& o, std::ostream& out) {
  const auto [p1, p2] = path_pair(s, o);
  const double tol = o.tol.value_or(kHolonomyTol);
  const HierarchyReport h = hierarchy_check(Transporter(s.connection), p1, p2, o.max_order, tol, o.seed);
  json orders = json::array();
  for (const auto& r : h.per_order) {
    out << "order " << r.order << ": " << to_string(r.verdict) << " (worst " << format_number(r.worst) << ")\n";
    orders.push_back(holonomy_json(r));
  }
  out << "hierarchy " << (h.monotone ? "monotone" : "NOT monotone") << '\n';
  for (const auto& v : h.violations) out << "  " << v << '\n';
  return {{"paths", o.paths},
          {"tol", tol},
          {"max_order", o.max_order},
          {"monotone", h.monotone},
          {"violations", h.violations},
          {"orders", orders}};
}

void add_common(CLI::App* sub, Options& o, bool order) {
  sub->add_option("scene", o.scene_file, "Scene file")->required();
  sub->add_flag("--strict", o.strict, "Treat validator failures while loading the scene as errors");
  sub->add_option("--tol", o.tol, "Tolerance (verdict tolerance for holonomy, residual tolerance for validate)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--seed", o.seed, "Seed for random probes and sample points");
  sub->add_option("--out", o.out_file, "Write the JSON report to this file");
  if (order) sub->add_option("--order", o.order, "Jet order k")->check(CLI::Range(0, 8));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Jet prolongation, invariant jets, transport and holonomy on a scene file", "jetholo"};
  app.require_subcommand(1);
  Options o;

  auto* validate = app.add_subcommand("validate", "Check involutivity, connection axioms and completeness");
  add_common(validate, o, false);

  auto* prolong_cmd = app.add_subcommand("prolong", "Print the prolongation of a generator's lift");
  add_common(prolong_cmd, o, true);
  prolong_cmd->add_option("--field", o.field, "Generator name")->required();
  prolong_cmd->add_flag("--vertical", o.vertical, "Print the vertical prolongation instead");

  auto* invariants = app.add_subcommand("invariants", "Invariant jet fibres at points");
  add_common(invariants, o, true);
  auto* point_opt = invariants->add_option("--point", o.point, "Base point, comma separated")->delimiter(',');
  invariants->add_option("--grid", o.grid, "Lattice points per axis when no --point is given")->excludes(point_opt);
  invariants->add_option("--csv", o.csv_file, "Write the per-point dimension table as CSV");

  auto* transport_cmd = app.add_subcommand("transport", "Transport a jet along a path");
  add_common(transport_cmd, o, true);
  transport_cmd->add_option("--path", o.path, "Path name")->required();
  transport_cmd->add_option("--jet", o.jet, "Section name or comma separated jet values")->required();
  transport_cmd->add_option("--csv", o.csv_file, "Write the jet trajectory as CSV");

  auto* holonomy = app.add_subcommand("holonomy", "Compare the transports of two paths");
  add_common(holonomy, o, true);
  holonomy->add_option("--paths", o.paths, "Two path names, comma separated")->delimiter(',')->required();

  auto* hierarchy = app.add_subcommand("hierarchy", "Holonomy verdicts for orders 0..max");
  add_common(hierarchy, o, false);
  hierarchy->add_option("--paths", o.paths, "Two path names, comma separated")->delimiter(',')->required();
  hierarchy->add_option("--max-order", o.max_order, "Highest order")->check(CLI::Range(0, 8));

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    const std::string text = read_file(o.scene_file);
    SceneOptions so;
    so.strict = o.strict;
    const Scene scene = parse_scene(text, so);
    for (const auto& w : scene.warnings) err << "warning: " << w << '\n';

    std::ostringstream csv_buf;
    std::ostream* csv = o.csv_file.empty() ? nullptr : &csv_buf;
    json result;
    if (command == "validate") result = cmd_validate(scene, o, out);
    if (command == "prolong") result = cmd_prolong(scene, o, out);
    if (command == "invariants") result = cmd_invariants(scene, o, out, csv);
    if (command == "transport") result = cmd_transport(scene, o, out, csv);
    if (command == "holonomy") result = cmd_holonomy(scene, o, out);
    if (command == "hierarchy") result = cmd_hierarchy(scene, o, out);

    if (!o.out_file.empty()) {
      const OdeOptions ode = Transporter::default_options();
      json report = {{"engine", {{"name", "jetholo"}, {"version", JETHOLO_VERSION}}},
                     {"command", command},
                     {"scene", o.scene_file},
                     {"seed", o.seed},
                     {"tolerances",
                      {{"validator", kValidatorTol},
                       {"holonomy", kHolonomyTol},
                       {"endpoint", kEndpointTol},
                       {"rank", kRankTol},
                       {"ode_rtol", ode.rtol},
                       {"ode_atol", ode.atol}}},
                     {"strict", o.strict},
                     {"warnings", scene.warnings},
                     {"result", result}};
      if (o.tol) report["tolerances"]["requested"] = *o.tol;
      write_file(o.out_file, report.dump(2) + "\n");
    }
    if (csv) write_file(o.csv_file, csv_buf.str());
    return kExitOk;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << o.scene_file << ':' << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace jetholo::cli
