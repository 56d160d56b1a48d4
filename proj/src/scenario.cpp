#include "lsm/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lsm/algebra.hpp"
#include "lsm/filter.hpp"
#include "lsm/spectral.hpp"
#include "lsm/variational.hpp"
#include "lsm/verify.hpp"

namespace lsm {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "1.0.0";
constexpr double kPi = 3.14159265358979323846;

// ---- serialization ---------------------------------------------------------

// JSON emitter with a fixed float format: %.17g round-trips doubles exactly
// and, unlike the library default, never varies with locale or value class
// (nan/inf become null). Keys iterate in sorted order, so output is stable.
void emit_json(std::ostream& os, const json& j, int depth) {
  const std::string pad(2 * size_t(depth + 1), ' ');
  const std::string close_pad(2 * size_t(depth), ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ",\n";
        first = false;
        os << pad << json(it.key()).dump() << ": ";
        emit_json(os, it.value(), depth + 1);
      }
      os << "\n" << close_pad << "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      os << "[\n";
      bool first = true;
      for (const auto& v : j) {
        if (!first) os << ",\n";
        first = false;
        os << pad;
        emit_json(os, v, depth + 1);
      }
      os << "\n" << close_pad << "]";
      return;
    }
    case json::value_t::number_float: {
      double x = j.get<double>();
      if (!std::isfinite(x)) {
        os << "null";
        return;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", x);
      os << buf;
      return;
    }
    default:
      os << j.dump();
      return;
  }
}

std::string dump_document(const json& j) {
  std::ostringstream os;
  emit_json(os, j, 0);
  os << "\n";
  return os.str();
}

void write_atomic(const fs::path& p, const std::string& text) {
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    os << text;
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, p);
}

// ---- config parsing --------------------------------------------------------

struct Ctx {
  const std::string& path;
  const std::string& raw;
};

// line of the first occurrence of "key" in the raw text, for error anchoring
int line_of_key(const std::string& raw, const std::string& key) {
  auto pos = raw.find("\"" + key + "\"");
  if (pos == std::string::npos) return 1;
  return 1 + int(std::count(raw.begin(), raw.begin() + std::ptrdiff_t(pos), '\n'));
}

[[noreturn]] void fail(const Ctx& c, const std::string& key, const std::string& msg) {
  std::ostringstream os;
  os << c.path << ":" << line_of_key(c.raw, key) << ": " << msg;
  throw ConfigError(os.str());
}

void check_keys(const Ctx& c, const json& obj, const char* where,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) known = true;
    if (!known) fail(c, item.key(), "unknown key \"" + item.key() + "\" in " + where);
  }
}

template <class T>
T get_field(const Ctx& c, const json& obj, const char* key, T def, const char* type_name) {
  if (!obj.contains(key)) return def;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail(c, key, std::string(key) + " must be " + type_name);
  }
}

double get_num(const Ctx& c, const json& o, const char* k, double d) {
  return get_field<double>(c, o, k, d, "a number");
}
int get_int(const Ctx& c, const json& o, const char* k, int d) {
  return get_field<int>(c, o, k, d, "an integer");
}
bool get_bool(const Ctx& c, const json& o, const char* k, bool d) {
  return get_field<bool>(c, o, k, d, "a boolean");
}
std::string get_str(const Ctx& c, const json& o, const char* k, const std::string& d) {
  return get_field<std::string>(c, o, k, d, "a string");
}

void parse_model(const Ctx& c, const json& j, ModelSpec& m) {
  check_keys(c, j, "model",
             {"geometry", "L", "legs", "spin", "coupling", "J", "J2", "delta", "edges",
              "lambda", "power"});
  std::string geo = get_str(c, j, "geometry", "ring");
  try {
    m.geometry = geometry_from_string(geo);
  } catch (const std::invalid_argument&) {
    fail(c, "geometry", "unknown geometry \"" + geo + "\" (ring | ladder | cylinder)");
  }
  m.L = get_int(c, j, "L", m.L);
  if (m.L % 2 != 0) fail(c, "L", "L must be even");
  if (m.L < 4) fail(c, "L", "L must be at least 4");
  m.legs = get_int(c, j, "legs", m.legs);
  if (m.legs < 1) fail(c, "legs", "legs must be at least 1");
  if (m.geometry == Geometry::ring && m.legs != 1)
    fail(c, "legs", "ring geometry needs legs = 1");
  if (m.geometry != Geometry::ring && m.legs < 2)
    fail(c, "legs", "ladder and cylinder geometries need legs >= 2");
  m.spin = get_num(c, j, "spin", m.spin);
  double twos = 2 * m.spin;
  if (!(m.spin > 0) || std::abs(twos - std::round(twos)) > 1e-12)
    fail(c, "spin", "spin must be a positive multiple of 1/2");
  m.coupling = get_str(c, j, "coupling", m.coupling);
  static const std::set<std::string> couplings = {"heisenberg", "xxz", "dimerized",
                                                  "coupled"};
  if (!couplings.count(m.coupling))
    fail(c, "coupling",
         "unknown coupling \"" + m.coupling +
             "\" (heisenberg | xxz | dimerized | coupled)");
  m.J = get_num(c, j, "J", m.J);
  m.J2 = get_num(c, j, "J2", m.J2);
  m.delta = get_num(c, j, "delta", m.delta);
  m.lambda = get_num(c, j, "lambda", m.lambda);
  if (!(m.lambda > 0)) fail(c, "lambda", "lambda must be positive");
  m.power = get_num(c, j, "power", m.power);
  if (j.contains("edges")) {
    if (!j.at("edges").is_array()) fail(c, "edges", "edges must be an array of [a, b, J]");
    int nsites = m.L * m.legs;
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 3 || !e[0].is_number() || !e[1].is_number() ||
          !e[2].is_number())
        fail(c, "edges", "each edge must be [site a, site b, strength]");
      double ad = e[0].get<double>(), bd = e[1].get<double>();
      int a = int(ad), b = int(bd);
      if (a != ad || b != bd || a < 0 || b < 0 || a >= nsites || b >= nsites || a == b)
        fail(c, "edges", "edge sites must be distinct integers in [0, L*legs)");
      m.edges.push_back({double(std::min(a, b)), double(std::max(a, b)), e[2].get<double>()});
    }
  }
  if (m.coupling == "coupled" && m.edges.empty())
    fail(c, "coupling", "coupled coupling needs a non-empty edges array");
}

std::vector<double> get_num_array(const Ctx& c, const json& j, const char* key) {
  std::vector<double> out;
  if (!j.at(key).is_array()) fail(c, key, std::string(key) + " must be an array of numbers");
  for (const auto& v : j.at(key)) {
    if (!v.is_number()) fail(c, key, std::string(key) + " must be an array of numbers");
    double x = v.get<double>();
    if (!std::isfinite(x)) fail(c, key, std::string(key) + " entries must be finite");
    out.push_back(x);
  }
  return out;
}

// ---- model construction ----------------------------------------------------

int64_t pow_saturating(int q, int n) {
  int64_t d = 1;
  for (int i = 0; i < n; ++i) {
    if (d > std::numeric_limits<int64_t>::max() / (2 * q))
      return std::numeric_limits<int64_t>::max();
    d *= q;
  }
  return d;
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out[size_t(i)] = lo + (hi - lo) * i / (n - 1);
  return out;
}

struct Built {
  Lattice lat;
  Interaction inter;
  DecayFunction f;
  int64_t full_dim = 0;
};

Built build_model(const ModelSpec& ms, int L_override = 0) {
  Built b{ms.lattice(L_override), {}, {}, 0};
  b.inter = ms.interaction(b.lat);
  b.f = ms.decay(b.lat);
  b.full_dim = pow_saturating(int(std::lround(2 * ms.spin)) + 1, b.lat.n_sites());
  return b;
}

std::vector<int> sweep_sizes(const Scenario& sc) {
  return sc.sweep_L.empty() ? std::vector<int>{sc.model.L} : sc.sweep_L;
}

std::vector<double> scan_thetas(const Scenario& sc) {
  return sc.thetas.empty() ? std::vector<double>{0.3, 1.0, kPi, 2 * kPi} : sc.thetas;
}

std::vector<double> derivative_thetas(const Scenario& sc) {
  return sc.derivative_thetas.empty() ? std::vector<double>{0.0, 0.7, 2.1}
                                      : sc.derivative_thetas;
}

int resolve_b_site(const Lattice& lat, const CheckSpec& ck) {
  if (ck.b_site >= 0) return ck.b_site;
  int col_a = lat.col(ck.a_site);
  int col_b = (col_a - 1 + lat.L / 2) % lat.L + 1;
  return lat.site(col_b, 1);
}

// structural conditions; degeneracy (LSM5) is raised where a gap is computed
void enforce_static_conditions(const Lattice& lat, const Interaction& inter) {
  LsmStaticReport st = lsm_static_checks(lat, inter);
  if (!st.translation_covariant)
    throw PreconditionError(
        "LSM1 violated: the interaction is not translation covariant along the ring");
  if (st.range < 1 || st.range >= lat.L)
    throw PreconditionError("LSM2 violated: the interaction range must satisfy 1 <= R < L");
  if (!st.rotation_invariant)
    throw PreconditionError(
        "LSM3 violated: the interaction does not commute with uniform S^3 rotations");
  if (!st.odd_parity)
    throw PreconditionError(
        "LSM4 violated: the total spin per column is integral; an odd number of "
        "half-integer spins per column is required");
  if (!st.real_matrices)
    throw PreconditionError(
        "LSM6 violated: the interaction is not real in the product basis");
}

[[noreturn]] void degenerate_error(const std::string& where) {
  throw PreconditionError("LSM5 violated: the ground state is degenerate (" + where + ")");
}

// ---- scenario echo ---------------------------------------------------------

json scenario_json(const Scenario& sc) {
  json model = {{"geometry", to_string(sc.model.geometry)},
                {"L", sc.model.L},
                {"legs", sc.model.legs},
                {"spin", sc.model.spin},
                {"coupling", sc.model.coupling},
                {"J", sc.model.J},
                {"J2", sc.model.J2},
                {"delta", sc.model.delta},
                {"lambda", sc.model.lambda},
                {"power", sc.model.power}};
  json edges = json::array();
  for (const auto& e : sc.model.edges)
    edges.push_back({int(e[0]), int(e[1]), e[2]});
  model["edges"] = edges;
  json overrides = {{"a", sc.a},
                    {"T", sc.T_cut},
                    {"M", sc.M},
                    {"m", sc.m_override ? json(*sc.m_override) : json()},
                    {"theta_steps", sc.theta_steps},
                    {"samples", sc.samples},
                    {"filter_backend", sc.filter_backend},
                    {"sector_blocking", sc.sector_blocking},
                    {"margin_tolerance", sc.margin_tolerance},
                    {"diagnostics", sc.diagnostics}};
  json checks = {{"a_site", sc.checks.a_site},
                 {"b_site", sc.checks.b_site},
                 {"t_max", sc.checks.t_max},
                 {"t_points", sc.checks.t_points},
                 {"theta", sc.checks.theta}};
  return json{{"model", model},
              {"pipelines", sc.pipelines},
              {"overrides", overrides},
              {"twist", {{"thetas", scan_thetas(sc)},
                         {"derivative_thetas", derivative_thetas(sc)}}},
              {"checks", checks},
              {"sweep", {{"L", sweep_sizes(sc)}}},
              {"out", sc.out_dir},
              {"seed", sc.seed},
              {"dense_max_dim", sc.dense_max_dim},
              {"threads", sc.threads}};
}

json versions_json() {
  std::ostringstream eigen;
  eigen << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION;
  return json{{"artifact", kVersion}, {"eigen", eigen.str()}};
}

// ---- bound rows ------------------------------------------------------------

void add_bound(const Scenario& sc, const BoundReport& r, json& bounds, PipelineOutputs& out) {
  bool ok = r.worst_margin >= -sc.margin_tolerance * r.scale;  // NaN compares false
  bounds.push_back(json{{"name", r.name},
                        {"points", int64_t(r.grid.size())},
                        {"grid", r.grid},
                        {"lhs", r.lhs},
                        {"rhs", r.rhs},
                        {"worst_margin", r.worst_margin},
                        {"scale", r.scale},
                        {"passed", ok}});
  std::ostringstream row;
  row << r.name << ',' << r.grid.size() << ',' << format_sig(r.worst_margin, 9) << ','
      << format_sig(r.scale, 9) << ',' << (ok ? 1 : 0);
  out.bound_rows.push_back(row.str());
  if (!ok) out.failed.push_back(r.name);
}

BoundReport tolerance_report(const std::string& name, const std::vector<double>& grid,
                             const std::vector<double>& measured, double tol) {
  BoundReport r;
  r.name = name;
  r.grid = grid;
  r.lhs = measured;
  r.rhs.assign(grid.size(), tol);
  r.finalize();
  return r;
}

// ---- sweep rows ------------------------------------------------------------

std::string sweep_csv_row(const SweepRow& r) {
  std::ostringstream os;
  os << r.L << ',' << r.dim << ',' << format_sig(r.e0, 9) << ',' << format_sig(r.gamma, 9)
     << ',' << format_sig(r.a, 9) << ',' << format_sig(r.t_cut, 9) << ','
     << format_sig(r.delta_e, 9) << ',' << format_sig(r.overlap, 9) << ','
     << format_sig(r.refined, 9) << ',' << format_sig(r.log_l_over_l, 9);
  return os.str();
}

json sweep_json_row(const SweepRow& r) {
  return json{{"L", r.L},          {"dim", r.dim},
              {"E0", r.e0},        {"gamma", r.gamma},
              {"a", r.a},          {"T", r.t_cut},
              {"delta_e", r.delta_e}, {"overlap", r.overlap},
              {"refined_bound", r.refined}, {"log_L_over_L", r.log_l_over_l}};
}

// ---- pipelines -------------------------------------------------------------

json run_spectrum(const Scenario& sc, PipelineOutputs& out, json&) {
  json entries = json::array();
  for (int L : sweep_sizes(sc)) {
    Built b = build_model(sc.model, L);
    json e{{"L", L}, {"dim", b.full_dim}};
    double e0 = 0, e1 = 0;
    if (b.full_dim <= sc.dense_max_dim) {
      SectorSpectra ss = diag_all_sectors(b.lat, b.inter);
      e0 = ss.E0;
      e1 = ss.E1;
      e["degenerate"] = ss.degenerate;
      e["backend"] = "dense_sectors";
      json sectors = json::array();
      for (size_t k = 0; k < ss.sz_values.size(); ++k) {
        json lowest = json::array();
        for (int i = 0; i < std::min<int>(8, int(ss.evals[k].size())); ++i)
          lowest.push_back(ss.evals[k](i));
        sectors.push_back(json{{"sz", ss.sz_values[k]},
                               {"dim", int64_t(ss.evals[k].size())},
                               {"lowest", lowest}});
      }
      e["sectors"] = sectors;
      Space spf = Space::full(b.lat.n_sites(), sc.model.spin);
      VecC psi0f = scatter_to_full(ss.gs_space, ss.psi0);
      cd teig = psi0f.dot(SpMat(translation_op(spf, b.lat)) * psi0f);
      e["translation_eigenvalue"] = json{{"re", teig.real()}, {"im", teig.imag()}};
    } else {
      if (b.full_dim > (int64_t(1) << 22))
        throw std::runtime_error("spectrum: dimension " + std::to_string(b.full_dim) +
                                 " is too large");
      Space spf = Space::full(b.lat.n_sites(), sc.model.spin);
      SpMat h = build_h(spf, b.inter);
      SpectralData sd = lanczos_lowest(h, 2, 400, sc.seed);
      e0 = sd.evals(0);
      e1 = sd.evals(1);
      e["degenerate"] = (e1 - e0) <= 1e-9 * std::max(1.0, std::abs(e0));
      e["backend"] = "lanczos";
      e["sectors"] = json::array();
      e["translation_eigenvalue"] = json();
    }
    e["E0"] = e0;
    e["E1"] = e1;
    e["gamma"] = e1 - e0;
    SweepRow row{L,     b.full_dim, e0,     e1 - e0, kUnset,
                 kUnset, kUnset,    kUnset, kUnset,  std::log(double(L)) / L};
    e["log_L_over_L"] = row.log_l_over_l;
    out.sweep_rows.push_back(sweep_csv_row(row));
    e["sweep_row"] = sweep_json_row(row);
    entries.push_back(e);
  }
  return json{{"entries", entries}};
}

json run_twist_scan(const Scenario& sc, PipelineOutputs& out, json& bounds) {
  Built b = build_model(sc.model);
  if (b.full_dim > sc.dense_max_dim)
    throw std::runtime_error("twist-scan: dimension " + std::to_string(b.full_dim) +
                             " exceeds dense-max-dim");
  Space sp = Space::full(b.lat.n_sites(), sc.model.spin);
  SpMat h = build_h(sp, b.inter);
  VecR base = eigenvalues_only(h);
  TwistConfig tw = TwistConfig::make(b.lat, b.inter, sc.m_override);
  json res{{"L", sc.model.L}, {"dim", b.full_dim}, {"m", tw.m}, {"E0", base(0)}};

  std::vector<double> thetas = scan_thetas(sc);
  std::vector<double> devs;
  json spectra = json::array();
  for (double th : thetas) {
    VecR tws = eigenvalues_only(build_h_twisted(sp, b.inter, b.lat, tw, th, -th));
    double dev = (tws - base).cwiseAbs().maxCoeff();
    devs.push_back(dev);
    spectra.push_back(json{{"theta", th}, {"deviation", dev}});
  }
  res["spectra"] = spectra;
  add_bound(sc, tolerance_report("twisted_spectrum_match", thetas, devs, 1e-10), bounds, out);

  const double hstep = 1e-4;
  std::vector<double> dth = derivative_thetas(sc);
  std::vector<std::pair<double, double>> angles;
  for (double th : dth) {
    angles.emplace_back(th + hstep, -th);
    angles.emplace_back(th - hstep, -th);
    angles.emplace_back(th, -th + hstep);
    angles.emplace_back(th, -th - hstep);
  }
  std::vector<double> surf = energy_surface(sp, b.inter, b.lat, tw, angles);
  std::vector<double> d1, d2;
  json derivs = json::array();
  for (size_t i = 0; i < dth.size(); ++i) {
    double g1 = std::abs(surf[4 * i] - surf[4 * i + 1]) / (2 * hstep);
    double g2 = std::abs(surf[4 * i + 2] - surf[4 * i + 3]) / (2 * hstep);
    d1.push_back(g1);
    d2.push_back(g2);
    derivs.push_back(json{{"theta", dth[i]}, {"d1", g1}, {"d2", g2}});
  }
  res["derivatives"] = derivs;
  add_bound(sc, tolerance_report("twist_energy_derivative_1", dth, d1, 1e-6), bounds, out);
  add_bound(sc, tolerance_report("twist_energy_derivative_2", dth, d2, 1e-6), bounds, out);

  std::vector<double> cgrid = linspace(0, 2 * kPi, 13);
  std::vector<std::pair<double, double>> cangles;
  for (double th : cgrid) cangles.emplace_back(th, -th);
  std::vector<double> ce = energy_surface(sp, b.inter, b.lat, tw, cangles);
  std::vector<double> cdev;
  json cons = json::array();
  for (size_t i = 0; i < cgrid.size(); ++i) {
    cdev.push_back(std::abs(ce[i] - base(0)));
    cons.push_back(json{{"theta", cgrid[i]}, {"E0", ce[i]}});
  }
  res["constancy"] = cons;
  add_bound(sc, tolerance_report("twist_energy_constant", cgrid, cdev, 1e-10), bounds, out);

  // T_{2pi,0} = -T for odd column parity, +T otherwise; both sides are
  // permutations with phases, so the operator norm of the difference is the
  // largest entry magnitude
  bool odd = lsm_static_checks(b.lat, b.inter).odd_parity;
  SpMat plain_t = translation_op(sp, b.lat);
  SpMat diff = SpMat(twisted_translation(sp, b.lat, tw, 2 * kPi, 0, plain_t)) -
               SpMat(plain_t * cd(odd ? -1.0 : 1.0, 0.0));
  double pdev = 0;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SpMat::InnerIterator it(diff, k); it; ++it)
      pdev = std::max(pdev, std::abs(it.value()));
  res["parity"] = json{{"odd", odd}, {"deviation", pdev}};
  add_bound(sc, tolerance_report("parity_translation_identity", {2 * kPi}, {pdev}, 1e-12),
            bounds, out);
  return res;
}

json run_lr_check(const Scenario& sc, PipelineOutputs& out, json& bounds) {
  Built b = build_model(sc.model);
  if (b.full_dim > sc.dense_max_dim)
    throw std::runtime_error("lr-check: dimension " + std::to_string(b.full_dim) +
                             " exceeds dense-max-dim");
  Space sp = Space::full(b.lat.n_sites(), sc.model.spin);
  SpinOps so = SpinOps::make(sc.model.spin);
  int b_site = resolve_b_site(b.lat, sc.checks);
  LocalOp opa{{sc.checks.a_site}, so.sx};
  LocalOp opb{{b_site}, so.sx};
  double t_max = sc.checks.t_max > 0 ? sc.checks.t_max : 2.0;
  std::vector<double> tgrid = linspace(0, t_max, sc.checks.t_points);

  json res{{"L", sc.model.L},
           {"dim", b.full_dim},
           {"a_site", sc.checks.a_site},
           {"b_site", b_site}};
  add_bound(sc, lieb_robinson_check(b.lat, b.inter, opa, opb, b.f, tgrid), bounds, out);

  double fa = sc.a, ft = sc.T_cut;
  if (!(fa > 0) || !(ft > 0)) {
    GroundInfo gi = ground_and_gap(build_h(sp, b.inter));
    if (gi.degenerate) degenerate_error("needed to derive filter parameters");
    if (!(fa > 0)) fa = gi.gap / b.lat.L;
    if (!(ft > 0)) ft = b.lat.L / 2.0;
  }
  FilterParams p{fa, ft, 0, 0};
  TwistConfig tw = TwistConfig::make(b.lat, b.inter, sc.m_override);
  RestrictionReport rr = restriction_dynamics_check(b.lat, b.inter, tw, sc.checks.theta,
                                                    opa, b.f, p, tgrid);
  add_bound(sc, rr.dynamics, bounds, out);
  add_bound(sc, rr.filtered_difference, bounds, out);
  res["filter"] = json{{"a", fa}, {"T", ft}};
  res["envelope"] = json{{"c1", rr.c1}, {"c2", rr.c2}, {"c3", rr.c3}, {"m_star", rr.m_star}};
  res["theta"] = sc.checks.theta;
  res["tgrid"] = tgrid;
  return res;
}

json run_cluster_check(const Scenario& sc, PipelineOutputs& out, json& bounds) {
  Built b = build_model(sc.model);
  if (b.full_dim > sc.dense_max_dim)
    throw std::runtime_error("cluster-check: dimension " + std::to_string(b.full_dim) +
                             " exceeds dense-max-dim");
  Space sp = Space::full(b.lat.n_sites(), sc.model.spin);
  GroundInfo gi = ground_and_gap(build_h(sp, b.inter));
  if (gi.degenerate) degenerate_error("clustering needs a spectral gap");
  SpinOps so = SpinOps::make(sc.model.spin);
  int b_site = resolve_b_site(b.lat, sc.checks);
  LocalOp opa{{sc.checks.a_site}, so.sx};
  LocalOp opb{{b_site}, so.sx};
  std::vector<double> tgrid;
  if (sc.checks.t_max > 0) {
    tgrid = linspace(0, sc.checks.t_max, sc.checks.t_points);
  } else {
    // probe for the admissible window, then sample strictly inside it
    ClusteringReport probe = clustering_check(b.lat, b.inter, opa, opb, b.f, {0.0});
    tgrid = linspace(0, 0.9 * probe.t_max, sc.checks.t_points);
  }
  ClusteringReport cr = clustering_check(b.lat, b.inter, opa, opb, b.f, tgrid);
  add_bound(sc, cr.pointwise, bounds, out);
  add_bound(sc, cr.single_integral, bounds, out);
  add_bound(sc, cr.double_integral, bounds, out);
  return json{{"L", sc.model.L},
              {"dim", b.full_dim},
              {"a_site", sc.checks.a_site},
              {"b_site", b_site},
              {"gamma", gi.gap},
              {"mu", cr.mu},
              {"cab", cr.cab},
              {"dist", cr.dist},
              {"t_max_admissible", cr.t_max},
              {"window_empty", cr.window_empty},
              {"tgrid", tgrid}};
}

json record_json(const ThetaRecord& r) {
  return json{{"theta", r.theta},
              {"norm", r.norm},
              {"energy", r.energy},
              {"energy_twisted", r.energy_twisted},
              {"overlap_gs", r.overlap_gs},
              {"overlap_rotated", r.overlap_rotated},
              {"translation_defect", r.translation_defect},
              {"window_tdist", r.window_tdist},
              {"d1_norm", r.d1_norm},
              {"d2_norm", r.d2_norm},
              {"d_difference", r.d_difference},
              {"d_identity_gap", r.d_identity_gap},
              {"dat_norm", r.dat_norm},
              {"cat_norm", r.cat_norm},
              {"dat_integral", r.dat_integral},
              {"r1", r.r1},
              {"r2", r.r2},
              {"r3", r.r3},
              {"r_integral", r.r_integral},
              {"energy_r1", r.energy_r1},
              {"energy_r2", r.energy_r2},
              {"energy_identity_residual", r.energy_identity_residual},
              {"a1_expectation", r.a1_expectation},
              {"a2_expectation", r.a2_expectation}};
}

json run_lsm(const Scenario& sc, PipelineOutputs& out, json& bounds) {
  json entries = json::array();
  for (int L : sweep_sizes(sc)) {
    Built b = build_model(sc.model, L);
    enforce_static_conditions(b.lat, b.inter);
    bool blocked = sc.sector_blocking == "always" ||
                   (sc.sector_blocking == "auto" && b.full_dim > 200);
    if (!blocked && b.full_dim > sc.dense_max_dim)
      throw std::runtime_error("lsm-run: dimension " + std::to_string(b.full_dim) +
                               " exceeds dense-max-dim; enable sector blocking");
    FlowConfig fc;
    fc.theta_steps = sc.theta_steps;
    fc.filter_backend = sc.filter_backend;
    fc.m_override = sc.m_override;
    fc.a = sc.a;
    fc.T_cut = sc.T_cut;
    fc.M = sc.M;
    fc.sector_blocking = blocked;
    fc.samples = sc.samples;
    fc.diagnostics = sc.diagnostics;
    FlowResult fr;
    try {
      fr = hastings_flow(b.lat, b.inter, fc);
    } catch (const std::runtime_error& e) {
      if (std::string(e.what()).find("degenerate ground state") != std::string::npos)
        degenerate_error("L = " + std::to_string(L));
      throw;
    }
    LsmStaticReport st = lsm_static_checks(b.lat, b.inter);
    json e{{"L", L},
           {"dim", b.full_dim},
           {"dim_flow", fr.dim},
           {"blocked", fr.blocked},
           {"m", fr.m},
           {"steps", fr.steps},
           {"backend", fr.backend},
           {"a", fr.a},
           {"T", fr.T_cut},
           {"E0", fr.E0},
           {"E1", fr.E1},
           {"gamma", fr.gap},
           {"energy1", fr.energy1},
           {"delta_e", fr.delta_e},
           {"overlap", fr.overlap},
           {"majorant", fr.majorant},
           {"norm_drift", fr.norm_drift},
           {"refined_bound", fr.refined_bound},
           {"static", json{{"translation_covariant", st.translation_covariant},
                           {"range", st.range},
                           {"rotation_invariant", st.rotation_invariant},
                           {"odd_parity", st.odd_parity},
                           {"real_matrices", st.real_matrices}}}};
    json records = json::array();
    for (const ThetaRecord& r : fr.records) {
      records.push_back(record_json(r));
      std::ostringstream row;
      row << L << ',' << format_sig(r.theta, 9) << ',' << format_sig(r.norm, 9) << ','
          << format_sig(r.energy, 9) << ',' << format_sig(r.energy_twisted, 9) << ','
          << format_sig(r.overlap_gs, 9) << ',' << format_sig(r.overlap_rotated, 9) << ','
          << format_sig(r.translation_defect, 9) << ',' << format_sig(r.window_tdist, 9)
          << ',' << format_sig(r.d1_norm, 9);
      out.flow_rows.push_back(row.str());
    }
    e["records"] = records;

    std::string tag = "_L" + std::to_string(L);
    BoundReport maj;
    maj.name = "overlap_majorant" + tag;
    maj.grid = {2 * kPi};
    maj.lhs = {fr.overlap};
    maj.rhs = {fr.majorant};
    maj.finalize();
    add_bound(sc, maj, bounds, out);
    if (std::isfinite(fr.refined_bound)) {
      BoundReport ref;
      ref.name = "refined_gap_bound" + tag;
      ref.grid = {2 * kPi};
      ref.lhs = {fr.gap};
      ref.rhs = {fr.refined_bound};
      ref.finalize();
      add_bound(sc, ref, bounds, out);
      e["refined_bound_vacuous"] = false;
    } else {
      e["refined_bound_vacuous"] = true;
    }

    SweepRow row{L,          b.full_dim, fr.E0,      fr.gap,
                 fr.a,       fr.T_cut,   fr.delta_e, fr.overlap,
                 fr.refined_bound, std::log(double(L)) / L};
    out.sweep_rows.push_back(sweep_csv_row(row));
    e["sweep_row"] = sweep_json_row(row);
    entries.push_back(e);
  }
  return json{{"entries", entries}};
}

}  // namespace

// ---- ModelSpec -------------------------------------------------------------

Lattice ModelSpec::lattice(int L_override) const {
  return Lattice::build(L_override > 0 ? L_override : L, legs, geometry);
}

Interaction ModelSpec::interaction(const Lattice& lat) const {
  if (coupling == "heisenberg") return heisenberg(lat, spin, J);
  if (coupling == "xxz") return xxz(lat, spin, J, delta);
  if (coupling == "dimerized") return dimerized(lat, spin, J, J2);
  if (coupling == "coupled") {
    std::map<std::pair<int, int>, double> jmap;
    for (const auto& e : edges) jmap[{int(e[0]), int(e[1])}] = e[2];
    return coupled(lat, spin, jmap, delta);
  }
  throw ConfigError("unknown coupling: " + coupling);
}

DecayFunction ModelSpec::decay(const Lattice& lat) const {
  DecayFunction f;
  f.lambda = lambda;
  f.power = power > 0 ? power : lat.dim_label + 1;
  return f;
}

// ---- config loading --------------------------------------------------------

Scenario load_scenario(const std::string& config_path) {
  std::ifstream in(config_path, std::ios::binary);
  if (!in) throw ConfigError(config_path + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string raw = ss.str();
  json j;
  try {
    j = json::parse(raw, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(config_path + ": " + e.what());
  }
  Ctx c{config_path, raw};
  if (!j.is_object()) fail(c, "", "config must be a JSON object");
  check_keys(c, j, "the config",
             {"model", "pipelines", "overrides", "twist", "checks", "sweep", "out",
              "seed", "dense_max_dim", "threads"});

  Scenario sc;
  if (j.contains("model")) parse_model(c, j.at("model"), sc.model);

  if (j.contains("pipelines")) {
    static const std::set<std::string> known = {"spectrum", "twist-scan", "lsm-run",
                                                "lr-check", "cluster-check"};
    if (!j.at("pipelines").is_array())
      fail(c, "pipelines", "pipelines must be an array of names");
    for (const auto& p : j.at("pipelines")) {
      if (!p.is_string() || !known.count(p.get<std::string>()))
        fail(c, "pipelines",
             "unknown pipeline (spectrum | twist-scan | lsm-run | lr-check | cluster-check)");
      sc.pipelines.push_back(p.get<std::string>());
    }
  }

  if (j.contains("overrides")) {
    const json& o = j.at("overrides");
    check_keys(c, o, "overrides",
               {"a", "T", "M", "m", "theta_steps", "samples", "filter_backend",
                "sector_blocking", "margin_tolerance", "diagnostics"});
    if (o.contains("a")) {
      sc.a = get_num(c, o, "a", -1);
      if (!(sc.a > 0)) fail(c, "a", "a must be positive");
    }
    if (o.contains("T")) {
      sc.T_cut = get_num(c, o, "T", -1);
      if (!(sc.T_cut > 0)) fail(c, "T", "T must be positive");
    }
    if (o.contains("M")) {
      sc.M = get_num(c, o, "M", -1);
      if (!(sc.M > 0)) fail(c, "M", "M must be positive");
    }
    if (o.contains("m")) {
      int m = get_int(c, o, "m", 1);
      if (m < 1 || m > sc.model.L) fail(c, "m", "m must lie in [1, L]");
      sc.m_override = m;
    }
    sc.theta_steps = get_int(c, o, "theta_steps", sc.theta_steps);
    if (sc.theta_steps < 64) fail(c, "theta_steps", "theta_steps must be at least 64");
    sc.samples = get_int(c, o, "samples", sc.samples);
    if (sc.samples < 1 || sc.samples > sc.theta_steps)
      fail(c, "samples", "samples must lie in [1, theta_steps]");
    sc.filter_backend = get_str(c, o, "filter_backend", sc.filter_backend);
    if (sc.filter_backend != "spectral" && sc.filter_backend != "quadrature")
      fail(c, "filter_backend", "filter_backend must be spectral or quadrature");
    sc.sector_blocking = get_str(c, o, "sector_blocking", sc.sector_blocking);
    if (sc.sector_blocking != "auto" && sc.sector_blocking != "always" &&
        sc.sector_blocking != "never")
      fail(c, "sector_blocking", "sector_blocking must be auto, always, or never");
    sc.margin_tolerance = get_num(c, o, "margin_tolerance", sc.margin_tolerance);
    if (!(sc.margin_tolerance > 0))
      fail(c, "margin_tolerance", "margin_tolerance must be positive");
    sc.diagnostics = get_bool(c, o, "diagnostics", sc.diagnostics);
  }

  if (j.contains("twist")) {
    const json& t = j.at("twist");
    check_keys(c, t, "twist", {"thetas", "derivative_thetas"});
    if (t.contains("thetas")) sc.thetas = get_num_array(c, t, "thetas");
    if (t.contains("derivative_thetas"))
      sc.derivative_thetas = get_num_array(c, t, "derivative_thetas");
  }

  if (j.contains("checks")) {
    const json& k = j.at("checks");
    check_keys(c, k, "checks", {"a_site", "b_site", "t_max", "t_points", "theta"});
    int nsites = sc.model.L * sc.model.legs;
    sc.checks.a_site = get_int(c, k, "a_site", sc.checks.a_site);
    if (sc.checks.a_site < 0 || sc.checks.a_site >= nsites)
      fail(c, "a_site", "a_site must lie in [0, L*legs)");
    sc.checks.b_site = get_int(c, k, "b_site", sc.checks.b_site);
    if (sc.checks.b_site != -1 &&
        (sc.checks.b_site < 0 || sc.checks.b_site >= nsites ||
         sc.checks.b_site == sc.checks.a_site))
      fail(c, "b_site", "b_site must be -1 or a site distinct from a_site");
    sc.checks.t_max = get_num(c, k, "t_max", sc.checks.t_max);
    if (!(sc.checks.t_max > 0) && sc.checks.t_max != -1)
      fail(c, "t_max", "t_max must be positive, or -1 for the default window");
    sc.checks.t_points = get_int(c, k, "t_points", sc.checks.t_points);
    if (sc.checks.t_points < 2) fail(c, "t_points", "t_points must be at least 2");
    sc.checks.theta = get_num(c, k, "theta", sc.checks.theta);
  }

  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    check_keys(c, s, "sweep", {"L"});
    if (s.contains("L")) {
      if (!s.at("L").is_array()) fail(c, "sweep", "sweep L must be an array of sizes");
      for (const auto& v : s.at("L")) {
        if (!v.is_number_integer()) fail(c, "sweep", "sweep L entries must be integers");
        int L = v.get<int>();
        if (L % 2 != 0) fail(c, "sweep", "L must be even");
        if (L < 4) fail(c, "sweep", "L must be at least 4");
        if (sc.model.coupling == "coupled" && L != sc.model.L)
          fail(c, "sweep", "sweep over L requires a translation-built coupling");
        sc.sweep_L.push_back(L);
      }
    }
  }

  sc.out_dir = get_str(c, j, "out", sc.out_dir);
  if (sc.out_dir.empty()) fail(c, "out", "out must be a non-empty path");
  sc.seed = get_field<uint64_t>(c, j, "seed", sc.seed, "a non-negative integer");
  sc.dense_max_dim =
      get_field<int64_t>(c, j, "dense_max_dim", sc.dense_max_dim, "an integer");
  if (sc.dense_max_dim < 2) fail(c, "dense_max_dim", "dense_max_dim must be at least 2");
  sc.threads = get_int(c, j, "threads", sc.threads);
  if (sc.threads < 1) fail(c, "threads", "threads must be at least 1");
  return sc;
}

std::string scenario_template() {
  return R"(// scenario template; // and /* */ comments are accepted by the parser
{
  "model": {
    "geometry": "ring",        // ring | ladder | cylinder
    "L": 6,                    // columns around the ring; must be even, >= 4
    "legs": 1,                 // transverse sites per column (1 for rings)
    "spin": 0.5,               // per-site spin: 0.5, 1, 1.5, ...
    "coupling": "heisenberg",  // heisenberg | xxz | dimerized | coupled
    "J": 1.0,                  // exchange strength (odd bonds for dimerized)
    "J2": 1.0,                 // dimerized only: even-bond strength
    "delta": 1.0,              // xxz / coupled: S^3 S^3 anisotropy
    "lambda": 1.0,             // decay weight in F(r) = e^{-lambda r}(1+r)^{-power}
    "power": 0                 // decay power; 0 picks lattice dimension + 1
  },
  "pipelines": ["spectrum"],   // spectrum | twist-scan | lsm-run | lr-check | cluster-check
  "overrides": {
    "theta_steps": 512,        // RK4 grid on [0, 2pi]; at least 64
    "samples": 16,             // recorded theta intervals per flow
    "filter_backend": "spectral",   // spectral | quadrature
    "sector_blocking": "auto",      // auto | always | never
    "margin_tolerance": 1e-9,       // bound rows fail below -tolerance * scale
    "diagnostics": false            // per-theta remainder diagnostics (slow)
    // "a": 0.25,              // filter width; default gap / L
    // "T": 3.0,               // filter time cutoff; default L / 2
    // "M": 12.0,              // quadrature time window; default sqrt(40 / a)
    // "m": 1                  // left twist column; default from the range
  },
  "twist": {
    "thetas": [0.3, 1.0, 3.141592653589793, 6.283185307179586],
    "derivative_thetas": [0.0, 0.7, 2.1]
  },
  "checks": {
    "a_site": 0,               // first observable site (0-based)
    "b_site": -1,              // second site; -1 picks the opposite column
    "t_max": -1,               // time-grid edge; -1 = 2.0 for lr-check and the
                               // admissible clustering window for cluster-check
    "t_points": 9,
    "theta": 3.141592653589793 // twist angle for the restriction check
  },
  "sweep": { "L": [4, 6] },    // sizes run by spectrum and lsm-run
  "out": "runs/example",       // output directory
  "seed": 1,                   // seed for the iterative eigensolver
  "dense_max_dim": 8192,       // largest dimension diagonalized densely
  "threads": 1
}
)";
}

// ---- pipeline driver -------------------------------------------------------

PipelineOutputs run_pipeline(const Scenario& sc, const std::string& pipeline) {
  PipelineOutputs out;
  json doc;
  doc["command"] = pipeline;
  doc["scenario"] = scenario_json(sc);
  doc["versions"] = versions_json();
  json bounds = json::array();
  json results;
  if (pipeline == "spectrum")
    results = run_spectrum(sc, out, bounds);
  else if (pipeline == "twist-scan")
    results = run_twist_scan(sc, out, bounds);
  else if (pipeline == "lsm-run")
    results = run_lsm(sc, out, bounds);
  else if (pipeline == "lr-check")
    results = run_lr_check(sc, out, bounds);
  else if (pipeline == "cluster-check")
    results = run_cluster_check(sc, out, bounds);
  else
    throw ConfigError("unknown pipeline: " + pipeline);
  doc["results"] = results;
  doc["checks"] =
      json{{"bounds", bounds}, {"failed", out.failed}, {"all_passed", out.failed.empty()}};
  out.results_json = dump_document(doc);
  return out;
}

void write_outputs(const Scenario& sc, const PipelineOutputs& out) {
  fs::path dir(sc.out_dir);
  fs::create_directories(dir);
  write_atomic(dir / "results.json", out.results_json);
  auto csv = [](const char* header, const std::vector<std::string>& rows) {
    std::ostringstream os;
    os << header << "\n";
    for (const auto& r : rows) os << r << "\n";
    return os.str();
  };
  write_atomic(dir / "sweep.csv",
               csv("L,dim,E0,gamma,a,T,delta_e,overlap,refined_bound,log_L_over_L",
                   out.sweep_rows));
  write_atomic(dir / "bounds.csv",
               csv("name,points,worst_margin,scale,passed", out.bound_rows));
  write_atomic(dir / "flow_theta.csv",
               csv("L,theta,norm,energy,energy_twisted,overlap_gs,overlap_rotated,"
                   "translation_defect,window_tdist,d1_norm",
                   out.flow_rows));
}

// ---- report ----------------------------------------------------------------

std::vector<SweepRow> read_sweep_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open sweep file");
  std::string line;
  if (!std::getline(in, line) || line.rfind("L,dim,", 0) != 0)
    throw ConfigError(path + ":1: not a sweep.csv file (bad header)");
  std::vector<SweepRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> parts;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) parts.push_back(tok);
    if (parts.size() != 10)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 10 columns");
    try {
      SweepRow r;
      r.L = std::stoi(parts[0]);
      r.dim = std::stoll(parts[1]);
      double* vals[] = {&r.e0,      &r.gamma,   &r.a,       &r.t_cut,
                        &r.delta_e, &r.overlap, &r.refined, &r.log_l_over_l};
      for (int i = 0; i < 8; ++i) *vals[i] = std::stod(parts[size_t(i) + 2]);
      rows.push_back(r);
    } catch (const std::exception&) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return rows;
}

FitReport fit_sweep(const std::vector<SweepRow>& rows) {
  FitReport fr;
  for (const SweepRow& r : rows)
    if (std::isfinite(r.gamma) && r.L >= 2) fr.rows.push_back(r);
  if (fr.rows.size() < 2)
    throw ConfigError("report: need at least 2 sweep rows with a finite gap");
  double sxx = 0, sxy = 0;
  for (const SweepRow& r : fr.rows) {
    double x = std::log(double(r.L)) / r.L;
    sxx += x * x;
    sxy += x * r.gamma;
  }
  fr.C = sxy / sxx;
  std::ostringstream tb;
  tb << "  L      gamma_L         gamma_L*L/log(L)  C*log(L)/L\n";
  for (const SweepRow& r : fr.rows) {
    double x = std::log(double(r.L)) / r.L;
    fr.ratios.push_back(r.gamma / x);
    fr.fitted.push_back(fr.C * x);
    char buf[128];
    std::snprintf(buf, sizeof buf, "%3d    %-15.9g %-17.9g %-15.9g\n", r.L, r.gamma,
                  fr.ratios.back(), fr.fitted.back());
    tb << buf;
  }
  tb << "least-squares gamma_L = C*log(L)/L over " << fr.rows.size()
     << " rows: C = " << format_sig(fr.C, 17) << "\n";
  fr.table = tb.str();
  return fr;
}

void write_fit(const FitReport& fr, const std::string& out_dir) {
  fs::path dir(out_dir);
  fs::create_directories(dir);
  std::ostringstream csv;
  csv << "L,dim,gamma,log_L_over_L,fitted,ratio\n";
  json rows = json::array();
  for (size_t i = 0; i < fr.rows.size(); ++i) {
    const SweepRow& r = fr.rows[i];
    double x = std::log(double(r.L)) / r.L;
    csv << r.L << ',' << r.dim << ',' << format_sig(r.gamma, 9) << ',' << format_sig(x, 9)
        << ',' << format_sig(fr.fitted[i], 9) << ',' << format_sig(fr.ratios[i], 9) << "\n";
    rows.push_back(json{{"L", r.L},
                        {"dim", r.dim},
                        {"gamma", r.gamma},
                        {"log_L_over_L", x},
                        {"fitted", fr.fitted[i]},
                        {"ratio", fr.ratios[i]}});
  }
  write_atomic(dir / "fit.csv", csv.str());
  write_atomic(dir / "report.json",
               dump_document(json{{"C", fr.C}, {"rows", rows}, {"versions", versions_json()}}));
}

std::string format_sig(double x, int digits) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

}  // namespace lsm
