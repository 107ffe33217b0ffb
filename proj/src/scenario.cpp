#include "evoasym/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace evoasym {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// json access with contextual error messages

const json& require_field(const json& j, const char* key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw InvalidInputError(ctx + ": missing mandatory parameter '" + key + "'");
  }
  return *it;
}

double num_field(const json& j, const char* key, const std::string& ctx) {
  const json& f = require_field(j, key, ctx);
  if (!f.is_number()) {
    throw InvalidInputError(ctx + ": parameter '" + key + "' must be a number");
  }
  return f.get<double>();
}

std::string str_field(const json& j, const char* key, const std::string& ctx) {
  const json& f = require_field(j, key, ctx);
  if (!f.is_string()) {
    throw InvalidInputError(ctx + ": parameter '" + key + "' must be a string");
  }
  return f.get<std::string>();
}

bool bool_field(const json& j, const char* key, const std::string& ctx) {
  const json& f = require_field(j, key, ctx);
  if (!f.is_boolean()) {
    throw InvalidInputError(ctx + ": parameter '" + key + "' must be a boolean");
  }
  return f.get<bool>();
}

Vector vector_field(const json& f, const std::string& ctx) {
  if (!f.is_array() || f.empty()) {
    throw InvalidInputError(ctx + ": expected a nonempty numeric array");
  }
  Vector v(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!f[i].is_number()) {
      throw InvalidInputError(ctx + ": expected a numeric array");
    }
    v[static_cast<Eigen::Index>(i)] = f[i].get<double>();
  }
  return v;
}

Matrix matrix_field(const json& f, const std::string& ctx) {
  if (!f.is_array() || f.empty()) {
    throw InvalidInputError(ctx + ": expected a matrix as nested arrays");
  }
  const std::size_t rows = f.size();
  const std::size_t cols = f[0].is_array() ? f[0].size() : 0;
  if (cols == 0) throw InvalidInputError(ctx + ": expected a matrix as nested arrays");
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!f[r].is_array() || f[r].size() != cols) {
      throw InvalidInputError(ctx + ": matrix rows must have equal length");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          f[r][c].get<double>();
    }
  }
  return m;
}

// {"start":a,"stop":b,"step":h} or {"points":[...]}
std::vector<double> time_list_field(const json& f, const std::string& ctx) {
  if (f.is_object() && f.contains("points")) {
    const json& pts = f["points"];
    std::vector<double> out;
    for (const auto& p : pts) out.push_back(p.get<double>());
    if (out.empty()) throw InvalidInputError(ctx + ": empty time list");
    return out;
  }
  if (f.is_object()) {
    const double start = num_field(f, "start", ctx);
    const double stop = num_field(f, "stop", ctx);
    const double step = num_field(f, "step", ctx);
    return TimeGrid::uniform(start, stop, step).points();
  }
  throw InvalidInputError(ctx + ": expected {start,stop,step} or {points:[...]}");
}

TimeGrid time_grid_field(const json& f, const std::string& ctx) {
  return TimeGrid(time_list_field(f, ctx));
}

Interpolation interpolation_field(const json& j, const std::string& ctx) {
  const std::string s =
      j.contains("interpolation") ? j["interpolation"].get<std::string>() : "linear";
  if (s == "linear") return Interpolation::kPiecewiseLinear;
  if (s == "constant-left") return Interpolation::kPiecewiseConstantLeft;
  throw InvalidInputError(ctx + ": unknown interpolation '" + s + "'");
}

MeasureFamily family_field(const json& j, const char* key, const std::string& ctx) {
  const json& f = require_field(j, key, ctx);
  const std::string kind = str_field(f, "kind", ctx + " family");
  if (kind == "dirac") return MeasureFamily::dirac();
  if (kind == "cesaro") return MeasureFamily::cesaro();
  if (kind == "window") return MeasureFamily::window(num_field(f, "width", ctx));
  if (kind == "block") return MeasureFamily::block();
  throw InvalidInputError(ctx + ": unknown measure family kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// entity construction with recursive reference resolution

struct Builder {
  Eigen::Index dim = 0;
  json operators_doc;
  json systems_doc;
  json curves_doc;
  Workspace ws;
  std::vector<std::string> stack;  // active names, for cycle detection

  void push(const std::string& name) {
    if (std::find(stack.begin(), stack.end(), name) != stack.end()) {
      throw InvalidInputError("circular reference through entity '" + name + "'");
    }
    stack.push_back(name);
  }
  void pop() { stack.pop_back(); }

  const OperatorSpec& op(const std::string& name) {
    auto hit = ws.operators.find(name);
    if (hit != ws.operators.end()) return hit->second;
    if (!operators_doc.contains(name)) {
      throw UnresolvedReferenceError("unresolved operator reference '" + name + "'",
                                     name);
    }
    push(name);
    OperatorSpec built = build_operator(operators_doc[name], "operator '" + name + "'");
    pop();
    return ws.operators.emplace(name, std::move(built)).first->second;
  }

  OperatorSpec build_operator(const json& j, const std::string& ctx) {
    const std::string kind = str_field(j, "kind", ctx);
    OperatorSpec spec = [&]() {
      if (kind == "linear") {
        return OperatorSpec::linear(matrix_field(require_field(j, "matrix", ctx), ctx));
      }
      if (kind == "linear-unchecked") {
        return OperatorSpec::linear_unchecked(
            matrix_field(require_field(j, "matrix", ctx), ctx));
      }
      if (kind == "quadratic") {
        Matrix q = matrix_field(require_field(j, "matrix", ctx), ctx);
        Vector b = j.contains("shift") ? vector_field(j["shift"], ctx)
                                       : Vector(Vector::Zero(q.rows()));
        return OperatorSpec::quadratic(std::move(q), std::move(b));
      }
      if (kind == "l1") {
        return OperatorSpec::l1(num_field(j, "weight", ctx), dim);
      }
      if (kind == "box") {
        return OperatorSpec::box(vector_field(require_field(j, "lo", ctx), ctx),
                                 vector_field(require_field(j, "hi", ctx), ctx));
      }
      if (kind == "skew") {
        return OperatorSpec::skew(matrix_field(require_field(j, "matrix", ctx), ctx));
      }
      if (kind == "sum") {
        const json& terms = require_field(j, "terms", ctx);
        std::vector<OperatorSpec> parts;
        for (const auto& term : terms) {
          if (term.is_string()) {
            parts.push_back(op(term.get<std::string>()));
          } else {
            parts.push_back(build_operator(term, ctx + " (inline term)"));
          }
        }
        return OperatorSpec::sum(std::move(parts));
      }
      throw InvalidInputError(ctx + ": unknown operator kind '" + kind + "'");
    }();
    if (spec.dimension() != dim) {
      throw DimensionMismatchError(ctx + ": dimension does not match the scenario");
    }
    return spec;
  }

  Forcing forcing_field(const json& j, const std::string& ctx) {
    const std::string kind = str_field(j, "kind", ctx);
    if (kind == "zero") return Forcing::zero();
    if (kind == "power-decay") {
      return Forcing::power_decay(num_field(j, "c", ctx), num_field(j, "p", ctx),
                                  vector_field(require_field(j, "direction", ctx), ctx));
    }
    if (kind == "custom") {
      const bool l1 = bool_field(j, "l1_integrable", ctx);
      if (j.contains("curve")) {
        return Forcing::custom(curve(str_field(j, "curve", ctx)), l1);
      }
      // inline samples
      const std::vector<double> t = time_list_field(require_field(j, "t", ctx), ctx);
      const json& vals = require_field(j, "values", ctx);
      std::vector<Vector> values;
      for (const auto& row : vals) values.push_back(vector_field(row, ctx));
      return Forcing::custom(
          SampledCurve(TimeGrid(t), std::move(values), interpolation_field(j, ctx)),
          l1);
    }
    throw InvalidInputError(ctx + ": unknown forcing kind '" + kind + "'");
  }

  StepSequence steps_field(const json& j, const std::string& ctx) {
    const std::string kind = str_field(j, "kind", ctx);
    if (kind == "power") {
      return StepSequence::power(num_field(j, "c", ctx), num_field(j, "alpha", ctx));
    }
    if (kind == "constant") return StepSequence::constant(num_field(j, "c", ctx));
    if (kind == "list") {
      const json& vals = require_field(j, "values", ctx);
      std::vector<double> v;
      for (const auto& x : vals) v.push_back(x.get<double>());
      return StepSequence::list(std::move(v));
    }
    throw InvalidInputError(ctx + ": unknown step sequence kind '" + kind + "'");
  }

  const EvolutionSystem& system(const std::string& name) {
    auto hit = ws.systems.find(name);
    if (hit != ws.systems.end()) return hit->second;
    if (!systems_doc.contains(name)) {
      throw UnresolvedReferenceError("unresolved system reference '" + name + "'",
                                     name);
    }
    push(name);
    EvolutionSystem built = build_system(systems_doc[name], "system '" + name + "'");
    pop();
    return ws.systems.emplace(name, std::move(built)).first->second;
  }

  EvolutionSystem build_system(const json& j, const std::string& ctx) {
    const std::string ctor = str_field(j, "constructor", ctx);
    if (ctor == "flow") {
      const OperatorSpec& o = op(str_field(j, "operator", ctx));
      Forcing f = j.contains("forcing") ? forcing_field(j["forcing"], ctx)
                                        : Forcing::zero();
      return make_flow_system(o, std::move(f), num_field(j, "h_int", ctx));
    }
    if (ctor == "exponential") {
      return make_exponential_system(op(str_field(j, "operator", ctx)),
                                     num_field(j, "h_int", ctx));
    }
    if (ctor == "product") {
      ProductSystemSpec spec{steps_field(require_field(j, "steps", ctx), ctx),
                             op(str_field(j, "operator", ctx))};
      if (j.contains("max_terms")) {
        spec.max_terms = j["max_terms"].get<std::size_t>();
      }
      return make_product_system(std::move(spec));
    }
    if (ctor == "closed-form") {
      const std::string formula = str_field(j, "formula", ctx);
      if (formula == "shift-exp") {
        if (dim != 1) throw InvalidInputError(ctx + ": shift-exp needs dimension 1");
        return make_shift_exp_system();
      }
      if (formula == "linear-decay") {
        return make_linear_decay_system(num_field(j, "mu", ctx), dim);
      }
      if (formula == "rotation") {
        if (dim != 2) throw InvalidInputError(ctx + ": rotation needs dimension 2");
        return make_rotation_system(num_field(j, "omega", ctx));
      }
      throw InvalidInputError(ctx + ": unknown formula '" + formula + "'");
    }
    throw InvalidInputError(ctx + ": unknown system constructor '" + ctor + "'");
  }

  const SampledCurve& curve(const std::string& name) {
    auto hit = ws.curves.find(name);
    if (hit != ws.curves.end()) return hit->second;
    if (!curves_doc.contains(name)) {
      throw UnresolvedReferenceError("unresolved curve reference '" + name + "'",
                                     name);
    }
    push(name);
    SampledCurve built = build_curve(curves_doc[name], "curve '" + name + "'");
    pop();
    return ws.curves.emplace(name, std::move(built)).first->second;
  }

  SampledCurve build_curve(const json& j, const std::string& ctx) {
    const std::string recipe = str_field(j, "recipe", ctx);
    if (recipe == "orbit" || recipe == "perturbed-orbit") {
      const EvolutionSystem& sys = system(str_field(j, "system", ctx));
      const double t0 = num_field(j, "t0", ctx);
      const Vector x0 = vector_field(require_field(j, "x0", ctx), ctx);
      const TimeGrid grid = time_grid_field(require_field(j, "grid", ctx), ctx);
      SampledCurve c = orbit(sys, t0, x0, grid, interpolation_field(j, ctx));
      if (recipe == "perturbed-orbit") {
        Forcing p = forcing_field(require_field(j, "perturbation", ctx), ctx);
        c = perturb_to_almost_orbit(c, p);
      }
      return c;
    }
    if (recipe == "constant") {
      const Vector value = vector_field(require_field(j, "value", ctx), ctx);
      const TimeGrid grid = time_grid_field(require_field(j, "grid", ctx), ctx);
      std::vector<Vector> values(grid.size(), value);
      return SampledCurve(grid, std::move(values), interpolation_field(j, ctx));
    }
    if (recipe == "block-indicator") {
      // the indicator of [2k, 2k+1) sampled on the integer grid 0..stop
      const double stop = num_field(j, "stop", ctx);
      if (!(stop >= 1.0)) throw InvalidInputError(ctx + ": stop must be >= 1");
      std::vector<double> pts;
      std::vector<Vector> values;
      for (long k = 0; static_cast<double>(k) <= stop; ++k) {
        pts.push_back(static_cast<double>(k));
        Vector v(1);
        v[0] = (k % 2 == 0) ? 1.0 : 0.0;
        values.push_back(v);
      }
      return SampledCurve(TimeGrid(std::move(pts)), std::move(values),
                          Interpolation::kPiecewiseConstantLeft);
    }
    if (recipe == "samples") {
      const std::vector<double> t = time_list_field(require_field(j, "t", ctx), ctx);
      const json& vals = require_field(j, "values", ctx);
      std::vector<Vector> values;
      for (const auto& row : vals) values.push_back(vector_field(row, ctx));
      return SampledCurve(TimeGrid(t), std::move(values),
                          interpolation_field(j, ctx));
    }
    throw InvalidInputError(ctx + ": unknown curve recipe '" + recipe + "'");
  }
};

// ---------------------------------------------------------------------------
// csv output

std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name) {
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'
                      ? c
                      : '_');
  }
  return out;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& params_comment,
            const std::vector<std::string>& header)
      : out_(path), path_(path) {
    if (!out_) throw InvalidInputError("cannot open output file " + path);
    out_ << "# params=" << params_comment << "\n";
    for (std::size_t i = 0; i < header.size(); ++i) {
      out_ << (i ? "," : "") << header[i];
    }
    out_ << "\n";
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out_ << (i ? "," : "") << cells[i];
    }
    out_ << "\n";
  }

  void close() {
    out_.flush();
    if (!out_) throw InvalidInputError("write failed for " + path_);
  }

 private:
  std::ofstream out_;
  std::string path_;
};

std::string fnum(double v) { return format_full(v); }

const char* class_name(PointClass c) {
  switch (c) {
    case PointClass::kStationary:
      return "stationary";
    case PointClass::kAlmostStationary:
      return "almost-stationary";
    case PointClass::kNeither:
      return "neither";
  }
  return "?";
}

const char* verdict_name(AAEVerdict v) {
  switch (v) {
    case AAEVerdict::kSupported:
      return "aae-supported";
    case AAEVerdict::kForwardOnly:
      return "forward-only";
    case AAEVerdict::kBackwardOnly:
      return "backward-only";
    case AAEVerdict::kUnsupported:
      return "unsupported";
  }
  return "?";
}

const char* verdict_name(HypothesisVerdict v) {
  switch (v) {
    case HypothesisVerdict::kViolated:
      return "violated";
    case HypothesisVerdict::kConsistent:
      return "consistent";
    case HypothesisVerdict::kInconclusive:
      return "inconclusive";
  }
  return "?";
}

// almost-convergence verdict: every tail deviation at or below tol. The
// deviations oscillate beneath a decaying envelope (shifted means of a
// bounded curve), so a per-step monotone-trend requirement would reject
// genuinely convergent profiles.
bool tail_below(const std::vector<std::pair<double, double>>& series,
                double tail_start, double tol) {
  bool any = false;
  for (const auto& [t, v] : series) {
    if (t < tail_start) continue;
    any = true;
    if (v > tol) return false;
  }
  return any;
}

// ---------------------------------------------------------------------------
// experiment execution

struct ExperimentIo {
  std::string out_dir;    // empty => validation pass, no computation
  std::string file_base;  // "<idx>_<name>"
};

std::string csv_path(const ExperimentIo& io, const std::string& suffix = "") {
  return io.out_dir + "/" + io.file_base + suffix + ".csv";
}

const SampledCurve& find_curve(const Workspace& ws, const std::string& name,
                               const std::string& ctx) {
  auto it = ws.curves.find(name);
  if (it == ws.curves.end()) {
    throw UnresolvedReferenceError(ctx + ": unresolved curve reference '" + name + "'",
                                   name);
  }
  return it->second;
}

const EvolutionSystem& find_system(const Workspace& ws, const std::string& name,
                                   const std::string& ctx) {
  auto it = ws.systems.find(name);
  if (it == ws.systems.end()) {
    throw UnresolvedReferenceError(ctx + ": unresolved system reference '" + name + "'",
                                   name);
  }
  return it->second;
}

void exec_simulate(const Workspace& ws, const json& e, const std::string& ctx,
                   const ExperimentIo& io, ExperimentResult& result) {
  const EvolutionSystem& sys = find_system(ws, str_field(e, "system", ctx), ctx);
  const double t0 = num_field(e, "t0", ctx);
  const Vector x0 = vector_field(require_field(e, "x0", ctx), ctx);
  const TimeGrid grid = time_grid_field(require_field(e, "grid", ctx), ctx);
  const Interpolation interp = interpolation_field(e, ctx);
  if (io.out_dir.empty()) return;

  const SampledCurve c = orbit(sys, t0, x0, grid, interp);
  write_curve_csv(c, csv_path(io), "params=" + e.dump());
  result.csv_files.push_back(io.file_base + ".csv");
  result.verdict = "simulated " + std::to_string(grid.size()) + " points";
}

void exec_defect(const Workspace& ws, const json& e, const std::string& ctx,
                 const ExperimentIo& io, ExperimentResult& result) {
  const EvolutionSystem& sys = find_system(ws, str_field(e, "system", ctx), ctx);
  const SampledCurve& u = find_curve(ws, str_field(e, "curve", ctx), ctx);
  const std::vector<double> t_grid =
      time_list_field(require_field(e, "t_grid", ctx), ctx);
  const double horizon = num_field(e, "H", ctx);
  const double h_res = num_field(e, "h_res", ctx);
  const double tol = num_field(e, "tol", ctx);
  const double tail_start = num_field(e, "tail_start", ctx);
  if (io.out_dir.empty()) return;

  const DefectProfile profile = defect_profile(u, sys, t_grid, horizon, h_res);
  const AlmostOrbitVerdict verdict = is_almost_orbit(profile, tol, tail_start);

  CsvWriter csv(csv_path(io), e.dump(), {"t", "psi"});
  for (std::size_t i = 0; i < profile.t.size(); ++i) {
    csv.row({fnum(profile.t[i]), fnum(profile.values[i])});
  }
  csv.close();
  result.csv_files.push_back(io.file_base + ".csv");
  result.verdict = std::string(verdict.almost_orbit ? "almost-orbit-supported"
                                                    : "not-almost-orbit") +
                   " max_tail=" + fnum(verdict.max_tail) +
                   " slope=" + fnum(verdict.trend_slope);
}

void exec_aae(const Workspace& ws, const json& e, const std::string& ctx,
              const ExperimentIo& io, ExperimentResult& result) {
  const EvolutionSystem& u_sys = find_system(ws, str_field(e, "U", ctx), ctx);
  const EvolutionSystem& v_sys = find_system(ws, str_field(e, "W", ctx), ctx);
  const json& seeds_doc = require_field(e, "seeds", ctx);
  std::vector<AAESeed> seeds;
  for (const auto& s : seeds_doc) {
    seeds.push_back({num_field(s, "t0", ctx),
                     vector_field(require_field(s, "x0", ctx), ctx)});
  }
  const std::vector<double> t_grid =
      time_list_field(require_field(e, "t_grid", ctx), ctx);
  const double horizon = num_field(e, "H", ctx);
  const double h_res = num_field(e, "h_res", ctx);
  const double tol = num_field(e, "tol", ctx);
  const double tail_start = num_field(e, "tail_start", ctx);
  if (io.out_dir.empty()) return;

  const AAEReport report =
      aae_check(u_sys, v_sys, seeds, t_grid, horizon, h_res, tol, tail_start);
  CsvWriter csv(csv_path(io), e.dump(), {"t", "psi_forward", "psi_backward"});
  for (std::size_t i = 0; i < report.forward.t.size(); ++i) {
    csv.row({fnum(report.forward.t[i]), fnum(report.forward.values[i]),
             fnum(report.backward.values[i])});
  }
  csv.close();
  result.csv_files.push_back(io.file_base + ".csv");
  result.verdict = verdict_name(report.verdict);
}

void exec_asp(const Workspace& ws, const json& e, const std::string& ctx,
              const ExperimentIo& io, ExperimentResult& result) {
  const EvolutionSystem& sys = find_system(ws, str_field(e, "system", ctx), ctx);
  const json& points_doc = require_field(e, "points", ctx);
  std::vector<Vector> points;
  for (const auto& p : points_doc) points.push_back(vector_field(p, ctx));
  if (points.empty()) throw InvalidInputError(ctx + ": empty point list");
  const std::vector<double> t_grid =
      time_list_field(require_field(e, "t_grid", ctx), ctx);
  const double horizon = num_field(e, "H", ctx);
  const double h_res = num_field(e, "h_res", ctx);
  const double tol = num_field(e, "tol", ctx);
  if (io.out_dir.empty()) return;

  const auto reports = asp_scan(sys, points, t_grid, horizon, h_res, tol);
  std::vector<std::string> header{"point_index"};
  for (Eigen::Index j = 0; j < points.front().size(); ++j) {
    header.push_back("p" + std::to_string(j));
  }
  header.insert(header.end(), {"t", "defect", "classification"});
  CsvWriter csv(csv_path(io), e.dump(), header);
  std::string verdict;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    for (const auto& [t, d] : reports[i].defect_at) {
      std::vector<std::string> cells{std::to_string(i)};
      for (Eigen::Index j = 0; j < reports[i].point.size(); ++j) {
        cells.push_back(fnum(reports[i].point[j]));
      }
      cells.push_back(fnum(t));
      cells.push_back(fnum(d));
      cells.push_back(class_name(reports[i].classification));
      csv.row(cells);
    }
    if (i) verdict += " ";
    verdict += "p" + std::to_string(i) + "=" + class_name(reports[i].classification);
  }
  csv.close();
  result.csv_files.push_back(io.file_base + ".csv");
  result.verdict = verdict;
}

void exec_sces(const Workspace& ws, const json& e, const std::string& ctx,
               const ExperimentIo& io, ExperimentResult& result) {
  const EvolutionSystem& sys = find_system(ws, str_field(e, "system", ctx), ctx);
  const SampledCurve& u1 = find_curve(ws, str_field(e, "curve1", ctx), ctx);
  const SampledCurve& u2 = find_curve(ws, str_field(e, "curve2", ctx), ctx);
  const std::vector<double> s_list =
      time_list_field(require_field(e, "s_list", ctx), ctx);
  const std::vector<double> t_list =
      time_list_field(require_field(e, "t_list", ctx), ctx);
  const int pairs = static_cast<int>(num_field(e, "pairs", ctx));
  const auto seed = static_cast<std::uint64_t>(num_field(e, "seed", ctx));
  const double threshold = num_field(e, "sces_threshold", ctx);
  const std::vector<double> defect_t_grid =
      time_list_field(require_field(e, "defect_t_grid", ctx), ctx);
  const double horizon = num_field(e, "H", ctx);
  const double h_res = num_field(e, "h_res", ctx);
  const double defect_tol = num_field(e, "defect_tol", ctx);
  const double defect_tail_start = num_field(e, "defect_tail_start", ctx);
  const double tail_start = num_field(e, "tail_start", ctx);
  const double tol = num_field(e, "tol", ctx);
  if (io.out_dir.empty()) return;

  const SCESProfile profile =
      sces_profile(sys, t_list, s_list, pairs, seed, threshold);
  CsvWriter mhat(csv_path(io, "_mhat"), e.dump(), {"t", "s", "m_hat", "pairs"});
  for (const auto& row : profile.samples) {
    mhat.row({fnum(row.t), fnum(row.s), fnum(row.m_hat), std::to_string(row.pairs)});
  }
  mhat.close();
  result.csv_files.push_back(io.file_base + "_mhat.csv");

  const auto v1 = is_almost_orbit(
      defect_profile(u1, sys, defect_t_grid, horizon, h_res), defect_tol,
      defect_tail_start);
  const auto v2 = is_almost_orbit(
      defect_profile(u2, sys, defect_t_grid, horizon, h_res), defect_tol,
      defect_tail_start);

  const DistanceTrace check = sces_consequence_check(sys, u1, u2, tail_start, tol);
  CsvWriter csv(csv_path(io), e.dump(), {"t", "distance"});
  for (const auto& [t, d] : check.trace) csv.row({fnum(t), fnum(d)});
  csv.close();
  result.csv_files.push_back(io.file_base + ".csv");

  if (!profile.sces_plausible || !v1.almost_orbit || !v2.almost_orbit) {
    throw InvalidInputError(
        ctx + ": preconditions unmet (sces_plausible=" +
        std::to_string(profile.sces_plausible) +
        " curve1_almost_orbit=" + std::to_string(v1.almost_orbit) +
        " curve2_almost_orbit=" + std::to_string(v2.almost_orbit) + ")");
  }
  result.verdict = std::string(check.ok ? "distances-converge" : "distances-exceed-tol") +
                   " sces_plausible=1";
}

void exec_mean(const Workspace& ws, const json& e, const std::string& ctx,
               const ExperimentIo& io, ExperimentResult& result) {
  const MeasureFamily fam = family_field(e, "family", ctx);
  const EvolutionSystem& sys = find_system(ws, str_field(e, "system", ctx), ctx);
  const SampledCurve& u = find_curve(ws, str_field(e, "curve", ctx), ctx);
  const std::vector<double> t_grid =
      time_list_field(require_field(e, "t_grid", ctx), ctx);
  const double tail_start = num_field(e, "tail_start", ctx);
  const double tol = num_field(e, "tol", ctx);
  if (io.out_dir.empty()) return;

  const MeanTrace trace =
      average_inheritance_trace(fam, sys, u, t_grid, tail_start, tol);
  std::vector<std::string> header{"t"};
  for (Eigen::Index j = 0; j < u.dimension(); ++j) {
    header.push_back("m" + std::to_string(j));
  }
  CsvWriter csv(csv_path(io), e.dump(), header);
  for (std::size_t i = 0; i < trace.t.size(); ++i) {
    std::vector<std::string> cells{fnum(trace.t[i])};
    for (Eigen::Index j = 0; j < trace.values[i].size(); ++j) {
      cells.push_back(fnum(trace.values[i][j]));
    }
    csv.row(cells);
  }
  csv.close();
  result.csv_files.push_back(io.file_base + ".csv");
  result.verdict = std::string(trace.cauchy ? "mean-cauchy" : "mean-not-cauchy") +
                   " max_tail_gap=" + fnum(trace.max_tail_gap);
}

void exec_almost_convergence(const Workspace& ws, const json& e,
                             const std::string& ctx, const ExperimentIo& io,
                             ExperimentResult& result) {
  const MeasureFamily fam = family_field(e, "family", ctx);
  const SampledCurve& v = find_curve(ws, str_field(e, "curve", ctx), ctx);
  const std::vector<double> t_grid =
      time_list_field(require_field(e, "t_grid", ctx), ctx);
  const double h_max = num_field(e, "H_max", ctx);
  const double h_res = num_field(e, "h_res", ctx);
  const double tol = num_field(e, "tol", ctx);
  const double tail_start = num_field(e, "tail_start", ctx);
  if (io.out_dir.empty()) return;

  const AlmostConvergenceProfile profile =
      almost_convergence_profile(fam, v, t_grid, h_max, h_res);
  CsvWriter csv(csv_path(io), e.dump(), {"t", "deviation"});
  for (const auto& [t, d] : profile.deviation) csv.row({fnum(t), fnum(d)});
  csv.close();
  result.csv_files.push_back(io.file_base + ".csv");
  const bool supported = tail_below(profile.deviation, tail_start, tol);
  result.verdict = supported ? "almost-convergence-supported"
                             : "almost-convergence-not-supported";
}

void exec_hyp(const Workspace& ws, const json& e, const std::string& ctx,
              const ExperimentIo& io, ExperimentResult& result, bool uniform) {
  const MeasureFamily fam = family_field(e, "family", ctx);
  const SampledCurve& g = find_curve(ws, str_field(e, "curve", ctx), ctx);
  const std::vector<double> t_list =
      time_list_field(require_field(e, "t_list", ctx), ctx);
  const double tol = num_field(e, "tol", ctx);

  std::vector<double> k_list;
  double k_max = 0.0;
  double k_res = 0.0;
  if (uniform) {
    k_max = num_field(e, "K", ctx);
    k_res = num_field(e, "k_res", ctx);
  } else {
    const json& kd = require_field(e, "K_list", ctx);
    for (const auto& k : kd) k_list.push_back(k.get<double>());
    if (k_list.empty()) throw InvalidInputError(ctx + ": empty K_list");
  }
  if (io.out_dir.empty()) return;

  const HypothesisReport report =
      uniform ? hypothesis_hu_falsify(fam, g, k_max, k_res, t_list, tol)
              : hypothesis_h_falsify(fam, g, k_list, t_list, tol);
  CsvWriter csv(csv_path(io), e.dump(), {"t", "K", "deviation"});
  for (const auto& [t, k, dev] : report.rows) {
    csv.row({fnum(t), fnum(k), fnum(dev)});
  }
  csv.close();
  result.csv_files.push_back(io.file_base + ".csv");
  result.verdict = std::string(verdict_name(report.verdict)) +
                   " L_norm=" + fnum(report.limit.norm()) +
                   " limit_cauchy=" + std::to_string(report.limit_cauchy);
}

void exec_omega(const Workspace& ws, const json& e, const std::string& ctx,
                const ExperimentIo& io, ExperimentResult& result) {
  const EvolutionSystem& sys = find_system(ws, str_field(e, "system", ctx), ctx);
  const SampledCurve& u = find_curve(ws, str_field(e, "curve", ctx), ctx);
  const double cluster_tail_start = num_field(e, "cluster_tail_start", ctx);
  const double cluster_eps = num_field(e, "cluster_eps", ctx);
  const auto cluster_index = static_cast<std::size_t>(num_field(e, "cluster_index", ctx));
  const std::vector<double> s_times =
      time_list_field(require_field(e, "s_times", ctx), ctx);
  const bool gap_growth = bool_field(e, "gap_growth", ctx);
  const double tol = num_field(e, "tol", ctx);
  if (io.out_dir.empty()) return;

  const std::vector<Vector> centers =
      cluster_points(u, cluster_tail_start, cluster_eps);
  if (cluster_index >= centers.size()) {
    throw InvalidInputError(ctx + ": cluster_index beyond the " +
                            std::to_string(centers.size()) + " found clusters");
  }
  const Vector& x_star = centers[cluster_index];
  const auto rows = omega_invariance_check(sys, u, x_star, s_times, gap_growth, tol);
  CsvWriter csv(csv_path(io), e.dump(), {"s", "t", "orbit_gap", "point_gap"});
  for (const auto& row : rows) {
    csv.row({fnum(row.s), fnum(row.t), fnum(row.orbit_gap), fnum(row.point_gap)});
  }
  csv.close();
  result.csv_files.push_back(io.file_base + ".csv");
  result.verdict = "clusters=" + std::to_string(centers.size()) +
                   " final_orbit_gap=" + fnum(rows.back().orbit_gap) +
                   " final_point_gap=" + fnum(rows.back().point_gap);
}

void exec_modulus(const Workspace& ws, const json& e, const std::string& ctx,
                  const ExperimentIo& io, ExperimentResult& result) {
  const SampledCurve& u = find_curve(ws, str_field(e, "curve", ctx), ctx);
  const json& deltas_doc = require_field(e, "deltas", ctx);
  std::vector<double> deltas;
  for (const auto& d : deltas_doc) deltas.push_back(d.get<double>());
  if (deltas.empty()) throw InvalidInputError(ctx + ": empty delta list");
  const double tail_start = num_field(e, "tail_start", ctx);
  if (io.out_dir.empty()) return;

  const auto rows = modulus_of_continuity(u, deltas, tail_start);
  CsvWriter csv(csv_path(io), e.dump(), {"delta", "modulus"});
  for (const auto& [d, m] : rows) csv.row({fnum(d), fnum(m)});
  csv.close();
  result.csv_files.push_back(io.file_base + ".csv");
  result.verdict = "modulus_at_min_delta=" + fnum(rows.front().second);
}

void exec_experiment(const Workspace& ws, const json& e, std::size_t index,
                     const ExperimentIo& io, ExperimentResult& result) {
  const std::string kind = e.value("kind", "");
  const std::string ctx =
      "experiment " + std::to_string(index) + " (" + kind + ")";
  if (kind.empty()) {
    throw InvalidInputError("experiment " + std::to_string(index) +
                            ": missing mandatory parameter 'kind'");
  }
  result.kind = kind;
  if (kind == "simulate") return exec_simulate(ws, e, ctx, io, result);
  if (kind == "defect") return exec_defect(ws, e, ctx, io, result);
  if (kind == "aae") return exec_aae(ws, e, ctx, io, result);
  if (kind == "asp") return exec_asp(ws, e, ctx, io, result);
  if (kind == "sces") return exec_sces(ws, e, ctx, io, result);
  if (kind == "mean") return exec_mean(ws, e, ctx, io, result);
  if (kind == "almost-convergence")
    return exec_almost_convergence(ws, e, ctx, io, result);
  if (kind == "hyp-h") return exec_hyp(ws, e, ctx, io, result, false);
  if (kind == "hyp-hu") return exec_hyp(ws, e, ctx, io, result, true);
  if (kind == "omega") return exec_omega(ws, e, ctx, io, result);
  if (kind == "modulus") return exec_modulus(ws, e, ctx, io, result);
  throw InvalidInputError(ctx + ": unknown experiment kind");
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& err) {
    std::size_t line = 1, column = 1;
    const std::size_t upto = std::min<std::size_t>(err.byte, text.size());
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ParseError("scenario syntax error at line " + std::to_string(line) +
                         ", column " + std::to_string(column) + ": " + err.what(),
                     line, column);
  }
  if (!doc.is_object()) {
    throw InvalidInputError("scenario: top level must be an object");
  }

  Scenario s;
  const json& dim_doc = require_field(doc, "dimension", "scenario");
  if (!dim_doc.is_number_integer() || dim_doc.get<long>() < 1) {
    throw InvalidInputError("scenario: dimension must be an integer >= 1");
  }
  s.dimension = dim_doc.get<Eigen::Index>();
  s.output_dir = doc.value("output_dir", "");

  if (!doc.contains("operators")) doc["operators"] = json::object();
  if (!doc.contains("systems")) doc["systems"] = json::object();
  if (!doc.contains("curves")) doc["curves"] = json::object();
  if (!doc.contains("experiments")) doc["experiments"] = json::array();

  // normalize: every experiment carries a name
  json& experiments = doc["experiments"];
  for (std::size_t i = 0; i < experiments.size(); ++i) {
    if (!experiments[i].contains("name")) {
      experiments[i]["name"] =
          experiments[i].value("kind", "experiment") + "_" + std::to_string(i);
    }
  }

  Builder builder;
  builder.dim = s.dimension;
  builder.operators_doc = doc["operators"];
  builder.systems_doc = doc["systems"];
  builder.curves_doc = doc["curves"];
  for (const auto& [name, unused] : doc["operators"].items()) builder.op(name);
  for (const auto& [name, unused] : doc["systems"].items()) builder.system(name);
  for (const auto& [name, unused] : doc["curves"].items()) builder.curve(name);

  // validate every experiment without running it
  for (std::size_t i = 0; i < experiments.size(); ++i) {
    ExperimentResult scratch;
    exec_experiment(builder.ws, experiments[i], i, ExperimentIo{}, scratch);
  }

  s.doc = std::move(doc);
  s.workspace = std::make_shared<const Workspace>(std::move(builder.ws));
  return s;
}

Scenario parse_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open scenario file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string serialize_scenario(const Scenario& s) { return s.doc.dump(2) + "\n"; }

RunReport run_scenario(const Scenario& s, const RunOptions& options) {
  std::string out_dir = options.output_dir;
  if (out_dir.empty()) out_dir = s.output_dir;
  if (out_dir.empty()) {
    if (const char* env = std::getenv("EVOASYM_OUT")) out_dir = env;
  }
  if (out_dir.empty()) out_dir = "evoasym-out";
  fs::create_directories(out_dir);

  const json& experiments = s.doc["experiments"];
  const std::size_t n = experiments.size();
  RunReport report;
  report.results.resize(n);

  auto run_one = [&](std::size_t i) {
    const json& e = experiments[i];
    ExperimentResult& result = report.results[i];
    result.name = e.value("name", "experiment_" + std::to_string(i));
    result.kind = e.value("kind", "");
    char base[32];
    std::snprintf(base, sizeof(base), "%02zu_", i);
    ExperimentIo io{out_dir, base + sanitize(result.name)};
    const auto start = std::chrono::steady_clock::now();
    try {
      exec_experiment(*s.workspace, e, i, io, result);
      result.completed = true;
    } catch (const std::exception& err) {
      result.completed = false;
      result.error = err.what();
    }
    result.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - start)
                         .count();
  };

  const int jobs = std::max(1, options.jobs);
  if (jobs == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t workers = std::min(static_cast<std::size_t>(jobs), n);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
          run_one(i);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  report.all_completed = std::all_of(report.results.begin(), report.results.end(),
                                     [](const auto& r) { return r.completed; });

  // report.txt in scenario order, regardless of completion order
  report.report_path = out_dir + "/report.txt";
  std::ofstream rep(report.report_path);
  rep << "evoasym run report\n";
  rep << "dimension: " << s.dimension << "\n";
  rep << "experiments: " << n << "\n\n";
  for (std::size_t i = 0; i < n; ++i) {
    const ExperimentResult& r = report.results[i];
    rep << "[" << i << "] '" << r.name << "' (" << r.kind << "): "
        << (r.completed ? "completed" : "FAILED") << "\n";
    if (!r.verdict.empty()) rep << "    verdict: " << r.verdict << "\n";
    if (!r.error.empty()) rep << "    error: " << r.error << "\n";
    for (const auto& f : r.csv_files) rep << "    file: " << f << "\n";
    rep << "    params: " << experiments[i].dump() << "\n";
    rep << "    wall_ms: " << r.wall_ms << "\n";
  }
  rep << "\nstatus: "
      << (report.all_completed ? "all experiments completed"
                               : "some experiments failed")
      << "\n";
  return report;
}

// ---------------------------------------------------------------------------
// plot data

namespace {

struct CsvTable {
  std::string params;  // raw json text from the comment line
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("missing CSV " + path.string());
  CsvTable table;
  std::string line;
  bool header_done = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("params=");
      if (pos != std::string::npos) table.params = line.substr(pos + 7);
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!header_done) {
      table.header = cells;
      header_done = true;
    } else {
      table.rows.push_back(cells);
    }
  }
  return table;
}

int column_index(const CsvTable& t, const std::string& name) {
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (t.header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

const char kPlotScript[] = R"PY(#!/usr/bin/env python3
"""Render every *.plot.csv in this directory to a PNG (needs matplotlib)."""
import csv
import glob
import os
import sys

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit("matplotlib is required to render plots")

for path in sorted(glob.glob(os.path.join(os.path.dirname(__file__) or ".", "*.plot.csv"))):
    with open(path) as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header, data = rows[0], rows[1:]
    xs = [float(r[0]) for r in data]
    fig, ax = plt.subplots()
    for j in range(1, len(header)):
        ax.plot(xs, [float(r[j]) for r in data], label=header[j])
    ax.set_xlabel(header[0])
    ax.legend()
    out = path[: -len(".plot.csv")] + ".png"
    fig.savefig(out, dpi=120)
    plt.close(fig)
    print("wrote", out)
)PY";

}  // namespace

void emit_plot_data(const std::string& report_dir) {
  std::vector<fs::path> csvs;
  if (!fs::is_directory(report_dir)) {
    throw InvalidInputError("emit_plot_data: not a directory: " + report_dir);
  }
  for (const auto& entry : fs::directory_iterator(report_dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > 4 &&
        name.substr(name.size() - 4) == ".csv" &&
        name.find(".plot.csv") == std::string::npos) {
      csvs.push_back(entry.path());
    }
  }
  if (csvs.empty()) {
    throw InvalidInputError("emit_plot_data: no CSV files in " + report_dir);
  }
  std::sort(csvs.begin(), csvs.end());

  for (const auto& path : csvs) {
    const CsvTable table = read_csv(path);
    if (table.header.empty() || table.rows.empty()) continue;

    std::vector<std::string> out_header;
    std::vector<int> out_cols;  // -1 encodes the computed mean-norm column
    bool mean_bound = false;

    auto pick = [&](const std::string& x, const std::vector<std::string>& ys) {
      const int xi = column_index(table, x);
      if (xi < 0) return false;
      out_header = {x};
      out_cols = {xi};
      for (const auto& y : ys) {
        const int yi = column_index(table, y);
        if (yi < 0) return false;
        out_header.push_back(y);
        out_cols.push_back(yi);
      }
      return true;
    };

    if (column_index(table, "psi_forward") >= 0) {
      pick("t", {"psi_forward", "psi_backward"});
    } else if (column_index(table, "psi") >= 0) {
      pick("t", {"psi"});
    } else if (column_index(table, "deviation") >= 0) {
      pick("t", {"deviation"});
    } else if (column_index(table, "m0") >= 0) {
      // mean trace: plot the norm plus the 2/t reference envelope
      out_header = {"t", "mean_norm", "two_over_t"};
      out_cols = {column_index(table, "t"), -1, -2};
      mean_bound = true;
    } else if (column_index(table, "distance") >= 0) {
      pick("t", {"distance"});
    } else if (column_index(table, "m_hat") >= 0) {
      pick("t", {"m_hat"});
    } else if (column_index(table, "defect") >= 0) {
      pick("t", {"defect"});
    } else if (column_index(table, "orbit_gap") >= 0) {
      pick("t", {"orbit_gap", "point_gap"});
    } else if (column_index(table, "modulus") >= 0) {
      pick("delta", {"modulus"});
    } else if (column_index(table, "x0") >= 0) {
      pick("t", {"x0"});
    } else {
      continue;  // nothing recognizable to plot
    }
    if (out_cols.empty()) continue;

    fs::path out_path = path;
    out_path.replace_extension();  // drop .csv
    out_path += ".plot.csv";
    std::ofstream out(out_path);
    if (!out) throw InvalidInputError("cannot write " + out_path.string());
    for (std::size_t i = 0; i < out_header.size(); ++i) {
      out << (i ? "," : "") << out_header[i];
    }
    out << "\n";
    for (const auto& row : table.rows) {
      for (std::size_t i = 0; i < out_cols.size(); ++i) {
        if (i) out << ",";
        if (out_cols[i] == -1) {
          // euclidean norm over every m* column
          double sq = 0.0;
          for (std::size_t c = 0; c < table.header.size(); ++c) {
            if (table.header[c].size() > 1 && table.header[c][0] == 'm' &&
                std::isdigit(static_cast<unsigned char>(table.header[c][1]))) {
              const double v = std::strtod(row[c].c_str(), nullptr);
              sq += v * v;
            }
          }
          out << format_full(std::sqrt(sq));
        } else if (out_cols[i] == -2) {
          const double t = std::strtod(row[0].c_str(), nullptr);
          out << format_full(t > 0.0 ? 2.0 / t : 0.0);
        } else {
          out << row[static_cast<std::size_t>(out_cols[i])];
        }
      }
      out << "\n";
    }
    (void)mean_bound;
  }

  std::ofstream script(fs::path(report_dir) / "plot_all.py");
  script << kPlotScript;
}

}  // namespace evoasym
