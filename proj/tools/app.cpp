#include "app.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "linewalk/envgen.hpp"
#include "linewalk/errors.hpp"
#include "linewalk/io.hpp"
#include "linewalk/limits.hpp"
#include "linewalk/oracles.hpp"
#include "linewalk/parallel.hpp"
#include "linewalk/rng.hpp"
#include "linewalk/stats.hpp"
#include "linewalk/walker.hpp"

namespace linewalk::app {

namespace {

using Json = nlohmann::ordered_json;
using Defaults = std::vector<std::pair<std::string, std::string>>;

const Defaults kEnvPareto = {{"h_mode", "pareto_floor"}, {"v_mode", "pareto_floor"},
                             {"h_floor", "1"},           {"v_floor", "1"},
                             {"v_mean", "0"}};

Defaults join(std::initializer_list<Defaults> parts) {
  Defaults out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

const std::map<std::string, Defaults>& command_defaults() {
  static const std::map<std::string, Defaults> table = {
      {"figure1", join({{{"alpha1", "0.6"}, {"alpha2", "0.9"}}, kEnvPareto,
                        {{"walk", "vsrw"}, {"jumps", "100"}}})},
      {"scaling",
       join({{{"alpha1", "2"}, {"alpha2", "2"}},
             kEnvPareto,
             {{"mesh", "0.00390625"},
              {"consistency", "quenched"},
              {"walk", "vsrw"},
              {"alpha1_minus", "0"},
              {"alpha2_minus", "0"},
              {"T_grid", "256,1024,4096,16384,65536"},
              {"runs", "200"},
              {"environments", "1"},
              {"env_scale_power", "auto"},
              {"max_jumps", "20000000000"},
              {"expect1", ""},
              {"expect2", ""},
              {"tolerance1", "0.05"},
              {"tolerance2", "0.05"}}})},
      {"limit-compare", {{"alpha1", "0.5"},
                         {"alpha2", "1.5"},
                         {"v_mode", "pareto_floor"},
                         {"v_floor", "1"},
                         {"v_mean", "1"},
                         {"mesh", "0.00390625"},
                         {"T", "16384"},
                         {"samples", "1000"},
                         {"t_proxy", "65536"},
                         {"ks_threshold", "0.1"},
                         {"max_jumps", "20000000000"}}},
      {"nonexplosion", {{"alpha_grid", "0.3,0.6,0.9"},
                        {"h_floor", "1"},
                        {"v_floor", "1"},
                        {"walk", "vsrw"},
                        {"probes", "100"},
                        {"jump_cap", "10000000"},
                        {"horizon", "1"}}},
      {"conjecture", join({{{"alpha1", "0.6"}, {"alpha2", "0.6"}},
                           kEnvPareto,
                           {{"T_grid", "64,256,1024,4096"},
                            {"runs", "100"},
                            {"environments", "100"}}})},
      {"overscaling", join({{{"alpha1", "0.6"}, {"alpha2", "0.6"}},
                            kEnvPareto,
                            {{"a1", "1.6"},
                             {"a2", "1.6"},
                             {"T_grid", "1024,65536"},
                             {"runs", "40"},
                             {"environments", "40"},
                             {"max_jumps", "300000000"},
                             {"decay_factor", "0.5"}}})},
      {"oracles", {{"diffineq_cases", "0.3:0.4,0.5:0.5,0:0.9"},
                   {"domination_ck", "4"},
                   {"max_alpha", "0.6"},
                   {"max_seeds", "100"},
                   {"stable_alphas", "0.4,0.5,0.8"},
                   {"stable_draws", "100000"},
                   {"levy_draws", "10000"},
                   {"lt_T", "16384"},
                   {"lt_runs", "10000"},
                   {"clock_alpha", "0.5"},
                   {"clock_T_grid", "1024,4096,16384,65536"},
                   {"clock_runs", "400"},
                   {"clock_path_runs", "100"},
                   {"clock_paths", "400"}}},
      {"dump-env", join({{{"alpha1", "0.6"}, {"alpha2", "0.9"}},
                         kEnvPareto,
                         {{"mesh", "0.00390625"},
                          {"consistency", "quenched"},
                          {"scale", "1"},
                          {"k_min", "-50"},
                          {"k_max", "50"}}})},
  };
  return table;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool known_key(const std::string& key) {
  if (key == "seed") return true;
  for (const auto& [cmd, defaults] : command_defaults())
    for (const auto& [k, v] : defaults)
      if (k == key) return true;
  return false;
}

std::uint64_t parse_seed(const std::string& text, const std::string& key) {
  std::uint64_t v = 0;
  const auto t = trim(text);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw ConfigError("seed must be an unsigned 64-bit integer, got '" + text + "'", key);
  return v;
}

// Resolved settings of one command: defaults, then file, then overrides.
class Settings {
 public:
  Settings(std::string command, const Defaults& defaults) : command_(std::move(command)) {
    for (const auto& [k, v] : defaults) {
      order_.push_back(k);
      values_[k] = v;
    }
  }

  void apply(const std::string& key, const std::string& value) {
    if (!values_.contains(key)) {
      if (known_key(key))
        throw ConfigError("key '" + key + "' does not apply to command " + command_, key);
      throw ConfigError("unknown key '" + key + "'", key);
    }
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.contains(key); }
  const std::string& text(const std::string& key) const { return values_.at(key); }
  bool is_set(const std::string& key) const { return !trim(values_.at(key)).empty(); }

  double number(const std::string& key) const {
    const std::string t = trim(text(key));
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size() || !std::isfinite(v))
      throw ConfigError(key + ": expected a number, got '" + text(key) + "'", key);
    return v;
  }

  double positive(const std::string& key) const {
    const double v = number(key);
    if (!(v > 0.0)) throw ConfigError(key + " must be > 0", key);
    return v;
  }

  std::uint64_t count(const std::string& key) const {
    const double v = number(key);
    if (!(v >= 1.0) || v != std::floor(v) || v > 9.0e18)
      throw ConfigError(key + " must be a positive integer", key);
    return static_cast<std::uint64_t>(v);
  }

  std::int64_t integer(const std::string& key) const {
    const double v = number(key);
    if (v != std::floor(v) || std::abs(v) > 4.0e18)
      throw ConfigError(key + " must be an integer", key);
    return static_cast<std::int64_t>(v);
  }

  std::vector<std::string> items(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(text(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) throw ConfigError(key + ": empty list entry", key);
      out.push_back(item);
    }
    if (out.empty()) throw ConfigError(key + " must not be empty", key);
    return out;
  }

  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : items(key)) {
      double v = 0.0;
      const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
      if (res.ec != std::errc{} || res.ptr != item.data() + item.size() || !std::isfinite(v))
        throw ConfigError(key + ": '" + item + "' is not a number", key);
      out.push_back(v);
    }
    return out;
  }

  Json to_json() const {
    Json j = Json::object();
    for (const auto& k : order_) j[k] = values_.at(k);
    return j;
  }

 private:
  std::string command_;
  std::vector<std::string> order_;
  std::map<std::string, std::string> values_;
};

EnvironmentSpec build_env(const Settings& s, std::uint64_t seed) {
  EnvironmentSpec e;
  e.seed = seed;
  auto has = [&](const char* k) { return s.has(k); };
  if (has("alpha1")) e.alpha1 = s.number("alpha1");
  if (has("alpha2")) e.alpha2 = s.number("alpha2");
  if (has("h_mode")) e.h_mode = parse_h_mode(trim(s.text("h_mode")));
  if (has("v_mode")) e.v_mode = parse_v_mode(trim(s.text("v_mode")));
  if (has("h_floor")) e.h_floor = s.number("h_floor");
  if (has("v_floor")) e.v_floor = s.number("v_floor");
  if (has("v_mean")) e.v_mean = s.number("v_mean");
  if (has("mesh")) e.mesh = s.number("mesh");
  if (has("consistency")) e.consistency = parse_consistency(trim(s.text("consistency")));
  e.validate();
  return e;
}

WalkKind build_walk(const Settings& s, const EnvironmentSpec& env) {
  WalkKind k;
  k.tag = parse_walk_tag(trim(s.text("walk")));
  if (k.tag == WalkTag::xstar) {
    k.alpha1_minus = s.number("alpha1_minus");
    k.alpha2_minus = s.number("alpha2_minus");
  }
  k.validate(env);
  return k;
}

std::vector<double> increasing_grid(const Settings& s, const std::string& key) {
  auto g = s.numbers(key);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(g[i] >= 1.0)) throw ConfigError(key + ": values must be >= 1", key);
    if (i > 0 && !(g[i] > g[i - 1])) throw ConfigError(key + " must be increasing", key);
  }
  return g;
}

struct Check {
  std::string name;
  double value = 0.0;
  std::string relation;
  double threshold = 0.0;
  bool passed = false;
  bool hard = true;
};

Check at_most(std::string name, double value, double threshold, bool hard = true) {
  return {std::move(name), value, "<=", threshold, value <= threshold, hard};
}
Check within(std::string name, double value, double target, double tol, bool hard = true) {
  return {std::move(name), value, "within " + format_double(tol) + " of", target,
          std::abs(value - target) <= tol, hard};
}
Check holds(std::string name, bool ok, bool hard = true) {
  return {std::move(name), ok ? 1.0 : 0.0, "==", 1.0, ok, hard};
}

struct Artifacts {
  Json results = Json::object();
  std::vector<Check> checks;
  std::vector<std::pair<std::string, std::string>> csv;
  std::vector<std::pair<std::string, std::string>> svg;
};

struct Context {
  const Settings& settings;
  std::uint64_t seed;
  unsigned workers;
  std::ostream& log;
};

Json fit_json(const ExponentFit& f) {
  return {{"slope", f.slope},
          {"intercept", f.intercept},
          {"stderr_slope", f.stderr_slope},
          {"r_squared", f.r_squared},
          {"reportable", f.reportable}};
}

Json params_json(const ScalingParams& p) {
  Json j = {{"alpha1", p.alpha1},         {"alpha2", p.alpha2},
            {"eps1", p.eps1},             {"eps2", p.eps2},
            {"eps_product", p.eps_product}, {"supercritical", p.supercritical},
            {"delta", p.delta}};
  if (!p.supercritical) {
    j["gamma1"] = p.gamma1();
    j["gamma2"] = p.gamma2();
  }
  return j;
}

std::string fit_rows_csv(const ExponentFitReport& rep) {
  std::ostringstream out;
  out << "T,env_scale,median_abs1,median_abs2,runs,excluded\n";
  for (const auto& r : rep.rows)
    out << format_double(r.T) << ',' << format_double(r.env_scale) << ','
        << format_double(r.median_abs1) << ',' << format_double(r.median_abs2) << ',' << r.runs
        << ',' << r.excluded << '\n';
  return out.str();
}

std::string fit_runs_csv(const ExponentFitReport& rep) {
  std::ostringstream out;
  out << "T,run,abs1,abs2\n";
  for (const auto& r : rep.rows)
    for (std::size_t i = 0; i < r.abs1.size(); ++i)
      out << format_double(r.T) << ',' << i << ',' << format_double(r.abs1[i]) << ','
          << format_double(r.abs2[i]) << '\n';
  return out.str();
}

Json fit_report_json(const ExponentFitReport& rep) {
  Json rows = Json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"T", r.T},
                    {"env_scale", r.env_scale},
                    {"median_abs1", r.median_abs1},
                    {"median_abs2", r.median_abs2},
                    {"runs", r.runs},
                    {"excluded", r.excluded}});
  return {{"rows", rows},
          {"fit1", fit_json(rep.fit1)},
          {"fit2", fit_json(rep.fit2)},
          {"exclusion_rate", rep.exclusion_rate},
          {"refused", rep.refused},
          {"refusal", rep.refusal}};
}

// ---------------------------------------------------------------------------

std::string render_svg(const Trajectory& traj, const std::string& title) {
  std::int64_t lo1 = 0, hi1 = 0, lo2 = 0, hi2 = 0;
  for (const auto& p : traj.positions) {
    lo1 = std::min(lo1, p.x1);
    hi1 = std::max(hi1, p.x1);
    lo2 = std::min(lo2, p.x2);
    hi2 = std::max(hi2, p.x2);
  }
  lo1 -= 1, hi1 += 1, lo2 -= 1, hi2 += 1;
  const std::int64_t cell = 24, margin = 30, top = 40;
  const std::int64_t width = (hi1 - lo1) * cell + 2 * margin;
  const std::int64_t height = (hi2 - lo2) * cell + margin + top;
  auto px = [&](std::int64_t x1) { return margin + (x1 - lo1) * cell; };
  auto py = [&](std::int64_t x2) { return top + (hi2 - x2) * cell; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << margin << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title
    << "</text>\n";
  s << "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
  for (std::int64_t x = lo1; x <= hi1; ++x)
    s << "<line x1=\"" << px(x) << "\" y1=\"" << py(hi2) << "\" x2=\"" << px(x) << "\" y2=\""
      << py(lo2) << "\"/>\n";
  for (std::int64_t y = lo2; y <= hi2; ++y)
    s << "<line x1=\"" << px(lo1) << "\" y1=\"" << py(y) << "\" x2=\"" << px(hi1) << "\" y2=\""
      << py(y) << "\"/>\n";
  s << "</g>\n";
  s << "<polyline fill=\"none\" stroke=\"#1f4e79\" stroke-width=\"2\" stroke-linejoin=\"round\" "
       "points=\"";
  for (std::size_t i = 0; i < traj.positions.size(); ++i)
    s << (i ? " " : "") << px(traj.positions[i].x1) << ',' << py(traj.positions[i].x2);
  s << "\"/>\n";
  const auto& a = traj.positions.front();
  const auto& b = traj.positions.back();
  s << "<circle cx=\"" << px(a.x1) << "\" cy=\"" << py(a.x2) << "\" r=\"5\" fill=\"#2e7d32\"/>\n";
  s << "<circle cx=\"" << px(b.x1) << "\" cy=\"" << py(b.x2) << "\" r=\"5\" fill=\"#c62828\"/>\n";
  s << "</svg>\n";
  return s.str();
}

Artifacts cmd_figure1(const Context& ctx) {
  const auto& s = ctx.settings;
  const EnvironmentSpec env = build_env(s, ctx.seed);
  const WalkKind kind = build_walk(s, env);
  const std::uint64_t jumps = s.count("jumps");

  const Environment e(env);
  const Trajectory traj =
      simulate(e, kind, {}, StopRule{std::numeric_limits<double>::infinity(), jumps}, 0);

  bool neighbours = true;
  for (std::size_t i = 1; i < traj.positions.size(); ++i) {
    const auto d1 = std::abs(traj.positions[i].x1 - traj.positions[i - 1].x1);
    const auto d2 = std::abs(traj.positions[i].x2 - traj.positions[i - 1].x2);
    neighbours = neighbours && d1 + d2 == 1;
  }
  Artifacts a;
  a.checks.push_back(holds("position_count", traj.positions.size() == jumps + 1));
  a.checks.push_back(holds("jump_time_count", traj.jump_times.size() == jumps));
  a.checks.push_back(holds("nearest_neighbour_steps", neighbours));

  const auto& last = traj.positions.back();
  a.results = {{"walk", std::string(to_string(kind.tag))},
               {"jumps", traj.jump_count()},
               {"positions", traj.positions.size()},
               {"end_time", traj.jump_times.empty() ? 0.0 : traj.jump_times.back()},
               {"final_position", {last.x1, last.x2}}};
  std::ostringstream csv;
  write_trajectory_csv(csv, traj);
  a.csv.emplace_back("figure1.csv", csv.str());
  std::ostringstream title;
  title << to_string(kind.tag) << ", alpha1=" << format_double(env.alpha1)
        << ", alpha2=" << format_double(env.alpha2) << ", " << traj.jump_count() << " jumps";
  a.svg.emplace_back("figure1.svg", render_svg(traj, title.str()));
  return a;
}

Artifacts cmd_scaling(const Context& ctx) {
  const auto& s = ctx.settings;
  ExponentFitRequest req;
  req.env = build_env(s, ctx.seed);
  req.kind = build_walk(s, req.env);
  req.T_grid = increasing_grid(s, "T_grid");
  req.runs = s.count("runs");
  req.environments = s.count("environments");
  req.max_jumps = s.count("max_jumps");
  const ScalingParams p = scaling_params(req.env.alpha1, req.env.alpha2);
  if (trim(s.text("env_scale_power")) == "auto") {
    const bool csrw_stable =
        req.kind.tag == WalkTag::csrw && req.env.h_mode == HMode::stable_increments;
    req.env_scale_power = csrw_stable ? 1.0 / p.delta : 1.0;
  } else {
    req.env_scale_power = s.positive("env_scale_power");
  }
  std::optional<double> expect1, expect2;
  if (s.is_set("expect1")) expect1 = s.number("expect1");
  if (s.is_set("expect2")) expect2 = s.number("expect2");
  const double tol1 = s.positive("tolerance1"), tol2 = s.positive("tolerance2");

  const ExponentFitReport rep = exponent_fit(req, ctx.workers);
  Artifacts a;
  a.results = fit_report_json(rep);
  a.results["env_scale_power"] = req.env_scale_power;
  a.results["params"] = params_json(p);
  a.checks.push_back(holds("fit_not_refused", !rep.refused));
  a.checks.push_back(holds("fit_reportable", rep.fit1.reportable && rep.fit2.reportable));
  if (expect1 && !rep.refused) a.checks.push_back(within("slope1", rep.fit1.slope, *expect1, tol1));
  if (expect2 && !rep.refused) a.checks.push_back(within("slope2", rep.fit2.slope, *expect2, tol2));
  a.csv.emplace_back("scaling.csv", fit_rows_csv(rep));
  a.csv.emplace_back("scaling_runs.csv", fit_runs_csv(rep));
  return a;
}

Artifacts cmd_limit_compare(const Context& ctx) {
  const auto& s = ctx.settings;
  EnvironmentSpec env = build_env(s, ctx.seed);
  env.h_mode = HMode::stable_increments;
  env.validate();
  const double T = s.positive("T");
  const std::size_t samples = s.count("samples");
  KSOptions opts;
  opts.t_proxy = s.positive("t_proxy");
  const double threshold = s.positive("ks_threshold");
  const std::uint64_t max_jumps = s.count("max_jumps");
  if (!is_admissible(T, env.mesh))
    throw ConfigError("T is not admissible for the mesh (sqrt(T) * mesh must divide 1)", "T");
  if (!is_admissible(opts.t_proxy, env.mesh))
    throw ConfigError("t_proxy is not admissible for the mesh", "t_proxy");
  const ScalingParams p = scaling_params(env.alpha1, env.alpha2);

  EnsembleSpec es;
  es.env = env;
  es.env_scale = T;
  es.kind = WalkKind::vsrw();
  es.checkpoints = {T};
  es.weights = {LineWeight::h()};
  es.runs = samples;
  es.max_jumps = max_jumps;
  const auto records = run_ensemble(es, ctx.workers);
  ctx.log << "walk ensemble done (" << samples << " runs at T=" << format_double(T) << ")\n";

  std::vector<double> w1, w2, wc;
  std::size_t truncated = 0;
  for (const auto& r : records) {
    if (r.truncated || r.records.empty()) {
      ++truncated;
      continue;
    }
    const auto& rec = r.records.back();
    w1.push_back(std::pow(T, -p.delta / 2.0) * static_cast<double>(rec.position.x1));
    w2.push_back(std::pow(T, -0.5) * static_cast<double>(rec.position.x2));
    wc.push_back(std::pow(T, -p.delta) * rec.integrals[0]);
  }

  const Environment e(env, T);
  const SubordinatorPath& shared = *e.h.subordinator();
  const std::vector<double> grid{0.0, 1.0};
  struct Limit {
    double first, second, clock;
  };
  const auto limit = parallel_map<Limit>(
      samples, ctx.workers,
      [&] { return SubordinatorPath(shared.alpha(), shared.mesh(), shared.key()); },
      [&](SubordinatorPath& path, std::size_t i) {
        const auto pair = limit_pair(path, opts, grid, derive_key(ctx.seed, tag(Domain::oracle), 10, i));
        return Limit{pair.first[1], pair.second[1], pair.clock[1]};
      });
  std::vector<double> l1, l2, lc;
  for (const auto& l : limit) {
    l1.push_back(l.first);
    l2.push_back(l.second);
    lc.push_back(l.clock);
  }

  Artifacts a;
  const double excl = static_cast<double>(truncated) / static_cast<double>(samples);
  a.checks.push_back(at_most("truncation_rate", excl, 0.1));
  Json ks = Json::object();
  if (!w1.empty()) {
    const KSResult k1 = ks_two_sample(w1, l1), k2 = ks_two_sample(w2, l2), kc = ks_two_sample(wc, lc);
    ks = {{"x1", k1.statistic}, {"x2", k2.statistic}, {"clock", kc.statistic},
          {"critical_1pct", k1.critical}};
    a.checks.push_back(at_most("ks_x1", k1.statistic, threshold));
    a.checks.push_back(at_most("ks_x2", k2.statistic, threshold));
    a.checks.push_back(at_most("ks_clock", kc.statistic, threshold));
  }
  a.results = {{"params", params_json(p)},
               {"T", T},
               {"t_proxy", opts.t_proxy},
               {"samples", samples},
               {"truncated", truncated},
               {"ks", ks},
               {"medians",
                {{"walk_x1_abs", w1.empty() ? 0.0 : median([&] { auto v = w1; for (auto& x : v) x = std::abs(x); return v; }())},
                 {"limit_x1_abs", median([&] { auto v = l1; for (auto& x : v) x = std::abs(x); return v; }())},
                 {"walk_clock", wc.empty() ? 0.0 : median(wc)},
                 {"limit_clock", median(lc)}}}};
  std::ostringstream csv;
  csv << "sample,walk_x1,walk_x2,walk_clock,limit_x1,limit_x2,limit_clock\n";
  for (std::size_t i = 0; i < samples; ++i) {
    csv << i << ',';
    if (i < w1.size())
      csv << format_double(w1[i]) << ',' << format_double(w2[i]) << ',' << format_double(wc[i]);
    else
      csv << ",,";
    csv << ',' << format_double(l1[i]) << ',' << format_double(l2[i]) << ','
        << format_double(lc[i]) << '\n';
  }
  a.csv.emplace_back("limit_compare.csv", csv.str());
  return a;
}

Artifacts cmd_nonexplosion(const Context& ctx) {
  const auto& s = ctx.settings;
  const auto grid = s.numbers("alpha_grid");
  for (double g : grid)
    if (!(g > 0.0)) throw ConfigError("alpha_grid values must be > 0", "alpha_grid");
  const std::size_t probes = s.count("probes");
  const std::uint64_t cap = s.count("jump_cap");
  const double horizon = s.positive("horizon");
  EnvironmentSpec base;
  base.h_mode = HMode::pareto_floor;
  base.v_mode = VMode::pareto_floor;
  base.h_floor = s.number("h_floor");
  base.v_floor = s.number("v_floor");
  base.alpha1 = grid.front();
  base.alpha2 = grid.front();
  base.validate();
  const WalkKind kind = build_walk(s, base);
  if (kind.tag == WalkTag::xstar)
    throw ConfigError("nonexplosion supports vsrw, csrw and y walks", "walk");

  Artifacts a;
  Json cells = Json::array();
  std::ostringstream csv;
  csv << "alpha1,alpha2,eps_product,supercritical,probes,truncated,truncation_rate\n";
  std::size_t cell = 0;
  for (double a1 : grid) {
    for (double a2 : grid) {
      EnvironmentSpec spec = base;
      spec.alpha1 = a1;
      spec.alpha2 = a2;
      spec.seed = derive_key(ctx.seed, tag(Domain::ensemble), cell);
      const ScalingParams p = scaling_params(a1, a2);
      struct NoState {};
      const auto results = parallel_map<int>(
          probes, ctx.workers, [] { return NoState{}; },
          [&](NoState&, std::size_t j) {
            const Environment e(spec.with_seed(ensemble_env_seed(spec.seed, j, probes)));
            return explosion_probe(e, kind, horizon, cap, 0) == ProbeResult::truncated ? 1 : 0;
          });
      std::size_t truncated = 0;
      for (int r : results) truncated += static_cast<std::size_t>(r);
      const double rate = static_cast<double>(truncated) / static_cast<double>(probes);
      cells.push_back({{"alpha1", a1},
                       {"alpha2", a2},
                       {"eps_product", p.eps_product},
                       {"supercritical", p.supercritical},
                       {"probes", probes},
                       {"truncated", truncated},
                       {"truncation_rate", rate}});
      csv << format_double(a1) << ',' << format_double(a2) << ',' << format_double(p.eps_product)
          << ',' << (p.supercritical ? 1 : 0) << ',' << probes << ',' << truncated << ','
          << format_double(rate) << '\n';
      if (!p.supercritical)
        a.checks.push_back(at_most("truncated(" + format_double(a1) + "," + format_double(a2) + ")",
                                   static_cast<double>(truncated), 0.0));
      ctx.log << "cell (" << format_double(a1) << ", " << format_double(a2) << "): " << truncated
              << "/" << probes << " truncated\n";
      ++cell;
    }
  }
  a.results = {{"walk", std::string(to_string(kind.tag))},
               {"horizon", horizon},
               {"jump_cap", cap},
               {"cells", cells}};
  a.csv.emplace_back("nonexplosion.csv", csv.str());
  return a;
}

Artifacts cmd_conjecture(const Context& ctx) {
  const auto& s = ctx.settings;
  const EnvironmentSpec env = build_env(s, ctx.seed);
  const auto T_grid = increasing_grid(s, "T_grid");
  const ConjectureReport rep = conjecture_explorer(env, T_grid, s.count("runs"),
                                                   s.count("environments"), ctx.workers);
  Artifacts a;
  a.results = {{"params", params_json(rep.params)},
               {"regime", rep.regime},
               {"target1", rep.target1},
               {"target2", rep.target2},
               {"fit", fit_report_json(rep.fit)}};
  a.csv.emplace_back("conjecture.csv", fit_rows_csv(rep.fit));
  a.csv.emplace_back("conjecture_runs.csv", fit_runs_csv(rep.fit));
  return a;
}

Artifacts cmd_overscaling(const Context& ctx) {
  const auto& s = ctx.settings;
  const EnvironmentSpec env = build_env(s, ctx.seed);
  const auto T_grid = increasing_grid(s, "T_grid");
  const double a1 = s.positive("a1"), a2 = s.positive("a2");
  const double factor = s.positive("decay_factor");
  const OverscalingReport rep =
      overscaling_study(env, a1, a2, T_grid, s.count("runs"), s.count("environments"),
                        ctx.workers, s.count("max_jumps"));
  Artifacts a;
  Json rows = Json::array();
  std::ostringstream csv;
  csv << "T,median_stat1,median_stat1_upper,median_stat2,median_stat2_upper,runs,truncated\n";
  for (const auto& r : rep.rows) {
    rows.push_back({{"T", r.T},
                    {"median_stat1", r.median_stat1},
                    {"median_stat1_upper", r.median_stat1_upper},
                    {"median_stat2", r.median_stat2},
                    {"median_stat2_upper", r.median_stat2_upper},
                    {"runs", r.runs},
                    {"truncated", r.truncated}});
    csv << format_double(r.T) << ',' << format_double(r.median_stat1) << ','
        << format_double(r.median_stat1_upper) << ',' << format_double(r.median_stat2) << ','
        << format_double(r.median_stat2_upper) << ',' << r.runs << ',' << r.truncated << '\n';
  }
  a.results = {{"a1", a1},
               {"a2", a2},
               {"threshold1", rep.threshold1},
               {"threshold2", rep.threshold2},
               {"warnings", rep.warnings},
               {"rows", rows}};
  for (const auto& w : rep.warnings) ctx.log << "warning: " << w << '\n';
  if (rep.rows.size() >= 2) {
    const auto& first = rep.rows.front();
    const auto& last = rep.rows.back();
    a.checks.push_back(at_most("decay1", last.median_stat1_upper / first.median_stat1, factor));
    a.checks.push_back(at_most("decay2", last.median_stat2_upper / first.median_stat2, factor));
  }
  a.csv.emplace_back("overscaling.csv", csv.str());
  return a;
}

Artifacts cmd_oracles(const Context& ctx) {
  const auto& s = ctx.settings;
  std::vector<std::pair<double, double>> cases;
  for (const auto& item : s.items("diffineq_cases")) {
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw ConfigError("diffineq_cases entries look like eps1:eps2", "diffineq_cases");
    double e1 = 0.0, e2 = 0.0;
    const std::string l = item.substr(0, colon), r = item.substr(colon + 1);
    const auto p1 = std::from_chars(l.data(), l.data() + l.size(), e1);
    const auto p2 = std::from_chars(r.data(), r.data() + r.size(), e2);
    if (p1.ec != std::errc{} || p2.ec != std::errc{} || p1.ptr != l.data() + l.size() ||
        p2.ptr != r.data() + r.size() || !(e1 >= 0.0) || !(e2 >= 0.0) || !(e1 * e2 < 1.0))
      throw ConfigError("bad diffineq case '" + item + "'", "diffineq_cases");
    cases.emplace_back(e1, e2);
  }
  const double dom_ck = s.positive("domination_ck");
  const double max_alpha = s.positive("max_alpha");
  const std::size_t max_seeds = s.count("max_seeds");
  const auto stable_alphas = s.numbers("stable_alphas");
  for (double al : stable_alphas)
    if (!(al > 0.0 && al < 1.0)) throw ConfigError("stable_alphas must lie in (0,1)", "stable_alphas");
  const std::size_t stable_draws = s.count("stable_draws");
  const std::size_t levy_draws = s.count("levy_draws");
  const double lt_T = s.positive("lt_T");
  const std::size_t lt_runs = s.count("lt_runs");
  const double clock_alpha = s.positive("clock_alpha");
  if (!(clock_alpha < 1.0)) throw ConfigError("clock_alpha must lie in (0,1)", "clock_alpha");
  const auto clock_T = increasing_grid(s, "clock_T_grid");
  const std::size_t clock_runs = s.count("clock_runs");
  const std::size_t clock_paths = s.count("clock_paths");
  const std::size_t clock_path_runs = s.count("clock_path_runs");

  Artifacts a;
  std::ostringstream csv;
  csv << "oracle,label,value\n";
  auto row = [&](const std::string& oracle, const std::string& label, double v) {
    csv << oracle << ',' << label << ',' << format_double(v) << '\n';
  };

  // Differential system: exact solution at C kappa = 1, domination elsewhere.
  std::vector<double> t_grid;
  for (int i = 0; i <= 20; ++i) t_grid.push_back(0.1 * i);
  Json diff = Json::array();
  for (const auto& [e1, e2] : cases) {
    const std::string label = format_double(e1) + ":" + format_double(e2);
    a.checks.push_back(holds("a_identities(" + label + ")", a_identities_exact(e1, e2)));
    for (DiffSystem sys : {DiffSystem::first, DiffSystem::second}) {
      if (sys == DiffSystem::second && e2 == 0.0) continue;
      const char* sys_name = sys == DiffSystem::first ? "first" : "second";
      const DiffIneqCase exact{1.0, 1.0, e1, e2};
      const auto num = diffineq_integrate(exact, sys, t_grid);
      double gap = 0.0;
      for (std::size_t i = 0; i < t_grid.size(); ++i) {
        const XY cf = diffineq_closed_form(exact, t_grid[i], sys);
        gap = std::max({gap, std::abs(num.values[i].x - cf.x) / cf.x,
                        std::abs(num.values[i].y - cf.y) / cf.y});
      }
      a.checks.push_back(at_most(std::string("closed_form_match(") + label + "," + sys_name + ")",
                                 gap, 1e-6));
      const DiffIneqCase wide{dom_ck, 1.0, e1, e2};
      const auto dom = check_domination(wide, sys, diffineq_integrate(wide, sys, t_grid));
      a.checks.push_back(holds(std::string("domination(") + label + "," + sys_name + ")",
                               dom.dominates, false));
      diff.push_back({{"eps_plus", {e1, e2}},
                      {"system", sys_name},
                      {"match_gap", gap},
                      {"richardson_gap", num.richardson_gap},
                      {"domination_ck", dom_ck},
                      {"dominates", dom.dominates},
                      {"worst_excess_x", dom.worst_excess_x},
                      {"worst_excess_y", dom.worst_excess_y},
                      {"first_violation_t", dom.first_violation_t}});
      row("diffineq", label + "/" + sys_name + "/match_gap", gap);
    }
  }
  ctx.log << "differential system done\n";

  // Maxima of heavy-tailed variables.
  std::vector<double> k_grid;
  for (int e = 4; e <= 16; e += 2) k_grid.push_back(std::ldexp(1.0, e));
  const auto mx = max_bound_check(max_alpha, 0.5 * max_alpha, k_grid, max_seeds, ctx.seed);
  const auto bounded = max_bound_check(max_alpha, 0.5 * max_alpha, k_grid, 4, ctx.seed, true);
  a.checks.push_back(within("max_slope", mx.slope, 1.0 / max_alpha, 0.2, false));
  a.checks.push_back(at_most("max_bound_violations", mx.total_violations, 0.0, false));
  a.checks.push_back(within("max_slope_bounded", bounded.slope, 0.0, 1e-9, false));
  row("max_bound", "slope", mx.slope);
  ctx.log << "maxima done\n";

  // Stable sampler.
  const auto laplace = stable_laplace_check(stable_alphas, {0.5, 1.0, 2.0}, stable_draws, ctx.seed);
  Json lap = Json::array();
  for (const auto& r : laplace) {
    const double z = std::abs(r.estimate - r.exact) / r.standard_error;
    a.checks.push_back(at_most("laplace(" + format_double(r.alpha) + "," + format_double(r.lambda) + ")",
                               z, 3.0, false));
    lap.push_back({{"alpha", r.alpha},
                   {"lambda", r.lambda},
                   {"estimate", r.estimate},
                   {"exact", r.exact},
                   {"standard_error", r.standard_error}});
    row("laplace", format_double(r.alpha) + "/" + format_double(r.lambda), r.estimate);
  }
  const double levy = levy_cdf_ks(levy_draws, ctx.seed);
  a.checks.push_back(at_most("levy_cdf_ks", levy, 0.02, false));
  ctx.log << "stable sampler done\n";

  // Local-time moments.
  const std::vector<double> lt_grid{0.25, 0.5, 1.0, 2.0};
  const auto m4 = lt_moment_check(lt_T, lt_grid, lt_runs, 4, ctx.seed, ctx.workers);
  const auto m2 = lt_moment_check(lt_T, lt_grid, lt_runs, 2, ctx.seed, ctx.workers);
  a.checks.push_back(at_most("lt_moment4_slope", m4.slope, 2.2, false));
  a.checks.push_back(at_most("lt_moment2_slope", m2.slope, 1.1, false));
  a.checks.push_back(holds("lt_moments_increase",
                           std::is_sorted(m4.moments.begin(), m4.moments.end()) &&
                               std::is_sorted(m2.moments.begin(), m2.moments.end()),
                           false));
  row("lt_moment", "slope4", m4.slope);
  row("lt_moment", "slope2", m2.slope);
  ctx.log << "local-time moments done\n";

  // Finite-T clock.
  const auto cm = dclock_second_moment(clock_alpha, clock_T, clock_runs, 1.0, ctx.seed, ctx.workers);
  a.checks.push_back(at_most("dclock_spread", cm.spread, 3.0, false));
  Json cm_rows = Json::array();
  for (const auto& r : cm.rows) {
    cm_rows.push_back({{"T", r.T}, {"second_moment", r.second_moment}, {"standard_error", r.standard_error}});
    row("dclock", format_double(r.T), r.second_moment);
  }
  const double delta = 0.5 * (1.0 + 1.0 / clock_alpha);
  const auto cs = dclock_t_scaling(clock_alpha, clock_T.front(), {0.25, 0.5, 1.0, 2.0},
                                   clock_path_runs, clock_paths, ctx.seed, ctx.workers);
  a.checks.push_back(within("dclock_t_slope", cs.slope, 2.0 * delta, 0.2, false));
  row("dclock", "t_slope", cs.slope);
  row("dclock", "median_path_t_slope", cs.median_slope);
  ctx.log << "clock moments done\n";

  a.results = {{"diffineq", diff},
               {"max_bound",
                {{"alpha", max_alpha},
                 {"alpha_minus", 0.5 * max_alpha},
                 {"k_grid", mx.k_grid},
                 {"median_max", mx.median_max},
                 {"slope", mx.slope},
                 {"total_violations", mx.total_violations},
                 {"bounded_slope", bounded.slope}}},
               {"laplace", lap},
               {"levy_cdf_ks", levy},
               {"lt_moments",
                {{"T", lt_T},
                 {"t_grid", lt_grid},
                 {"moment4", m4.moments},
                 {"moment4_se", m4.standard_errors},
                 {"slope4", m4.slope},
                 {"moment2", m2.moments},
                 {"slope2", m2.slope}}},
               {"dclock",
                {{"alpha", clock_alpha},
                 {"rows", cm_rows},
                 {"spread", cm.spread},
                 {"t_slopes", cs.path_slopes},
                 {"t_slope", cs.slope},
                 {"median_path_t_slope", cs.median_slope},
                 {"target_t_slope", 2.0 * delta}}}};
  a.csv.emplace_back("oracles.csv", csv.str());
  return a;
}

Artifacts cmd_dump_env(const Context& ctx) {
  const auto& s = ctx.settings;
  const EnvironmentSpec env = build_env(s, ctx.seed);
  const double scale = s.positive("scale");
  const std::int64_t k_min = s.integer("k_min"), k_max = s.integer("k_max");
  if (k_max < k_min) throw ConfigError("k_max must be >= k_min", "k_max");
  if (k_max - k_min > 10'000'000) throw ConfigError("window too large", "k_max");
  if (env.h_mode == HMode::stable_increments && !is_admissible(scale, env.mesh))
    throw ConfigError("scale is not admissible for the mesh", "scale");
  const Environment e(env, scale);
  std::ostringstream csv;
  write_environment_csv(csv, e, k_min, k_max);
  Artifacts a;
  a.results = {{"k_min", k_min}, {"k_max", k_max}, {"scale", scale}};
  a.csv.emplace_back("environment.csv", csv.str());
  return a;
}

using Command = std::function<Artifacts(const Context&)>;

const std::map<std::string, Command>& commands() {
  static const std::map<std::string, Command> table = {
      {"figure1", cmd_figure1},         {"scaling", cmd_scaling},
      {"limit-compare", cmd_limit_compare}, {"nonexplosion", cmd_nonexplosion},
      {"conjecture", cmd_conjecture},   {"overscaling", cmd_overscaling},
      {"oracles", cmd_oracles},         {"dump-env", cmd_dump_env},
  };
  return table;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string file_stem(const std::string& command) {
  std::string s = command;
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"figure1",      "scaling",    "limit-compare",
                                                 "nonexplosion", "conjecture", "oracles",
                                                 "overscaling",  "dump-env"};
  return names;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(number) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(number) + ": empty key");
    if (!known_key(key)) throw ConfigError("unknown key '" + key + "'", key);
    if (out.contains(key)) throw ConfigError("key '" + key + "' given twice", key);
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

int run(const Options& opts, std::ostream& log, std::ostream& err) {
  const auto it = commands().find(opts.command);
  if (it == commands().end()) {
    err << "error: unknown command '" << opts.command << "'\n";
    return exit_usage;
  }
  const std::string stem = file_stem(opts.command);
  Json report;
  Artifacts art;
  try {
    Settings settings(opts.command, command_defaults().at(opts.command));
    std::uint64_t seed = kDefaultSeed;
    if (opts.config_path) {
      for (const auto& [k, v] : parse_config_text(read_file(*opts.config_path))) {
        if (k == "seed") seed = parse_seed(v, "seed");
        else settings.apply(k, v);
      }
    }
    for (const auto& o : opts.overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
      const std::string key = trim(o.substr(0, eq));
      if (key == "seed") seed = parse_seed(o.substr(eq + 1), "seed");
      else settings.apply(key, trim(o.substr(eq + 1)));
    }
    if (opts.seed_env) seed = parse_seed(*opts.seed_env, "LINEWALK_SEED");
    if (opts.seed) seed = *opts.seed;

    const Context ctx{settings, seed, resolve_workers(opts.workers), log};
    art = it->second(ctx);
    report = {{"command", opts.command},
              {"seed", seed},
              {"config", settings.to_json()},
              {"results", art.results}};
  } catch (const ConfigError& e) {
    err << "usage error";
    if (!e.key().empty()) err << " [" << e.key() << "]";
    err << ": " << e.what() << '\n';
    return exit_usage;
  } catch (const DomainError& e) {
    err << "usage error: " << e.what() << '\n';
    return exit_usage;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return exit_io;
  }

  bool passed = true;
  Json checks = Json::array();
  for (const auto& c : art.checks) {
    if (c.hard && !c.passed) passed = false;
    checks.push_back({{"name", c.name},
                      {"value", c.value},
                      {"relation", c.relation},
                      {"threshold", c.threshold},
                      {"passed", c.passed},
                      {"hard", c.hard}});
    log << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << format_double(c.value) << ' '
        << c.relation << ' ' << format_double(c.threshold) << (c.hard ? "" : " (advisory)") << '\n';
  }
  report["checks"] = checks;
  report["passed"] = passed;

  auto wanted = [&](const std::string& f) { return opts.formats.empty() || opts.formats.contains(f); };
  try {
    if (wanted("json")) write_text_file(opts.out_dir / (stem + ".json"), report.dump(2) + "\n");
    if (wanted("csv"))
      for (const auto& [name, content] : art.csv) write_text_file(opts.out_dir / name, content);
    if (wanted("svg"))
      for (const auto& [name, content] : art.svg) write_text_file(opts.out_dir / name, content);
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return exit_io;
  }
  log << (passed ? "all hard checks passed" : "hard check failure") << '\n';
  return passed ? exit_ok : exit_check_failed;
}

}  // namespace linewalk::app
