// cflab: command-line driver for the tower, certificates and experiments.
//
//   cflab <command> [--config FILE] [--key value ...]
//
// Every option is also a config key; command-line values win over the config
// file, and CFLAB_SEED wins over a seed taken from the config file. A config
// file must name r, seed and out_dir; without one, r = 2,3,4 and seed = 1.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cfsim/io.hpp"
#include "cfsim/lab.hpp"

using namespace cfsim;

namespace {

enum ExitCode { kOk = 0, kCheckFailed = 1, kUsage = 2, kRuntime = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Settings {
  Config cfg;

  std::string str(const std::string& k, const std::string& fallback) const { return cfg.get_or(k, fallback); }
  std::uint64_t u64(const std::string& k, std::uint64_t fallback) const {
    auto v = cfg.get(k);
    return v ? parse_u64(*v) : fallback;
  }
  bool flag(const std::string& k) const {
    const std::string v = cfg.get_or(k, "false");
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw UsageError("key '" + k + "' expects true/false, got '" + v + "'");
  }
  Exec exec() const {
    const std::string v = cfg.get_or("exec", "parallel");
    if (v == "parallel") return Exec::parallel;
    if (v == "serial") return Exec::serial;
    throw UsageError("exec must be serial or parallel");
  }
};

// Tower from `tower = file` (replay) or from r/depth/seed.
LoadedTower load_tower(const Settings& s) {
  if (auto path = s.cfg.get("tower")) {
    LoadedTower t = tower_from_json(read_file(*path));
    if (static_cast<int>(t.maps.size()) != t.params.depth())
      throw UsageError("tower file must carry spacer maps for every level");
    return t;
  }
  std::vector<std::int64_t> r = parse_int_list(*s.cfg.get("r"));
  if (auto d = s.cfg.get("depth")) {
    const std::uint64_t depth = parse_u64(*d);
    if (depth == 0 || depth > r.size()) throw UsageError("depth must be between 1 and the length of r");
    r.resize(depth);
  }
  LoadedTower t;
  t.params = build_params(r);
  t.maps = make_context(t.params, s.u64("seed", 1)).maps();
  return t;
}

std::vector<Rational> rational_list(const std::string& text) {
  std::vector<Rational> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(' '), e = item.find_last_not_of(' ');
    if (b == std::string::npos) throw UsageError("empty entry in list: " + text);
    out.push_back(parse_rational(item.substr(b, e - b + 1)));
  }
  return out;
}

void stamp(ExperimentReport& rep, const Settings& s, const TowerParams& p) {
  rep.seed = s.u64("seed", rep.seed);
  bool has_r = false;
  for (auto& [k, v] : rep.params) has_r = has_r || k == "r";
  if (!has_r) rep.params.insert(rep.params.begin(), {"r", format_params(p)});
}

// ------------------------------------------------------------------ commands

std::vector<ExperimentReport> cmd_build(const Settings& s, std::vector<std::pair<std::string, std::string>>& extra) {
  LoadedTower t = load_tower(s);
  ExperimentReport rep = build_report(t.params, t.maps);
  stamp(rep, s, t.params);
  extra.push_back({"tower.json", tower_to_json(t.params, t.maps)});
  return {rep};
}

std::vector<ExperimentReport> cmd_sample(const Settings& s, std::vector<std::pair<std::string, std::string>>&) {
  LoadedTower t = load_tower(s);
  MeasureContext ctx(t.params, t.maps);
  const int level = static_cast<int>(s.u64("level", 0));
  if (level > ctx.depth()) throw UsageError("level beyond depth");
  const std::size_t count = s.u64("samples", 10);
  const bool conditioned = s.flag("conditioned");
  ExperimentReport rep;
  rep.experiment = "sample";
  rep.params = {{"level", std::to_string(level)}, {"samples", std::to_string(count)},
                {"conditioned", conditioned ? "true" : "false"}};
  rep.columns = {"index", "point"};
  for (std::size_t k = 0; k < count; ++k) {
    Rng rng = Rng::stream(s.u64("seed", 1), k, 0x5a3);
    PointExpansion x = sample_point(ctx, level, rng, conditioned);
    std::string js = point_to_json(x);
    js.pop_back();
    rep.rows.push_back({Cell::of(k), Cell::of(js)});
  }
  stamp(rep, s, t.params);
  return {rep};
}

std::vector<ExperimentReport> cmd_certify(const Settings& s, std::vector<std::pair<std::string, std::string>>&) {
  LoadedTower t = load_tower(s);
  CertifyOptions opt;
  opt.level = static_cast<int>(s.u64("level", 1));
  opt.seed = s.u64("seed", 1);
  opt.exhaustive = s.flag("exhaustive");
  opt.pair_budget = s.u64("pair_budget", opt.pair_budget);
  opt.sample_budget = s.u64("sample_budget", opt.sample_budget);
  ExperimentReport rep = certify_level(t.params, opt, s.exec());
  stamp(rep, s, t.params);
  return {rep};
}

std::vector<Cylinder> default_cells() {
  return {{0, BoxSet::single(0, 0, 1, 0)}, {0, BoxSet::single(1, -1, 0, 0)}, {0, BoxSet::single(0, -1, 1, 1)},
          {0, BoxSet::single(1, 0, 1, 1)}};
}

std::vector<ExperimentReport> cmd_mix(const Settings& s, std::vector<std::pair<std::string, std::string>>&) {
  LoadedTower t = load_tower(s);
  MeasureContext ctx(t.params, t.maps);
  std::vector<std::int64_t> g = s.cfg.has("g") ? parse_int_list(*s.cfg.get("g")) : designated_mixing_sequence(ctx);
  const int N = ctx.depth();
  std::vector<CylinderPair> pairs{{{N, t.params.F(N).to_boxset()}, {N, t.params.F(N).to_boxset()}, "full/full"}};
  const auto cells = default_cells();
  for (std::size_t u = 0; u < cells.size(); ++u)
    for (std::size_t v = u; v < cells.size(); ++v)
      pairs.push_back({cells[u], cells[v], "c" + std::to_string(u) + "/c" + std::to_string(v)});
  ExperimentReport rep = mixing_scan(ctx, g, pairs, s.exec());
  stamp(rep, s, t.params);
  return {rep};
}

std::vector<ExperimentReport> cmd_joinings(const Settings& s, std::vector<std::pair<std::string, std::string>>&) {
  LoadedTower t = load_tower(s);
  MeasureContext ctx(t.params, t.maps);
  const std::uint64_t seed = s.u64("seed", 1);
  const int level = static_cast<int>(s.u64("level", static_cast<std::uint64_t>(ctx.depth())));
  if (level > ctx.depth()) throw UsageError("level beyond depth");
  Rng rng = Rng::stream(seed, 0x701);
  const PointExpansion x = sample_point(ctx, 0, rng, true);
  JoiningSetup setup;
  if (auto k = s.cfg.get("k")) {
    const auto parts = rational_list(*k);
    if (parts.size() != 3) throw UsageError("k expects x, a, eps");
    const GroupElement kk(to_int64(floor_of(parts[0])), parts[1], parts[2] == 0 ? 0 : 1);
    setup = {x, act(ctx, kk, x), kk};
  } else {
    setup = paired_points(ctx, x, level, rng);
  }
  std::vector<AveragingWindow> windows;
  for (int n = 1; n < ctx.depth(); ++n) windows.push_back(averaging_window(t.params, n));
  const auto cells = default_cells();
  ExperimentReport rep = joining_average(ctx, setup, windows, cells, s.exec());
  rep.params.push_back({"pair_level", std::to_string(level)});
  stamp(rep, s, t.params);
  return {rep};
}

std::vector<ExperimentReport> cmd_factor(const Settings& s, std::vector<std::pair<std::string, std::string>>&) {
  LoadedTower t = load_tower(s);
  MeasureContext ctx(t.params, t.maps);
  const auto bs = rational_list(s.str("b", "1/2,1,3/7"));
  ExperimentReport rep = factor_check(ctx, bs, s.u64("samples", 1000), s.u64("seed", 1), s.exec());
  stamp(rep, s, t.params);
  return {rep};
}

std::vector<ExperimentReport> cmd_techlem(const Settings& s, std::vector<std::pair<std::string, std::string>>&) {
  const std::string mode = s.str("mode", "exact");
  if (mode != "exact" && mode != "montecarlo") throw UsageError("mode must be exact or montecarlo");
  const std::size_t trials = s.u64("trials", 20), budget = s.u64("budget", 2000);
  const std::uint64_t seed = s.u64("seed", 1);
  ExperimentReport rep;
  rep.experiment = "techlem";
  rep.params = {{"mode", mode}, {"trials", std::to_string(trials)}, {"budget", std::to_string(budget)}};
  rep.columns = {"trial", "mode", "lhs", "rhs", "lhs_halfwidth", "rhs_halfwidth"};
  bool agree = true;
  for (std::size_t k = 0; k < trials; ++k) {
    Rng rng = Rng::stream(seed, k, 0x7ec);
    const BoxSet a = random_small_boxset(rng, 3, 3, 4), b = random_small_boxset(rng, 3, 3, 4),
                 sset = random_small_boxset(rng, 3, 3, 4);
    const TechlemResult r = techlem_check(a, b, sset, mode == "exact" ? TechlemMode::exact : TechlemMode::montecarlo,
                                          budget, seed + k);
    if (r.mode == TechlemMode::exact) agree = agree && r.lhs == r.rhs;
    if (!r.notice.empty()) rep.notices.push_back("trial " + std::to_string(k) + ": " + r.notice);
    rep.rows.push_back({Cell::of(k), Cell::of(r.mode == TechlemMode::exact ? "exact" : "montecarlo"), Cell::of(r.lhs),
                        Cell::of(r.rhs), Cell::of(to_decimal_string(Rational(r.lhs_halfwidth), 12)),
                        Cell::of(to_decimal_string(Rational(r.rhs_halfwidth), 12))});
  }
  if (mode == "exact") rep.add_check("exact_sides_equal", agree);
  rep.seed = seed;
  return {rep};
}

std::vector<ExperimentReport> cmd_report(const Settings& s, std::vector<std::pair<std::string, std::string>>&) {
  LoadedTower t = load_tower(s);
  MeasureContext ctx(t.params, t.maps);
  const std::uint64_t seed = s.u64("seed", 1);
  const std::size_t samples = s.u64("samples", 100);
  std::vector<ExperimentReport> out;

  ExperimentReport win;
  win.experiment = "windows";
  win.columns = {"n", "next_phi_size", "sumset", "bound", "shulman", "arith_lhs", "arith_rhs", "arithmetic"};
  std::vector<AveragingWindow> ws;
  for (int n = 1; n < ctx.depth(); ++n) ws.push_back(averaging_window(t.params, n));
  for (const auto& c : check_windows(t.params, ws)) {
    win.rows.push_back({Cell::of(c.n), Cell::of(ws[static_cast<std::size_t>(c.n)].phi.size()), Cell::of(c.sumset),
                        Cell::of(c.bound), Cell::of(c.shulman), Cell::of(c.arithmetic_lhs), Cell::of(c.arithmetic_rhs),
                        Cell::of(c.arithmetic)});
    win.add_check("shulman_n" + std::to_string(c.n), c.shulman);
    if (!c.arithmetic)
      win.notices.push_back("window arithmetic fails at n=" + std::to_string(c.n) +
                            "; r is too small for the window-size inequality");
  }
  stamp(win, s, t.params);
  out.push_back(std::move(win));

  for (int n = 0; n < ctx.depth(); ++n) {
    ExperimentReport b = balanced_product_check(ctx, n, samples, seed, s.exec());
    b.experiment = "balanced_n" + std::to_string(n);
    stamp(b, s, t.params);
    out.push_back(std::move(b));
  }
  for (int n = 2; n <= std::min(ctx.depth(), 2); ++n) {
    ExperimentReport d = mainlem_density_check(ctx, n, std::min<std::size_t>(samples, 40), seed, s.exec());
    d.experiment = "mainlem_density_n" + std::to_string(n);
    stamp(d, s, t.params);
    out.push_back(std::move(d));
  }
  if (ctx.depth() >= 2) {
    const BoxSet core = intersect(t.params.F(1).to_boxset(), core_set(t.params, 1));
    std::vector<std::pair<BoxSet, BoxSet>> pairs{{core, core}, {BoxSet{}, BoxSet{}}};
    ExperimentReport l = lemwm_crosscheck(ctx, 1, pairs, s.exec());
    stamp(l, s, t.params);
    out.push_back(std::move(l));
  }
  return out;
}

using Command = std::vector<ExperimentReport> (*)(const Settings&, std::vector<std::pair<std::string, std::string>>&);

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cflab - exact experiments on a (C,F)-tower"};
  app.require_subcommand(1);

  struct Spec {
    const char* name;
    const char* help;
    Command fn;
    bool needs_tower;
  };
  const std::vector<Spec> specs{
      {"build", "build the tower and check level sets, tilings and (CF) conditions", cmd_build, true},
      {"sample", "sample points of the space", cmd_sample, true},
      {"certify", "dJlem / balanced / discr_meas certificates for one level", cmd_certify, true},
      {"mix", "mixing deviations along a sequence of g", cmd_mix, true},
      {"joinings", "ergodic averages of paired points over the windows", cmd_joinings, true},
      {"factor", "involution factors S_b", cmd_factor, true},
      {"techlem", "Fubini identity on random box triples", cmd_techlem, false},
      {"report", "windows, balance, density and LemWM summary", cmd_report, true},
  };
  const std::vector<std::string> keys{"r",       "depth",   "seed",         "out_dir",       "level",
                                      "samples", "exec",    "pair_budget",  "sample_budget", "mode",
                                      "budget",  "trials",  "g",            "b",             "k",
                                      "tower",   "format"};
  const std::vector<std::string> flag_keys{"exhaustive", "conditioned"};

  std::string config_path;
  std::map<std::string, std::string> cli_values;
  std::map<std::string, bool> cli_flags;
  std::map<std::string, CLI::App*> subs;
  for (const auto& sp : specs) {
    CLI::App* sub = app.add_subcommand(sp.name, sp.help);
    sub->add_option("--config", config_path, "key = value config file");
    for (const auto& k : keys) sub->add_option("--" + k, cli_values[k]);
    for (const auto& k : flag_keys) sub->add_flag("--" + k, cli_flags[k]);
    subs[sp.name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  const Spec* chosen = nullptr;
  for (const auto& sp : specs)
    if (subs[sp.name]->parsed()) chosen = &sp;

  Settings s;
  std::vector<ExperimentReport> reports;
  std::vector<std::pair<std::string, std::string>> extra;
  std::string out_dir, format;
  try {
    if (!config_path.empty()) s.cfg = Config::load(config_path);
    const bool seed_from_cli = subs[chosen->name]->count("--seed") > 0;
    if (const char* env = std::getenv("CFLAB_SEED"); env && !seed_from_cli) s.cfg.set("seed", env);
    for (const auto& k : keys)
      if (subs[chosen->name]->count("--" + k)) s.cfg.set(k, cli_values[k]);
    for (const auto& k : flag_keys)
      if (cli_flags[k]) s.cfg.set(k, "true");

    // A config file is a complete experiment description; bare command lines
    // fall back to the small reference tower.
    if (!config_path.empty()) {
      std::vector<std::string> required{"seed", "out_dir"};
      if (chosen->needs_tower && !s.cfg.has("tower")) required.push_back("r");
      if (auto miss = s.cfg.missing(required); !miss.empty()) {
        std::string m;
        for (const auto& k : miss) m += (m.empty() ? "" : ", ") + k;
        throw UsageError("missing required key(s) in " + config_path + ": " + m);
      }
    }
    if (!s.cfg.has("seed")) s.cfg.set("seed", "1");
    if (!s.cfg.has("r")) s.cfg.set("r", "2,3,4");
    parse_u64(*s.cfg.get("seed"));
    out_dir = s.str("out_dir", "");
    format = s.str("format", "json,csv");
    if (format != "json" && format != "csv" && format != "json,csv") throw UsageError("format must be json, csv or json,csv");
    reports = chosen->fn(s, extra);
  } catch (const UsageError& e) {
    std::cerr << "cflab " << chosen->name << ": " << e.what() << "\n" << subs[chosen->name]->help();
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "cflab " << chosen->name << ": invalid input: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "cflab " << chosen->name << ": error: " << e.what() << "\n";
    return kRuntime;
  }

  // Everything is computed before anything is written.
  try {
    if (out_dir.empty()) {
      for (const auto& r : reports) std::cout << (format == "csv" ? to_csv(r) : to_json(r));
    } else {
      std::filesystem::create_directories(out_dir);
      for (const auto& r : reports) {
        const std::string stem = out_dir + "/" + r.experiment;
        if (format != "csv") write_file(stem + ".json", to_json(r));
        if (format != "json") write_file(stem + ".csv", to_csv(r));
      }
      for (const auto& [name, text] : extra) write_file(out_dir + "/" + name, text);
    }
  } catch (const std::exception& e) {
    std::cerr << "cflab: " << e.what() << "\n";
    return kRuntime;
  }

  int status = kOk;
  for (const auto& r : reports) {
    for (const auto& c : r.checks) {
      if (c.pass) continue;
      std::cerr << "invariant failed: " << r.experiment << "/" << c.name << (c.detail.empty() ? "" : ": " + c.detail)
                << "\n";
      status = kCheckFailed;
    }
    for (const auto& n : r.notices) std::cerr << "note: " << r.experiment << ": " << n << "\n";
  }
  return status;
}
