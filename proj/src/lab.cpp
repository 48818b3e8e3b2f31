#include "cfsim/lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "cfsim/correlation.hpp"
#include "json.hpp"

namespace cfsim {

namespace {

using ojson = nlohmann::ordered_json;

Rational rat(std::int64_t v) { return make_rational(v); }

std::string str(const GroupElement& g) {
  std::ostringstream os;
  os << g;
  return os.str();
}

std::string str(GridPoint h) { return "(" + std::to_string(h.i) + "," + std::to_string(h.j) + ")"; }

ojson cell_json(const Cell& c) {
  switch (c.kind) {
    case Cell::Kind::text:
      return c.text;
    case Cell::Kind::integer:
      return c.integer;
    case Cell::Kind::rational:
      return ojson{{"exact", to_exact_string(c.value)}, {"decimal", to_decimal_string(c.value, 12)}};
  }
  return nullptr;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

// Uniform point of a box set on a grid of 2^20 steps of its total measure.
GroupElement sample_in(const BoxSet& s, Rng& rng) {
  constexpr std::uint64_t steps = std::uint64_t{1} << 20;
  const Rational total = s.measure();
  Rational u = total * Rational(Integer(static_cast<unsigned long>(1 + rng.below(steps))),
                                Integer(static_cast<unsigned long>(steps)));
  u.canonicalize();
  for (const auto& b : s.boxes()) {
    const Rational len = b.length();
    if (u <= len) return GroupElement(b.i, b.span.lo + u, b.eps);
    u -= len;
  }
  const Box& last = s.boxes().back();
  return GroupElement(last.i, last.span.hi, last.eps);
}

// Random union of up to `max_boxes` boxes inside the rect F (endpoints on a 1/den grid).
BoxSet random_boxes_in(Rng& rng, const Rect& F, int max_boxes, std::int64_t den) {
  const int count = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_boxes)));
  const Rational lo_f = F.real[0].lo, hi_f = F.real[0].hi;
  const std::int64_t glo = to_int64(floor_of(lo_f * rat(den))), ghi = to_int64(floor_of(hi_f * rat(den)));
  std::vector<Box> boxes;
  for (int k = 0; k < count; ++k) {
    const std::int64_t i = rng.between(F.ilo + 1, F.ihi);
    const std::int64_t a = rng.between(glo, ghi - 1);
    const std::int64_t b = std::min(ghi, a + 1 + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(4 * den))));
    boxes.push_back({i, Interval{make_rational(a, den), make_rational(b, den)}, static_cast<std::uint8_t>(rng.coin())});
  }
  return BoxSet::from_boxes(std::move(boxes));
}

const Rational& rmax(const Rational& a, const Rational& b) { return a < b ? b : a; }

void append_capped(std::vector<std::string>& out, const std::string& tag, const std::vector<std::string>& in,
                   std::size_t cap = 5) {
  for (std::size_t k = 0; k < in.size() && k < cap; ++k) out.push_back(tag + ": " + in[k]);
  if (in.size() > cap) out.push_back(tag + ": ... and " + std::to_string(in.size() - cap) + " more");
}

}  // namespace

// ------------------------------------------------------------------ reports

bool ExperimentReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

void ExperimentReport::add_check(std::string name, bool pass, std::string detail) {
  checks.push_back({std::move(name), pass, std::move(detail)});
}

const Cell* ExperimentReport::find_summary(const std::string& key) const {
  for (const auto& [k, v] : summary)
    if (k == key) return &v;
  return nullptr;
}

std::string to_json(const ExperimentReport& r) {
  ojson doc;
  doc["schema"] = kReportSchema;
  doc["experiment"] = r.experiment;
  doc["seed"] = r.seed;
  ojson params = ojson::object();
  for (const auto& [k, v] : r.params) params[k] = v;
  doc["params"] = params;
  doc["columns"] = r.columns;
  ojson rows = ojson::array();
  for (const auto& row : r.rows) {
    ojson o = ojson::object();
    for (std::size_t c = 0; c < row.size() && c < r.columns.size(); ++c) o[r.columns[c]] = cell_json(row[c]);
    rows.push_back(std::move(o));
  }
  doc["rows"] = rows;
  ojson summary = ojson::object();
  for (const auto& [k, v] : r.summary) summary[k] = cell_json(v);
  doc["summary"] = summary;
  ojson checks = ojson::array();
  for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  doc["checks"] = checks;
  doc["notices"] = r.notices;
  doc["ok"] = r.ok();
  return doc.dump(2) + "\n";
}

std::string to_csv(const ExperimentReport& r) {
  std::vector<bool> rational(r.columns.size(), false);
  for (const auto& row : r.rows)
    for (std::size_t c = 0; c < row.size() && c < rational.size(); ++c)
      if (row[c].kind == Cell::Kind::rational) rational[c] = true;
  std::ostringstream os;
  os << "# schema=" << kReportSchema << " experiment=" << r.experiment << " seed=" << r.seed << "\n";
  for (std::size_t c = 0; c < r.columns.size(); ++c) {
    if (c) os << ',';
    os << csv_escape(r.columns[c]);
    if (rational[c]) os << ',' << csv_escape(r.columns[c] + "_dec");
  }
  os << '\n';
  for (const auto& row : r.rows) {
    for (std::size_t c = 0; c < r.columns.size(); ++c) {
      if (c) os << ',';
      const Cell empty = Cell::of("");
      const Cell& cell = c < row.size() ? row[c] : empty;
      switch (cell.kind) {
        case Cell::Kind::text:
          os << csv_escape(cell.text);
          if (rational[c]) os << ',';
          break;
        case Cell::Kind::integer:
          os << cell.integer;
          if (rational[c]) os << ',';
          break;
        case Cell::Kind::rational:
          os << to_exact_string(cell.value) << ',' << to_decimal_string(cell.value, 12);
          break;
      }
    }
    os << '\n';
  }
  return os.str();
}

std::string format_params(const TowerParams& p) {
  std::string s;
  for (std::size_t k = 0; k < p.r.size(); ++k) s += (k ? "," : "") + std::to_string(p.r[k]);
  return s;
}

// ------------------------------------------------------------------ windows

AveragingWindow averaging_window(const TowerParams& p, int n) {
  if (n < 1 || n >= p.depth()) throw std::out_of_range("averaging window needs 1 <= n < depth");
  AveragingWindow w;
  w.n = n;
  const std::int64_t q = static_cast<std::int64_t>(n) * n;
  w.k_half = p.a[n] / q;
  w.j_half = p.r[n] / q;
  w.atilde = p.atilde[n];
  std::set<std::int64_t> phi;
  for (std::int64_t k = -w.k_half; k <= w.k_half; ++k)
    for (std::int64_t j = -w.j_half; j <= w.j_half; ++j) phi.insert(k + 2 * w.atilde * j);
  w.phi.assign(phi.begin(), phi.end());
  return w;
}

std::vector<WindowCheck> check_windows(const TowerParams& p, std::span<const AveragingWindow> windows) {
  std::vector<WindowCheck> out;
  std::set<std::int64_t> earlier;
  for (std::size_t k = 0; k + 1 < windows.size(); ++k) {
    earlier.insert(windows[k].phi.begin(), windows[k].phi.end());
    const AveragingWindow& next = windows[k + 1];
    std::set<std::int64_t> sums;
    for (auto u : next.phi)
      for (auto v : earlier) sums.insert(u + v);
    WindowCheck c;
    c.n = windows[k].n;
    c.sumset = sums.size();
    c.bound = 3 * next.phi.size();
    c.shulman = c.sumset <= c.bound;
    const int n = windows[k].n;
    const std::int64_t q = static_cast<std::int64_t>(n) * n, q1 = static_cast<std::int64_t>(n + 1) * (n + 1);
    c.arithmetic_lhs = make_rational(p.a[n], q) + make_rational(2 * p.atilde[n] * p.r[n], q);
    c.arithmetic_rhs = make_rational(2 * p.a[n + 1], q1);
    c.arithmetic = c.arithmetic_lhs < c.arithmetic_rhs;
    out.push_back(c);
  }
  return out;
}

// ------------------------------------------------------------------ mixing

std::vector<std::int64_t> designated_mixing_sequence(const MeasureContext& ctx) {
  std::vector<std::int64_t> out;
  for (int n = 1; n < ctx.depth(); ++n) out.push_back(2 * ctx.params().atilde[n]);
  return out;
}

ExperimentReport mixing_scan(const MeasureContext& ctx, std::span<const std::int64_t> g_values,
                             std::span<const CylinderPair> pairs, Exec exec) {
  ExperimentReport rep;
  rep.experiment = "mix";
  rep.columns = {"g", "pair", "mu_TgA_cap_B", "unreachable", "mu_A_mu_B", "deviation"};
  std::vector<Rational> prod;
  for (const auto& pr : pairs) prod.push_back(cylinder_measure(ctx, pr.a) * cylinder_measure(ctx, pr.b));

  const std::size_t tasks = g_values.size() * pairs.size();
  auto results = map_indexed<IntersectResult>(
      tasks,
      [&](std::size_t t) {
        const auto& pr = pairs[t % pairs.size()];
        return intersect_measure(ctx, GroupElement(g_values[t / pairs.size()], 0, 0), pr.a, pr.b);
      },
      exec);

  bool full_zero = true, any_full = false;
  Rational max_dev = 0, max_unreachable = 0;
  std::size_t partial = 0;
  for (std::size_t t = 0; t < tasks; ++t) {
    const std::size_t pi = t % pairs.size();
    const auto& r = results[t];
    const Rational dev = r.value - prod[pi];
    rep.rows.push_back({Cell::of(g_values[t / pairs.size()]), Cell::of(pairs[pi].label), Cell::of(r.value),
                        Cell::of(r.unreachable), Cell::of(prod[pi]), Cell::of(dev)});
    if (r.unreachable != 0) {
      ++partial;
      max_unreachable = rmax(max_unreachable, r.unreachable);
    }
    if (prod[pi] == 1) {
      any_full = true;
      full_zero = full_zero && dev == 0;
    }
    if (r.unreachable == 0) max_dev = rmax(max_dev, abs_of(dev));
  }
  rep.summary.push_back({"max_abs_deviation_exact_rows", Cell::of(max_dev)});
  if (partial)
    rep.notices.push_back(std::to_string(partial) + " rows carry mass that needs levels beyond the depth (max " +
                          to_exact_string(max_unreachable) + "); see column unreachable");
  if (any_full) rep.add_check("full_space_deviation_zero", full_zero);
  return rep;
}

// ------------------------------------------------------------------ LemWM

LemwmResult lemwm_evaluate(const MeasureContext& ctx, int n, const BoxSet& a, const BoxSet& b, Exec exec) {
  if (n < 0 || n + 1 > ctx.depth()) throw NeedsDeeperTail("LemWM at level n needs depth n+1", n + 1);
  const TowerParams& p = ctx.params();
  if (!a.within(p.F(n)) || !b.within(p.F(n))) throw std::invalid_argument("A, B must lie in F_n");
  const Rect core = core_set(p, n);
  const BoxSet ac = intersect(a, core), bc = intersect(b, core);
  const SpacerMap& m = ctx.map(n);
  const GroupElement g = phi(p.atilde[n], 1, 0);

  std::vector<GridPoint> hs;
  for (std::size_t k = 0; k < m.grid_size(); ++k) {
    GridPoint h = m.grid_point(k);
    if (m.in_grid({h.i + 1, h.j})) hs.push_back(h);
  }
  const Rect Fn1 = p.F(n + 1);
  auto direct = map_indexed<Rational>(
      hs.size(),
      [&](std::size_t k) {
        const BoxSet piece = translate(g, translate(m.c(hs[k]), ac, Side::right), Side::left);
        if (!piece.within(Fn1)) throw std::logic_error("transported piece leaves F_{n+1}");
        return refined_overlap(ctx, piece, n + 1, bc, n);
      },
      exec);
  auto corr = map_indexed<Rational>(
      hs.size(),
      [&](std::size_t k) {
        const GridPoint h = hs[k];
        return combine(translate(m.s(h), ac, Side::right), translate(m.s({h.i + 1, h.j}), bc, Side::right),
                       SetOp::intersect)
            .measure();
      },
      exec);

  LemwmResult r;
  r.used_pieces = hs.size();
  Rational sd = 0, sc = 0;
  for (auto& v : direct) sd += v;
  for (auto& v : corr) sc += v;
  const Rational H(static_cast<long>(m.grid_size()));
  r.direct = ctx.weight(n + 1) * sd / Fn1.measure();
  r.correlation = ctx.weight(n) * sc / (H * p.F(n).measure());
  const Rational used = ctx.weight(n + 1) * Rational(static_cast<long>(hs.size())) * ac.measure() / Fn1.measure();
  r.excluded = cylinder_measure(ctx, Cylinder{n, a}) - used;
  const Rational lf = p.F(n).measure();
  r.excluded_bound = ctx.weight(n) * (lf - core.measure()) / lf +
                     (1 - Rational(static_cast<long>(hs.size())) / H) * ctx.weight(n);
  return r;
}

ExperimentReport lemwm_crosscheck(const MeasureContext& ctx, int n, std::span<const std::pair<BoxSet, BoxSet>> pairs,
                                  Exec exec) {
  ExperimentReport rep;
  rep.experiment = "lemwm";
  rep.params.push_back({"n", std::to_string(n)});
  rep.columns = {"pair", "direct", "correlation", "difference", "excluded", "excluded_bound"};
  bool all_equal = true, all_bounded = true;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    LemwmResult r = lemwm_evaluate(ctx, n, pairs[k].first, pairs[k].second, exec);
    all_equal = all_equal && r.equal();
    all_bounded = all_bounded && r.excluded <= r.excluded_bound;
    rep.rows.push_back({Cell::of(k), Cell::of(r.direct), Cell::of(r.correlation),
                        Cell::of(Rational(r.direct - r.correlation)), Cell::of(r.excluded),
                        Cell::of(r.excluded_bound)});
  }
  rep.summary.push_back({"pairs", Cell::of(pairs.size())});
  rep.add_check("evaluators_equal", all_equal);
  rep.add_check("excluded_mass_bounded", all_bounded);
  return rep;
}

// ------------------------------------------------------------------ joinings

JoiningSetup paired_points(const MeasureContext& ctx, const PointExpansion& x, int level, Rng& rng) {
  const PointExpansion xn = normalize(ctx, x, level);
  const PointExpansion fresh = sample_point(ctx, level, rng);
  JoiningSetup s;
  s.x = xn;
  s.y = PointExpansion{level, fresh.f, xn.digits};
  s.k = fresh.f * invert(xn.f);
  return s;
}

ExperimentReport joining_average(const MeasureContext& ctx, const JoiningSetup& setup,
                                 std::span<const AveragingWindow> windows, std::span<const Cylinder> cells,
                                 Exec exec) {
  ExperimentReport rep;
  rep.experiment = "joinings";
  rep.columns = {"window", "phi_size", "cell_a", "cell_b", "empirical", "product", "off_diagonal"};
  const std::size_t C = cells.size();
  std::vector<Rational> mu;
  for (const auto& c : cells) mu.push_back(cylinder_measure(ctx, c));

  // Digit agreement, compared at the deeper base level.
  {
    const int level = std::max(setup.x.level, setup.y.level);
    const PointExpansion u = normalize(ctx, setup.x, level), v = normalize(ctx, setup.y, level);
    std::string labels;
    for (std::size_t k = 0; k < std::min(u.digits.size(), v.digits.size()); ++k)
      labels += u.digits[k] == v.digits[k] ? '=' : '!';
    rep.summary.push_back({"digit_agreement_from_level_" + std::to_string(level), Cell::of(labels)});
  }

  std::vector<Rational> offdiag(C * C, Rational(0));
  bool have_k = setup.k.has_value();
  if (have_k) {
    rep.params.push_back({"k", str(*setup.k)});
    const PointExpansion tk = act(ctx, *setup.k, setup.x);
    const bool matches = same_point(ctx, tk, setup.y);
    rep.add_check("y_equals_Tk_x", matches, matches ? "" : "y differs from T_k x; k is reported, not replaced");
    const GroupElement kinv = invert(*setup.k);
    auto vals = map_indexed<IntersectResult>(
        C * C, [&](std::size_t t) { return intersect_measure(ctx, kinv, cells[t % C], cells[t / C]); }, exec);
    Rational worst = 0;
    std::size_t partial = 0;
    for (std::size_t t = 0; t < C * C; ++t) {
      offdiag[t] = vals[t].value;
      if (vals[t].unreachable != 0) ++partial;
      worst = rmax(worst, vals[t].unreachable);
    }
    if (partial)
      rep.notices.push_back(std::to_string(partial) + " off-diagonal cells are lower bounds; unreachable mass up to " +
                            to_exact_string(worst));
  }

  for (const auto& w : windows) {
    struct Hit {
      int cx = -1, cy = -1;
      bool tail = false;
      bool identity = true;
    };
    auto hits = map_indexed<Hit>(
        w.phi.size(),
        [&](std::size_t t) {
          Hit h;
          const GroupElement gi(w.phi[t], 0, 0);
          try {
            const PointExpansion xi = act(ctx, gi, setup.x);
            const PointExpansion yi = act(ctx, gi, setup.y);
            for (std::size_t c = 0; c < C; ++c) {
              if (h.cx < 0 && in_cylinder(ctx, xi, cells[c])) h.cx = static_cast<int>(c);
              if (h.cy < 0 && in_cylinder(ctx, yi, cells[c])) h.cy = static_cast<int>(c);
            }
            if (setup.k) h.identity = same_point(ctx, act(ctx, *setup.k, xi), yi);
          } catch (const NeedsDeeperTail&) {
            h.tail = true;
          }
          return h;
        },
        exec);
    std::vector<std::int64_t> counts(C * C, 0);
    std::size_t tails = 0, mismatches = 0;
    std::int64_t first_tail = 0;
    for (std::size_t t = 0; t < hits.size(); ++t) {
      if (hits[t].tail) {
        if (tails++ == 0) first_tail = w.phi[t];
        continue;
      }
      if (!hits[t].identity) ++mismatches;
      if (hits[t].cx >= 0 && hits[t].cy >= 0) ++counts[static_cast<std::size_t>(hits[t].cx) * C + hits[t].cy];
    }
    const std::string tag = "window_" + std::to_string(w.n);
    if (tails) {
      rep.notices.push_back(tag + ": " + std::to_string(tails) + " shifts need a deeper tail (first i=" +
                            std::to_string(first_tail) + ")");
      rep.summary.push_back({tag + ".tail_failures", Cell::of(tails)});
      continue;
    }
    const Rational size(static_cast<long>(w.phi.size()));
    Rational d_prod = 0, d_off = 0;
    for (std::size_t u = 0; u < C; ++u) {
      for (std::size_t v = 0; v < C; ++v) {
        const Rational emp = Rational(static_cast<long>(counts[u * C + v])) / size;
        const Rational prod = mu[u] * mu[v];
        d_prod += abs_of(emp - prod);
        d_off += abs_of(emp - offdiag[u * C + v]);
        rep.rows.push_back({Cell::of(w.n), Cell::of(w.phi.size()), Cell::of(u), Cell::of(v), Cell::of(emp),
                            Cell::of(prod), have_k ? Cell::of(offdiag[u * C + v]) : Cell::of("")});
      }
    }
    rep.summary.push_back({tag + ".distance_to_product", Cell::of(d_prod)});
    if (have_k) {
      rep.summary.push_back({tag + ".distance_to_off_diagonal", Cell::of(d_off)});
      rep.add_check(tag + ".shift_identity", mismatches == 0,
                    std::to_string(mismatches) + " shifts where T_i y != T_k T_i x");
    }
  }
  return rep;
}

// ------------------------------------------------------------------ Fubini lemma

TechlemResult techlem_exact(const BoxSet& a, const BoxSet& b, const BoxSet& s) {
  TechlemResult r;
  r.mode = TechlemMode::exact;
  r.lhs = 0;
  r.rhs = 0;
  for (const auto& P : a.boxes()) {
    const int sp = P.eps == 0 ? 1 : -1;
    for (const auto& Q : b.boxes()) {
      const int sq = Q.eps == 0 ? 1 : -1;
      for (const auto& X : s.boxes()) {
        const Interval ix = signed_image(X.span, sp);
        for (const auto& Y : s.boxes()) {
          if (P.i + X.i != Q.i + Y.i || (P.eps ^ X.eps) != (Q.eps ^ Y.eps)) continue;
          const Interval iy = signed_image(Y.span, sq);
          // P x ∩ Q y over x ∈ X, y ∈ Y  versus  a X ∩ b Y over a ∈ P, b ∈ Q
          r.lhs += overlap_integral(P.span, Q.span, ix, iy);
          r.rhs += overlap_integral(ix, iy, P.span, Q.span);
        }
      }
    }
  }
  return r;
}

TechlemResult techlem_montecarlo(const BoxSet& a, const BoxSet& b, const BoxSet& s, std::size_t samples,
                                 std::uint64_t seed) {
  TechlemResult r;
  r.mode = TechlemMode::montecarlo;
  r.samples = samples;
  r.lhs = 0;
  r.rhs = 0;
  if (a.empty() || b.empty() || s.empty() || samples == 0) return r;
  Rng rng = Rng::stream(seed, 0xfb1ULL);
  const Rational la = a.measure(), lb = b.measure(), ls = s.measure();
  Rational sum_l = 0, sum_r = 0;
  for (std::size_t k = 0; k < samples; ++k) {
    const GroupElement x = sample_in(s, rng), y = sample_in(s, rng);
    sum_l += combine(translate(x, a, Side::right), translate(y, b, Side::right), SetOp::intersect).measure();
    const GroupElement u = sample_in(a, rng), v = sample_in(b, rng);
    sum_r += combine(translate(u, s, Side::left), translate(v, s, Side::left), SetOp::intersect).measure();
  }
  const Rational N(static_cast<long>(samples));
  r.lhs = ls * ls * sum_l / N;
  r.rhs = la * lb * sum_r / N;
  const double scale = std::sqrt(std::log(2.0 / kHoeffdingDelta) / (2.0 * static_cast<double>(samples)));
  const Rational range_l = ls * ls * (la < lb ? la : lb);
  const Rational range_r = la * lb * ls;
  r.lhs_halfwidth = range_l.get_d() * scale;
  r.rhs_halfwidth = range_r.get_d() * scale;
  return r;
}

TechlemResult techlem_check(const BoxSet& a, const BoxSet& b, const BoxSet& s, TechlemMode mode, std::size_t budget,
                            std::uint64_t seed, std::size_t box_budget) {
  if (mode == TechlemMode::exact) {
    const double quads = static_cast<double>(a.size()) * b.size() * s.size() * s.size();
    if (quads <= static_cast<double>(box_budget)) return techlem_exact(a, b, s);
    TechlemResult r = techlem_montecarlo(a, b, s, budget, seed);
    r.notice = "exact mode over the box budget (" + std::to_string(box_budget) + "); Monte Carlo used";
    return r;
  }
  return techlem_montecarlo(a, b, s, budget, seed);
}

BoxSet random_small_boxset(Rng& rng, int max_boxes, std::int64_t span, std::int64_t den) {
  const int count = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_boxes)));
  std::vector<Box> boxes;
  for (int k = 0; k < count; ++k) {
    const std::int64_t i = rng.between(-span, span);
    const std::int64_t lo = rng.between(-span * den, span * den - 1);
    const std::int64_t len = 1 + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(2 * den)));
    boxes.push_back({i, Interval{make_rational(lo, den), make_rational(lo + len, den)},
                     static_cast<std::uint8_t>(rng.coin())});
  }
  return BoxSet::from_boxes(std::move(boxes));
}

// ------------------------------------------------------------------ balance of A* C_{n+1}

ExperimentReport balanced_product_check(const MeasureContext& ctx, int n, std::size_t samples, std::uint64_t seed,
                                        Exec exec) {
  if (n < 0 || n >= ctx.depth()) throw std::out_of_range("balanced check needs a spacer map at level n");
  const BalanceReport bal = certify_balanced(ctx.map(n));
  const Rational eps = bal.deviation;
  const Rational imbalance(abs_of(rat(bal.level0 - bal.level1)));
  const Rect F = ctx.params().F(n);

  ExperimentReport rep;
  rep.experiment = "balanced";
  rep.seed = seed;
  rep.params.push_back({"n", std::to_string(n)});
  rep.columns = {"sample", "lambda_A", "lambda_A0", "lambda_A1", "difference", "eps_lambda_A", "predicted"};

  auto rows = map_indexed<BalancedRow>(
      samples,
      [&](std::size_t k) {
        Rng rng = Rng::stream(seed, k, 0xba1ULL + static_cast<std::uint64_t>(n));
        const BoxSet astar = random_boxes_in(rng, F, 4, 4);
        const BoxSet A = spread(astar, ctx.spacers(n), Side::right).set;
        BalancedRow r;
        r.lambda_a = A.measure();
        r.level0 = A.measure_level(0);
        r.level1 = A.measure_level(1);
        r.predicted = abs_of(astar.measure_level(0) - astar.measure_level(1)) * imbalance;
        return r;
      },
      exec);

  bool bound_ok = true, formula_ok = true, nominal_ok = true;
  Rational max_ratio = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    const Rational diff = abs_of(r.level0 - r.level1);
    bound_ok = bound_ok && diff <= eps * r.lambda_a;
    formula_ok = formula_ok && diff == r.predicted;
    if (bal.threshold && eps < *bal.threshold) nominal_ok = nominal_ok && diff < *bal.threshold * r.lambda_a;
    max_ratio = rmax(max_ratio, diff / r.lambda_a);
    rep.rows.push_back({Cell::of(k), Cell::of(r.lambda_a), Cell::of(r.level0), Cell::of(r.level1), Cell::of(diff),
                        Cell::of(Rational(eps * r.lambda_a)), Cell::of(r.predicted)});
  }
  rep.summary.push_back({"epsilon", Cell::of(eps)});
  rep.summary.push_back({"level0_points", Cell::of(bal.level0)});
  rep.summary.push_back({"level1_points", Cell::of(bal.level1)});
  rep.summary.push_back({"max_ratio", Cell::of(max_ratio)});
  rep.add_check("difference_within_eps", bound_ok);
  rep.add_check("product_formula", formula_ok);
  if (bal.threshold && eps < *bal.threshold) rep.add_check("one_over_n_threshold", nominal_ok);
  else rep.notices.push_back("achieved epsilon is not below 1/n; 1/n threshold not applicable");
  return rep;
}

// ------------------------------------------------------------------ density in fS_n

ExperimentReport mainlem_density_check(const MeasureContext& ctx, int n, std::size_t samples, std::uint64_t seed,
                                       Exec exec) {
  if (n < 2 || n > ctx.depth()) throw std::out_of_range("density check needs 2 <= n <= depth");
  const TowerParams& p = ctx.params();
  const std::int64_t a = p.a[n], b = p.b[n];
  const BoxSet S = p.S(n).to_boxset();
  const Rational lambda_s = S.measure();
  const Rect F2 = p.F(n - 2);
  const Rational c_count(static_cast<long>(ctx.spacers(n - 2).size()));
  const Rational lf1 = p.F(n - 1).measure();

  ExperimentReport rep;
  rep.experiment = "mainlem_density";
  rep.seed = seed;
  rep.params.push_back({"n", std::to_string(n)});
  rep.columns = {"sample", "f", "lhs", "rhs", "deviation"};

  struct Row {
    GroupElement f;
    Rational lhs, rhs;
  };
  auto rows = map_indexed<Row>(
      samples,
      [&](std::size_t k) {
        Rng rng = Rng::stream(seed, k, 0xde5ULL + static_cast<std::uint64_t>(n));
        const GroupElement f(rng.between(-a + b, a - b), rng.grid_point(rat(-a + b), rat(a - b), 1 << 10),
                             rng.coin());
        const BoxSet fs = translate(f, S, Side::left);
        if (!fs.within(p.F(n))) throw std::logic_error("sampled f violates f S_n ⊆ F_n");
        const BoxSet astar = random_boxes_in(rng, F2, 3, 4);
        const BoxSet A1 = spread(astar, ctx.spacers(n - 2), Side::right).set;
        const BoxSet A2 = spread(A1, ctx.spacers(n - 1), Side::right).set;
        Row r;
        r.f = f;
        r.lhs = combine(A2, fs, SetOp::intersect).measure() / lambda_s;
        r.rhs = c_count * astar.measure() / lf1;
        return r;
      },
      exec);
  Rational max_dev = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Rational dev = abs_of(rows[k].lhs - rows[k].rhs);
    max_dev = rmax(max_dev, dev);
    rep.rows.push_back({Cell::of(k), Cell::of(str(rows[k].f)), Cell::of(rows[k].lhs), Cell::of(rows[k].rhs),
                        Cell::of(dev)});
  }
  rep.summary.push_back({"max_deviation", Cell::of(max_dev)});
  return rep;
}

// ------------------------------------------------------------------ bundles

ExperimentReport certify_level(const TowerParams& p, const CertifyOptions& opt, Exec exec) {
  const int n = opt.level;
  if (n < 1 || n >= p.depth()) throw std::out_of_range("certify needs 1 <= level < depth");
  ExperimentReport rep;
  rep.experiment = "certify";
  rep.seed = opt.seed;
  rep.params = {{"r", format_params(p)},
                {"level", std::to_string(n)},
                {"exhaustive", opt.exhaustive ? "true" : "false"},
                {"pair_budget", std::to_string(opt.pair_budget)},
                {"sample_budget", std::to_string(opt.sample_budget)}};
  rep.columns = {"certificate", "item", "lhs", "rhs", "value"};

  const SpacerMap m = sample_spacer_map(p, n, opt.seed);
  const BalanceReport bal = certify_balanced(m);
  rep.rows.push_back({Cell::of("balanced"), Cell::of("levels " + std::to_string(bal.level0) + "/" +
                                                     std::to_string(bal.level1)),
                      Cell::of(""), Cell::of(""), Cell::of(bal.deviation)});
  rep.summary.push_back({"balanced.deviation", Cell::of(bal.deviation)});
  rep.summary.push_back({"balanced.threshold", Cell::of(*bal.threshold)});
  rep.summary.push_back({"balanced.pass", Cell::of(bal.pass)});

  const auto lengths = default_djlem_lengths(m);
  const std::uint64_t budget = opt.exhaustive ? std::numeric_limits<std::uint64_t>::max() : opt.pair_budget;
  const DjlemReport dj = certify_djlem(m, budget, lengths, opt.seed, exec);
  for (const auto& row : dj.rows)
    rep.rows.push_back({Cell::of("djlem"),
                        Cell::of("N=" + std::to_string(row.N) + " h=" + str(row.h) + " h'=" + str(row.hp)),
                        Cell::of(""), Cell::of(""), Cell::of(row.distance)});
  append_capped(rep.notices, "djlem", dj.notices);
  rep.summary.push_back({"djlem.max_distance", Cell::of(dj.max_distance)});
  rep.summary.push_back({"djlem.threshold", Cell::of(dj.threshold)});
  rep.summary.push_back({"djlem.pass", Cell::of(dj.pass)});
  rep.summary.push_back({"djlem.exhaustive", Cell::of(dj.exhaustive)});
  rep.summary.push_back({"djlem.rows", Cell::of(dj.rows.size())});

  try {
    XiPartition xi = xi_partition(p, 1);
    SpacerMap prev = sample_spacer_map(p, 1, opt.seed);
    for (int k = 2; k <= n; ++k) {
      xi = xi_partition(p, k, &xi, &prev);
      if (k < n) prev = sample_spacer_map(p, k, opt.seed);
    }
    const DiscrReport dr = certify_discr_meas(p, n, xi, opt.sample_budget, opt.seed, opt.exhaustive, exec);
    for (const auto& row : dr.rows)
      rep.rows.push_back({Cell::of("discr_meas"), Cell::of("sample " + std::to_string(row.sample)),
                          Cell::of(row.terms.lhs), Cell::of(row.terms.rhs), Cell::of(row.terms.difference())});
    append_capped(rep.notices, "discr_meas", dr.notices);
    rep.summary.push_back({"discr_meas.max_difference", Cell::of(dr.max_difference)});
    rep.summary.push_back({"discr_meas.threshold", Cell::of(dr.threshold)});
    rep.summary.push_back({"discr_meas.pass", Cell::of(dr.pass)});
    rep.summary.push_back({"discr_meas.evaluated", Cell::of(dr.evaluated)});
    rep.summary.push_back({"discr_meas.discarded", Cell::of(dr.discarded)});
  } catch (const BudgetExceeded& e) {
    rep.notices.push_back(std::string("discr_meas skipped: ") + e.what());
  }
  return rep;
}

ExperimentReport build_report(const TowerParams& p, std::span<const SpacerMap> maps) {
  ExperimentReport rep;
  rep.experiment = "build";
  rep.seed = maps.empty() ? 0 : maps.front().seed();
  rep.params = {{"r", format_params(p)}, {"depth", std::to_string(p.depth())}};
  rep.columns = {"n", "r", "a", "b", "atilde", "lambda_F", "lambda_S", "lambda_Ftilde", "n4_over_r", "core_fraction"};
  const auto diag = p.growth_diagnostics();
  bool level_ok = true;
  for (int n = 0; n <= p.depth(); ++n) {
    const LevelSets ls = build_level_sets(p, n);
    level_ok = level_ok && ls.s_in_f && ls.fs_equals_sf && ls.fs_in_ftilde;
    rep.rows.push_back({Cell::of(n), n < p.depth() ? Cell::of(p.r[n]) : Cell::of(""), Cell::of(p.a[n]),
                        Cell::of(p.b[n]), Cell::of(p.atilde[n]), Cell::of(ls.F.measure()), Cell::of(ls.S.measure()),
                        Cell::of(ls.Ftilde.measure()), n < p.depth() ? Cell::of(diag[n]) : Cell::of(""),
                        Cell::of(Rational(core_set(p, n).measure() / ls.F.measure()))});
  }
  rep.add_check("level_sets", level_ok, "S ⊆ F and FS = SF ⊆ F~ at every level");
  for (int n = 0; n < p.depth(); ++n) {
    for (auto grid : {TilingGrid::I, TilingGrid::H}) {
      const TilingReport t = verify_tiling(p, n, grid);
      const std::string name = std::string(grid == TilingGrid::I ? "tiling_S" : "tiling_F") + std::to_string(n + 1);
      rep.add_check(name, t.disjoint && t.equals_target && t.left_right_agree,
                    std::to_string(t.copies) + " copies, measure " + to_exact_string(t.measure));
    }
  }
  if (!maps.empty()) {
    const CfReport cf = verify_cf_conditions(p, maps);
    for (const auto& l : cf.levels) {
      rep.add_check("cf_level_" + std::to_string(l.n), l.cf2 && l.cf3 && l.cf4,
                    "|C|=" + std::to_string(l.spacer_count) + " distinct=" + std::to_string(l.distinct));
    }
    for (const auto& f : cf.failures)
      rep.notices.push_back("level " + std::to_string(f.n) + " " + f.condition + ": " + f.detail);
    for (const GroupElement& g : {GroupElement(1, 0, 0), GroupElement(-1, 0, 0), GroupElement(0, make_rational(1, 2), 0),
                                  GroupElement(0, make_rational(-1, 2), 0), GroupElement(0, 0, 1)}) {
      const GapReport gap = cfgap_query(p, maps, g);
      std::string slack;
      for (const auto& l : gap.levels)
        slack += (slack.empty() ? "" : " ") + std::to_string(l.n) + ":" + std::to_string(l.int_excess) + "/" +
                 to_exact_string(l.real_excess);
      rep.summary.push_back({"cfgap " + str(g), gap.least_level ? Cell::of(*gap.least_level) : Cell::of("none")});
      rep.summary.push_back({"cfgap_slack " + str(g), Cell::of(slack)});
    }
  }
  return rep;
}

ExperimentReport factor_check(const MeasureContext& ctx, std::span<const Rational> b_values, std::size_t samples,
                              std::uint64_t seed, Exec exec) {
  ExperimentReport rep;
  rep.experiment = "factor";
  rep.seed = seed;
  rep.columns = {"b", "samples", "involution", "commutes", "key_invariant", "two_point_fibres", "tail_failures"};
  const GroupElement t1(1, 0, 0);
  struct Flags {
    bool inv = false, comm = false, key = false, two = false, tail = false;
  };
  for (std::size_t bi = 0; bi < b_values.size(); ++bi) {
    const Rational& b = b_values[bi];
    if (b == 0) throw std::invalid_argument("S_0 is excluded: G_0 is not maximal compact");
    auto flags = map_indexed<Flags>(
        samples,
        [&](std::size_t k) {
          Flags f;
          Rng rng = Rng::stream(seed, k, 0xfac0ULL + bi);
          const PointExpansion x = sample_point(ctx, 0, rng);
          try {
            const PointExpansion sx = involution_apply(ctx, b, x);
            f.inv = same_point(ctx, involution_apply(ctx, b, sx), x);
            f.comm = same_point(ctx, involution_apply(ctx, b, act(ctx, t1, x)), act(ctx, t1, sx));
            f.key = factor_key(ctx, b, x) == factor_key(ctx, b, sx);
            f.two = !same_point(ctx, sx, x);
          } catch (const NeedsDeeperTail&) {
            f.tail = true;
          }
          return f;
        },
        exec);
    std::size_t inv = 0, comm = 0, key = 0, two = 0, tail = 0;
    for (const auto& f : flags) {
      inv += f.inv;
      comm += f.comm;
      key += f.key;
      two += f.two;
      tail += f.tail;
    }
    rep.rows.push_back({Cell::of(b), Cell::of(samples), Cell::of(inv), Cell::of(comm), Cell::of(key), Cell::of(two),
                        Cell::of(tail)});
    const std::string tag = "b=" + to_exact_string(b);
    rep.add_check(tag + " involution", inv == samples);
    rep.add_check(tag + " commutes_with_T(1,0,0)", comm == samples);
    rep.add_check(tag + " factor_key", key == samples && two == samples);
  }
  return rep;
}

}  // namespace cfsim
