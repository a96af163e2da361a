#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vesselplan/graph.hpp"
#include "vesselplan/rng.hpp"

namespace vplan {

struct PhantomConfig {
  int size = 256;
  int n_crossings = 2;           // >= 2 plants one reconnecting decoy (2 crossings)
  double angle_min_deg = 20.0;   // vessel crossing angle range
  double angle_max_deg = 90.0;
  double main_width = 5.0;
  double decoy_width_jitter = 0.2;  // decoy width in main_width * [1 -/+ jitter]
  double shortcut_fraction = 0.5;   // chance the decoy bow is the pixel-shorter route
  double hard_fraction = 0.35;      // chance the first crossing kinks against the heuristic
  double noise = 0.02;
  double blur_sigma = 1.2;
  Spacing spacing;
  // Suite generation pins these per scene so realized fractions track the
  // configured ones exactly; unset means sample per scene.
  std::optional<bool> force_shortcut;
  std::optional<bool> force_hard;

  void validate() const {
    if (size < 128) throw InvalidParameter("phantom: image size must be >= 128");
    if (n_crossings < 0) throw InvalidParameter("phantom: n_crossings must be >= 0");
    if (!(angle_min_deg > 0 && angle_min_deg <= angle_max_deg && angle_max_deg <= 90.0))
      throw InvalidParameter("phantom: crossing angles must satisfy 0 < min <= max <= 90");
    if (main_width < 3.0) throw InvalidParameter("phantom: main width must be >= 3 px");
    if (decoy_width_jitter < 0.0 || decoy_width_jitter > 0.5)
      throw InvalidParameter("phantom: decoy width jitter must lie in [0, 0.5]");
    if (shortcut_fraction < 0.0 || shortcut_fraction > 1.0 || hard_fraction < 0.0 ||
        hard_fraction > 1.0)
      throw InvalidParameter("phantom: fractions must lie in [0, 1]");
    spacing.validate();
  }
};

struct CrossingTruth {
  int node = -1;     // degree-4 crossing node in the truth graph
  int in_edge = -1;  // correct pairing: arrive on in_edge, leave on out_edge
  int out_edge = -1;
};

struct PhantomScene {
  Grid intensity;
  BinaryMask mask;
  VesselGraph truth;               // every edge labeled
  std::vector<int> true_path;      // edge ids, source to target
  std::vector<CrossingTruth> crossings;
  int source = -1;
  int target = -1;
  uint64_t seed = 0;
  bool has_shortcut = false;       // decoy route strictly pixel-shorter by construction
  bool hard_crossing = false;      // first crossing kinks the main against the heuristic
  double main_route_len = 0.0;     // between the two crossings, where applicable
  double decoy_route_len = 0.0;
};

namespace detail {

using Vec2 = std::array<double, 2>;  // (x, y) = (col, row)

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a[0], s * a[1]}; }
inline double vnorm(Vec2 a) { return std::hypot(a[0], a[1]); }
inline Vec2 vunit(Vec2 a) {
  double n = vnorm(a);
  return n > 0 ? Vec2{a[0] / n, a[1] / n} : Vec2{0, 0};
}
inline Vec2 vrot(Vec2 v, double ang) {
  double c = std::cos(ang), s = std::sin(ang);
  return {v[0] * c - v[1] * s, v[0] * s + v[1] * c};
}

inline std::vector<Vec2> sample_cubic(Vec2 p0, Vec2 d0, Vec2 p3, Vec2 d3) {
  double chord = vnorm(p3 - p0);
  double k = 0.38 * chord;
  Vec2 p1 = p0 + k * d0;
  Vec2 p2 = p3 - k * d3;
  int n = std::max(10, static_cast<int>(std::ceil(chord * 3.0)));
  std::vector<Vec2> pts;
  pts.reserve(n + 1);
  for (int i = 0; i <= n; ++i) {
    double t = static_cast<double>(i) / n;
    double mt = 1.0 - t;
    Vec2 q = (mt * mt * mt) * p0 + (3 * mt * mt * t) * p1 + (3 * mt * t * t) * p2 + (t * t * t) * p3;
    pts.push_back(q);
  }
  return pts;
}

inline std::vector<Vec2> sample_straight(Vec2 p0, Vec2 p1) {
  double len = vnorm(p1 - p0);
  int n = std::max(2, static_cast<int>(std::ceil(len * 3.0)));
  std::vector<Vec2> pts;
  pts.reserve(n + 1);
  for (int i = 0; i <= n; ++i) {
    double t = static_cast<double>(i) / n;
    pts.push_back(p0 + t * (p1 - p0));
  }
  return pts;
}

inline void append(std::vector<Vec2>& dst, const std::vector<Vec2>& src) {
  for (const Vec2& p : src) {
    if (!dst.empty() && vnorm(p - dst.back()) < 1e-9) continue;
    dst.push_back(p);
  }
}

inline double polyline_length(const std::vector<Vec2>& pts) {
  double len = 0.0;
  for (size_t i = 0; i + 1 < pts.size(); ++i) len += vnorm(pts[i + 1] - pts[i]);
  return len;
}

// Resample at a fixed arc-length step (keeps the final point).
inline std::vector<Vec2> resample(const std::vector<Vec2>& pts, double step) {
  std::vector<Vec2> out;
  if (pts.empty()) return out;
  out.push_back(pts.front());
  double carried = 0.0;
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    Vec2 a = pts[i], b = pts[i + 1];
    double seg = vnorm(b - a);
    if (seg <= 0) continue;
    double t = step - carried;
    while (t <= seg) {
      out.push_back(a + (t / seg) * (b - a));
      t += step;
    }
    carried = seg - (t - step);
  }
  if (vnorm(out.back() - pts.back()) > 1e-9) out.push_back(pts.back());
  return out;
}

// Integer pixel chain along a dense polyline, 8-connected, no immediate
// repeats or backtracks.
inline std::vector<Pixel> rasterize_chain(const std::vector<Vec2>& pts) {
  std::vector<Pixel> chain;
  for (const Vec2& q : resample(pts, 0.4)) {
    Pixel p{static_cast<int>(std::lround(q[1])), static_cast<int>(std::lround(q[0]))};
    if (!chain.empty() && chain.back() == p) continue;
    if (chain.size() >= 2 && chain[chain.size() - 2] == p) {
      chain.pop_back();
      continue;
    }
    chain.push_back(p);
  }
  return chain;
}

struct VesselStroke {
  std::vector<Vec2> pts;
  double width = 5.0;
  double intensity = 0.85;
};

struct GeomNode {
  Vec2 pos;
};

struct GeomEdge {
  int a = -1;
  int b = -1;
  std::vector<Vec2> pts;  // from node a to node b
  bool traversable = false;
};

struct SceneGeometry {
  std::vector<GeomNode> nodes;
  std::vector<GeomEdge> edges;
  std::vector<std::array<int, 3>> crossings;  // node, in-edge, out-edge (geometry indices)
  std::vector<int> true_path;                 // geometry edge indices
  std::vector<VesselStroke> strokes;
  int source = -1;
  int target = -1;
  bool has_shortcut = false;
  bool hard_crossing = false;
  double main_route_len = 0.0;
  double decoy_route_len = 0.0;
};

// Minimum distance between two dense polylines, ignoring points within
// `exclude_radius` of any of the given centers (shared crossing points).
inline double min_separation(const std::vector<Vec2>& a, const std::vector<Vec2>& b,
                             const std::vector<Vec2>& centers, double exclude_radius) {
  auto excluded = [&](const Vec2& p) {
    for (const Vec2& c : centers)
      if (vnorm(p - c) < exclude_radius) return true;
    return false;
  };
  std::vector<Vec2> pa = resample(a, 1.5), pb = resample(b, 1.5);
  double best = 1e300;
  for (const Vec2& p : pa) {
    if (excluded(p)) continue;
    for (const Vec2& q : pb) {
      if (excluded(q)) continue;
      best = std::min(best, vnorm(p - q));
    }
  }
  return best;
}

}  // namespace detail

inline PhantomScene generate_scene(uint64_t seed, const PhantomConfig& cfg = {});

namespace detail {

// One layout attempt in the canonical frame (main flows +x), then globally
// rotated. Returns nothing when a constraint fails; the caller retries.
inline std::optional<SceneGeometry> build_geometry(Rng& rng, const PhantomConfig& cfg,
                                                   std::string& fail_reason) {
  auto fail = [&fail_reason](const char* why) {
    fail_reason = why;
    return std::nullopt;
  };
  const double S = cfg.size;
  const double margin = 14.0;
  const Vec2 center{S / 2.0, S / 2.0};
  const double deg = M_PI / 180.0;

  SceneGeometry geo;
  const double rot = rng.uniform(0.0, 2.0 * M_PI);
  const bool flip = rng.bernoulli(0.5);
  auto place = [&](Vec2 p) {
    Vec2 q = p - center;
    if (flip) q[1] = -q[1];
    return center + vrot(q, rot);
  };

  const bool reconnect = cfg.n_crossings >= 2;
  // Crossings beyond the reconnecting pair become transversal single-cross
  // decoys threaded onto a straight stretch of the entry run.
  const int n_extra = reconnect ? cfg.n_crossings - 2 : cfg.n_crossings;

  const double sep = reconnect ? rng.uniform(58.0, 78.0) : 24.0;
  const double entry_len = rng.uniform(56.0, 72.0) + 70.0 * n_extra;
  const double exit_len = reconnect ? rng.uniform(52.0, 68.0) : rng.uniform(40.0, 52.0);
  // Center the whole horizontal span before the global rotation.
  const double x1 = S / 2.0 + (entry_len - sep - exit_len) / 2.0;
  const double yc = S / 2.0 + rng.uniform(-10.0, 10.0);
  const Vec2 u{1.0, 0.0};

  const double w_main = cfg.main_width;
  const double main_intensity = rng.uniform(0.78, 0.90);

  // Main anchor points (canonical frame).
  const Vec2 c1{x1, yc};
  const Vec2 c2{x1 + sep, yc};
  const Vec2 a_pt{x1 - entry_len, yc + rng.uniform(-16.0, 16.0)};
  const Vec2 b_pt{x1 + sep + exit_len, yc + rng.uniform(-16.0, 16.0)};

  geo.hard_crossing =
      reconnect && (cfg.force_hard ? *cfg.force_hard : rng.bernoulli(cfg.hard_fraction));
  geo.has_shortcut =
      reconnect && (cfg.force_shortcut ? *cfg.force_shortcut : rng.bernoulli(cfg.shortcut_fraction));

  // Hard scenes mirror the narrow-angle failure mode: the main kinks at the
  // crossing while the decoy runs nearly straight on, so a continuation-angle
  // rule prefers the decoy. Narrow angles only; a >90-degree kink would be
  // anatomically absurd.
  const double g1_hi = geo.hard_crossing ? std::min(cfg.angle_min_deg + 15.0, cfg.angle_max_deg)
                                         : cfg.angle_max_deg;
  const double gamma1 = rng.uniform(cfg.angle_min_deg, g1_hi) * deg;
  const double gamma2 = rng.uniform(cfg.angle_min_deg, cfg.angle_max_deg) * deg;
  const double delta1 = rng.uniform(3.0, 8.0) * deg;   // decoy bow departure angles
  const double delta2 = rng.uniform(3.0, 8.0) * deg;
  const double mu1 = std::max(gamma1 - delta1, 10.0 * deg);  // main bulge departure
  const double mu2 = std::max(gamma2 - delta2, 10.0 * deg);

  const double bulge_h = geo.has_shortcut ? rng.uniform(32.0, 44.0) : rng.uniform(9.0, 13.0);
  const double bow_h = geo.has_shortcut ? rng.uniform(9.0, 13.0) : rng.uniform(32.0, 44.0);
  const double run = 15.0;       // decoy straight clearance around each crossing
  const double run_main = 38.0;  // main straight clearance; keeps the entry and
                                 // exit clear of the decoy tails

  // Directions at the first crossing.
  const Vec2 decoy_dir1 = vrot(u, delta1);                 // decoy heads slightly down
  const Vec2 main_out1 = vrot(u, -mu1);                    // main climbs into the bulge
  const double hard_rho = rng.uniform(23.0, 28.0) * deg;   // arrival-vs-decoy turn when hard
  const Vec2 main_in1 = geo.hard_crossing ? vrot(decoy_dir1, hard_rho) : main_out1;
  // At the second crossing the main passes straight through.
  const Vec2 main_dir2 = vrot(u, mu2);                     // descending out of the bulge
  const Vec2 decoy_dir2 = vrot(u, -delta2);                // decoy rises back to c2

  auto in_bounds = [&](const std::vector<Vec2>& pts) {
    for (const Vec2& p : pts) {
      Vec2 q = place(p);
      if (q[0] < margin || q[0] > S - 1 - margin || q[1] < margin || q[1] > S - 1 - margin)
        return false;
    }
    return true;
  };

  // --- node and edge assembly -------------------------------------------
  auto add_node = [&](Vec2 p) {
    geo.nodes.push_back({place(p)});
    return static_cast<int>(geo.nodes.size()) - 1;
  };
  auto add_edge = [&](int a, int b, std::vector<Vec2> pts, bool traversable) {
    for (Vec2& p : pts) p = place(p);
    geo.edges.push_back({a, b, std::move(pts), traversable});
    return static_cast<int>(geo.edges.size()) - 1;
  };

  const int id_a = add_node(a_pt);

  // Entry section, optionally threaded through extra single-cross decoys on a
  // straight run.
  std::vector<Vec2> entry_pts;
  std::vector<Vec2> extra_centers;
  std::vector<double> extra_angles;
  {
    Vec2 approach = c1 - run_main * main_in1;
    if (n_extra > 0) {
      Vec2 run_dir = vunit(approach - a_pt);
      double run_len = vnorm(approach - a_pt);
      double back = 15.0 + 48.0 * n_extra;  // extras every 48 px, clear of the approach
      if (run_len < back + 25.0) return fail("entry too short for extra crossings");
      Vec2 run_start = approach - back * run_dir;
      std::vector<Vec2> lead =
          sample_cubic(a_pt, vunit(Vec2{1.0, rng.uniform(-0.45, 0.45)}), run_start, run_dir);
      entry_pts = lead;
      for (int k = 0; k < n_extra; ++k) {
        Vec2 ck = run_start + (24.0 + 48.0 * k) * run_dir;
        extra_centers.push_back(ck);
        extra_angles.push_back(rng.uniform(cfg.angle_min_deg, cfg.angle_max_deg) * deg);
      }
      append(entry_pts, sample_straight(run_start, approach));
      append(entry_pts, sample_straight(approach, c1));
    } else {
      entry_pts = sample_cubic(a_pt, vunit(Vec2{1.0, rng.uniform(-0.45, 0.45)}), approach, main_in1);
      append(entry_pts, sample_straight(approach, c1));
    }
  }

  if (!reconnect && cfg.n_crossings == 0 && n_extra == 0) {
    // Plain wavy chain.
    std::vector<Vec2> pts = entry_pts;
    append(pts, sample_cubic(c1, u, c2, u));
    append(pts, sample_cubic(c2, u, b_pt, vunit(Vec2{1.0, rng.uniform(-0.35, 0.35)})));
    if (!in_bounds(pts)) return fail("main polyline out of bounds");
    int id_b = add_node(b_pt);
    int e = add_edge(id_a, id_b, pts, true);
    geo.true_path = {e};
    geo.source = id_a;
    geo.target = id_b;
    geo.strokes.push_back({geo.edges[e].pts, w_main, main_intensity});
    return geo;
  }

  // Split the entry at extra crossing points.
  std::vector<int> main_node_seq{id_a};
  std::vector<std::vector<Vec2>> main_sections;
  if (n_extra > 0) {
    std::vector<Vec2> cur;
    size_t ci = 0;
    for (const Vec2& p : entry_pts) {
      cur.push_back(p);
      if (ci < extra_centers.size() && vnorm(p - extra_centers[ci]) < 1e-9) {
        main_sections.push_back(cur);
        cur = {p};
        ++ci;
      }
    }
    // Points were generated by sample_straight, which does not necessarily
    // hit the centers exactly; insert them instead.
    if (main_sections.size() != extra_centers.size()) {
      main_sections.clear();
      cur.clear();
      ci = 0;
      for (size_t i = 0; i + 1 < entry_pts.size(); ++i) {
        cur.push_back(entry_pts[i]);
        while (ci < extra_centers.size()) {
          Vec2 a = entry_pts[i], b = entry_pts[i + 1];
          double seg = vnorm(b - a);
          double t = seg > 0 ? ((extra_centers[ci][0] - a[0]) * (b[0] - a[0]) +
                                (extra_centers[ci][1] - a[1]) * (b[1] - a[1])) /
                                   (seg * seg)
                             : -1.0;
          if (t >= 0.0 && t < 1.0 && vnorm(a + t * (b - a) - extra_centers[ci]) < 0.75) {
            cur.push_back(extra_centers[ci]);
            main_sections.push_back(cur);
            cur = {extra_centers[ci]};
            ++ci;
          } else {
            break;
          }
        }
      }
      cur.push_back(entry_pts.back());
      if (ci != extra_centers.size()) return fail("could not thread extra crossings onto the entry run");
      main_sections.push_back(cur);
    } else {
      main_sections.push_back(cur);
    }
  } else {
    main_sections.push_back(entry_pts);
  }

  for (const Vec2& ck : extra_centers) main_node_seq.push_back(add_node(ck));

  int id_c1 = -1, id_t = -1, id_c2 = -1, id_b = -1;
  const Vec2 apex{(c1[0] + c2[0]) / 2.0, yc - bulge_h};
  const Vec2 bow_apex{(c1[0] + c2[0]) / 2.0, yc + bow_h};

  if (reconnect) {
    id_c1 = add_node(c1);
    id_t = add_node(apex);
    id_c2 = add_node(c2);
  } else {
    // Single-crossing family: the last extra center IS the sole crossing, and
    // the main runs straight on to B.
  }
  id_b = add_node(b_pt);

  // Main edges: entry sections up to c1 (or b for the single-cross family).
  std::vector<int> path_edges;
  {
    int terminal = reconnect ? id_c1 : id_b;
    std::vector<int> seq = main_node_seq;
    seq.push_back(terminal);
    for (size_t s = 0; s < main_sections.size(); ++s) {
      std::vector<Vec2> pts = main_sections[s];
      if (!reconnect && s + 1 == main_sections.size()) {
        append(pts, sample_cubic(c1, u, b_pt, vunit(Vec2{1.0, rng.uniform(-0.35, 0.35)})));
      }
      if (!in_bounds(pts)) return fail("entry section out of bounds");
      path_edges.push_back(add_edge(seq[s], seq[s + 1], pts, true));
    }
  }

  std::vector<VesselStroke> decoy_strokes;

  if (reconnect) {
    // Bulge: c1 -> apex (with the twig) -> c2, then exit to b.
    std::vector<Vec2> bulge_up = sample_straight(c1, c1 + run * main_out1);
    append(bulge_up, sample_cubic(c1 + run * main_out1, main_out1, apex, u));
    std::vector<Vec2> bulge_down = sample_cubic(apex, u, c2 - run * main_dir2, main_dir2);
    append(bulge_down, sample_straight(c2 - run * main_dir2, c2));
    std::vector<Vec2> exit_pts = sample_straight(c2, c2 + run_main * main_dir2);
    append(exit_pts, sample_cubic(c2 + run_main * main_dir2, main_dir2, b_pt,
                                  vunit(Vec2{1.0, rng.uniform(-0.35, 0.35)})));
    if (!in_bounds(bulge_up) || !in_bounds(bulge_down) || !in_bounds(exit_pts))
      return fail("bulge/exit section out of bounds");

    int e_up = add_edge(id_c1, id_t, bulge_up, true);
    int e_down = add_edge(id_t, id_c2, bulge_down, true);
    int e_exit = add_edge(id_c2, id_b, exit_pts, true);
    path_edges.push_back(e_up);
    path_edges.push_back(e_down);
    path_edges.push_back(e_exit);

    // Twig: a true bifurcation on the bulge apex, pointing away from the bow.
    double twig_ang = rng.uniform(55.0, 115.0) * deg;
    Vec2 twig_dir = vrot(u, -twig_ang);
    double twig_len = rng.uniform(26.0, 40.0);
    Vec2 twig_end = apex + twig_len * twig_dir;
    std::vector<Vec2> twig_pts =
        sample_cubic(apex, twig_dir, twig_end, vrot(twig_dir, rng.uniform(-0.3, 0.3)));
    if (!in_bounds(twig_pts)) return fail("twig out of bounds");
    int id_twig = add_node(twig_end);
    int e_twig = add_edge(id_t, id_twig, twig_pts, true);
    geo.strokes.push_back({geo.edges[e_twig].pts, std::max(3.0, 0.62 * w_main), main_intensity});

    // Decoy: tail1 -> c1 -> bow -> c2 -> tail2.
    double w_decoy = w_main * (1.0 + rng.uniform(-cfg.decoy_width_jitter, cfg.decoy_width_jitter));
    double decoy_intensity = rng.uniform(0.55, 0.68);
    double tail1_len = rng.uniform(26.0, 34.0);
    double tail2_len = rng.uniform(26.0, 34.0);
    Vec2 tail1_end = c1 - tail1_len * decoy_dir1;
    Vec2 tail2_end = c2 + tail2_len * decoy_dir2;
    std::vector<Vec2> tail1 = sample_straight(tail1_end, c1);
    std::vector<Vec2> bow = sample_straight(c1, c1 + run * decoy_dir1);
    append(bow, sample_cubic(c1 + run * decoy_dir1, decoy_dir1, bow_apex, u));
    append(bow, sample_cubic(bow_apex, u, c2 - run * decoy_dir2, decoy_dir2));
    append(bow, sample_straight(c2 - run * decoy_dir2, c2));
    std::vector<Vec2> tail2 = sample_straight(c2, tail2_end);
    if (!in_bounds(tail1) || !in_bounds(bow) || !in_bounds(tail2)) return fail("decoy out of bounds");

    int id_tail1 = add_node(tail1_end);
    int id_tail2 = add_node(tail2_end);
    int e_tail1 = add_edge(id_tail1, id_c1, tail1, false);
    int e_bow = add_edge(id_c1, id_c2, bow, false);
    int e_tail2 = add_edge(id_c2, id_tail2, tail2, false);

    decoy_strokes.push_back({geo.edges[e_tail1].pts, w_decoy, decoy_intensity});
    decoy_strokes.push_back({geo.edges[e_bow].pts, w_decoy, decoy_intensity});
    decoy_strokes.push_back({geo.edges[e_tail2].pts, w_decoy, decoy_intensity});

    // Route-length bookkeeping between the crossings.
    geo.main_route_len = polyline_length(geo.edges[e_up].pts) +
                         polyline_length(geo.edges[e_down].pts);
    geo.decoy_route_len = polyline_length(geo.edges[e_bow].pts);
    if (geo.has_shortcut && geo.main_route_len < 1.10 * geo.decoy_route_len)
      return fail("shortcut margin: decoy not sufficiently shorter");
    if (!geo.has_shortcut && geo.decoy_route_len < 1.10 * geo.main_route_len)
      return fail("length margin: decoy not sufficiently longer");

    // Crossing records: the main-in / main-out pairing.
    size_t k_c1 = main_sections.size() - 1;  // last entry edge ends at c1
    geo.crossings.push_back({id_c1, path_edges[k_c1], e_up});
    geo.crossings.push_back({id_c2, e_down, e_exit});

    // Separation: the bulge and the bow must not merge away from crossings,
    // the twig must stay clear of the decoy, tails clear of the entry.
    std::vector<Vec2> bulge_all = geo.edges[e_up].pts;
    append(bulge_all, geo.edges[e_down].pts);
    std::vector<Vec2> bow_world = geo.edges[e_bow].pts;
    std::vector<Vec2> cross_pts{place(c1), place(c2)};
    double need = 0.5 * (w_main + w_decoy) + 1.5;
    if (min_separation(bulge_all, bow_world, cross_pts, 1.5 * run) < need)
      return fail("bulge/bow separation");
    if (min_separation(geo.edges[e_twig].pts, bow_world, cross_pts, 0.0) < need)
      return fail("twig/decoy separation");
    std::vector<Vec2> entry_world = geo.edges[path_edges[k_c1]].pts;
    if (min_separation(entry_world, geo.edges[e_tail1].pts, cross_pts, 1.5 * run) < need)
      return fail("entry/tail separation");
    std::vector<Vec2> exit_world = geo.edges[e_exit].pts;
    if (min_separation(exit_world, geo.edges[e_tail2].pts, cross_pts, 1.5 * run) < need)
      return fail("exit/tail separation");
  }

  // Extra transversal single-cross decoys on the entry run.
  for (size_t k = 0; k < extra_centers.size(); ++k) {
    size_t section = k;  // crossing node after section k
    int node_id = main_node_seq[k + 1];
    Vec2 ck = extra_centers[k];
    Vec2 main_dir = vunit(entry_pts.back() - entry_pts.front());
    // Direction of the main at the crossing is the straight run direction.
    if (n_extra > 0) {
      // straight run dir: from section polyline around the center
      const std::vector<Vec2>& sec = main_sections[section];
      if (sec.size() >= 2) main_dir = vunit(sec.back() - sec[sec.size() - 2]);
    }
    double ang = extra_angles[k];
    double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
    Vec2 dir = vrot(main_dir, side * ang);
    double t1 = rng.uniform(26.0, 34.0), t2 = rng.uniform(26.0, 34.0);
    Vec2 end1 = ck - t1 * dir, end2 = ck + t2 * dir;
    std::vector<Vec2> seg1 = sample_straight(end1, ck);
    std::vector<Vec2> seg2 = sample_straight(ck, end2);
    if (!in_bounds(seg1) || !in_bounds(seg2)) return fail("transversal decoy out of bounds");
    double w_decoy = w_main * (1.0 + rng.uniform(-cfg.decoy_width_jitter, cfg.decoy_width_jitter));
    double decoy_intensity = rng.uniform(0.55, 0.68);
    int id_e1 = add_node(end1);
    int id_e2 = add_node(end2);
    int eg1 = add_edge(id_e1, node_id, seg1, false);
    int eg2 = add_edge(node_id, id_e2, seg2, false);
    decoy_strokes.push_back({geo.edges[eg1].pts, w_decoy, decoy_intensity});
    decoy_strokes.push_back({geo.edges[eg2].pts, w_decoy, decoy_intensity});
    geo.crossings.push_back({node_id, path_edges[section], path_edges[section + 1]});
    // Keep the transversal clear of everything except its own crossing.
    std::vector<Vec2> both = geo.edges[eg1].pts;
    append(both, geo.edges[eg2].pts);
    std::vector<Vec2> cross_pts{place(ck)};
    double need = 0.5 * (w_main + w_decoy) + 1.5;
    for (size_t s = 0; s < main_sections.size(); ++s) {
      std::vector<Vec2> world = geo.edges[path_edges[s]].pts;
      if (min_separation(world, both, cross_pts, 1.5 * run) < need)
        return fail("transversal separation from main");
    }
  }

  // Main stroke covers the whole traversable sequence.
  {
    std::vector<Vec2> main_all;
    for (int e : path_edges) append(main_all, geo.edges[e].pts);
    geo.strokes.push_back({main_all, w_main, main_intensity});
  }
  for (VesselStroke& s : decoy_strokes) geo.strokes.push_back(std::move(s));

  geo.true_path = path_edges;
  geo.source = id_a;
  geo.target = id_b;

  // All node positions must land on distinct pixels, comfortably apart.
  for (size_t i = 0; i < geo.nodes.size(); ++i)
    for (size_t j = i + 1; j < geo.nodes.size(); ++j)
      if (vnorm(geo.nodes[i].pos - geo.nodes[j].pos) < 24.0)
        return fail("key nodes closer than 24 px");
  return geo;
}

inline void render_scene(const SceneGeometry& geo, const PhantomConfig& cfg, Rng& rng,
                         BinaryMask& mask, Grid& intensity) {
  const int S = cfg.size;
  mask = BinaryMask(S, S, cfg.spacing);
  Grid accum(S, S, cfg.spacing, 0.08);  // background level

  for (const VesselStroke& stroke : geo.strokes) {
    const double radius = stroke.width / 2.0;
    const int ir = static_cast<int>(std::ceil(radius));
    for (const Vec2& q : resample(stroke.pts, 0.4)) {
      int cr = static_cast<int>(std::lround(q[1]));
      int cc = static_cast<int>(std::lround(q[0]));
      for (int r = cr - ir; r <= cr + ir; ++r)
        for (int c = cc - ir; c <= cc + ir; ++c) {
          if (r < 0 || r >= S || c < 0 || c >= S) continue;
          double d2 = (r - q[1]) * (r - q[1]) + (c - q[0]) * (c - q[0]);
          if (d2 <= radius * radius) {
            mask.at(r, c) = 1;
            accum.at(r, c) = std::max(accum.at(r, c), stroke.intensity);
          }
        }
    }
  }

  // Separable Gaussian blur.
  const double sigma = cfg.blur_sigma;
  const int kr = std::max(1, static_cast<int>(std::ceil(2.5 * sigma)));
  std::vector<double> kernel(2 * kr + 1);
  double ksum = 0.0;
  for (int i = -kr; i <= kr; ++i) {
    kernel[i + kr] = std::exp(-0.5 * i * i / (sigma * sigma));
    ksum += kernel[i + kr];
  }
  for (double& k : kernel) k /= ksum;

  Grid tmp(S, S, cfg.spacing);
  for (int r = 0; r < S; ++r)
    for (int c = 0; c < S; ++c) {
      double v = 0.0;
      for (int i = -kr; i <= kr; ++i)
        v += kernel[i + kr] * accum.at(r, std::clamp(c + i, 0, S - 1));
      tmp.at(r, c) = v;
    }
  intensity = Grid(S, S, cfg.spacing);
  for (int r = 0; r < S; ++r)
    for (int c = 0; c < S; ++c) {
      double v = 0.0;
      for (int i = -kr; i <= kr; ++i)
        v += kernel[i + kr] * tmp.at(std::clamp(r + i, 0, S - 1), c);
      v += cfg.noise * (2.0 * rng.uniform() - 1.0);
      v = std::clamp(v, 0.0, 1.0);
      // Quantize to 8 bits so the on-disk PNG round-trips losslessly.
      intensity.at(r, c) = std::lround(v * 255.0) / 255.0;
    }
}

}  // namespace detail

inline PhantomScene generate_scene(uint64_t seed, const PhantomConfig& cfg) {
  cfg.validate();
  constexpr int kMaxAttempts = 60;
  std::string last_fail = "n/a";
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(derive_seed(seed, 7919 + attempt));
    std::optional<detail::SceneGeometry> geo = detail::build_geometry(rng, cfg, last_fail);
    if (!geo) continue;

    PhantomScene scene;
    scene.seed = seed;
    scene.has_shortcut = geo->has_shortcut;
    scene.hard_crossing = geo->hard_crossing;
    scene.main_route_len = geo->main_route_len;
    scene.decoy_route_len = geo->decoy_route_len;
    detail::render_scene(*geo, cfg, rng, scene.mask, scene.intensity);

    // Truth graph from the geometry.
    VesselGraph g;
    g.width = cfg.size;
    g.height = cfg.size;
    g.spacing = cfg.spacing;
    g.provenance = "phantom";
    std::vector<Pixel> node_px(geo->nodes.size());
    for (size_t i = 0; i < geo->nodes.size(); ++i) {
      Pixel p{static_cast<int>(std::lround(geo->nodes[i].pos[1])),
              static_cast<int>(std::lround(geo->nodes[i].pos[0]))};
      node_px[i] = p;
      g.nodes.push_back({static_cast<int>(i), p, NodeKind::endpoint, 0, {p}});
    }
    for (size_t i = 0; i < geo->edges.size(); ++i) {
      const detail::GeomEdge& ge = geo->edges[i];
      std::vector<Pixel> chain = detail::rasterize_chain(ge.pts);
      // Strip the node pixels from both ends.
      while (!chain.empty() && chain.front() == node_px[ge.a]) chain.erase(chain.begin());
      while (!chain.empty() && chain.back() == node_px[ge.b]) chain.pop_back();
      VesselEdge e;
      e.id = static_cast<int>(i);
      e.node_a = ge.a;
      e.node_b = ge.b;
      e.chain = std::move(chain);
      e.label = ge.traversable ? EdgeLabel::traversable : EdgeLabel::non_traversable;
      g.edges.push_back(std::move(e));
    }
    VesselGraph::IdMaps maps = g.normalize();
    for (KeyNode& n : g.nodes)
      n.kind = n.degree >= 3 ? NodeKind::bifurcation : NodeKind::endpoint;
    scene.truth = std::move(g);
    scene.source = maps.node_map[geo->source];
    scene.target = maps.node_map[geo->target];
    for (int e : geo->true_path) scene.true_path.push_back(maps.edge_map[e]);
    for (const auto& [node, ein, eout] : geo->crossings)
      scene.crossings.push_back(
          {maps.node_map[node], maps.edge_map[ein], maps.edge_map[eout]});
    return scene;
  }
  throw GenerationError("phantom: could not satisfy layout constraint after " +
                        std::to_string(kMaxAttempts) + " attempts (last failure: " + last_fail +
                        "); try a larger image size or fewer crossings");
}

}  // namespace vplan
