#include "fpfgnn/factor_graph.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fpfgnn {

namespace {

int relation_slot(RelationType r) { return 1 + static_cast<int>(r); }

int kind_arity_rule(const FactorKind& kind, int variable_count) {
  if (std::holds_alternative<BoxFactor>(kind)) return 4;
  if (std::holds_alternative<RelationFactor>(kind)) return 2;
  return variable_count;
}

std::string factor_label(std::size_t id) { return "factor " + std::to_string(id); }

}  // namespace

std::string_view coord_kind_name(CoordKind k) {
  switch (k) {
    case CoordKind::XMin: return "x_min";
    case CoordKind::XMax: return "x_max";
    case CoordKind::YMin: return "y_min";
    case CoordKind::YMax: return "y_max";
  }
  return "?";
}

int factor_kind_slot(const FactorKind& kind) {
  return std::visit(
      [](const auto& f) -> int {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, BoxFactor>) return 0;
        if constexpr (std::is_same_v<F, RelationFactor>) return relation_slot(f.relation);
        if constexpr (std::is_same_v<F, BoundaryFactor>) return 11;
        return 12;
      },
      kind);
}

std::vector<RelationTemplate> relation_factor_templates(RelationType rel, bool amend_inside_factor) {
  using K = CoordKind;
  switch (rel) {
    case RelationType::LeftOf: return {{K::XMax, K::XMin}};
    case RelationType::RightOf: return {{K::XMin, K::XMax}};
    case RelationType::Above: return {{K::YMax, K::YMin}};
    case RelationType::Below: return {{K::YMin, K::YMax}};
    case RelationType::LeftAbove: return {{K::XMax, K::XMin}, {K::YMax, K::YMin}};
    case RelationType::RightAbove: return {{K::XMin, K::XMax}, {K::YMax, K::YMin}};
    case RelationType::LeftBelow: return {{K::XMax, K::XMin}, {K::YMin, K::YMax}};
    case RelationType::RightBelow: return {{K::XMin, K::XMax}, {K::YMin, K::YMax}};
    case RelationType::Inside:
    case RelationType::Surrounding:
      // inside and surrounding share one factor set, including the
      // {y_min^s, y_max^o} pair as printed
      return {{K::XMin, K::XMin},
              {K::YMin, K::YMin},
              {K::XMax, K::XMax},
              amend_inside_factor ? RelationTemplate{K::YMax, K::YMax}
                                  : RelationTemplate{K::YMin, K::YMax}};
  }
  return {};
}

void FactorGraph::index() {
  std::sort(edges.begin(), edges.end(), [](const GraphEdge& a, const GraphEdge& b) {
    return a.factor != b.factor ? a.factor < b.factor : a.variable < b.variable;
  });
  factor_offsets.assign(factors.size() + 1, 0);
  variable_offsets.assign(variables.size() + 1, 0);
  for (const GraphEdge& e : edges) {
    if (e.factor >= 0 && static_cast<std::size_t>(e.factor) < factors.size())
      ++factor_offsets[static_cast<std::size_t>(e.factor) + 1];
    if (e.variable >= 0 && static_cast<std::size_t>(e.variable) < variables.size())
      ++variable_offsets[static_cast<std::size_t>(e.variable) + 1];
  }
  std::partial_sum(factor_offsets.begin(), factor_offsets.end(), factor_offsets.begin());
  std::partial_sum(variable_offsets.begin(), variable_offsets.end(), variable_offsets.begin());
  variable_order.resize(edges.size());
  std::iota(variable_order.begin(), variable_order.end(), 0);
  std::stable_sort(variable_order.begin(), variable_order.end(), [this](int a, int b) {
    const GraphEdge& ea = edges[static_cast<std::size_t>(a)];
    const GraphEdge& eb = edges[static_cast<std::size_t>(b)];
    return ea.variable != eb.variable ? ea.variable < eb.variable : ea.factor < eb.factor;
  });
}

std::vector<double> variable_feature(const RoomSpec& room, CoordKind kind,
                                     const FactorGraphConfig& cfg) {
  const FeatureLayout layout{cfg.grid_order};
  std::vector<double> f(static_cast<std::size_t>(layout.variable_width()), 0.0);
  f[static_cast<std::size_t>(room.type)] = 1.0;
  if (room.location) f[static_cast<std::size_t>(kRoomTypeCount + room.location->index)] = 1.0;
  if (room.size) f[static_cast<std::size_t>(kRoomTypeCount + layout.cells())] = *room.size;
  f[static_cast<std::size_t>(layout.room_block() + static_cast<int>(kind))] = 1.0;
  f.back() = room.known() ? 1.0 : 0.0;
  return f;
}

std::vector<double> factor_feature(const FactorKind& kind, const FloorplanSpec& spec,
                                   const std::vector<CornerFeature>& corners,
                                   const FactorGraphConfig& cfg) {
  const FeatureLayout layout{cfg.grid_order};
  std::vector<double> f(static_cast<std::size_t>(layout.factor_width()), 0.0);
  f[static_cast<std::size_t>(factor_kind_slot(kind))] = 1.0;
  if (const auto* box = std::get_if<BoxFactor>(&kind)) {
    const RoomSpec& room = spec.rooms.at(static_cast<std::size_t>(box->room));
    const std::size_t base = kFactorKindSlots;
    f[base + static_cast<std::size_t>(room.type)] = 1.0;
    if (room.location)
      f[base + static_cast<std::size_t>(kRoomTypeCount + room.location->index)] = 1.0;
    if (room.size) f[base + static_cast<std::size_t>(kRoomTypeCount + layout.cells())] = *room.size;
  } else if (const auto* corner = std::get_if<BoundaryFactor>(&kind)) {
    const CornerFeature& cf = corners.at(static_cast<std::size_t>(corner->corner));
    const std::size_t base = static_cast<std::size_t>(kFactorKindSlots + layout.room_block());
    for (std::size_t k = 0; k < cf.size(); ++k) {
      const bool distance = k >= 2 && k < 6;
      const bool probe = k >= 6;
      if (distance && !cfg.corner_distance_features) continue;
      if (probe && !cfg.corner_probe_features) continue;
      f[base + k] = cf[k];
    }
  }
  return f;
}

FactorGraph build_factor_graph(const FloorplanSpec& spec, const FactorGraphConfig& cfg) {
  if (spec.rooms.empty()) throw std::invalid_argument("floorplan has no rooms");
  for (const RoomSpec& r : spec.rooms) {
    const int t = static_cast<int>(r.type);
    if (t < 0 || t >= kRoomTypeCount)
      throw std::invalid_argument("room " + std::to_string(r.id) + " has an invalid type index");
  }

  FactorGraph g;
  g.room_count = static_cast<int>(spec.rooms.size());
  g.canvas = spec.canvas;
  g.layout = FeatureLayout{cfg.grid_order};
  const int n_vars = 4 * g.room_count;

  for (int i = 0; i < g.room_count; ++i)
    for (int k = 0; k < 4; ++k) {
      g.variables.push_back({i, static_cast<CoordKind>(k)});
      const auto f = variable_feature(spec.rooms[static_cast<std::size_t>(i)],
                                      static_cast<CoordKind>(k), cfg);
      g.variable_features.insert(g.variable_features.end(), f.begin(), f.end());
    }

  const auto var_id = [](int room, CoordKind k) { return 4 * room + static_cast<int>(k); };
  const auto add_factor = [&](FactorKind kind, std::vector<int> vars) {
    const int id = static_cast<int>(g.factors.size());
    g.factors.push_back(std::move(kind));
    for (int v : vars) g.edges.push_back({id, v});
  };
  std::vector<int> all_vars(static_cast<std::size_t>(n_vars));
  std::iota(all_vars.begin(), all_vars.end(), 0);

  if (cfg.box_factors)
    for (int i = 0; i < g.room_count; ++i)
      add_factor(BoxFactor{i}, {var_id(i, CoordKind::XMin), var_id(i, CoordKind::XMax),
                                var_id(i, CoordKind::YMin), var_id(i, CoordKind::YMax)});

  if (cfg.relation_factors) {
    for (std::size_t e = 0; e < spec.edges.size(); ++e) {
      const EdgeSpec& edge = spec.edges[e];
      const int s = spec.room_index(edge.subject);
      const int o = spec.room_index(edge.object);
      if (s < 0 || o < 0)
        throw std::invalid_argument("edge " + std::to_string(e) + " references a missing room");
      if (s == o) throw std::invalid_argument("edge " + std::to_string(e) + " is a self loop");
      if (!cfg.relation_enabled[static_cast<std::size_t>(edge.relation)]) continue;
      for (const RelationTemplate& t : relation_factor_templates(edge.relation, cfg.amend_inside_factor))
        add_factor(RelationFactor{edge.relation, t, static_cast<int>(e)},
                   {var_id(s, t.subject), var_id(o, t.object)});
    }
  } else {
    for (const EdgeSpec& edge : spec.edges)
      if (spec.room_index(edge.subject) < 0 || spec.room_index(edge.object) < 0)
        throw std::invalid_argument("edge references a missing room");
  }

  std::vector<CornerFeature> corners;
  if (cfg.boundary_factors) {
    const BoundaryMask mask = rasterize_polygon(spec.boundary, spec.canvas.width, spec.canvas.height);
    for (const Point& p : extract_corners(spec.boundary))
      corners.push_back(corner_feature(spec.boundary, mask, p, cfg.probe_offset));
    for (std::size_t k = 0; k < corners.size(); ++k)
      add_factor(BoundaryFactor{static_cast<int>(k)}, all_vars);
  }

  if (cfg.complete_factor) add_factor(CompleteFactor{}, all_vars);

  for (const FactorKind& kind : g.factors) {
    const auto f = factor_feature(kind, spec, corners, cfg);
    g.factor_features.insert(g.factor_features.end(), f.begin(), f.end());
  }
  g.index();
  return g;
}

std::vector<std::string> validate(const FactorGraph& g) {
  std::vector<std::string> report;
  const int n_vars = static_cast<int>(g.variables.size());
  if (g.variable_features.size() !=
      g.variables.size() * static_cast<std::size_t>(g.layout.variable_width()))
    report.push_back("variable feature matrix has the wrong length");
  if (g.factor_features.size() !=
      g.factors.size() * static_cast<std::size_t>(g.layout.factor_width()))
    report.push_back("factor feature matrix has the wrong length");

  std::set<std::pair<int, int>> seen;
  std::vector<int> arity(g.factors.size(), 0);
  std::vector<bool> touched(g.variables.size(), false);
  for (const GraphEdge& e : g.edges) {
    const bool factor_ok = e.factor >= 0 && static_cast<std::size_t>(e.factor) < g.factors.size();
    const bool var_ok = e.variable >= 0 && e.variable < n_vars;
    if (!factor_ok || !var_ok) {
      report.push_back("edge (" + std::to_string(e.factor) + ", " + std::to_string(e.variable) +
                       ") has a missing endpoint");
      continue;
    }
    if (!seen.insert({e.factor, e.variable}).second)
      report.push_back("duplicate edge (" + std::to_string(e.factor) + ", " +
                       std::to_string(e.variable) + ")");
    ++arity[static_cast<std::size_t>(e.factor)];
    touched[static_cast<std::size_t>(e.variable)] = true;
  }
  for (std::size_t f = 0; f < g.factors.size(); ++f) {
    const int want = kind_arity_rule(g.factors[f], n_vars);
    if (arity[f] != want)
      report.push_back(factor_label(f) + " has arity " + std::to_string(arity[f]) + ", expected " +
                       std::to_string(want));
  }
  for (std::size_t v = 0; v < touched.size(); ++v)
    if (!touched[v]) report.push_back("variable " + std::to_string(v) + " is unreachable");
  return report;
}

nlohmann::json graph_to_json(const FactorGraph& g) {
  using nlohmann::json;
  const std::size_t vw = static_cast<std::size_t>(g.layout.variable_width());
  const std::size_t fw = static_cast<std::size_t>(g.layout.factor_width());
  json vars = json::array();
  for (std::size_t i = 0; i < g.variables.size(); ++i) {
    const auto begin = g.variable_features.begin() + static_cast<std::ptrdiff_t>(i * vw);
    vars.push_back({{"room", g.variables[i].room},
                    {"kind", coord_kind_name(g.variables[i].kind)},
                    {"feature", std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(vw))}});
  }
  json factors = json::array();
  for (std::size_t f = 0; f < g.factors.size(); ++f) {
    json obj;
    std::visit(
        [&obj](const auto& k) {
          using F = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<F, BoxFactor>) {
            obj["kind"] = "box";
            obj["room"] = k.room;
          } else if constexpr (std::is_same_v<F, RelationFactor>) {
            obj["kind"] = "relation";
            obj["relation"] = relation_name(k.relation);
            obj["pair"] = {coord_kind_name(k.pair.subject), coord_kind_name(k.pair.object)};
            obj["edge"] = k.edge;
          } else if constexpr (std::is_same_v<F, BoundaryFactor>) {
            obj["kind"] = "boundary";
            obj["corner"] = k.corner;
          } else {
            obj["kind"] = "complete";
          }
        },
        g.factors[f]);
    const auto begin = g.factor_features.begin() + static_cast<std::ptrdiff_t>(f * fw);
    obj["feature"] = std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(fw));
    factors.push_back(std::move(obj));
  }
  json edges = json::array();
  for (const GraphEdge& e : g.edges) edges.push_back({e.factor, e.variable});
  return json{{"rooms", g.room_count},
              {"variable_count", g.variables.size()},
              {"factor_count", g.factors.size()},
              {"edge_count", g.edges.size()},
              {"variables", std::move(vars)},
              {"factors", std::move(factors)},
              {"edges", std::move(edges)}};
}

}  // namespace fpfgnn
