#include <algorithm>
#include <array>
#include <numeric>
#include <stdexcept>

#include "fpfgnn/data.hpp"
#include "fpfgnn/nn.hpp"

namespace fpfgnn {

namespace {

// Grid-cell rectangle, half-open.
struct Cell {
  int x0, y0, x1, y1;
  int w() const { return x1 - x0; }
  int h() const { return y1 - y0; }
  int area() const { return w() * h(); }
};

bool overlaps(const Cell& a, const Cell& b) {
  return std::max(a.x0, b.x0) < std::min(a.x1, b.x1) && std::max(a.y0, b.y0) < std::min(a.y1, b.y1);
}

bool covers(const Cell& outer, const Cell& inner) {
  return outer.x0 <= inner.x0 && outer.y0 <= inner.y0 && inner.x1 <= outer.x1 && inner.y1 <= outer.y1;
}

enum Corner { TopLeft = 0, TopRight, BottomLeft, BottomRight };

std::vector<Point> boundary_outline(const Cell& r, const std::vector<std::pair<Corner, Cell>>& notches, double g) {
  const auto at = [g](int x, int y) { return Point{x * g, y * g}; };
  const Cell* n[4] = {nullptr, nullptr, nullptr, nullptr};
  for (const auto& [c, cell] : notches) n[c] = &cell;
  std::vector<Point> pts;
  // Walk TL -> BL -> BR -> TR; a notched corner becomes three vertices.
  if (n[TopLeft]) {
    pts.push_back(at(n[TopLeft]->x1, r.y0));
    pts.push_back(at(n[TopLeft]->x1, n[TopLeft]->y1));
    pts.push_back(at(r.x0, n[TopLeft]->y1));
  } else {
    pts.push_back(at(r.x0, r.y0));
  }
  if (n[BottomLeft]) {
    pts.push_back(at(r.x0, n[BottomLeft]->y0));
    pts.push_back(at(n[BottomLeft]->x1, n[BottomLeft]->y0));
    pts.push_back(at(n[BottomLeft]->x1, r.y1));
  } else {
    pts.push_back(at(r.x0, r.y1));
  }
  if (n[BottomRight]) {
    pts.push_back(at(n[BottomRight]->x0, r.y1));
    pts.push_back(at(n[BottomRight]->x0, n[BottomRight]->y0));
    pts.push_back(at(r.x1, n[BottomRight]->y0));
  } else {
    pts.push_back(at(r.x1, r.y1));
  }
  if (n[TopRight]) {
    pts.push_back(at(r.x1, n[TopRight]->y1));
    pts.push_back(at(n[TopRight]->x0, n[TopRight]->y1));
    pts.push_back(at(n[TopRight]->x0, r.y0));
  } else {
    pts.push_back(at(r.x1, r.y0));
  }
  return pts;
}

// Splits leaves that straddle a notch edge until every leaf is either fully
// inside the building or fully inside a notch.
bool carve_notches(std::vector<Cell>& leaves, const std::vector<Cell>& voids, nn::Rng& rng) {
  for (int guard = 0; guard < 64; ++guard) {
    bool changed = false;
    for (std::size_t i = 0; i < leaves.size() && !changed; ++i) {
      const Cell leaf = leaves[i];
      for (const Cell& v : voids) {
        if (!overlaps(leaf, v) || covers(v, leaf)) continue;
        std::vector<std::pair<bool, int>> cuts;  // (vertical, position)
        for (int x : {v.x0, v.x1})
          if (x > leaf.x0 && x < leaf.x1) cuts.emplace_back(true, x);
        for (int y : {v.y0, v.y1})
          if (y > leaf.y0 && y < leaf.y1) cuts.emplace_back(false, y);
        if (cuts.empty()) return false;
        const auto [vertical, pos] = cuts[static_cast<std::size_t>(rng.integer(0, static_cast<int>(cuts.size()) - 1))];
        Cell a = leaf, b = leaf;
        if (vertical) {
          a.x1 = pos;
          b.x0 = pos;
        } else {
          a.y1 = pos;
          b.y0 = pos;
        }
        leaves[i] = a;
        leaves.push_back(b);
        changed = true;
        break;
      }
    }
    if (!changed) return true;
  }
  return false;
}

bool split_to(std::vector<Cell>& leaves, int target, int min_cells, nn::Rng& rng) {
  while (static_cast<int>(leaves.size()) < target) {
    std::vector<std::size_t> candidates;
    long total = 0;
    for (std::size_t i = 0; i < leaves.size(); ++i)
      if (std::max(leaves[i].w(), leaves[i].h()) >= 2 * min_cells) {
        candidates.push_back(i);
        total += leaves[i].area();
      }
    if (candidates.empty()) return false;
    long pick = static_cast<long>(rng.uniform() * static_cast<double>(total));
    std::size_t chosen = candidates.back();
    for (std::size_t i : candidates) {
      if (pick < leaves[i].area()) {
        chosen = i;
        break;
      }
      pick -= leaves[i].area();
    }
    const Cell leaf = leaves[chosen];
    bool vertical;
    const bool can_v = leaf.w() >= 2 * min_cells;
    const bool can_h = leaf.h() >= 2 * min_cells;
    if (can_v && can_h)
      vertical = leaf.w() == leaf.h() ? rng.integer(0, 1) == 1 : leaf.w() > leaf.h();
    else
      vertical = can_v;
    Cell a = leaf, b = leaf;
    if (vertical) {
      const int pos = leaf.x0 + rng.integer(min_cells, leaf.w() - min_cells);
      a.x1 = pos;
      b.x0 = pos;
    } else {
      const int pos = leaf.y0 + rng.integer(min_cells, leaf.h() - min_cells);
      a.y1 = pos;
      b.y0 = pos;
    }
    leaves[chosen] = a;
    leaves.push_back(b);
  }
  return true;
}

constexpr std::array<RoomType, 9> kSecondaryTypes = {
    RoomType::DiningRoom, RoomType::ChildRoom, RoomType::StudyRoom, RoomType::SecondRoom, RoomType::GuestRoom,
    RoomType::Balcony,    RoomType::Entrance,  RoomType::Storage,   RoomType::WallIn};

std::vector<RoomType> assign_types(const std::vector<Cell>& rooms, nn::Rng& rng) {
  const std::size_t n = rooms.size();
  std::vector<std::size_t> by_area(n);
  std::iota(by_area.begin(), by_area.end(), 0);
  std::stable_sort(by_area.begin(), by_area.end(),
                   [&](std::size_t a, std::size_t b) { return rooms[a].area() > rooms[b].area(); });
  std::vector<RoomType> types(n, RoomType::DiningRoom);
  types[by_area[0]] = RoomType::LivingRoom;
  types[by_area[1]] = RoomType::MasterRoom;
  types[by_area[n - 1]] = RoomType::Bathroom;
  const std::size_t kitchen = 2 + static_cast<std::size_t>(rng.integer(0, static_cast<int>(n) - 4));
  types[by_area[kitchen]] = RoomType::Kitchen;
  for (std::size_t r = 2; r + 1 < n; ++r)
    if (r != kitchen)
      types[by_area[r]] = kSecondaryTypes[static_cast<std::size_t>(rng.integer(0, kSecondaryTypes.size() - 1))];
  return types;
}

}  // namespace

void GeneratorConfig::check() const {
  if (min_rooms < 4 || max_rooms > 10 || min_rooms > max_rooms)
    throw std::invalid_argument("room count range must lie within [4, 10]");
  if (min_corners < 4 || max_corners > 8 || min_corners > max_corners || min_corners % 2 || max_corners % 2)
    throw std::invalid_argument("corner count range must be even values within [4, 8]");
  if (grid_cells < 4 || min_room_cells < 1) throw std::invalid_argument("grid settings must be positive");
  if (canvas.width <= 0 || canvas.height <= 0) throw std::invalid_argument("canvas must be positive");
  if (max_attempts < 1) throw std::invalid_argument("max_attempts must be positive");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over a seed/index mix
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

FloorplanSpec generate_floorplan(std::uint64_t seed, const GeneratorConfig& cfg) {
  cfg.check();
  const int G = cfg.grid_cells;
  const double g = 1.0 / G;
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    nn::Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    const int rooms = rng.integer(cfg.min_rooms, cfg.max_rooms);
    const int notch_count = rng.integer((cfg.min_corners - 4) / 2, (cfg.max_corners - 4) / 2);

    Cell outer{};
    const int w = rng.integer((G * 11 + 19) / 20, (G * 19) / 20);
    const int h = rng.integer((G * 11 + 19) / 20, (G * 19) / 20);
    outer.x0 = rng.integer(0, G - w);
    outer.y0 = rng.integer(0, G - h);
    outer.x1 = outer.x0 + w;
    outer.y1 = outer.y0 + h;

    std::array<Corner, 4> corners{TopLeft, TopRight, BottomLeft, BottomRight};
    for (int i = 3; i > 0; --i) std::swap(corners[static_cast<std::size_t>(i)], corners[static_cast<std::size_t>(rng.integer(0, i))]);
    std::vector<std::pair<Corner, Cell>> notches;
    std::vector<Cell> voids;
    bool ok = true;
    for (int i = 0; i < notch_count; ++i) {
      const int lo_w = std::max(1, (w + 4) / 5), hi_w = (w * 9) / 20;
      const int lo_h = std::max(1, (h + 4) / 5), hi_h = (h * 9) / 20;
      if (hi_w < lo_w || hi_h < lo_h) {
        ok = false;
        break;
      }
      const int nw = rng.integer(lo_w, hi_w);
      const int nh = rng.integer(lo_h, hi_h);
      const Corner c = corners[static_cast<std::size_t>(i)];
      Cell v{};
      v.x0 = (c == TopLeft || c == BottomLeft) ? outer.x0 : outer.x1 - nw;
      v.y0 = (c == TopLeft || c == TopRight) ? outer.y0 : outer.y1 - nh;
      v.x1 = v.x0 + nw;
      v.y1 = v.y0 + nh;
      notches.emplace_back(c, v);
      voids.push_back(v);
    }
    if (!ok) continue;

    std::vector<Cell> leaves{outer};
    if (!carve_notches(leaves, voids, rng)) continue;
    std::erase_if(leaves, [&](const Cell& c) {
      return std::any_of(voids.begin(), voids.end(), [&](const Cell& v) { return covers(v, c); });
    });
    if (static_cast<int>(leaves.size()) > rooms) continue;
    if (std::any_of(leaves.begin(), leaves.end(),
                    [&](const Cell& c) { return std::min(c.w(), c.h()) < cfg.min_room_cells; }))
      continue;
    if (!split_to(leaves, rooms, cfg.min_room_cells, rng)) continue;

    const std::vector<RoomType> types = assign_types(leaves, rng);
    std::vector<std::size_t> order(leaves.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size() - 1; i > 0; --i)
      std::swap(order[i], order[static_cast<std::size_t>(rng.integer(0, static_cast<int>(i)))]);

    FloorplanSpec spec;
    spec.canvas = cfg.canvas;
    spec.boundary = RectPolygon::from_points(boundary_outline(outer, notches, g));
    spec.source = "synthetic:" + std::to_string(seed);
    std::vector<BBox> boxes;
    for (std::size_t id = 0; id < order.size(); ++id) {
      const Cell& c = leaves[order[id]];
      const BBox box{c.x0 * g, c.y0 * g, c.x1 * g, c.y1 * g};
      RoomSpec room;
      room.id = static_cast<int>(id);
      room.type = types[order[id]];
      room.location = location_cell(box, cfg.grid_order);
      room.size = normalized_size(box);
      room.bbox = box;
      spec.rooms.push_back(room);
      boxes.push_back(box);
    }
    spec.edges = derive_edges(boxes, cfg.canvas, cfg.adjacency);
    return spec;
  }
  throw std::runtime_error("generator found no valid partition for seed " + std::to_string(seed) + " after " +
                           std::to_string(cfg.max_attempts) + " attempts (rooms " +
                           std::to_string(cfg.min_rooms) + "-" + std::to_string(cfg.max_rooms) + ", grid " +
                           std::to_string(cfg.grid_cells) + ", min side " + std::to_string(cfg.min_room_cells) + ")");
}

std::vector<EdgeSpec> derive_edges(const std::vector<BBox>& boxes, Canvas canvas, const AdjacencyRule& rule) {
  const double tx = rule.gap_tolerance_px / canvas.width, ty = rule.gap_tolerance_px / canvas.height;
  const double sx = rule.min_shared_span_px / canvas.width, sy = rule.min_shared_span_px / canvas.height;
  std::vector<EdgeSpec> edges;
  for (std::size_t i = 0; i < boxes.size(); ++i)
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      const BBox& a = boxes[i];
      const BBox& b = boxes[j];
      if (a == b) continue;
      const bool nested = (a.x_min <= b.x_min && a.y_min <= b.y_min && b.x_max <= a.x_max && b.y_max <= a.y_max) ||
                          (b.x_min <= a.x_min && b.y_min <= a.y_min && a.x_max <= b.x_max && a.y_max <= b.y_max);
      // gap > 0 is separation, gap < 0 is overlap
      const double gap_x = std::max(a.x_min, b.x_min) - std::min(a.x_max, b.x_max);
      const double gap_y = std::max(a.y_min, b.y_min) - std::min(a.y_max, b.y_max);
      const bool side = std::abs(gap_x) <= tx && -gap_y >= sy;
      const bool stacked = std::abs(gap_y) <= ty && -gap_x >= sx;
      if (nested || side || stacked)
        edges.push_back({static_cast<int>(i), static_cast<int>(j), classify_relation(a, b)});
    }
  return edges;
}

int droppable_room_count(const FloorplanSpec& spec, const std::set<RoomType>& protected_types) {
  return static_cast<int>(std::count_if(spec.rooms.begin(), spec.rooms.end(),
                                        [&](const RoomSpec& r) { return !protected_types.contains(r.type); }));
}

FloorplanSpec drop_constraints(const FloorplanSpec& spec, int k, std::uint64_t seed,
                               const std::set<RoomType>& protected_types) {
  if (k < 0) throw std::invalid_argument("drop count must be non-negative");
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < spec.rooms.size(); ++i)
    if (!protected_types.contains(spec.rooms[i].type)) pool.push_back(i);
  if (static_cast<std::size_t>(k) > pool.size())
    throw std::invalid_argument("cannot drop " + std::to_string(k) + " rooms: only " +
                                std::to_string(pool.size()) + " unprotected rooms");
  nn::Rng rng(seed);
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i)
    std::swap(pool[i], pool[i + static_cast<std::size_t>(rng.integer(0, static_cast<int>(pool.size() - i) - 1))]);
  FloorplanSpec out = spec;
  std::set<int> dropped;
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    RoomSpec& r = out.rooms[pool[i]];
    r.location.reset();
    r.size.reset();
    r.bbox.reset();
    dropped.insert(r.id);
  }
  std::erase_if(out.edges, [&](const EdgeSpec& e) { return dropped.contains(e.subject) || dropped.contains(e.object); });
  return out;
}

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

Dataset make_dataset(std::uint64_t seed, int count, int val_count, const GeneratorConfig& cfg) {
  if (count < 0 || val_count < 0 || val_count > count) throw std::invalid_argument("invalid dataset sizes");
  Dataset d;
  d.plans.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) d.plans.push_back(generate_floorplan(derive_seed(seed, static_cast<std::uint64_t>(i)), cfg));
  std::vector<std::size_t> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), 0);
  nn::Rng rng(derive_seed(seed, ~0ull));
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.integer(0, static_cast<int>(i) - 1))]);
  d.split.assign(static_cast<std::size_t>(count), Split::Train);
  for (int i = 0; i < val_count; ++i) d.split[order[static_cast<std::size_t>(i)]] = Split::Val;
  return d;
}

}  // namespace fpfgnn
