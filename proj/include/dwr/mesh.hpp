#pragma once

// Adaptive quadtree mesh of the unit square.
//
// A single root cell covers (0,1)^2; a cell at level L with integer index
// (ix, iy) occupies [ix, ix+1] x [iy, iy+1] scaled by 2^-L. Cells are never
// removed, so a CellId stays valid in every mesh refined from the one that
// created it. Active (leaf) cells are iterated in (level, ix, iy) order.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dwr/errors.hpp"
#include "dwr/geometry.hpp"

namespace dwr {

enum class CellId : std::uint32_t {};

constexpr std::uint32_t index_of(CellId id) { return static_cast<std::uint32_t>(id); }

enum class Side : int { Left = 0, Right = 1, Bottom = 2, Top = 3 };

inline constexpr std::array<Side, 4> kAllSides = {Side::Left, Side::Right, Side::Bottom,
                                                  Side::Top};

struct Cell {
  int level = 0;
  std::int32_t ix = 0;
  std::int32_t iy = 0;
  std::optional<CellId> parent;
  std::optional<CellId> first_child;  // children are four consecutive ids
  bool active = true;

  double size() const { return std::ldexp(1.0, -level); }
  Point origin() const { return {ix * size(), iy * size()}; }
  Box box() const {
    const double h = size();
    return {{ix * h, iy * h}, {(ix + 1) * h, (iy + 1) * h}};
  }
  Point center() const {
    const double h = size();
    return {(ix + 0.5) * h, (iy + 0.5) * h};
  }
  /// Children ordered (0,0), (1,0), (0,1), (1,1) in local quadrant coordinates.
  CellId child(int k) const { return CellId{index_of(*first_child) + static_cast<std::uint32_t>(k)}; }
};

class Mesh {
 public:
  static constexpr int kMaxLevel = 22;

  /// n x n uniform mesh; n must be a power of two.
  static Mesh uniform(int n) {
    detail::require(n >= 1 && (n & (n - 1)) == 0, "Mesh::uniform: n must be a power of two >= 1");
    Mesh m;
    m.cells_.push_back(Cell{});
    m.lookup_.emplace(key(0, 0, 0), CellId{0});
    for (int k = n; k > 1; k >>= 1) {
      const std::vector<CellId> leaves = m.leaves();
      for (CellId c : leaves) m.split(c);
    }
    m.rebuild_active();
    return m;
  }

  /// Refines every flagged active cell, then refines further cells until no two
  /// edge-adjacent active cells differ by more than one level.
  Mesh refine(std::span<const CellId> flags) const {
    for (CellId id : flags) {
      detail::require(index_of(id) < cells_.size() && cells_[index_of(id)].active,
                      "Mesh::refine: flagged cell is not active");
    }
    Mesh out = *this;
    std::vector<CellId> pending(flags.begin(), flags.end());
    std::sort(pending.begin(), pending.end());
    pending.erase(std::unique(pending.begin(), pending.end()), pending.end());
    while (!pending.empty()) {
      for (CellId id : pending) {
        if (out.cells_[index_of(id)].active) out.split(id);
      }
      pending = out.closure_violators();
    }
    out.rebuild_active();
    out.generation_ = generation_ + 1;
    return out;
  }

  Mesh uniform_refine() const {
    std::vector<CellId> all(active_.begin(), active_.end());
    return refine(all);
  }

  std::span<const CellId> active_cells() const { return active_; }
  std::size_t n_active() const { return active_.size(); }
  std::size_t n_cells() const { return cells_.size(); }
  const Cell& cell(CellId id) const { return cells_[index_of(id)]; }
  const Cell& active_cell(std::size_t k) const { return cell(active_[k]); }
  int generation() const { return generation_; }
  int max_level() const { return max_level_; }

  std::optional<CellId> find(int level, std::int64_t ix, std::int64_t iy) const {
    if (level < 0 || ix < 0 || iy < 0) return std::nullopt;
    const std::int64_t n = std::int64_t{1} << level;
    if (ix >= n || iy >= n) return std::nullopt;
    auto it = lookup_.find(key(level, ix, iy));
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::size_t> active_index(CellId id) const {
    const std::int32_t p = active_pos_[index_of(id)];
    if (p < 0) return std::nullopt;
    return static_cast<std::size_t>(p);
  }

  /// The active neighbor across `side` when it is exactly one level coarser.
  std::optional<CellId> coarser_neighbor(CellId id, Side side) const {
    const Cell& c = cell(id);
    if (c.level == 0) return std::nullopt;
    const auto [nx, ny] = neighbor_index(c, side);
    const std::int64_t n = std::int64_t{1} << c.level;
    if (nx < 0 || ny < 0 || nx >= n || ny >= n) return std::nullopt;
    if (find(c.level, nx, ny)) return std::nullopt;
    auto coarse = find(c.level - 1, nx >> 1, ny >> 1);
    if (!coarse || !cell(*coarse).active) {
      throw InvalidArgument("Mesh::coarser_neighbor: mesh is not 1-irregular");
    }
    return coarse;
  }

  /// Active indices of all cells whose closed box contains p, ascending.
  std::vector<std::size_t> locate_all(Point p) const {
    detail::require(in_unit_square(p), "Mesh::locate: point outside the closed unit square");
    std::vector<std::size_t> hits;
    collect(CellId{0}, p, hits);
    std::sort(hits.begin(), hits.end());
    return hits;
  }

  /// Owner cell of p: the lowest active index among the cells containing it.
  std::size_t locate(Point p) const {
    detail::require(in_unit_square(p), "Mesh::locate: point outside the closed unit square");
    std::size_t best = active_.size();
    find_owner(CellId{0}, p, best);
    return best;
  }

  double active_area() const {
    double a = 0.0;
    for (CellId id : active_) a += cell(id).box().area();
    return a;
  }

 private:
  Mesh() = default;

  static std::uint64_t key(int level, std::int64_t ix, std::int64_t iy) {
    return (static_cast<std::uint64_t>(level) << 48) | (static_cast<std::uint64_t>(ix) << 24) |
           static_cast<std::uint64_t>(iy);
  }

  static std::pair<std::int64_t, std::int64_t> neighbor_index(const Cell& c, Side side) {
    switch (side) {
      case Side::Left: return {c.ix - 1, c.iy};
      case Side::Right: return {c.ix + 1, c.iy};
      case Side::Bottom: return {c.ix, c.iy - 1};
      case Side::Top: return {c.ix, c.iy + 1};
    }
    return {c.ix, c.iy};
  }

  std::vector<CellId> leaves() const {
    std::vector<CellId> out;
    for (std::uint32_t i = 0; i < cells_.size(); ++i) {
      if (cells_[i].active) out.push_back(CellId{i});
    }
    return out;
  }

  void split(CellId id) {
    const Cell parent = cells_[index_of(id)];
    if (parent.level + 1 > kMaxLevel) throw InvalidArgument("Mesh: maximum refinement level exceeded");
    const auto first = static_cast<std::uint32_t>(cells_.size());
    for (int k = 0; k < 4; ++k) {
      Cell ch;
      ch.level = parent.level + 1;
      ch.ix = 2 * parent.ix + (k & 1);
      ch.iy = 2 * parent.iy + (k >> 1);
      ch.parent = id;
      cells_.push_back(ch);
      lookup_.emplace(key(ch.level, ch.ix, ch.iy), CellId{first + static_cast<std::uint32_t>(k)});
    }
    cells_[index_of(id)].active = false;
    cells_[index_of(id)].first_child = CellId{first};
    max_level_ = std::max(max_level_, parent.level + 1);
  }

  // Active cells that are two or more levels coarser than some edge neighbor.
  std::vector<CellId> closure_violators() const {
    std::vector<CellId> out;
    for (std::uint32_t i = 0; i < cells_.size(); ++i) {
      const Cell& c = cells_[i];
      if (!c.active || c.level < 2) continue;
      const std::int64_t n = std::int64_t{1} << c.level;
      for (Side s : kAllSides) {
        auto [nx, ny] = neighbor_index(c, s);
        if (nx < 0 || ny < 0 || nx >= n || ny >= n) continue;
        int lvl = c.level;
        while (!find(lvl, nx, ny)) {
          --lvl;
          nx >>= 1;
          ny >>= 1;
        }
        if (lvl < c.level - 1) out.push_back(*find(lvl, nx, ny));
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  void rebuild_active() {
    active_ = leaves();
    std::sort(active_.begin(), active_.end(), [this](CellId a, CellId b) {
      const Cell& ca = cell(a);
      const Cell& cb = cell(b);
      if (ca.level != cb.level) return ca.level < cb.level;
      if (ca.ix != cb.ix) return ca.ix < cb.ix;
      return ca.iy < cb.iy;
    });
    active_pos_.assign(cells_.size(), -1);
    for (std::size_t k = 0; k < active_.size(); ++k) {
      active_pos_[index_of(active_[k])] = static_cast<std::int32_t>(k);
    }
  }

  void collect(CellId id, Point p, std::vector<std::size_t>& hits) const {
    const Cell& c = cell(id);
    if (!c.box().contains(p)) return;
    if (c.active) {
      hits.push_back(static_cast<std::size_t>(active_pos_[index_of(id)]));
      return;
    }
    for (int k = 0; k < 4; ++k) collect(c.child(k), p, hits);
  }

  void find_owner(CellId id, Point p, std::size_t& best) const {
    const Cell& c = cell(id);
    if (!c.box().contains(p)) return;
    if (c.active) {
      best = std::min(best, static_cast<std::size_t>(active_pos_[index_of(id)]));
      return;
    }
    for (int k = 0; k < 4; ++k) find_owner(c.child(k), p, best);
  }

  std::vector<Cell> cells_;
  std::unordered_map<std::uint64_t, CellId> lookup_;
  std::vector<CellId> active_;
  std::vector<std::int32_t> active_pos_;
  int generation_ = 0;
  int max_level_ = 0;
};

}  // namespace dwr
