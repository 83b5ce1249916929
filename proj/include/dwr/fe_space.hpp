#pragma once

// Continuous Q1/Q2 Lagrange spaces on a 1-irregular quadtree mesh.
//
// Every distinct nodal point is a degree of freedom. Nodes on the interior of
// a coarser neighbor's edge are "hanging": their value is the coarse edge
// trace interpolated at the node, expressed through `expansion()` as a
// combination of unconstrained dofs (chains through coarser hanging nodes
// are resolved). Dirichlet dofs are kept in the numbering and flagged.

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "dwr/errors.hpp"
#include "dwr/lagrange.hpp"
#include "dwr/mesh.hpp"

namespace dwr {

struct ConstraintEntry {
  std::uint32_t dof;
  double weight;
};

class FeSpace {
 public:
  FeSpace(std::shared_ptr<const Mesh> mesh, int degree) : mesh_(std::move(mesh)), degree_(degree) {
    detail::require(mesh_ != nullptr, "FeSpace: null mesh");
    detail::require(degree == 1 || degree == 2, "FeSpace: degree must be 1 or 2");
    enumerate_nodes();
    build_constraints();
    number_free_dofs();
  }

  static std::shared_ptr<const FeSpace> build(std::shared_ptr<const Mesh> mesh, int degree) {
    return std::make_shared<const FeSpace>(std::move(mesh), degree);
  }

  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
  int degree() const { return degree_; }
  int dofs_per_cell() const { return nodes_per_cell(degree_); }
  std::size_t n_dofs() const { return coords_.size(); }
  std::size_t n_cells() const { return mesh_->n_active(); }
  std::size_t n_free() const { return n_free_; }
  std::size_t n_constrained() const { return n_constrained_; }

  std::span<const Point> dof_coords() const { return coords_; }
  Point dof_coord(std::uint32_t d) const { return coords_[d]; }

  std::span<const std::uint32_t> cell_dofs(std::size_t cell) const {
    const auto n = static_cast<std::size_t>(dofs_per_cell());
    return {cell_dofs_.data() + cell * n, n};
  }

  bool is_boundary(std::uint32_t d) const { return boundary_[d]; }
  bool is_constrained(std::uint32_t d) const { return constrained_[d]; }

  /// Unconstrained dofs (with weights) that define dof d; {d, 1} if d is unconstrained.
  std::span<const ConstraintEntry> expansion(std::uint32_t d) const {
    return {exp_entries_.data() + exp_offsets_[d], exp_offsets_[d + 1] - exp_offsets_[d]};
  }

  /// Index in the Dirichlet-condensed system, or -1 for boundary and hanging dofs.
  std::int32_t free_index(std::uint32_t d) const { return free_index_[d]; }

  /// Overwrites hanging entries with their constraint combination.
  void apply_constraints(Eigen::VectorXd& v) const {
    for (std::uint32_t d = 0; d < n_dofs(); ++d) {
      if (!constrained_[d]) continue;
      double s = 0.0;
      for (const auto& e : expansion(d)) s += e.weight * v[e.dof];
      v[d] = s;
    }
  }

 private:
  struct Raw {
    std::vector<ConstraintEntry> entries;
  };

  std::int64_t node_key(const Cell& c, int a, int b, int lmax) const {
    const int scale = 2 / degree_;
    const std::int64_t X = (static_cast<std::int64_t>(degree_) * c.ix + a) * scale << (lmax - c.level);
    const std::int64_t Y = (static_cast<std::int64_t>(degree_) * c.iy + b) * scale << (lmax - c.level);
    return (X << 32) | Y;
  }

  void enumerate_nodes() {
    const int lmax = mesh_->max_level();
    const std::int64_t R = std::int64_t{2} << lmax;
    const int n1 = degree_ + 1;
    std::unordered_map<std::int64_t, std::uint32_t> ids;
    ids.reserve(mesh_->n_active() * static_cast<std::size_t>(n1 * n1));
    cell_dofs_.reserve(mesh_->n_active() * static_cast<std::size_t>(n1 * n1));
    for (std::size_t k = 0; k < mesh_->n_active(); ++k) {
      const Cell& c = mesh_->active_cell(k);
      for (int b = 0; b < n1; ++b)
        for (int a = 0; a < n1; ++a) {
          const std::int64_t key = node_key(c, a, b, lmax);
          auto [it, inserted] = ids.emplace(key, static_cast<std::uint32_t>(coords_.size()));
          if (inserted) {
            const std::int64_t X = key >> 32;
            const std::int64_t Y = key & 0xffffffffLL;
            coords_.push_back({static_cast<double>(X) / static_cast<double>(R),
                               static_cast<double>(Y) / static_cast<double>(R)});
            boundary_.push_back(X == 0 || Y == 0 || X == R || Y == R);
          }
          cell_dofs_.push_back(it->second);
        }
    }
  }

  // Local node indices along a side, ordered by increasing edge parameter.
  std::vector<int> side_nodes(Side s) const {
    const int n1 = degree_ + 1;
    std::vector<int> out;
    for (int k = 0; k < n1; ++k) {
      switch (s) {
        case Side::Left: out.push_back(0 + n1 * k); break;
        case Side::Right: out.push_back(degree_ + n1 * k); break;
        case Side::Bottom: out.push_back(k); break;
        case Side::Top: out.push_back(k + n1 * degree_); break;
      }
    }
    return out;
  }

  static Side opposite(Side s) {
    switch (s) {
      case Side::Left: return Side::Right;
      case Side::Right: return Side::Left;
      case Side::Bottom: return Side::Top;
      case Side::Top: return Side::Bottom;
    }
    return s;
  }

  void build_constraints() {
    const std::size_t n = n_dofs();
    constrained_.assign(n, false);
    std::map<std::uint32_t, Raw> raw;
    const int p = degree_;
    for (std::size_t k = 0; k < mesh_->n_active(); ++k) {
      const CellId id = mesh_->active_cells()[k];
      const Cell& c = mesh_->cell(id);
      for (Side s : kAllSides) {
        const auto coarse = mesh_->coarser_neighbor(id, s);
        if (!coarse) continue;
        const std::size_t kc = *mesh_->active_index(*coarse);
        const auto fine_nodes = side_nodes(s);
        const auto coarse_nodes = side_nodes(opposite(s));
        const int offset = (s == Side::Left || s == Side::Right) ? (c.iy & 1) : (c.ix & 1);
        for (int j = 0; j <= p; ++j) {
          // Position on the coarse edge is (offset * p + j) / (2p).
          const int num = offset * p + j;
          if (num % 2 == 0) continue;
          const std::uint32_t d = cell_dofs(k)[fine_nodes[j]];
          if (raw.count(d)) continue;
          const double t = static_cast<double>(num) / (2.0 * p);
          Raw r;
          for (int m = 0; m <= p; ++m) {
            r.entries.push_back({cell_dofs(kc)[coarse_nodes[m]], lagrange1d(p, m, t)});
          }
          raw.emplace(d, std::move(r));
        }
      }
    }
    for (const auto& [d, r] : raw) constrained_[d] = true;
    n_constrained_ = raw.size();

    // Resolve chains so every expansion references unconstrained dofs only.
    std::vector<std::vector<ConstraintEntry>> resolved(n);
    std::vector<char> done(n, 0);
    auto resolve = [&](auto&& self, std::uint32_t d) -> const std::vector<ConstraintEntry>& {
      if (done[d]) return resolved[d];
      if (!constrained_[d]) {
        resolved[d] = {{d, 1.0}};
      } else {
        std::map<std::uint32_t, double> acc;
        for (const auto& e : raw.at(d).entries) {
          for (const auto& m : self(self, e.dof)) acc[m.dof] += e.weight * m.weight;
        }
        for (const auto& [dof, w] : acc) resolved[d].push_back({dof, w});
      }
      done[d] = 1;
      return resolved[d];
    };
    exp_offsets_.assign(n + 1, 0);
    for (std::uint32_t d = 0; d < n; ++d) {
      const auto& r = resolve(resolve, d);
      exp_offsets_[d + 1] = exp_offsets_[d] + r.size();
      exp_entries_.insert(exp_entries_.end(), r.begin(), r.end());
    }
  }

  void number_free_dofs() {
    free_index_.assign(n_dofs(), -1);
    n_free_ = 0;
    for (std::uint32_t d = 0; d < n_dofs(); ++d) {
      if (!boundary_[d] && !constrained_[d]) free_index_[d] = static_cast<std::int32_t>(n_free_++);
    }
  }

  std::shared_ptr<const Mesh> mesh_;
  int degree_;
  std::vector<Point> coords_;
  std::vector<bool> boundary_;
  std::vector<bool> constrained_;
  std::vector<std::uint32_t> cell_dofs_;
  std::vector<std::size_t> exp_offsets_;
  std::vector<ConstraintEntry> exp_entries_;
  std::vector<std::int32_t> free_index_;
  std::size_t n_free_ = 0;
  std::size_t n_constrained_ = 0;
};

/// Coefficient vector over an FeSpace. Immutable after construction.
class FeFunction {
 public:
  FeFunction(std::shared_ptr<const FeSpace> space, Eigen::VectorXd coeffs)
      : space_(std::move(space)), coeffs_(std::move(coeffs)) {
    detail::require(space_ != nullptr, "FeFunction: null space");
    detail::require(static_cast<std::size_t>(coeffs_.size()) == space_->n_dofs(),
                    "FeFunction: coefficient vector length does not match the space");
  }

  static FeFunction zero(std::shared_ptr<const FeSpace> space) {
    const auto n = static_cast<Eigen::Index>(space->n_dofs());
    return FeFunction(std::move(space), Eigen::VectorXd::Zero(n));
  }

  const FeSpace& space() const { return *space_; }
  const std::shared_ptr<const FeSpace>& space_ptr() const { return space_; }
  const Eigen::VectorXd& coeffs() const { return coeffs_; }
  double operator[](std::uint32_t d) const { return coeffs_[d]; }

  /// Value and physical gradient on active cell `cell` at reference point `ref`.
  ValueGrad eval_on_cell(std::size_t cell, Point ref) const {
    return eval_with(cell, ShapeTable::at(space_->degree(), ref));
  }

  ValueGrad eval_with(std::size_t cell, const ShapeTable& s) const {
    const auto dofs = space_->cell_dofs(cell);
    const double inv_h = 1.0 / space_->mesh().active_cell(cell).size();
    ValueGrad r;
    for (int i = 0; i < s.size(); ++i) {
      const double c = coeffs_[dofs[i]];
      r.value += c * s.value[i];
      r.grad.x += c * s.ref_grad[i].x;
      r.grad.y += c * s.ref_grad[i].y;
    }
    r.grad = inv_h * r.grad;
    return r;
  }

 private:
  std::shared_ptr<const FeSpace> space_;
  Eigen::VectorXd coeffs_;
};

inline bool same_mesh(const FeSpace& a, const FeSpace& b) { return a.mesh_ptr() == b.mesh_ptr(); }

/// Maps a reference point of active cell `cell` to physical coordinates.
inline Point to_physical(const Mesh& mesh, std::size_t cell, Point ref) {
  const Cell& c = mesh.active_cell(cell);
  const double h = c.size();
  return c.origin() + Point{h * ref.x, h * ref.y};
}

inline Point to_reference(const Mesh& mesh, std::size_t cell, Point x) {
  const Cell& c = mesh.active_cell(cell);
  const double h = c.size();
  const Point o = c.origin();
  return {(x.x - o.x) / h, (x.y - o.y) / h};
}

}  // namespace dwr
