#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <span>
#include <string>

#include "dwr/mesh.hpp"

namespace dwr {

/// Writes the active-cell wireframe with viewBox [0,1]^2 (y axis pointing up).
/// When `cell_scores` is non-empty (one entry per active cell) cells are
/// shaded in proportion to their score.
inline void write_mesh_svg(const Mesh& mesh, const std::string& path,
                           std::span<const double> cell_scores = {}) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_mesh_svg: cannot open " + path);
  double max_score = 0.0;
  for (double s : cell_scores) max_score = std::max(max_score, s);
  const bool shade = !cell_scores.empty() && cell_scores.size() == mesh.n_active() && max_score > 0.0;

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"800\" "
         "viewBox=\"0 0 1 1\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"1\" height=\"1\" fill=\"white\"/>\n"
      << "<g stroke=\"black\" stroke-width=\"0.0015\">\n";
  char buf[256];
  for (std::size_t k = 0; k < mesh.n_active(); ++k) {
    const Box b = mesh.active_cell(k).box();
    const double opacity = shade ? cell_scores[k] / max_score : 0.0;
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.9g\" y=\"%.9g\" width=\"%.9g\" height=\"%.9g\" "
                  "fill=\"#d62728\" fill-opacity=\"%.4f\"/>\n",
                  b.lo.x, 1.0 - b.hi.y, b.hi.x - b.lo.x, b.hi.y - b.lo.y, opacity);
    out << buf;
  }
  out << "</g>\n</svg>\n";
}

}  // namespace dwr
