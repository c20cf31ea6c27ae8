#include "prospector/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace prospector::geo {

std::vector<HypothesisSpec> default_hypotheses() {
  return {{1, 1, 1, 0.25}, {2, 1, 2, 0.25}, {3, 2, 1, 0.25}, {4, 2, 2, 0.25}};
}

std::size_t parameter_dim(const HypothesisSpec& h) {
  return static_cast<std::size_t>(4 * h.n_grabens + (2 + kPolygonVertices) * h.n_geochem);
}

std::vector<double> to_vector(const GeometryParams& p) {
  std::vector<double> v;
  v.reserve(4 * p.grabens.size() + (2 + kPolygonVertices) * p.domains.size());
  for (const auto& g : p.grabens) {
    v.push_back(g.bottom_start);
    v.push_back(g.bottom_width);
    v.push_back(g.top_start);
    v.push_back(g.top_width);
  }
  for (const auto& d : p.domains) {
    v.push_back(d.center_x);
    v.push_back(d.center_y);
    v.insert(v.end(), d.radii.begin(), d.radii.end());
  }
  return v;
}

GeometryParams from_vector(const HypothesisSpec& h, std::span<const double> v) {
  if (v.size() != parameter_dim(h)) throw std::invalid_argument("geometry vector has the wrong dimension");
  GeometryParams p;
  std::size_t k = 0;
  for (int i = 0; i < h.n_grabens; ++i) {
    GrabenParams g;
    g.bottom_start = v[k++];
    g.bottom_width = v[k++];
    g.top_start = v[k++];
    g.top_width = v[k++];
    p.grabens.push_back(g);
  }
  for (int i = 0; i < h.n_geochem; ++i) {
    GeochemParams d;
    d.center_x = v[k++];
    d.center_y = v[k++];
    for (auto& r : d.radii) r = v[k++];
    p.domains.push_back(d);
  }
  return p;
}

void prior_moments(const HypothesisSpec& h, const GeometryPrior& prior, std::vector<double>& mean,
                   std::vector<double>& std) {
  mean.clear();
  std.clear();
  for (int i = 0; i < h.n_grabens; ++i) {
    for (int side = 0; side < 2; ++side) {
      mean.push_back(prior.start_mean);
      std.push_back(prior.start_std);
      mean.push_back(prior.width_mean);
      std.push_back(prior.width_std);
    }
  }
  for (int i = 0; i < h.n_geochem; ++i) {
    for (int axis = 0; axis < 2; ++axis) {
      mean.push_back(prior.center_mean);
      std.push_back(prior.center_std);
    }
    for (int r = 0; r < kPolygonVertices; ++r) {
      mean.push_back(prior.radius_mean);
      std.push_back(prior.radius_std);
    }
  }
}

GeometryParams sample_geometry(const HypothesisSpec& h, const GeometryPrior& prior, RngStream& rng) {
  std::vector<double> mean, std;
  prior_moments(h, prior, mean, std);
  std::vector<double> v(mean.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = rng.normal(mean[i], std[i]);
  return from_vector(h, v);
}

bool in_graben(const GrabenParams& g, Cell c, GridShape shape) {
  const double t = shape.ny > 1 ? static_cast<double>(c.y) / (shape.ny - 1) : 0.0;
  const double bw = std::max(kMinExtent, g.bottom_width);
  const double tw = std::max(kMinExtent, g.top_width);
  const double start = g.bottom_start + t * (g.top_start - g.bottom_start);
  const double width = bw + t * (tw - bw);
  const double center = c.x + 0.5;
  return center >= start && center < start + width;
}

bool in_graben(const GeometryParams& p, Cell c, GridShape shape) {
  return std::any_of(p.grabens.begin(), p.grabens.end(), [&](const auto& g) { return in_graben(g, c, shape); });
}

namespace {

struct VertexDirections {
  std::array<double, kPolygonVertices> cos{}, sin{};
  VertexDirections() {
    for (int i = 0; i < kPolygonVertices; ++i) {
      const double theta = 2.0 * std::numbers::pi * i / kPolygonVertices;
      cos[i] = std::cos(theta);
      sin[i] = std::sin(theta);
    }
  }
};

const VertexDirections& directions() {
  static const VertexDirections dirs;
  return dirs;
}

}  // namespace

bool in_geochem(const GeochemParams& d, Cell c) {
  const auto& dirs = directions();
  const double px = c.x + 0.5;
  const double py = c.y + 0.5;
  std::array<double, kPolygonVertices> vx{}, vy{};
  for (int i = 0; i < kPolygonVertices; ++i) {
    const double r = std::max(kMinExtent, d.radii[i]);
    vx[i] = d.center_x + r * dirs.cos[i];
    vy[i] = d.center_y + r * dirs.sin[i];
  }
  // Even-odd rule.
  bool inside = false;
  for (int i = 0, j = kPolygonVertices - 1; i < kPolygonVertices; j = i++) {
    if ((vy[i] > py) != (vy[j] > py)) {
      const double x_cross = vx[i] + (py - vy[i]) * (vx[j] - vx[i]) / (vy[j] - vy[i]);
      if (px < x_cross) inside = !inside;
    }
  }
  return inside;
}

bool in_geochem(const GeometryParams& p, Cell c) {
  return std::any_of(p.domains.begin(), p.domains.end(), [&](const auto& d) { return in_geochem(d, c); });
}

Grid<std::uint8_t> rasterize_graben(const GeometryParams& p, GridShape shape) {
  Grid<std::uint8_t> mask(shape, 0);
  for (int i = 0; i < shape.size(); ++i) mask.at(i) = in_graben(p, shape.cell(i), shape) ? 1 : 0;
  return mask;
}

Grid<std::uint8_t> rasterize_geochem(const GeometryParams& p, GridShape shape) {
  Grid<std::uint8_t> mask(shape, 0);
  for (int i = 0; i < shape.size(); ++i) mask.at(i) = in_geochem(p, shape.cell(i)) ? 1 : 0;
  return mask;
}

GeoModel sample_fields(const Grid<std::uint8_t>& graben, const Grid<std::uint8_t>& geochem, int hypothesis_id,
                       const FieldParams& fp, RngStream& rng) {
  const auto prior = gp::shared_grid_prior(fp.shape, fp.kernel);
  GeoModel m;
  m.graben_mask = graben;
  m.geochem_mask = geochem;
  m.hypothesis_id = hypothesis_id;
  m.thickness = Grid<double>(fp.shape);
  m.grade = Grid<double>(fp.shape);
  const Eigen::VectorXd th = prior->sample(rng);
  const Eigen::VectorXd g = prior->sample(rng);
  for (int i = 0; i < fp.shape.size(); ++i) {
    m.thickness.at(i) = fp.thickness_mean(graben.at(i) != 0) + th(i);
    m.grade.at(i) = fp.grade_mean(geochem.at(i) != 0) + g(i);
  }
  return m;
}

GeoModel sample_truth(const HypothesisSpec& h, const GeometryPrior& prior, const FieldParams& fp, RngStream& rng) {
  const GeometryParams geom = sample_geometry(h, prior, rng);
  return sample_fields(rasterize_graben(geom, fp.shape), rasterize_geochem(geom, fp.shape), h.id, fp, rng);
}

void EconParams::validate() const {
  if (cutoff_grade < 0 || extraction_cost < 0 || drill_cost < 0 || price_scale < 0)
    throw std::invalid_argument("economic parameters must be non-negative");
}

double mineralization(const GeoModel& m, const EconParams& e) {
  const double cutoff = e.cutoff_fraction();
  double total = 0.0;
  const auto& th = m.thickness.values();
  const auto& g = m.grade.values();
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g[i] >= cutoff) total += th[i] * g[i];
  return total;
}

double profit(const GeoModel& m, const EconParams& e, int n_holes) {
  return e.price_scale * mineralization(m, e) - e.extraction_cost - n_holes * e.drill_cost;
}

}  // namespace prospector::geo
