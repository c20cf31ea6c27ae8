#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "prospector/common.hpp"
#include "prospector/gp.hpp"

namespace prospector::geo {

struct HypothesisSpec {
  int id = 0;
  int n_grabens = 1;
  int n_geochem = 1;
  double prior_prob = 0.0;

  friend bool operator==(const HypothesisSpec&, const HypothesisSpec&) = default;
};

/// The four structural hypotheses: every combination of one or two grabens
/// with one or two geochemical domains, ids 1..4, uniform priors.
std::vector<HypothesisSpec> default_hypotheses();

struct GrabenParams {
  double bottom_start = 0.0;
  double bottom_width = 0.0;
  double top_start = 0.0;
  double top_width = 0.0;

  friend bool operator==(const GrabenParams&, const GrabenParams&) = default;
};

inline constexpr int kPolygonVertices = 10;

struct GeochemParams {
  double center_x = 0.0;
  double center_y = 0.0;
  std::array<double, kPolygonVertices> radii{};

  friend bool operator==(const GeochemParams&, const GeochemParams&) = default;
};

struct GeometryParams {
  std::vector<GrabenParams> grabens;
  std::vector<GeochemParams> domains;

  friend bool operator==(const GeometryParams&, const GeometryParams&) = default;
};

/// Independent-normal prior over every geometry parameter.
struct GeometryPrior {
  double start_mean = 11.0, start_std = 6.0;
  double width_mean = 6.0, width_std = 2.0;
  double center_mean = 16.0, center_std = 8.0;
  double radius_mean = 5.0, radius_std = 2.5;
};

/// Flat parameter vector used by the sampler: 4 values per graben followed by
/// 2 + 10 values per geochemical domain.
std::size_t parameter_dim(const HypothesisSpec& h);
std::vector<double> to_vector(const GeometryParams& p);
GeometryParams from_vector(const HypothesisSpec& h, std::span<const double> v);
/// Prior mean and marginal std in the same layout as to_vector.
void prior_moments(const HypothesisSpec& h, const GeometryPrior& prior, std::vector<double>& mean,
                   std::vector<double>& std);

GeometryParams sample_geometry(const HypothesisSpec& h, const GeometryPrior& prior, RngStream& rng);

inline constexpr double kMinExtent = 0.1;

bool in_graben(const GrabenParams& g, Cell c, GridShape shape);
bool in_graben(const GeometryParams& p, Cell c, GridShape shape);
bool in_geochem(const GeochemParams& d, Cell c);
bool in_geochem(const GeometryParams& p, Cell c);

Grid<std::uint8_t> rasterize_graben(const GeometryParams& p, GridShape shape);
Grid<std::uint8_t> rasterize_geochem(const GeometryParams& p, GridShape shape);

/// Field and measurement parameters of the synthetic geology.
struct FieldParams {
  GridShape shape{32, 32};
  gp::KernelParams kernel{};
  double thickness_outside = 1.0;
  double thickness_inside = 7.5;
  double grade_outside = 0.0;
  double grade_inside = 0.085;
  double noise_std = 0.001;

  double thickness_mean(bool in_graben) const { return in_graben ? thickness_inside : thickness_outside; }
  double grade_mean(bool in_domain) const { return in_domain ? grade_inside : grade_outside; }
};

struct GeoModel {
  Grid<double> thickness;
  Grid<double> grade;
  Grid<std::uint8_t> graben_mask;
  Grid<std::uint8_t> geochem_mask;
  int hypothesis_id = 0;

  GridShape shape() const { return thickness.shape(); }
  friend bool operator==(const GeoModel&, const GeoModel&) = default;
};

/// Draws fields over fixed masks. Thickness and grade are independent GPs
/// whose means switch with the graben and geochemical masks.
GeoModel sample_fields(const Grid<std::uint8_t>& graben, const Grid<std::uint8_t>& geochem, int hypothesis_id,
                       const FieldParams& fp, RngStream& rng);

GeoModel sample_truth(const HypothesisSpec& h, const GeometryPrior& prior, const FieldParams& fp, RngStream& rng);

struct EconParams {
  double cutoff_grade = 6.0;  // percent
  double extraction_cost = 35.0;
  double drill_cost = 0.1;
  double price_scale = 0.3;

  void validate() const;
  double cutoff_fraction() const { return cutoff_grade / 100.0; }
};

/// Sum of thickness * grade over cells at or above the cut-off grade.
double mineralization(const GeoModel& m, const EconParams& e);
double profit(const GeoModel& m, const EconParams& e, int n_holes);

}  // namespace prospector::geo
