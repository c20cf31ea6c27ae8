#pragma once

// Reference computations for tests. Deliberately naive: plain nested vectors,
// textbook Cholesky, no shared code with the library.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;
using Vec = std::vector<double>;

inline double matern32(double d, double s, double l) {
  const double a = std::sqrt(3.0) * d / l;
  return s * s * (1.0 + a) * std::exp(-a);
}

inline Mat cholesky(Mat a) {
  const std::size_t n = a.size();
  Mat l(n, Vec(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    double sum = a[j][j];
    for (std::size_t k = 0; k < j; ++k) sum -= l[j][k] * l[j][k];
    if (sum <= 0) throw std::runtime_error("oracle cholesky: not PD");
    l[j][j] = std::sqrt(sum);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
      l[i][j] = s / l[j][j];
    }
  }
  return l;
}

inline Vec forward(const Mat& l, const Vec& b) {
  Vec y(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l[i][k] * y[k];
    y[i] = s / l[i][i];
  }
  return y;
}

inline Vec backward(const Mat& l, const Vec& y) {
  const std::size_t n = y.size();
  Vec x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l[k][ii] * x[k];
    x[ii] = s / l[ii][ii];
  }
  return x;
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double mvn_logpdf(const Vec& x, const Vec& mean, const Mat& cov) {
  const Mat l = cholesky(cov);
  Vec r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[i] - mean[i];
  const Vec z = forward(l, r);
  double logdet = 0;
  for (std::size_t i = 0; i < l.size(); ++i) logdet += 2 * std::log(l[i][i]);
  return -0.5 * dot(z, z) - 0.5 * logdet - 0.5 * x.size() * std::log(2 * std::numbers::pi);
}

inline double normal_logpdf(double x, double mean, double var) {
  return -0.5 * std::log(2 * std::numbers::pi * var) - 0.5 * (x - mean) * (x - mean) / var;
}

struct Pt {
  double x, y;
};

/// Simple kriging with a Matern 3/2 kernel and constant prior mean per location.
struct KrigeResult {
  double mean, var;
};

inline KrigeResult krige(const std::vector<Pt>& locs, const Vec& vals, const Vec& prior_mean, double noise_var,
                         Pt q, double q_mean, double s, double l, double jitter = 1e-10) {
  const std::size_t n = locs.size();
  if (n == 0) return {q_mean, s * s};
  Mat k(n, Vec(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      k[i][j] = matern32(std::hypot(locs[i].x - locs[j].x, locs[i].y - locs[j].y), s, l) +
                (i == j ? noise_var + jitter : 0.0);
  Vec kq(n), r(n);
  for (std::size_t i = 0; i < n; ++i) {
    kq[i] = matern32(std::hypot(locs[i].x - q.x, locs[i].y - q.y), s, l);
    r[i] = vals[i] - prior_mean[i];
  }
  const Mat ch = cholesky(k);
  const Vec w = backward(ch, forward(ch, r));
  const Vec v = forward(ch, kq);
  return {q_mean + dot(kq, w), s * s - dot(v, v)};
}

inline Mat matern_gram(const std::vector<Vec>& locs, double s, double l, double diag) {
  Mat k(locs.size(), Vec(locs.size()));
  for (std::size_t i = 0; i < locs.size(); ++i)
    for (std::size_t j = 0; j < locs.size(); ++j)
      k[i][j] = matern32(std::hypot(locs[i][0] - locs[j][0], locs[i][1] - locs[j][1]), s, l) + (i == j ? diag : 0.0);
  return k;
}

}  // namespace oracle
