#include "hnlabel/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace hnl {

std::size_t NormalMap::valid_count() const {
  std::size_t n = 0;
  for (auto v : valid.pixels())
    n += v ? 1 : 0;
  return n;
}

PointCloud backproject(const DepthFrame &depth) {
  const auto &k = depth.intrinsics;
  k.validate();
  PointCloud cloud{
      Raster<Eigen::Vector3d>(depth.width(), depth.height(),
                              Eigen::Vector3d::Zero()),
      Mask(depth.width(), depth.height(), 0)};
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      const std::size_t i = depth.values.index(u, v);
      if (!depth.valid[i])
        continue;
      const double d = depth.values[i];
      cloud.points[i] = {(u - k.cx) * d / k.fx, (v - k.cy) * d / k.fy, d};
      cloud.valid[i] = 1;
    }
  }
  return cloud;
}

const char *to_string(NormalMethod m) {
  return m == NormalMethod::Covariance ? "covariance" : "inverse_depth";
}

NormalMethod normal_method_from_string(const std::string &s) {
  if (s == "covariance")
    return NormalMethod::Covariance;
  if (s == "inverse_depth")
    return NormalMethod::InverseDepth;
  throw Error("unknown normal method '" + s + "'");
}

namespace {

struct Rect {
  int u0, v0, u1, v1; // inclusive
};

Rect window_at(int cu, int cv, int r, int w, int h) {
  return {std::max(0, cu - r), std::max(0, cv - r), std::min(w - 1, cu + r),
          std::min(h - 1, cv + r)};
}

// A valid neighbour relative to the centre pixel.
struct Sample {
  Eigen::Vector3d d; // point minus centre point
  double dx, dy;     // normalised image coordinate offsets
  double dw;         // inverse-depth offset
  int du, dv;        // pixel offsets
};

void gather(const PointCloud &cloud, const Raster<Eigen::Vector2d> &coords,
            const Rect &rect, int cu, int cv, std::vector<Sample> &out) {
  out.clear();
  const std::size_t ci = cloud.points.index(cu, cv);
  const auto &pts = cloud.points;
  const Eigen::Vector3d &c = pts[ci];
  const Eigen::Vector2d &qc = coords[ci];
  const double wc = 1.0 / c.z();
  for (int y = rect.v0; y <= rect.v1; ++y) {
    for (int x = rect.u0; x <= rect.u1; ++x) {
      const std::size_t j = pts.index(x, y);
      if (!cloud.valid[j])
        continue;
      out.push_back({pts[j] - c, coords[j].x() - qc.x(), coords[j].y() - qc.y(),
                     1.0 / pts[j].z() - wc, x - cu, y - cv});
    }
  }
}

// dw = a dx + b dy + c0 by least squares.
struct Regression {
  Eigen::Vector3d coef = Eigen::Vector3d::Zero();
  double mean_sq = 0;
  int count = 0;
  bool ok = false;

  double residual(const Sample &s) const {
    return s.dw - (coef(0) * s.dx + coef(1) * s.dy + coef(2));
  }
};

// Normal equations of the regression, updated as samples come and go.
struct RegressionSums {
  Eigen::Matrix3d design = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  double sq = 0;
  int count = 0;

  void add(const Sample &s, double sign) {
    const Eigen::Vector3d a(s.dx, s.dy, 1.0);
    design.noalias() += sign * (a * a.transpose());
    rhs += sign * s.dw * a;
    sq += sign * s.dw * s.dw;
    count += sign > 0 ? 1 : -1;
  }

  Regression solve() const {
    Regression r;
    r.count = count;
    if (count < 3)
      return r;
    const Eigen::LDLT<Eigen::Matrix3d> ldlt(design);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      return r;
    r.coef = ldlt.solve(rhs);
    if (!r.coef.allFinite())
      return r;
    r.mean_sq = std::max(0.0, sq - r.coef.dot(rhs)) / count;
    r.ok = true;
    return r;
  }
};

Regression regress(const std::vector<Sample> &samples,
                   const std::vector<char> &keep) {
  RegressionSums sums;
  for (std::size_t k = 0; k < samples.size(); ++k)
    if (keep[k])
      sums.add(samples[k], 1.0);
  return sums.solve();
}

// True when a quadratic in the pixel offsets explains the kept samples far
// better than their plane does (F statistic above `f_max`): the samples span
// a crease rather than one noisy plane.
bool spans_crease(const std::vector<Sample> &samples,
                  const std::vector<char> &keep, const Regression &plane,
                  double floor_sq, double f_max) {
  double sse_plane = 0;
  int n = 0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (!keep[k])
      continue;
    const double e = plane.residual(samples[k]);
    sse_plane += e * e;
    ++n;
  }
  // The quadratic cannot gain more than the plane leaves.
  if (n <= 12 || !(sse_plane > n * floor_sq))
    return false;

  using Vec6 = Eigen::Matrix<double, 6, 1>;
  Eigen::Matrix<double, 6, 6> design = Eigen::Matrix<double, 6, 6>::Zero();
  Vec6 rhs = Vec6::Zero();
  double sq = 0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (!keep[k])
      continue;
    const Sample &s = samples[k];
    const double u = s.du, v = s.dv;
    const double a[6] = {u, v, 1.0, u * u, u * v, v * v};
    for (int r = 0; r < 6; ++r) {
      for (int c = r; c < 6; ++c)
        design(r, c) += a[r] * a[c];
      rhs(r) += a[r] * s.dw;
    }
    sq += s.dw * s.dw;
  }
  const Eigen::LDLT<Eigen::Matrix<double, 6, 6>, Eigen::Upper> ldlt(design);
  if (ldlt.info() != Eigen::Success)
    return false;
  const Vec6 coef = ldlt.solve(rhs);
  if (!coef.allFinite())
    return false;
  const double sse_quad = std::max(0.0, sq - coef.dot(rhs));
  const double gain = sse_plane - sse_quad;
  if (!(gain > n * floor_sq))
    return false;
  return gain / 3.0 > f_max * (sse_quad / (n - 6));
}

struct PlaneFit {
  Eigen::Vector3d normal = Eigen::Vector3d::Zero(); // not yet oriented
  double centre_dw = 0; // fitted inverse-depth offset at the centre pixel
  bool ok = false;
};

// Plane through the kept samples, with the planarity guards.
PlaneFit plane_fit(const std::vector<Sample> &samples,
                   const std::vector<char> &keep, const Eigen::Vector3d &centre,
                   const Eigen::Vector2d &qc, const NormalParams &params) {
  int n = 0;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  Eigen::Matrix3d outer = Eigen::Matrix3d::Zero();
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (!keep[k])
      continue;
    sum += samples[k].d;
    outer.noalias() += samples[k].d * samples[k].d.transpose();
    ++n;
  }
  PlaneFit f;
  if (n < std::max(3, params.min_neighbors))
    return f;
  const Eigen::Vector3d mean = sum / n;
  const Eigen::Matrix3d cov = outer / n - mean * mean.transpose();

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  if (es.info() != Eigen::Success)
    return f;
  const Eigen::Vector3d lambda = es.eigenvalues(); // ascending
  const double total = lambda.sum();
  if (!(total > 0))
    return f;
  // Collinear support or an ambiguous minor axis: no usable plane.
  if (lambda(1) <= 1e-9 * lambda(2) || lambda(1) - lambda(0) <= 1e-6 * total)
    return f;
  if (std::max(lambda(0), 0.0) / total > params.max_curvature)
    return f;

  const Regression reg = regress(samples, keep);
  if (!reg.ok)
    return f;
  f.centre_dw = reg.coef(2);
  if (params.method == NormalMethod::InverseDepth) {
    // Uncentre: 1/z = a x_n + b y_n + c with c = 1/zc + c0 - a xc - b yc.
    const double c = 1.0 / centre.z() + reg.coef(2) - reg.coef(0) * qc.x() -
                     reg.coef(1) * qc.y();
    f.normal = Eigen::Vector3d(reg.coef(0), reg.coef(1), c);
    if (!(f.normal.norm() > 0))
      return f;
    f.normal.normalize();
  } else {
    f.normal = es.eigenvectors().col(0).normalized();
  }
  f.ok = true;
  return f;
}

// Summed-area tables of the inverse-depth regression moments over valid
// pixels: 1, x, y, w, xx, xy, yy, xw, yw, ww with (x, y) normalised image
// coordinates and w = 1/z, shifted by their frame means.
class MomentTable {
public:
  static constexpr int kChannels = 10;
  using Moments = std::array<double, kChannels>;

  MomentTable(const PointCloud &cloud, const Raster<Eigen::Vector2d> &coords)
      : stride_(cloud.width() + 1),
        table_(static_cast<std::size_t>(stride_) * (cloud.height() + 1) *
                   kChannels,
               0.0) {
    const int w = cloud.width(), h = cloud.height();
    // Shift to the frame means to limit cancellation in the window sums.
    std::size_t count = 0;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
      if (!cloud.valid[i])
        continue;
      offset_ += Eigen::Vector3d(coords[i].x(), coords[i].y(),
                                 1.0 / cloud.points[i].z());
      ++count;
    }
    if (count > 0)
      offset_ /= static_cast<double>(count);
    Moments row{};
    for (int v = 0; v < h; ++v) {
      row.fill(0.0);
      for (int u = 0; u < w; ++u) {
        const std::size_t i = cloud.points.index(u, v);
        if (cloud.valid[i])
          add(row, local(coords[i]), 1.0 / cloud.points[i].z() - wshift());
        double *dst = at(u + 1, v + 1);
        const double *up = at(u + 1, v);
        for (int c = 0; c < kChannels; ++c)
          dst[c] = up[c] + row[c];
      }
    }
  }

  static void add(Moments &m, const Eigen::Vector2d &q, double w) {
    const double x = q.x(), y = q.y();
    m[0] += 1;
    m[1] += x;
    m[2] += y;
    m[3] += w;
    m[4] += x * x;
    m[5] += x * y;
    m[6] += y * y;
    m[7] += x * w;
    m[8] += y * w;
    m[9] += w * w;
  }

  Moments sum(const Rect &r) const {
    Moments out{};
    const double *a = at(r.u1 + 1, r.v1 + 1), *b = at(r.u0, r.v1 + 1),
                 *c = at(r.u1 + 1, r.v0), *d = at(r.u0, r.v0);
    for (int k = 0; k < kChannels; ++k)
      out[k] = a[k] - b[k] - c[k] + d[k];
    return out;
  }

  // Normalised coordinates and inverse depth in the shifted frame.
  Eigen::Vector2d local(const Eigen::Vector2d &q) const {
    return q - offset_.head<2>();
  }
  double wshift() const { return offset_.z(); }

private:
  const double *at(int u, int v) const {
    return table_.data() +
           (static_cast<std::size_t>(v) * stride_ + u) * kChannels;
  }
  double *at(int u, int v) {
    return table_.data() +
           (static_cast<std::size_t>(v) * stride_ + u) * kChannels;
  }

  Eigen::Vector3d offset_ = Eigen::Vector3d::Zero();
  int stride_;
  std::vector<double> table_;
};

// Plane w = wm + a (x - xm) + b (y - ym) in the table's shifted frame.
struct MomentPlane {
  double n = 0, xm = 0, ym = 0, wm = 0, a = 0, b = 0;
  double score = std::numeric_limits<double>::infinity(); // residual variance
  bool ok = false;

  double predict(const Eigen::Vector2d &q) const {
    return wm + a * (q.x() - xm) + b * (q.y() - ym);
  }
};

MomentPlane plane_from_moments(const MomentTable::Moments &m,
                               int min_neighbors) {
  MomentPlane p;
  p.n = m[0];
  if (p.n < std::max(4, min_neighbors))
    return p;
  p.xm = m[1] / p.n;
  p.ym = m[2] / p.n;
  p.wm = m[3] / p.n;
  const double sxx = m[4] - p.n * p.xm * p.xm;
  const double sxy = m[5] - p.n * p.xm * p.ym;
  const double syy = m[6] - p.n * p.ym * p.ym;
  const double sxw = m[7] - p.n * p.xm * p.wm;
  const double syw = m[8] - p.n * p.ym * p.wm;
  const double sww = m[9] - p.n * p.wm * p.wm;
  const double det = sxx * syy - sxy * sxy;
  if (!(det > 1e-12 * (sxx + syy) * (sxx + syy)))
    return p;
  p.a = (syy * sxw - sxy * syw) / det;
  p.b = (sxx * syw - sxy * sxw) / det;
  // Unbiased, so small windows do not win by overfitting.
  p.score = std::max(0.0, sww - p.a * sxw - p.b * syw) / (p.n - 3);
  p.ok = std::isfinite(p.score);
  return p;
}

// Summed-area table over a mask.
class CountTable {
public:
  explicit CountTable(const Mask &mask)
      : stride_(mask.width() + 1),
        table_(static_cast<std::size_t>(stride_) * (mask.height() + 1), 0) {
    for (int v = 0; v < mask.height(); ++v) {
      int row = 0;
      for (int u = 0; u < mask.width(); ++u) {
        row += mask(u, v) ? 1 : 0;
        table_[idx(u + 1, v + 1)] = table_[idx(u + 1, v)] + row;
      }
    }
  }

  int count(const Rect &r) const {
    return table_[idx(r.u1 + 1, r.v1 + 1)] - table_[idx(r.u0, r.v1 + 1)] -
           table_[idx(r.u1 + 1, r.v0)] + table_[idx(r.u0, r.v0)];
  }

private:
  std::size_t idx(int u, int v) const {
    return static_cast<std::size_t>(v) * stride_ + u;
  }
  int stride_;
  std::vector<int> table_;
};

// Pixels with a 4-neighbour more than depth_jump away in depth, or invalid.
Mask step_flags(const PointCloud &cloud, double depth_jump) {
  const int w = cloud.width(), h = cloud.height();
  Mask flags(w, h, 0);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const std::size_t i = cloud.points.index(u, v);
      if (!cloud.valid[i]) {
        flags[i] = 1;
        continue;
      }
      const double z = cloud.points[i].z();
      if (u + 1 < w) {
        const std::size_t j = cloud.points.index(u + 1, v);
        if (cloud.valid[j] && std::abs(cloud.points[j].z() - z) > depth_jump)
          flags[i] = flags[j] = 1;
      }
      if (v + 1 < h) {
        const std::size_t j = cloud.points.index(u, v + 1);
        if (cloud.valid[j] && std::abs(cloud.points[j].z() - z) > depth_jump)
          flags[i] = flags[j] = 1;
      }
    }
  }
  return flags;
}

// Squared inverse-depth residual (1/m^2) always accepted, covering rounding
// in the window sums.
constexpr double kInlierFloor = 1e-12;
// Depth residual (m) below which a trimmed point is always kept.
constexpr double kResidualFloor = 1e-5;
constexpr int kTrimIterations = 10;
// F statistic of the quadratic-over-plane test beyond which a fit is taken to
// straddle a crease.
constexpr double kCreaseF = 10.0;
// Fraction of a window the first trim may drop before the placement is
// re-scored with the discontinuity guard applied.
constexpr double kMaxFastTrim = 0.1;

// Centred window first so that it wins ties.
constexpr int kShifts[9][2] = {{0, 0},  {-1, 0}, {1, 0},  {0, -1}, {0, 1},
                               {-1, -1}, {1, -1}, {-1, 1}, {1, 1}};

// Window placement and robust refit for one pixel at a time.
class EdgeAwareFitter {
public:
  EdgeAwareFitter(const PointCloud &cloud,
                  const Raster<Eigen::Vector2d> &coords,
                  const NormalParams &params)
      : cloud_(cloud), coords_(coords), params_(params), table_(cloud, coords),
        steps_(step_flags(cloud, params.depth_jump)) {
    const std::size_t n = static_cast<std::size_t>(2 * params.window + 1) *
                          (2 * params.window + 1);
    samples_.reserve(n);
    keep_.reserve(n);
    residuals_.reserve(n);
    scratch_.reserve(n);
  }

  PlaneFit fit(int u, int v) {
    const Selection sel = select(u, v, false);
    bool doubtful = false;
    PlaneFit f;
    if (sel.plane.ok)
      f = refine(u, v, sel, &doubtful);
    if (f.ok && !doubtful)
      return f;
    const Selection guarded = select(u, v, true);
    if (!guarded.plane.ok)
      return {};
    return refine(u, v, guarded, nullptr);
  }

private:
  struct Selection {
    MomentPlane plane;
    Rect rect{};
  };

  MomentTable::Moments guarded_moments(const Rect &rect, double zc) const {
    MomentTable::Moments m{};
    const auto &pts = cloud_.points;
    for (int y = rect.v0; y <= rect.v1; ++y) {
      for (int x = rect.u0; x <= rect.u1; ++x) {
        const std::size_t j = pts.index(x, y);
        if (!cloud_.valid[j] || std::abs(pts[j].z() - zc) > params_.depth_jump)
          continue;
        MomentTable::add(m, table_.local(coords_[j]),
                         1.0 / pts[j].z() - table_.wshift());
      }
    }
    return m;
  }

  // Among the placements containing the pixel, the one whose plane explains
  // its points best, subject to the pixel being an inlier of that plane.
  Selection select(int u, int v, bool guarded) const {
    const int r = params_.window;
    const int w = cloud_.width(), h = cloud_.height();
    const std::size_t ci = cloud_.points.index(u, v);
    const double zc = cloud_.points[ci].z();
    const Eigen::Vector2d qc = table_.local(coords_[ci]);
    const double wc = 1.0 / zc - table_.wshift();
    // Scores below the residual floor are ties, settled by support, so a
    // sliver of points passing the guard cannot beat a full window.
    const double floor_sq = std::pow(kResidualFloor / (zc * zc), 2);
    double best_key = std::numeric_limits<double>::infinity();
    Selection best;
    for (const auto &s : kShifts) {
      const int cu = u + s[0] * r, cv = v + s[1] * r;
      const Rect rect = window_at(cu, cv, r, w, h);
      // Border clipping may not leave a shifted placement thinner than the
      // centred window in an image corner; thin strips are poorly
      // conditioned.
      if (rect.u1 - rect.u0 < r || rect.v1 - rect.v0 < r)
        continue;
      // The sums cannot skip points behind a step; placements that contain
      // one are scored over the neighbours passing the discontinuity guard.
      const bool explicit_sums = guarded || steps_.count(rect) > 0;
      const MomentPlane p = plane_from_moments(
          explicit_sums ? guarded_moments(rect, zc) : table_.sum(rect),
          params_.min_neighbors);
      if (!p.ok)
        continue;
      const double key = std::max(p.score, floor_sq);
      if (key > best_key || (key == best_key && p.n <= best.plane.n))
        continue;
      const double res = wc - p.predict(qc);
      if (res * res > 9.0 * p.score + kInlierFloor)
        continue;
      best = {p, rect};
      best_key = key;
    }
    return best;
  }

  // Refit on the placement with depth_jump applied to the residual against
  // its plane, then trim to 3 robust sigma (median absolute residual) until
  // the inlier set settles. A pixel that drops out sits on a different
  // surface than most of its window. `doubtful` reports a step inside the
  // window or a heavy first trim.
  PlaneFit refine(int u, int v, const Selection &sel, bool *doubtful) {
    const std::size_t ci = cloud_.points.index(u, v);
    const Eigen::Vector3d &centre = cloud_.points[ci];
    gather(cloud_, coords_, sel.rect, u, v, samples_);

    // Selected plane at the centre, as an inverse-depth offset field.
    const double wp = sel.plane.predict(table_.local(coords_[ci])) +
                      table_.wshift();
    keep_.assign(samples_.size(), 0);
    int kept = 0;
    bool centre_kept = false;
    for (std::size_t k = 0; k < samples_.size(); ++k) {
      const Sample &s = samples_[k];
      const double wj = wp + sel.plane.a * s.dx + sel.plane.b * s.dy;
      const bool in = wj > 0 && std::abs(centre.z() + s.d.z() - 1.0 / wj) <=
                                    params_.depth_jump;
      keep_[k] = in ? 1 : 0;
      kept += in ? 1 : 0;
      if (s.dx == 0 && s.dy == 0 && s.dw == 0)
        centre_kept = centre_kept || in;
    }
    if (!centre_kept)
      return {};
    if (doubtful && kept < static_cast<int>(samples_.size()))
      *doubtful = true;

    const double floor_w = kResidualFloor / (centre.z() * centre.z());
    RegressionSums sums;
    for (std::size_t k = 0; k < samples_.size(); ++k)
      if (keep_[k])
        sums.add(samples_[k], 1.0);
    Regression reg = sums.solve();
    double tol = 0;
    bool settled = false;
    for (int iter = 0; iter < kTrimIterations && reg.ok; ++iter) {
      residuals_.clear();
      for (std::size_t k = 0; k < samples_.size(); ++k)
        residuals_.push_back(keep_[k] ? std::abs(reg.residual(samples_[k]))
                                      : -1.0);
      scratch_.clear();
      for (const double e : residuals_)
        if (e >= 0)
          scratch_.push_back(e);
      const auto mid = scratch_.begin() + scratch_.size() / 2;
      std::nth_element(scratch_.begin(), mid, scratch_.end());
      tol = 3.0 * 1.4826 * *mid + floor_w;
      if (std::abs(reg.coef(2)) > tol)
        return {}; // the centre sample has dx = dy = dw = 0
      int dropped = 0;
      for (std::size_t k = 0; k < samples_.size(); ++k) {
        if (residuals_[k] > tol) {
          keep_[k] = 0;
          sums.add(samples_[k], -1.0);
          ++dropped;
        }
      }
      if (dropped == 0) {
        settled = true;
        break;
      }
      if (doubtful && iter == 0 && dropped > kMaxFastTrim * reg.count)
        *doubtful = true;
      reg = sums.solve();
    }
    if (!reg.ok || (!settled && std::abs(reg.coef(2)) > tol))
      return {};
    if (spans_crease(samples_, keep_, reg, floor_w * floor_w, kCreaseF))
      return {};
    return plane_fit(samples_, keep_, centre, coords_[ci], params_);
  }

  const PointCloud &cloud_;
  const Raster<Eigen::Vector2d> &coords_;
  const NormalParams &params_;
  MomentTable table_;
  CountTable steps_;
  std::vector<Sample> samples_;
  std::vector<char> keep_;
  std::vector<double> residuals_;
  std::vector<double> scratch_;
};

} // namespace

NormalMap estimate_normals(const PointCloud &cloud,
                           const NormalParams &params) {
  if (params.window < 1)
    throw Error("estimate_normals: window must be >= 1");
  const int w = cloud.width(), h = cloud.height();
  const int r = params.window;
  NormalMap out{Raster<Eigen::Vector3d>(w, h, Eigen::Vector3d::Zero()),
                Mask(w, h, 0),
                Raster<Eigen::Vector3d>(w, h, Eigen::Vector3d::Zero())};
  const auto &pts = cloud.points;

  Raster<Eigen::Vector2d> coords(w, h, Eigen::Vector2d::Zero());
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (cloud.valid[i])
      coords[i] = normalized_coords(pts[i]);
  std::optional<EdgeAwareFitter> edge_aware;
  if (params.edge_aware)
    edge_aware.emplace(cloud, coords, params);
  const double min_facing =
      std::cos(params.max_incidence_deg * 3.14159265358979323846 / 180.0);
  std::vector<Sample> samples;
  std::vector<char> keep;

  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const std::size_t ci = pts.index(u, v);
      if (!cloud.valid[ci])
        continue;
      const Eigen::Vector3d &centre = pts[ci];
      PlaneFit fit;
      if (edge_aware) {
        fit = edge_aware->fit(u, v);
      } else {
        gather(cloud, coords, window_at(u, v, r, w, h), u, v, samples);
        keep.resize(samples.size());
        for (std::size_t k = 0; k < samples.size(); ++k)
          keep[k] = std::abs(samples[k].d.z()) <= params.depth_jump ? 1 : 0;
        fit = plane_fit(samples, keep, centre, coords[ci], params);
      }
      if (!fit.ok)
        continue;
      Eigen::Vector3d normal = fit.normal;
      const double facing = normal.dot(centre) / centre.norm();
      if (std::abs(facing) < min_facing)
        continue;
      if (facing > 0)
        normal = -normal;
      // Plane depth at the centre pixel: 1/z = 1/zc + c0.
      const double ws = 1.0 / centre.z() + fit.centre_dw;
      out.normals[ci] = normal;
      out.surface[ci] = ws > 0 ? Eigen::Vector3d(centre / (centre.z() * ws))
                               : centre;
      out.valid[ci] = 1;
    }
  }
  return out;
}

PointCloud surface_cloud(const PointCloud &cloud, const NormalMap &normals) {
  if (!cloud.points.same_shape(normals.normals))
    throw Error("surface_cloud: cloud and normal map differ in size");
  PointCloud out = cloud;
  for (std::size_t i = 0; i < out.points.size(); ++i)
    if (cloud.valid[i] && normals.valid[i])
      out.points[i] = normals.surface[i];
  return out;
}

void write_xyz_normals(const std::filesystem::path &path,
                       const PointCloud &cloud, const NormalMap &normals) {
  if (!cloud.points.same_shape(normals.normals))
    throw Error("write_xyz_normals: cloud and normal map differ in size");
  std::ofstream out(path);
  if (!out)
    throw Error(path.string() + ": cannot write point file");
  out.precision(9);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (!cloud.valid[i])
      continue;
    const auto &p = cloud.points[i];
    const Eigen::Vector3d n =
        normals.valid[i] ? normals.normals[i] : Eigen::Vector3d::Zero();
    out << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << n.x() << ' '
        << n.y() << ' ' << n.z() << '\n';
  }
}

} // namespace hnl
