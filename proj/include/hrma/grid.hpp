#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace hrma {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// One axis of a uniform grid: `n` nodes from `lo` to `hi` inclusive.
struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    int n = 0;

    double step() const { return (hi - lo) / (n - 1); }
    double node(int i) const { return i == n - 1 ? hi : lo + i * step(); }
    bool operator==(const Axis&) const = default;
};

using Axes = std::vector<Axis>;

/// A scalar function sampled on a uniform rectangular grid in one or two
/// dimensions. Values are stored row-major with the first axis varying slowest.
class GridFn {
  public:
    GridFn() = default;
    GridFn(Axes axes, std::vector<double> values, bool convex_hint = false);

    /// Samples `f` at every node.
    static GridFn sample(Axes axes, const std::function<double(const Vec&)>& f);

    int dim() const { return static_cast<int>(axes_.size()); }
    const Axes& axes() const { return axes_; }
    const Axis& axis(int k) const { return axes_[k]; }
    std::size_t size() const { return values_.size(); }
    int shape(int k) const { return axes_[k].n; }
    double step(int k) const { return axes_[k].step(); }
    double min_step() const;

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    double operator[](std::size_t flat) const { return values_[flat]; }
    double& operator[](std::size_t flat) { return values_[flat]; }
    double at(int i) const { return values_[i]; }
    double at(int i, int j) const { return values_[flat_index(i, j)]; }

    std::size_t flat_index(int i, int j) const { return static_cast<std::size_t>(i) * axes_[1].n + j; }
    std::array<int, 2> multi_index(std::size_t flat) const;
    Vec node(std::size_t flat) const;

    /// Piecewise-cubic (4-point Lagrange, per axis) interpolation; linear
    /// extrapolation is not performed, `x` must lie inside the box.
    double value(const Vec& x) const;

    bool contains(const Vec& x, double margin_cells = 0.0) const;
    bool same_geometry(const GridFn& other) const { return axes_ == other.axes_; }
    double value_scale() const;

    bool convex_hint() const { return convex_hint_; }
    void set_convex_hint(bool flag) { convex_hint_ = flag; }

  private:
    Axes axes_;
    std::vector<double> values_;
    bool convex_hint_ = false;
};

GridFn operator+(const GridFn& a, const GridFn& b);
GridFn operator*(double c, const GridFn& a);
/// a + c * b on a shared grid.
GridFn axpy(const GridFn& a, double c, const GridFn& b);

/// P = {y : <y, v_j> <= lambda_j for all j}.
struct Polytope {
    std::vector<Vec> normals;
    std::vector<double> offsets;

    static Polytope interval(double lo, double hi);
    static Polytope box(const std::vector<std::array<double, 2>>& bounds);

    int dim() const { return normals.empty() ? 0 : static_cast<int>(normals.front().size()); }
    /// Signed distance to the boundary, positive inside (normals are normalised here).
    double depth(const Vec& y) const;
    bool contains(const Vec& y, double margin = 0.0) const { return depth(y) >= margin; }
    /// Axis-aligned bounding box, computed by vertex enumeration.
    std::vector<std::array<double, 2>> bounding_box() const;
    std::vector<Vec> vertices() const;
    /// Vertex centroid.
    Vec interior_point() const;
    /// Throws DomainError unless P is bounded with nonempty interior.
    void validate() const;
};

}  // namespace hrma
