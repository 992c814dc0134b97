#pragma once

// Uniform Cartesian grids on [-L, L]^dim and the finite-difference operators
// shared by every solver. Fields are plain Eigen column vectors (one value per
// node) and vector fields are (nodes x dim) matrices, one column per
// component. Node ordering is lexicographic with the first axis slowest.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "emfg/errors.hpp"

namespace emfg {

template <typename Scalar>
using ScalarFieldT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using VectorFieldT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using PointT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using ScalarField = ScalarFieldT<double>;
using VectorField = VectorFieldT<double>;
using Point = PointT<double>;

enum class GradientScheme { central, upwind };

template <typename Scalar = double>
class Grid {
 public:
  using Index = Eigen::Index;

  Grid(int dim, Scalar half_width, int points_per_axis)
      : dim_(dim), half_width_(half_width), n_(points_per_axis) {
    if (dim < 1 || dim > 3) {
      throw ConfigError("grid dimension must be 1, 2 or 3, got " + std::to_string(dim));
    }
    if (!(half_width > Scalar(0)) || !std::isfinite(static_cast<double>(half_width))) {
      throw ConfigError("grid half width must be positive and finite");
    }
    if (points_per_axis < 3 || points_per_axis % 2 == 0) {
      throw ConfigError("points per axis must be an odd integer >= 3, got " +
                        std::to_string(points_per_axis));
    }
    h_ = Scalar(2) * half_width_ / Scalar(n_ - 1);
    size_ = 1;
    for (int a = 0; a < dim_; ++a) size_ *= n_;
    for (int a = 0; a < dim_; ++a) {
      Index s = 1;
      for (int b = a + 1; b < dim_; ++b) s *= n_;
      stride_[a] = s;
    }
  }

  int dim() const { return dim_; }
  Scalar half_width() const { return half_width_; }
  int points_per_axis() const { return n_; }
  Scalar spacing() const { return h_; }
  Index size() const { return size_; }
  Index stride(int axis) const { return stride_[axis]; }

  // Position of node `idx` along `axis`, in [0, n).
  int axis_index(Index idx, int axis) const {
    return static_cast<int>((idx / stride_[axis]) % n_);
  }

  std::array<int, 3> multi_index(Index idx) const {
    std::array<int, 3> mi{0, 0, 0};
    for (int a = 0; a < dim_; ++a) mi[a] = axis_index(idx, a);
    return mi;
  }

  Index index(const std::array<int, 3>& mi) const {
    Index idx = 0;
    for (int a = 0; a < dim_; ++a) {
      if (mi[a] < 0 || mi[a] >= n_) throw ShapeError("grid multi-index out of range");
      idx += static_cast<Index>(mi[a]) * stride_[a];
    }
    return idx;
  }

  Scalar axis_coordinate(int i) const { return -half_width_ + h_ * Scalar(i); }

  PointT<Scalar> coordinate(Index idx) const {
    PointT<Scalar> x(dim_);
    for (int a = 0; a < dim_; ++a) x[a] = axis_coordinate(axis_index(idx, a));
    return x;
  }

  // Nearest node to an arbitrary point (clamped to the box).
  Index nearest_index(const PointT<Scalar>& x) const {
    std::array<int, 3> mi{0, 0, 0};
    for (int a = 0; a < dim_; ++a) {
      const double t = static_cast<double>((x[a] + half_width_) / h_);
      mi[a] = std::clamp(static_cast<int>(std::lround(t)), 0, n_ - 1);
    }
    return index(mi);
  }

  Index center_index() const {
    std::array<int, 3> mi{0, 0, 0};
    for (int a = 0; a < dim_; ++a) mi[a] = (n_ - 1) / 2;
    return index(mi);
  }

  bool on_boundary(Index idx) const {
    for (int a = 0; a < dim_; ++a) {
      const int i = axis_index(idx, a);
      if (i == 0 || i == n_ - 1) return true;
    }
    return false;
  }

  // Tensor-product trapezoidal weights.
  ScalarFieldT<Scalar> quadrature_weights() const {
    ScalarFieldT<Scalar> w(size_);
    for (Index idx = 0; idx < size_; ++idx) {
      Scalar wi(1);
      for (int a = 0; a < dim_; ++a) {
        const int i = axis_index(idx, a);
        wi *= (i == 0 || i == n_ - 1) ? h_ / Scalar(2) : h_;
      }
      w[idx] = wi;
    }
    return w;
  }

  Scalar volume() const {
    Scalar v(1);
    for (int a = 0; a < dim_; ++a) v *= Scalar(2) * half_width_;
    return v;
  }

  bool same_shape(const Grid& other) const {
    return dim_ == other.dim_ && n_ == other.n_ && half_width_ == other.half_width_;
  }

 private:
  int dim_;
  Scalar half_width_;
  int n_;
  Scalar h_{};
  Index size_{};
  std::array<Index, 3> stride_{1, 1, 1};
};

namespace detail {

template <typename Scalar, typename Derived>
void require_scalar_shape(const Grid<Scalar>& grid, const Eigen::MatrixBase<Derived>& f,
                          const char* what) {
  if (f.rows() != grid.size() || f.cols() != 1) {
    throw ShapeError(std::string(what) + ": scalar field has " + std::to_string(f.rows()) + "x" +
                     std::to_string(f.cols()) + " entries, grid has " +
                     std::to_string(grid.size()) + " nodes");
  }
}

template <typename Scalar, typename Derived>
void require_vector_shape(const Grid<Scalar>& grid, const Eigen::MatrixBase<Derived>& v,
                          const char* what) {
  if (v.rows() != grid.size() || v.cols() != grid.dim()) {
    throw ShapeError(std::string(what) + ": vector field has " + std::to_string(v.rows()) +
                     "x" + std::to_string(v.cols()) + " entries, expected " +
                     std::to_string(grid.size()) + "x" + std::to_string(grid.dim()));
  }
}

}  // namespace detail

template <typename Scalar, typename Fn>
ScalarFieldT<Scalar> sample(const Grid<Scalar>& grid, Fn&& fn) {
  ScalarFieldT<Scalar> f(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) f[i] = fn(grid.coordinate(i));
  return f;
}

/// Finite-difference gradient. `central` is second order in the interior and
/// first-order one-sided on boundary nodes. `upwind` takes the one-sided
/// difference on the side the direction field points away from (backward
/// where the direction component is positive, forward where negative, central
/// where it vanishes).
template <typename Scalar, typename Derived>
VectorFieldT<Scalar> gradient(const Grid<Scalar>& grid, const Eigen::MatrixBase<Derived>& f,
                              GradientScheme scheme = GradientScheme::central,
                              const VectorFieldT<Scalar>* direction = nullptr) {
  detail::require_scalar_shape(grid, f, "gradient");
  if (scheme == GradientScheme::upwind) {
    if (direction == nullptr) throw ShapeError("gradient: upwind scheme needs a direction field");
    detail::require_vector_shape(grid, *direction, "gradient");
  }
  const int n = grid.points_per_axis();
  const Scalar h = grid.spacing();
  VectorFieldT<Scalar> g(grid.size(), grid.dim());
  for (Eigen::Index idx = 0; idx < grid.size(); ++idx) {
    for (int a = 0; a < grid.dim(); ++a) {
      const int i = grid.axis_index(idx, a);
      const Eigen::Index s = grid.stride(a);
      const Scalar fwd = i < n - 1 ? (f[idx + s] - f[idx]) / h : Scalar(0);
      const Scalar bwd = i > 0 ? (f[idx] - f[idx - s]) / h : Scalar(0);
      Scalar d;
      if (i == 0) {
        d = fwd;
      } else if (i == n - 1) {
        d = bwd;
      } else if (scheme == GradientScheme::central) {
        d = (f[idx + s] - f[idx - s]) / (Scalar(2) * h);
      } else {
        const Scalar dir = (*direction)(idx, a);
        d = dir > Scalar(0) ? bwd : (dir < Scalar(0) ? fwd : (fwd + bwd) / Scalar(2));
      }
      g(idx, a) = d;
    }
  }
  return g;
}

/// Divergence with zero-flux closure: central differences in the interior and
/// half-cell balances on boundary nodes with no flux through the box faces.
/// It is the exact negative adjoint of the central gradient under the
/// trapezoidal inner product, so integrate(divergence(v)) == 0 for every v.
template <typename Scalar, typename Derived>
ScalarFieldT<Scalar> divergence(const Grid<Scalar>& grid, const Eigen::MatrixBase<Derived>& v) {
  detail::require_vector_shape(grid, v, "divergence");
  const int n = grid.points_per_axis();
  const Scalar h = grid.spacing();
  ScalarFieldT<Scalar> d = ScalarFieldT<Scalar>::Zero(grid.size());
  for (Eigen::Index idx = 0; idx < grid.size(); ++idx) {
    Scalar acc(0);
    for (int a = 0; a < grid.dim(); ++a) {
      const int i = grid.axis_index(idx, a);
      const Eigen::Index s = grid.stride(a);
      if (i == 0) {
        acc += (v(idx, a) + v(idx + s, a)) / h;
      } else if (i == n - 1) {
        acc -= (v(idx, a) + v(idx - s, a)) / h;
      } else {
        acc += (v(idx + s, a) - v(idx - s, a)) / (Scalar(2) * h);
      }
    }
    d[idx] = acc;
  }
  return d;
}

/// Compact (2*dim+1)-point Laplacian with a reflecting (zero normal
/// derivative) closure on boundary nodes. Symmetric under the trapezoidal
/// inner product.
template <typename Scalar, typename Derived>
ScalarFieldT<Scalar> laplacian(const Grid<Scalar>& grid, const Eigen::MatrixBase<Derived>& f) {
  detail::require_scalar_shape(grid, f, "laplacian");
  const int n = grid.points_per_axis();
  const Scalar h2 = grid.spacing() * grid.spacing();
  ScalarFieldT<Scalar> out(grid.size());
  for (Eigen::Index idx = 0; idx < grid.size(); ++idx) {
    Scalar acc(0);
    for (int a = 0; a < grid.dim(); ++a) {
      const int i = grid.axis_index(idx, a);
      const Eigen::Index s = grid.stride(a);
      if (i == 0) {
        acc += Scalar(2) * (f[idx + s] - f[idx]) / h2;
      } else if (i == n - 1) {
        acc += Scalar(2) * (f[idx - s] - f[idx]) / h2;
      } else {
        acc += (f[idx + s] - Scalar(2) * f[idx] + f[idx - s]) / h2;
      }
    }
    out[idx] = acc;
  }
  return out;
}

template <typename Scalar, typename Derived>
Scalar integrate(const Grid<Scalar>& grid, const Eigen::MatrixBase<Derived>& f) {
  detail::require_scalar_shape(grid, f, "integrate");
  return grid.quadrature_weights().dot(f.template cast<Scalar>());
}

/// Pointwise dot product of two vector fields.
template <typename Scalar>
ScalarFieldT<Scalar> dot(const VectorFieldT<Scalar>& a, const VectorFieldT<Scalar>& b) {
  return a.cwiseProduct(b).rowwise().sum();
}

/// Multilinear interpolation; points outside the box get `outside`.
template <typename Scalar, typename Derived>
Scalar interpolate(const Grid<Scalar>& grid, const Eigen::MatrixBase<Derived>& f,
                   const PointT<Scalar>& x, Scalar outside = Scalar(0)) {
  const int n = grid.points_per_axis();
  const Scalar h = grid.spacing();
  std::array<int, 3> base{0, 0, 0};
  std::array<Scalar, 3> frac{0, 0, 0};
  for (int a = 0; a < grid.dim(); ++a) {
    const Scalar t = (x[a] + grid.half_width()) / h;
    if (t < Scalar(-1e-12) || t > Scalar(n - 1) + Scalar(1e-12)) return outside;
    int i = static_cast<int>(std::floor(static_cast<double>(t)));
    i = std::clamp(i, 0, n - 2);
    base[a] = i;
    frac[a] = std::clamp(t - Scalar(i), Scalar(0), Scalar(1));
  }
  Scalar acc(0);
  const int corners = 1 << grid.dim();
  for (int c = 0; c < corners; ++c) {
    Scalar wgt(1);
    std::array<int, 3> mi = base;
    for (int a = 0; a < grid.dim(); ++a) {
      const bool upper = (c >> a) & 1;
      mi[a] += upper ? 1 : 0;
      wgt *= upper ? frac[a] : Scalar(1) - frac[a];
    }
    if (wgt != Scalar(0)) acc += wgt * f[grid.index(mi)];
  }
  return acc;
}

/// Sparse operator matrices matching laplacian() and the central gradient
/// along one axis, for assembling Jacobians.
template <typename Scalar>
Eigen::SparseMatrix<Scalar> laplacian_matrix(const Grid<Scalar>& grid) {
  const int n = grid.points_per_axis();
  const Scalar h2 = grid.spacing() * grid.spacing();
  std::vector<Eigen::Triplet<Scalar>> t;
  t.reserve(static_cast<size_t>(grid.size()) * (2 * grid.dim() + 1));
  for (Eigen::Index idx = 0; idx < grid.size(); ++idx) {
    for (int a = 0; a < grid.dim(); ++a) {
      const int i = grid.axis_index(idx, a);
      const Eigen::Index s = grid.stride(a);
      if (i == 0) {
        t.emplace_back(idx, idx + s, Scalar(2) / h2);
        t.emplace_back(idx, idx, Scalar(-2) / h2);
      } else if (i == n - 1) {
        t.emplace_back(idx, idx - s, Scalar(2) / h2);
        t.emplace_back(idx, idx, Scalar(-2) / h2);
      } else {
        t.emplace_back(idx, idx + s, Scalar(1) / h2);
        t.emplace_back(idx, idx - s, Scalar(1) / h2);
        t.emplace_back(idx, idx, Scalar(-2) / h2);
      }
    }
  }
  Eigen::SparseMatrix<Scalar> m(grid.size(), grid.size());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

template <typename Scalar>
Eigen::SparseMatrix<Scalar> gradient_matrix(const Grid<Scalar>& grid, int axis) {
  const int n = grid.points_per_axis();
  const Scalar h = grid.spacing();
  std::vector<Eigen::Triplet<Scalar>> t;
  t.reserve(static_cast<size_t>(grid.size()) * 2);
  const Eigen::Index s = grid.stride(axis);
  for (Eigen::Index idx = 0; idx < grid.size(); ++idx) {
    const int i = grid.axis_index(idx, axis);
    if (i == 0) {
      t.emplace_back(idx, idx + s, Scalar(1) / h);
      t.emplace_back(idx, idx, Scalar(-1) / h);
    } else if (i == n - 1) {
      t.emplace_back(idx, idx, Scalar(1) / h);
      t.emplace_back(idx, idx - s, Scalar(-1) / h);
    } else {
      t.emplace_back(idx, idx + s, Scalar(1) / (Scalar(2) * h));
      t.emplace_back(idx, idx - s, Scalar(-1) / (Scalar(2) * h));
    }
  }
  Eigen::SparseMatrix<Scalar> m(grid.size(), grid.size());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

/// Divergence of a single component along `axis`, as a matrix acting on that
/// component's nodal values.
template <typename Scalar>
Eigen::SparseMatrix<Scalar> divergence_matrix(const Grid<Scalar>& grid, int axis) {
  const int n = grid.points_per_axis();
  const Scalar h = grid.spacing();
  std::vector<Eigen::Triplet<Scalar>> t;
  t.reserve(static_cast<size_t>(grid.size()) * 2);
  const Eigen::Index s = grid.stride(axis);
  for (Eigen::Index idx = 0; idx < grid.size(); ++idx) {
    const int i = grid.axis_index(idx, axis);
    if (i == 0) {
      t.emplace_back(idx, idx, Scalar(1) / h);
      t.emplace_back(idx, idx + s, Scalar(1) / h);
    } else if (i == n - 1) {
      t.emplace_back(idx, idx, Scalar(-1) / h);
      t.emplace_back(idx, idx - s, Scalar(-1) / h);
    } else {
      t.emplace_back(idx, idx + s, Scalar(1) / (Scalar(2) * h));
      t.emplace_back(idx, idx - s, Scalar(-1) / (Scalar(2) * h));
    }
  }
  Eigen::SparseMatrix<Scalar> m(grid.size(), grid.size());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

}  // namespace emfg
