#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lrfr/rng.hpp"
#include "lrfr/tensor.hpp"

namespace lrfr {

enum class Form { tucker, cp };

inline const char* form_name(Form f) { return f == Form::tucker ? "tucker" : "cp"; }

/// View layout of a parameter tensor. Views are ordered label (when
/// present), then the non-lexical property view, then one view per
/// lexical slot. Ranking models drop the label view entirely.
struct ViewRoles {
  bool has_label = true;
  int arity = 1;

  int view_count() const { return (has_label ? 1 : 0) + 1 + arity; }
  int label_view() const { return 0; }
  int property_view() const { return has_label ? 1 : 0; }
  int lexical_view(int i) const { return property_view() + 1 + i; }
};

/// Input-side dimensions: d1 labels, d2 non-lexical properties, m the
/// embedding dimension standing in for the lexical input width, n the
/// lexical arity.
struct ModelDims {
  std::int64_t d1 = 0;
  std::int64_t d2 = 0;
  std::int64_t m = 0;
  int n = 1;
};

struct Ranks {
  std::int64_t r1 = 0;  // label view (tucker)
  std::int64_t r2 = 0;  // property view (tucker)
  std::int64_t r3 = 0;  // lexical views (tucker, shared)
  std::int64_t cp = 0;  // cp rank
};

/// Core tensor plus one factor matrix per view; factors[i] has
/// core.dim(i) rows and the view's input dimension as columns.
template <typename Scalar = double>
struct TuckerModelT {
  Tensor<Scalar> core;
  std::vector<Mat<Scalar>> factors;
  ViewRoles roles;
  // Views initialized at identity are L2-regularized toward identity.
  std::vector<bool> identity_reg;
};

/// One rank x input-dim factor matrix per view; rank shared by all views.
template <typename Scalar = double>
struct CPModelT {
  Index rank = 0;
  std::vector<Mat<Scalar>> factors;
  ViewRoles roles;
  std::vector<bool> identity_reg;
};

using TuckerModel = TuckerModelT<double>;
using CPModel = CPModelT<double>;

inline void check_tucker(const TuckerModel& m) {
  if (static_cast<Index>(m.factors.size()) != m.core.order())
    throw std::invalid_argument("TuckerModel: factor count does not match core order");
  for (Index i = 0; i < m.core.order(); ++i)
    if (m.factors[static_cast<std::size_t>(i)].rows() != m.core.dim(i))
      throw std::invalid_argument("TuckerModel: factor " + std::to_string(i + 1) +
                                  " row count does not match core extent");
}

inline void check_cp(const CPModel& m) {
  for (std::size_t i = 0; i < m.factors.size(); ++i)
    if (m.factors[i].rows() != m.rank)
      throw std::invalid_argument("CPModel: factor " + std::to_string(i + 1) +
                                  " row count does not match rank");
}

constexpr Index kMaterializeCap = 10'000'000;

namespace detail {
inline void check_materialize_cap(std::int64_t size, Index cap) {
  if (size > cap)
    throw std::length_error("materialize: full tensor would hold " + std::to_string(size) +
                            " entries, above the cap of " + std::to_string(cap));
}
}  // namespace detail

/// Full tensor from a Tucker model: successive mode products of the core
/// with each factor. Oracle-only: guarded by an entry-count cap.
template <typename Scalar>
Tensor<Scalar> tucker_materialize(const TuckerModelT<Scalar>& m, Index cap = kMaterializeCap) {
  std::int64_t size = 1;
  for (const auto& f : m.factors) size *= f.cols();
  detail::check_materialize_cap(size, cap);
  Tensor<Scalar> t = m.core;
  for (Index k = 0; k < static_cast<Index>(m.factors.size()); ++k)
    t = mode_product(t, m.factors[static_cast<std::size_t>(k)], k);
  return t;
}

/// Full tensor from a CP model: sum of r outer products of factor rows.
template <typename Scalar>
Tensor<Scalar> cp_materialize(const CPModelT<Scalar>& m, Index cap = kMaterializeCap) {
  std::int64_t size = 1;
  for (const auto& f : m.factors) size *= f.cols();
  detail::check_materialize_cap(size, cap);
  std::vector<Index> shape;
  for (const auto& f : m.factors) shape.push_back(f.cols());
  Tensor<Scalar> t(shape);
  std::vector<Vec<Scalar>> rows(m.factors.size());
  for (Index j = 0; j < m.rank; ++j) {
    for (std::size_t v = 0; v < m.factors.size(); ++v)
      rows[v] = m.factors[v].row(static_cast<Index>(j)).transpose();
    const Tensor<Scalar> term = outer_product(std::span<const Vec<Scalar>>(rows));
    for (Index i = 0; i < t.size(); ++i) t[i] = t[i] + term[i];
  }
  return t;
}

/// CP as the Tucker special case with a superdiagonal core of ones.
template <typename Scalar>
TuckerModelT<Scalar> cp_as_tucker(const CPModelT<Scalar>& m) {
  const Index k = static_cast<Index>(m.factors.size());
  std::vector<Index> core_shape(static_cast<std::size_t>(k), m.rank);
  Tensor<Scalar> core(core_shape);
  const std::vector<Index> strides = core.strides();
  for (Index j = 0; j < m.rank; ++j) {
    Index flat = 0;
    for (Index v = 0; v < k; ++v) flat += j * strides[static_cast<std::size_t>(v)];
    core[flat] = Scalar(1);
  }
  return TuckerModelT<Scalar>{std::move(core), m.factors, m.roles, m.identity_reg};
}

/// Parameter counts for the three tensor parameterizations. The Tucker
/// accounting assumes one shared r3 x m lexical transform, matching the
/// usual complexity table for these models.
inline std::int64_t param_count(Form form, const ModelDims& dims, const Ranks& ranks) {
  if (dims.d1 <= 0 || dims.d2 <= 0 || dims.m <= 0 || dims.n <= 0)
    throw std::invalid_argument("param_count: dims must be positive");
  auto powi = [](std::int64_t base, int e) {
    std::int64_t p = 1;
    for (int i = 0; i < e; ++i) p *= base;
    return p;
  };
  switch (form) {
    case Form::tucker:
      if (ranks.r1 <= 0 || ranks.r2 <= 0 || ranks.r3 <= 0)
        throw std::invalid_argument("param_count: tucker ranks must be positive");
      return ranks.r1 * ranks.r2 * powi(ranks.r3, dims.n) + dims.d1 * ranks.r1 +
             dims.d2 * ranks.r2 + dims.m * ranks.r3;
    case Form::cp:
      if (ranks.cp <= 0) throw std::invalid_argument("param_count: cp rank must be positive");
      return ranks.cp * (dims.d1 + dims.d2 + dims.n * dims.m);
  }
  return 0;
}

inline std::int64_t param_count_full(const ModelDims& dims) {
  if (dims.d1 <= 0 || dims.d2 <= 0 || dims.m <= 0 || dims.n <= 0)
    throw std::invalid_argument("param_count: dims must be positive");
  std::int64_t p = dims.d1 * dims.d2;
  for (int i = 0; i < dims.n; ++i) p *= dims.m;
  return p;
}

namespace detail {

// Square factors start at identity and are regularized toward it; all
// other blocks start uniform at the Glorot scale sqrt(6/(rows+cols)).
// A much smaller init stalls under L2: the shrinkage pull dominates the
// multiplicative gradients before any signal builds up.
inline Matrix init_factor(Index rows, Index cols, Rng& rng, bool& identity) {
  identity = (rows == cols);
  if (identity) return Matrix::Identity(rows, cols);
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix w(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) w(i, j) = rng.uniform(-bound, bound);
  return w;
}

}  // namespace detail

/// Fresh Tucker model for the given input dims. input_dims[i] is the
/// input width of view i in role order; view_ranks[i] the core extent.
inline TuckerModel init_tucker(const std::vector<Index>& input_dims,
                               const std::vector<Index>& view_ranks, ViewRoles roles, Rng& rng) {
  TuckerModel m;
  m.roles = roles;
  m.core = TensorD(view_ranks);
  std::int64_t extent_sum = 0;
  for (Index d : view_ranks) extent_sum += d;
  const double bound = std::sqrt(6.0 / static_cast<double>(extent_sum));
  for (Index i = 0; i < m.core.size(); ++i) m.core[i] = rng.uniform(-bound, bound);
  m.identity_reg.resize(input_dims.size());
  for (std::size_t v = 0; v < input_dims.size(); ++v) {
    bool ident = false;
    m.factors.push_back(detail::init_factor(view_ranks[v], input_dims[v], rng, ident));
    m.identity_reg[v] = ident;
  }
  check_tucker(m);
  return m;
}

inline CPModel init_cp(const std::vector<Index>& input_dims, Index rank, ViewRoles roles,
                       Rng& rng) {
  CPModel m;
  m.roles = roles;
  m.rank = rank;
  m.identity_reg.resize(input_dims.size());
  for (std::size_t v = 0; v < input_dims.size(); ++v) {
    bool ident = false;
    m.factors.push_back(detail::init_factor(rank, input_dims[v], rng, ident));
    m.identity_reg[v] = ident;
  }
  check_cp(m);
  return m;
}

}  // namespace lrfr
