#pragma once

#include <Eigen/Core>

#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "lrfr/errors.hpp"

namespace lrfr {

using Index = Eigen::Index;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = Mat<double>;
using Vector = Vec<double>;

/// Dense K-way tensor with row-major flat storage (last index fastest).
/// Modes are 0-based in code; error messages report them 1-based to match
/// the conventional mathematical notation. Values are immutable in every
/// free function below: operations return fresh tensors and are safe for
/// concurrent reads.
template <typename Scalar = double>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<Index> shape)
      : shape_(std::move(shape)), data_(checked_size(shape_), Scalar(0)) {}

  Tensor(std::vector<Index> shape, std::vector<Scalar> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<Index>(data_.size()) != checked_size(shape_))
      throw std::invalid_argument("Tensor: data length does not match shape");
  }

  Index order() const { return static_cast<Index>(shape_.size()); }
  const std::vector<Index>& shape() const { return shape_; }
  Index dim(Index mode) const { return shape_[static_cast<std::size_t>(mode)]; }
  Index size() const { return static_cast<Index>(data_.size()); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](Index flat) { return data_[static_cast<std::size_t>(flat)]; }
  const Scalar& operator[](Index flat) const { return data_[static_cast<std::size_t>(flat)]; }

  template <typename... Is>
  Scalar& operator()(Is... idx) {
    return data_[flat_index({static_cast<Index>(idx)...})];
  }
  template <typename... Is>
  const Scalar& operator()(Is... idx) const {
    return data_[flat_index({static_cast<Index>(idx)...})];
  }

  // Row-major strides: stride of the last mode is 1.
  std::vector<Index> strides() const {
    std::vector<Index> s(shape_.size(), 1);
    for (Index k = order() - 2; k >= 0; --k)
      s[static_cast<std::size_t>(k)] =
          s[static_cast<std::size_t>(k + 1)] * shape_[static_cast<std::size_t>(k + 1)];
    return s;
  }

 private:
  static Index checked_size(const std::vector<Index>& shape) {
    if (shape.empty()) throw std::invalid_argument("Tensor: shape must have at least 1 mode");
    Index n = 1;
    for (std::size_t k = 0; k < shape.size(); ++k) {
      if (shape[k] < 1)
        throw std::invalid_argument("Tensor: mode " + std::to_string(k + 1) +
                                    " has nonpositive extent");
      n *= shape[k];
    }
    return n;
  }

  std::size_t flat_index(std::initializer_list<Index> idx) const {
    Index flat = 0;
    std::size_t k = 0;
    for (Index i : idx) flat = flat * shape_[k++] + i;
    return static_cast<std::size_t>(flat);
  }

  std::vector<Index> shape_;
  std::vector<Scalar> data_;
};

using TensorD = Tensor<double>;

namespace detail {

template <typename Scalar>
void check_mode(const Tensor<Scalar>& t, Index mode, const char* op) {
  if (mode < 0 || mode >= t.order())
    throw std::invalid_argument(std::string(op) + ": mode " + std::to_string(mode + 1) +
                                " out of range for order-" + std::to_string(t.order()) +
                                " tensor");
}

inline Index product(std::span<const Index> dims) {
  return std::accumulate(dims.begin(), dims.end(), Index(1), std::multiplies<Index>());
}

}  // namespace detail

/// Mode-k product with a matrix of shape dim(k) x J: replaces mode k by J.
/// result[..., j, ...] = sum_i t[..., i, ...] * m(i, j).
template <typename Scalar, typename Derived>
Tensor<Scalar> mode_product(const Tensor<Scalar>& t, const Eigen::MatrixBase<Derived>& m,
                            Index mode) {
  static_assert(std::is_same_v<typename Derived::Scalar, Scalar>);
  detail::check_mode(t, mode, "mode_product");
  if (m.rows() != t.dim(mode))
    throw std::invalid_argument("mode_product: matrix has " + std::to_string(m.rows()) +
                                " rows but tensor mode " + std::to_string(mode + 1) +
                                " has extent " + std::to_string(t.dim(mode)));
  const Index d = t.dim(mode);
  const Index cols = m.cols();
  std::vector<Index> out_shape = t.shape();
  out_shape[static_cast<std::size_t>(mode)] = cols;
  Tensor<Scalar> out(out_shape);

  const Index inner = detail::product(std::span<const Index>(t.shape()).subspan(
      static_cast<std::size_t>(mode) + 1));
  const Index outer = t.size() / (d * inner);
  for (Index p = 0; p < outer; ++p)
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < d; ++i) {
        const Scalar w = m(i, j);
        const Scalar* src = t.data() + (p * d + i) * inner;
        Scalar* dst = out.data() + (p * cols + j) * inner;
        for (Index s = 0; s < inner; ++s) dst[s] += src[s] * w;
      }
  return out;
}

/// Mode-k product with a vector (J = 1), dropping the contracted mode.
/// Requires order >= 2; the result has order - 1 modes.
template <typename Scalar, typename Derived>
Tensor<Scalar> mode_contract(const Tensor<Scalar>& t, const Eigen::MatrixBase<Derived>& v,
                             Index mode) {
  static_assert(std::is_same_v<typename Derived::Scalar, Scalar>);
  detail::check_mode(t, mode, "mode_contract");
  if (t.order() < 2)
    throw std::invalid_argument("mode_contract: tensor must have order >= 2");
  if (v.size() != t.dim(mode))
    throw std::invalid_argument("mode_contract: vector length " + std::to_string(v.size()) +
                                " does not match tensor mode " + std::to_string(mode + 1) +
                                " extent " + std::to_string(t.dim(mode)));
  const Index d = t.dim(mode);
  std::vector<Index> out_shape = t.shape();
  out_shape.erase(out_shape.begin() + mode);
  Tensor<Scalar> out(out_shape);

  if (mode == t.order() - 1) {
    const Index rows = t.size() / d;
    if constexpr (std::is_same_v<Scalar, double>) {
      using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
      Eigen::Map<Vector>(out.data(), rows).noalias() =
          Eigen::Map<const RowMat>(t.data(), rows, d) * v.derived();
    } else {
      for (Index r = 0; r < rows; ++r) {
        Scalar acc(0);
        const Scalar* src = t.data() + r * d;
        for (Index i = 0; i < d; ++i) acc = acc + src[i] * v[i];
        out[r] = acc;
      }
    }
    return out;
  }

  const Index inner = detail::product(std::span<const Index>(t.shape()).subspan(
      static_cast<std::size_t>(mode) + 1));
  const Index outer = t.size() / (d * inner);
  for (Index p = 0; p < outer; ++p)
    for (Index i = 0; i < d; ++i) {
      const Scalar w = v[i];
      const Scalar* src = t.data() + (p * d + i) * inner;
      Scalar* dst = out.data() + p * inner;
      for (Index s = 0; s < inner; ++s) dst[s] = dst[s] + src[s] * w;
    }
  return out;
}

/// Contracts modes order-1 down to 1 (each a contiguous last-mode pass)
/// with hs[i] applied to mode i+1, leaving a vector over mode 0.
template <typename Scalar>
Vec<Scalar> contract_trailing(const Tensor<Scalar>& core, std::span<const Vec<Scalar>> hs) {
  if (static_cast<Index>(hs.size()) != core.order() - 1)
    throw std::invalid_argument("contract_trailing: expected " +
                                std::to_string(core.order() - 1) + " vectors, got " +
                                std::to_string(hs.size()));
  Tensor<Scalar> t = core;
  for (Index mode = core.order() - 1; mode >= 1; --mode)
    t = mode_contract(t, hs[static_cast<std::size_t>(mode - 1)], mode);
  Vec<Scalar> out(t.size());
  for (Index i = 0; i < t.size(); ++i) out[i] = t[i];
  return out;
}

/// Contracts every mode except `skip`, returning the vector over that mode.
/// hs[skip] is ignored.
template <typename Scalar>
Vec<Scalar> contract_except(const Tensor<Scalar>& core, std::span<const Vec<Scalar>> hs,
                            Index skip) {
  if (static_cast<Index>(hs.size()) != core.order())
    throw std::invalid_argument("contract_except: need one vector per mode");
  Tensor<Scalar> t = core;
  for (Index mode = core.order() - 1; mode >= 0; --mode) {
    if (mode == skip) continue;
    if (t.order() == 1) break;
    t = mode_contract(t, hs[static_cast<std::size_t>(mode)], mode);
  }
  Vec<Scalar> out(t.size());
  for (Index i = 0; i < t.size(); ++i) out[i] = t[i];
  return out;
}

/// Mode-k unfolding: a dim(k) x prod(other dims) matrix whose columns are
/// the mode-k fibers. Column order is lexicographic over the remaining
/// modes in their original order, first remaining mode slowest.
template <typename Scalar>
Mat<Scalar> unfold(const Tensor<Scalar>& t, Index mode) {
  detail::check_mode(t, mode, "unfold");
  const Index rows = t.dim(mode);
  const Index cols = t.size() / rows;
  Mat<Scalar> m(rows, cols);

  const std::vector<Index> strides = t.strides();
  std::vector<Index> idx(static_cast<std::size_t>(t.order()), 0);
  for (Index c = 0; c < cols; ++c) {
    // Decode the column index over the remaining modes, first slowest.
    Index rem = c;
    for (Index k = t.order() - 1; k >= 0; --k) {
      if (k == mode) continue;
      const std::size_t ku = static_cast<std::size_t>(k);
      idx[ku] = rem % t.dim(k);
      rem /= t.dim(k);
    }
    Index base = 0;
    for (Index k = 0; k < t.order(); ++k)
      if (k != mode) base += idx[static_cast<std::size_t>(k)] * strides[static_cast<std::size_t>(k)];
    for (Index r = 0; r < rows; ++r)
      m(r, c) = t[base + r * strides[static_cast<std::size_t>(mode)]];
  }
  return m;
}

/// Inverse of unfold for the documented column ordering.
template <typename Scalar>
Tensor<Scalar> refold(const Mat<Scalar>& m, Index mode, std::vector<Index> shape) {
  Tensor<Scalar> t(std::move(shape));
  detail::check_mode(t, mode, "refold");
  if (m.rows() != t.dim(mode) || m.cols() != t.size() / t.dim(mode))
    throw std::invalid_argument("refold: matrix shape does not match target shape at mode " +
                                std::to_string(mode + 1));
  const std::vector<Index> strides = t.strides();
  std::vector<Index> idx(static_cast<std::size_t>(t.order()), 0);
  for (Index c = 0; c < m.cols(); ++c) {
    Index rem = c;
    for (Index k = t.order() - 1; k >= 0; --k) {
      if (k == mode) continue;
      const std::size_t ku = static_cast<std::size_t>(k);
      idx[ku] = rem % t.dim(k);
      rem /= t.dim(k);
    }
    Index base = 0;
    for (Index k = 0; k < t.order(); ++k)
      if (k != mode) base += idx[static_cast<std::size_t>(k)] * strides[static_cast<std::size_t>(k)];
    for (Index r = 0; r < m.rows(); ++r)
      t[base + r * strides[static_cast<std::size_t>(mode)]] = m(r, c);
  }
  return t;
}

/// Outer product of K vectors: result[i_1..i_K] = prod_k v_k[i_k].
template <typename Scalar>
Tensor<Scalar> outer_product(std::span<const Vec<Scalar>> vs) {
  if (vs.empty()) throw std::invalid_argument("outer_product: empty vector list");
  std::vector<Index> shape;
  shape.reserve(vs.size());
  for (const auto& v : vs) {
    if (v.size() == 0) throw std::invalid_argument("outer_product: empty vector");
    shape.push_back(v.size());
  }
  Tensor<Scalar> t(shape);
  std::vector<Index> idx(vs.size(), 0);
  for (Index flat = 0; flat < t.size(); ++flat) {
    Scalar p(1);
    for (std::size_t k = 0; k < vs.size(); ++k) p = p * vs[k][idx[k]];
    t[flat] = p;
    for (Index k = static_cast<Index>(vs.size()) - 1; k >= 0; --k) {
      const std::size_t ku = static_cast<std::size_t>(k);
      if (++idx[ku] < shape[ku]) break;
      idx[ku] = 0;
    }
  }
  return t;
}

template <typename Scalar>
Tensor<Scalar> outer_product(std::initializer_list<Vec<Scalar>> vs) {
  std::vector<Vec<Scalar>> list(vs);
  return outer_product(std::span<const Vec<Scalar>>(list));
}

/// Frobenius product: sum of elementwise products of same-shape tensors.
template <typename Scalar>
Scalar frobenius_dot(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("frobenius_dot: shapes differ");
  if constexpr (std::is_same_v<Scalar, double>) {
    return Eigen::Map<const Vector>(a.data(), a.size())
        .dot(Eigen::Map<const Vector>(b.data(), b.size()));
  } else {
    Scalar acc(0);
    for (Index i = 0; i < a.size(); ++i) acc = acc + a[i] * b[i];
    return acc;
  }
}

/// Elementwise (Hadamard) product of same-length vectors.
template <typename D1, typename D2>
Vec<typename D1::Scalar> hadamard(const Eigen::MatrixBase<D1>& a,
                                  const Eigen::MatrixBase<D2>& b) {
  static_assert(std::is_same_v<typename D1::Scalar, typename D2::Scalar>);
  if (a.size() != b.size()) throw std::invalid_argument("hadamard: lengths differ");
  Vec<typename D1::Scalar> out(a.size());
  for (Index i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

}  // namespace lrfr
