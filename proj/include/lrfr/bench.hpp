#pragma once

#include <chrono>
#include <cstdint>
#include <string>

#include "lrfr/model.hpp"
#include "lrfr/rng.hpp"
#include "lrfr/scoring.hpp"
#include "lrfr/tensor.hpp"

namespace lrfr::bench {

struct OpCounts {
  std::uint64_t mul = 0;
  std::uint64_t add = 0;
  void reset() { mul = add = 0; }
};

inline OpCounts& op_counts() {
  thread_local OpCounts counts;
  return counts;
}

/// Double wrapper that tallies arithmetic through op_counts(). Only
/// instantiated here and in bench/test translation units; the double
/// scoring path is untouched.
struct CountingScalar {
  double v = 0;
  CountingScalar() = default;
  CountingScalar(double x) : v(x) {}

  friend CountingScalar operator*(CountingScalar a, CountingScalar b) {
    ++op_counts().mul;
    return {a.v * b.v};
  }
  friend CountingScalar operator+(CountingScalar a, CountingScalar b) {
    ++op_counts().add;
    return {a.v + b.v};
  }
  friend CountingScalar operator-(CountingScalar a, CountingScalar b) { return {a.v - b.v}; }
  friend CountingScalar operator-(CountingScalar a) { return {-a.v}; }
  friend CountingScalar operator/(CountingScalar a, CountingScalar b) { return {a.v / b.v}; }
  CountingScalar& operator+=(CountingScalar o) {
    ++op_counts().add;
    v += o.v;
    return *this;
  }
  CountingScalar& operator*=(CountingScalar o) {
    ++op_counts().mul;
    v *= o.v;
    return *this;
  }
  friend bool operator==(CountingScalar a, CountingScalar b) { return a.v == b.v; }
  friend bool operator<(CountingScalar a, CountingScalar b) { return a.v < b.v; }
};

}  // namespace lrfr::bench

namespace Eigen {
template <>
struct NumTraits<lrfr::bench::CountingScalar> : NumTraits<double> {
  using Real = lrfr::bench::CountingScalar;
  using NonInteger = lrfr::bench::CountingScalar;
  using Nested = lrfr::bench::CountingScalar;
  using Literal = double;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 1,
    MulCost = 1,
  };
};
}  // namespace Eigen

namespace lrfr::bench {

struct FlopCount {
  std::int64_t total = 0;      // multiplies for scoring one feature
  std::int64_t core_term = 0;  // deepest core contraction (tucker); == total for cp
};

/// Multiply tally for scoring one feature through the production kernels
/// instantiated with CountingScalar. Inputs are hidden vectors, so
/// lookup-table transforms are excluded, matching the convention that
/// pre-computed transforms are free.
FlopCount count_feature_flops(Form form, const ModelDims& dims, const Ranks& ranks);

struct CostReport {
  Form form = Form::cp;
  ModelDims dims;
  Ranks ranks;
  std::int64_t params = 0;
  FlopCount flops;
  std::int64_t features = 0;
  double wall_ms = 0;          // whole workload
  double wall_ms_per_10k = 0;  // advisory; flop fields are the stable part
};

/// Scores a synthetic workload of `features` random features (hidden
/// representations pre-computed, as in prediction) and reports exact
/// flop counts plus wall-clock time.
CostReport bench_predict(Form form, const ModelDims& dims, const Ranks& ranks,
                         std::int64_t features, std::uint64_t seed = 1);

std::string report_header_tsv();
std::string to_tsv(const CostReport& r);
std::string to_json(const CostReport& r);

}  // namespace lrfr::bench
