#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>

namespace edin {

// Embeddings are stored as 32-bit floats (the on-disk format is f32);
// similarity scores accumulate in 64-bit so results are bit-exact across
// runs and across save/load.
using VecF = Eigen::VectorXf;
using MatF = Eigen::MatrixXf;

// Character span over Unicode scalar values, end exclusive.
struct Span {
  std::int64_t start = 0;
  std::int64_t end = 0;

  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

enum class Metric : std::uint8_t { inner_product = 0, cosine = 1 };

inline const char* to_string(Metric m) {
  return m == Metric::inner_product ? "ip" : "cosine";
}

// Product-sum with f32 inputs and f64 accumulation in a fixed four-lane
// order: bit-identical across runs, independent of the compiler's
// vectorizer, and the add chains stay short enough to pipeline.
template <typename DerivedA, typename DerivedB>
double dot64(const Eigen::MatrixBase<DerivedA>& a,
             const Eigen::MatrixBase<DerivedB>& b) {
  const Eigen::Index n = a.size();
  double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
  Eigen::Index i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 += static_cast<double>(a(i)) * static_cast<double>(b(i));
    acc1 += static_cast<double>(a(i + 1)) * static_cast<double>(b(i + 1));
    acc2 += static_cast<double>(a(i + 2)) * static_cast<double>(b(i + 2));
    acc3 += static_cast<double>(a(i + 3)) * static_cast<double>(b(i + 3));
  }
  for (; i < n; ++i) {
    acc0 += static_cast<double>(a(i)) * static_cast<double>(b(i));
  }
  return (acc0 + acc1) + (acc2 + acc3);
}

template <typename Derived>
double norm64(const Eigen::MatrixBase<Derived>& a) {
  return std::sqrt(dot64(a, a));
}

template <typename DerivedA, typename DerivedB>
double cosine64(const Eigen::MatrixBase<DerivedA>& a,
                const Eigen::MatrixBase<DerivedB>& b) {
  const double na = norm64(a);
  const double nb = norm64(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot64(a, b) / (na * nb);
}

template <typename DerivedA, typename DerivedB>
double similarity(Metric metric, const Eigen::MatrixBase<DerivedA>& a,
                  const Eigen::MatrixBase<DerivedB>& b) {
  return metric == Metric::inner_product ? dot64(a, b) : cosine64(a, b);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace edin
