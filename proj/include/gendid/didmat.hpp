#pragma once

#include "gendid/panel.hpp"
#include "gendid/types.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace gendid {

// Two-by-two DID D_{i,i',j,j'} = (Y_ij' - Y_ij) - (Y_i'j' - Y_i'j), 1-based,
// with i < i' and j < j'.
struct DidIndex {
  int i = 1;
  int i_prime = 2;
  int j = 1;
  int j_prime = 2;

  bool operator==(const DidIndex&) const = default;
};

inline std::int64_t choose2(std::int64_t n) { return n * (n - 1) / 2; }

// C(N,2) * C(J,2).
std::int64_t did_count(int n_units, int n_periods);

// 1-based row of D in the lexicographic (i, i', j, j') ordering.
std::int64_t did_row_index(const DidIndex& idx, int n_units, int n_periods);

// Inverse of did_row_index.
DidIndex row_to_index(std::int64_t k, int n_units, int n_periods);

// Table-of-types label 1..6 (both untreated, switch vs untreated, treated vs
// untreated, both switch, treated vs switch, both treated).
int classify_did(const DidIndex& idx, const AdoptionPattern& pattern);

// Closed-form type counts; entry t-1 holds the count of type t.
std::array<std::int64_t, 6> count_types(const AdoptionPattern& pattern);

// Dense A (rows in lexicographic order, columns unit-major).
IntMatrix build_a_matrix(int n_units, int n_periods);

// Calls f(row0, idx) for every DID in row order; row0 is 0-based.
template <typename F>
void for_each_did(int n_units, int n_periods, F&& f) {
  std::int64_t row = 0;
  for (int i = 1; i < n_units; ++i)
    for (int ip = i + 1; ip <= n_units; ++ip)
      for (int j = 1; j < n_periods; ++j)
        for (int jp = j + 1; jp <= n_periods; ++jp) f(row++, DidIndex{i, ip, j, jp});
}

// Column positions (0-based, unit-major) and signs of the four nonzeros of a row.
struct RowTerms {
  std::array<Index, 4> col;
  std::array<int, 4> sign;
};

inline RowTerms row_terms(const DidIndex& d, int n_periods) {
  const Index J = n_periods;
  const Index a = static_cast<Index>(d.i - 1) * J;
  const Index b = static_cast<Index>(d.i_prime - 1) * J;
  return {{a + d.j_prime - 1, a + d.j - 1, b + d.j_prime - 1, b + d.j - 1}, {1, -1, -1, 1}};
}

class DidSystem {
 public:
  static constexpr Index kDefaultDenseCap = 4096;

  explicit DidSystem(AdoptionPattern pattern, Index dense_cap = kDefaultDenseCap);

  const AdoptionPattern& pattern() const { return pattern_; }
  int n_units() const { return pattern_.n_units(); }
  int n_periods() const { return pattern_.n_periods(); }
  Index n_rows() const { return static_cast<Index>(types_.size()); }
  Index n_obs() const { return static_cast<Index>(n_units()) * n_periods(); }

  int type(Index row0) const { return types_[static_cast<std::size_t>(row0)]; }
  const std::vector<std::uint8_t>& types() const { return types_; }
  DidIndex index(Index row0) const { return row_to_index(row0 + 1, n_units(), n_periods()); }

  bool has_dense() const { return dense_.size() > 0; }
  // Throws DimensionError when NJ exceeds the dense cap.
  const IntMatrix& a_matrix() const;

  // d = A y, computed row by row.
  template <typename Derived>
  Vector apply(const Eigen::MatrixBase<Derived>& y) const {
    check_obs(y.size());
    Vector d(n_rows());
    for_each_did(n_units(), n_periods(), [&](std::int64_t r, const DidIndex& idx) {
      const auto t = row_terms(idx, n_periods());
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += t.sign[k] * y(t.col[k]);
      d(r) = s;
    });
    return d;
  }

  // o = A^T w.
  template <typename Derived>
  Vector apply_transpose(const Eigen::MatrixBase<Derived>& w) const {
    if (w.size() != n_rows())
      throw DimensionError("weight vector has length " + std::to_string(w.size()) + ", expected " +
                           std::to_string(n_rows()));
    Vector o = Vector::Zero(n_obs());
    for_each_did(n_units(), n_periods(), [&](std::int64_t r, const DidIndex& idx) {
      const double wr = w(r);
      if (wr == 0.0) return;
      const auto t = row_terms(idx, n_periods());
      for (int k = 0; k < 4; ++k) o(t.col[k]) += t.sign[k] * wr;
    });
    return o;
  }

  // A^T A (NJ x NJ).
  Matrix gram() const;

 private:
  void check_obs(Index n) const;

  AdoptionPattern pattern_;
  std::vector<std::uint8_t> types_;
  IntMatrix dense_;
};

}  // namespace gendid
