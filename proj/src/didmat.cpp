#include "gendid/didmat.hpp"

namespace gendid {

namespace {

void check_design(int n_units, int n_periods) {
  if (n_units < 2 || n_periods < 2)
    throw DesignTooSmallError("need at least 2 units and 2 periods, got N=" +
                              std::to_string(n_units) + ", J=" + std::to_string(n_periods));
}

// Offset of the block starting at first index `a` among ordered pairs of n items:
// (a-1)(n - a/2), kept in integers as (a-1)(2n-a)/2.
std::int64_t pair_offset(std::int64_t a, std::int64_t n) { return (a - 1) * (2 * n - a) / 2; }

// Inverts pair_offset: 0-based position p among the C(n,2) pairs -> (a, b).
std::pair<int, int> pair_at(std::int64_t p, int n) {
  int a = 1;
  while (a < n - 1 && pair_offset(a + 1, n) <= p) ++a;
  const auto b = static_cast<int>(a + 1 + (p - pair_offset(a, n)));
  return {a, b};
}

}  // namespace

std::int64_t did_count(int n_units, int n_periods) {
  return choose2(n_units) * choose2(n_periods);
}

std::int64_t did_row_index(const DidIndex& idx, int n_units, int n_periods) {
  if (!(1 <= idx.i && idx.i < idx.i_prime && idx.i_prime <= n_units && 1 <= idx.j &&
        idx.j < idx.j_prime && idx.j_prime <= n_periods))
    throw IndexError("invalid DID index (" + std::to_string(idx.i) + "," +
                     std::to_string(idx.i_prime) + "," + std::to_string(idx.j) + "," +
                     std::to_string(idx.j_prime) + ") for N=" + std::to_string(n_units) +
                     ", J=" + std::to_string(n_periods));
  const std::int64_t cj = choose2(n_periods);
  return 1 + cj * pair_offset(idx.i, n_units) + (idx.i_prime - idx.i - 1) * cj +
         pair_offset(idx.j, n_periods) + (idx.j_prime - idx.j - 1);
}

DidIndex row_to_index(std::int64_t k, int n_units, int n_periods) {
  const std::int64_t total = did_count(n_units, n_periods);
  if (k < 1 || k > total)
    throw IndexError("row " + std::to_string(k) + " outside 1.." + std::to_string(total));
  const std::int64_t cj = choose2(n_periods);
  const std::int64_t k0 = k - 1;
  const auto [i, ip] = pair_at(k0 / cj, n_units);
  const auto [j, jp] = pair_at(k0 % cj, n_periods);
  return {i, ip, j, jp};
}

int classify_did(const DidIndex& d, const AdoptionPattern& pattern) {
  const int ti = pattern.adoption(d.i);
  const int tip = pattern.adoption(d.i_prime);
  const bool i_pre = d.j < ti;   // unit i untreated at j
  const bool i_post = d.j_prime < ti;  // unit i untreated at j'
  const bool ip_pre = d.j < tip;
  const bool ip_post = d.j_prime < tip;
  // Each unit is untreated throughout (U), switches (S) or treated throughout (T).
  const char a = i_post ? 'U' : (i_pre ? 'S' : 'T');
  const char b = ip_post ? 'U' : (ip_pre ? 'S' : 'T');
  if (a == 'U' && b == 'U') return 1;
  if (a == 'S' && b == 'U') return 2;
  if (a == 'T' && b == 'U') return 3;
  if (a == 'S' && b == 'S') return 4;
  if (a == 'T' && b == 'S') return 5;
  if (a == 'T' && b == 'T') return 6;
  // Only reachable when T_i > T_i' (non-canonical order).
  throw IndexError("pattern is not canonically ordered for this comparison");
}

std::array<std::int64_t, 6> count_types(const AdoptionPattern& pattern) {
  std::array<std::int64_t, 6> n{};
  const std::int64_t J = pattern.n_periods();
  for (int i = 1; i < pattern.n_units(); ++i) {
    for (int ip = i + 1; ip <= pattern.n_units(); ++ip) {
      // Never-treated is J+1, so every formula extends without special cases.
      const std::int64_t ti = pattern.adoption(i);
      const std::int64_t tip = pattern.adoption(ip);
      n[0] += choose2(ti - 1);
      n[1] += (ti - 1) * (tip - ti);
      n[2] += choose2(tip - ti);
      n[3] += (ti - 1) * (J - (tip - 1));
      n[4] += (tip - ti) * (J - (tip - 1));
      n[5] += choose2(J - (tip - 1));
    }
  }
  return n;
}

IntMatrix build_a_matrix(int n_units, int n_periods) {
  check_design(n_units, n_periods);
  IntMatrix a = IntMatrix::Zero(static_cast<Index>(did_count(n_units, n_periods)),
                                static_cast<Index>(n_units) * n_periods);
  for_each_did(n_units, n_periods, [&](std::int64_t r, const DidIndex& idx) {
    const auto t = row_terms(idx, n_periods);
    for (int k = 0; k < 4; ++k) a(r, t.col[k]) = t.sign[k];
  });
  return a;
}

DidSystem::DidSystem(AdoptionPattern pattern, Index dense_cap) : pattern_(std::move(pattern)) {
  check_design(pattern_.n_units(), pattern_.n_periods());
  if (!pattern_.is_canonical())
    throw IndexError("DID system requires units ordered by adoption time");
  types_.resize(static_cast<std::size_t>(did_count(n_units(), n_periods())));
  for_each_did(n_units(), n_periods(), [&](std::int64_t r, const DidIndex& idx) {
    types_[static_cast<std::size_t>(r)] = static_cast<std::uint8_t>(classify_did(idx, pattern_));
  });
  if (n_obs() <= dense_cap) dense_ = build_a_matrix(n_units(), n_periods());
}

const IntMatrix& DidSystem::a_matrix() const {
  if (!has_dense())
    throw DimensionError("NJ=" + std::to_string(n_obs()) +
                         " exceeds the dense cap; use the streaming apply methods");
  return dense_;
}

Matrix DidSystem::gram() const {
  Matrix g = Matrix::Zero(n_obs(), n_obs());
  for_each_did(n_units(), n_periods(), [&](std::int64_t, const DidIndex& idx) {
    const auto t = row_terms(idx, n_periods());
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) g(t.col[a], t.col[b]) += t.sign[a] * t.sign[b];
  });
  return g;
}

void DidSystem::check_obs(Index n) const {
  if (n != n_obs())
    throw DimensionError("outcome vector has length " + std::to_string(n) + ", expected " +
                         std::to_string(n_obs()));
}

}  // namespace gendid
