#pragma once

#include <vector>

#include "blockfill/types.hpp"

namespace blockfill::partition {

/// A monotone partition of [s] with pivots 0 = k_1 < ... < k_l < k_{l+1} = s.
/// Blocks are K_i = {k_i+1, ..., k_{i+1}}. `pivots` stores k_1..k_{l+1},
/// so it has l+1 entries and pivots.back() == s.
///
/// delta lower-bounds the relative gaps at the pivots (delta_0 := 1 by
/// convention). mu bounds the inter-block magnitude ratio
/// max{sigma_k : k in K_i} / sigma_{k_{i+1}} over the interior blocks
/// i < l; the final block is controlled against sigma_ref instead
/// (sigma_{k_l + 1} <= 2 e sigma_ref).
struct Partition {
  std::vector<Index> pivots;
  double delta = 1.0;
  double mu = 1.0;
  double m_space = 0.0;
  double m_spec = 0.0;
  double sigma_ref = 0.0;

  Index s() const { return pivots.back(); }
  Index blocks() const { return static_cast<Index>(pivots.size()) - 1; }
};

/// delta*_k = 1 - sigma_{k+1}/sigma_k for k >= 1 and delta*_0 = 1.
double pivot_gap(const Vector& sigmas, Index k);

/// sigma*_k with the convention sigma*_0 = +infinity.
double pivot_sigma(const Vector& sigmas, Index k);

/// Builds the well-tempered partition of the top-s spectrum by the
/// recursive pivot rule: the last interior pivot is the largest k' < s
/// with delta*_{k'} >= 1/s and sigma*_{k'} >= sigma, and each earlier
/// pivot is the largest k' below the previous one with
/// delta*_{k'} >= 1/k_prev and sigma*_{k'} >= e sigma*_{k_prev}.
/// Requires s >= 2 and sigma in [sigma_s, sigma_1].
Partition well_tempered_partition(const Vector& sigmas, Index s, double sigma);

/// M_space = sum_i (delta*_{k_i})^{-2}, M_spec = sum_i (sigma*_{k_i})^{-1},
/// with delta*_0 = 1 and sigma*_0 = +infinity (so pivot 0 adds 1 and 0
/// respectively). `pivots` must include the trailing s.
std::pair<double, double> partition_constants(const std::vector<Index>& pivots,
                                              const Vector& sigmas);

}  // namespace blockfill::partition
