#include "blockfill/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace blockfill::partition {

namespace {

void check_sigmas(const Vector& sigmas) {
  require(sigmas.size() >= 1, "partition: empty spectrum");
  for (Index i = 0; i < sigmas.size(); ++i) {
    require(std::isfinite(sigmas[i]) && sigmas[i] > 0.0,
            "partition: sigmas must be finite positives");
    if (i > 0)
      require(sigmas[i] <= sigmas[i - 1] * (1.0 + 1e-14),
              "partition: sigmas must be nonincreasing");
  }
}

}  // namespace

double pivot_gap(const Vector& sigmas, Index k) {
  if (k == 0) return 1.0;
  require(k >= 1 && k < sigmas.size(), "pivot_gap: k out of range");
  return 1.0 - sigmas[k] / sigmas[k - 1];
}

double pivot_sigma(const Vector& sigmas, Index k) {
  if (k == 0) return std::numeric_limits<double>::infinity();
  require(k <= sigmas.size(), "pivot_sigma: k out of range");
  return sigmas[k - 1];
}

std::pair<double, double> partition_constants(const std::vector<Index>& pivots,
                                              const Vector& sigmas) {
  require(pivots.size() >= 2, "partition_constants: need at least one block");
  require(pivots.front() == 0, "partition_constants: first pivot must be 0");
  for (std::size_t i = 1; i < pivots.size(); ++i)
    require(pivots[i] > pivots[i - 1],
            "partition_constants: pivots must be strictly increasing");
  require(pivots.back() <= sigmas.size(),
          "partition_constants: final pivot exceeds spectrum length");

  double m_space = 0.0;
  double m_spec = 0.0;
  for (std::size_t i = 0; i + 1 < pivots.size(); ++i) {
    const Index k = pivots[i];
    const double gap = pivot_gap(sigmas, k);
    require(gap > 0.0, "partition_constants: zero relative gap at a pivot");
    m_space += 1.0 / (gap * gap);
    if (k > 0) m_spec += 1.0 / pivot_sigma(sigmas, k);
  }
  return {m_space, m_spec};
}

Partition well_tempered_partition(const Vector& sigmas, Index s, double sigma) {
  check_sigmas(sigmas);
  require(s >= 2 && s <= sigmas.size(), "well_tempered_partition: s out of range");
  require(std::isfinite(sigma), "well_tempered_partition: sigma must be finite");
  if (sigma < sigmas[s - 1] || sigma > sigmas[0]) {
    std::ostringstream msg;
    msg << "well_tempered_partition: sigma=" << sigma << " outside [sigma_s="
        << sigmas[s - 1] << ", sigma_1=" << sigmas[0] << "]";
    throw InvalidInput(msg.str());
  }

  // Recursive pivot construction, built backwards from the tail.
  const auto admissible = [&](Index k, double gap_floor, double sig_floor) {
    return pivot_gap(sigmas, k) >= gap_floor &&
           pivot_sigma(sigmas, k) >= sig_floor;
  };
  std::vector<Index> rev;  // k~_1 > k~_2 > ... ending in 0
  {
    Index k1 = 0;
    for (Index k = s - 1; k >= 1; --k) {
      if (admissible(k, 1.0 / static_cast<double>(s), sigma)) {
        k1 = k;
        break;
      }
    }
    rev.push_back(k1);
  }
  while (rev.back() != 0) {
    const Index prev = rev.back();
    Index next = 0;
    const double gap_floor = 1.0 / static_cast<double>(prev);
    const double sig_floor = M_E * pivot_sigma(sigmas, prev);
    for (Index k = prev - 1; k >= 1; --k) {
      if (admissible(k, gap_floor, sig_floor)) {
        next = k;
        break;
      }
    }
    rev.push_back(next);
  }

  Partition part;
  part.pivots.assign(rev.rbegin(), rev.rend());
  part.pivots.push_back(s);
  part.sigma_ref = sigma;

  const Index ell = part.blocks();
  part.delta = 1.0;
  for (Index i = 0; i < ell; ++i)
    part.delta = std::min(part.delta, pivot_gap(sigmas, part.pivots[i]));

  // Interior magnitude ratio: max sigma in K_i over sigma at the next pivot.
  part.mu = 1.0;
  for (Index i = 0; i + 1 < ell; ++i) {
    const double top = sigmas[part.pivots[i]];  // sigma*_{k_i + 1}
    const double next = pivot_sigma(sigmas, part.pivots[i + 1]);
    part.mu = std::max(part.mu, top / next);
  }

  auto [m_space, m_spec] = partition_constants(part.pivots, sigmas);
  part.m_space = m_space;
  part.m_spec = m_spec;
  return part;
}

}  // namespace blockfill::partition
