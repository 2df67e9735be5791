#include "hktgnn/domain.hpp"

#include <algorithm>

#include "hktgnn/error.hpp"

namespace hktgnn {

std::vector<double> domain_weights(const std::vector<int>& psi, std::span<const double> centrality,
                                   bool use_centrality) {
  if (use_centrality && centrality.size() != psi.size())
    throw ShapeError("domain_weights: centrality length mismatch");
  // Each domain's weights sum to one, so the weighted sums are centroids.
  std::vector<double> w(psi.size(), 1.0);
  if (use_centrality) w.assign(centrality.begin(), centrality.end());
  double mass[2] = {0.0, 0.0};
  std::size_t count[2] = {0, 0};
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const int d = psi[i] ? 1 : 0;
    if (w[i] < 0.0) throw ValidationError("domain_weights: centrality must be non-negative");
    mass[d] += w[i];
    ++count[d];
  }
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const int d = psi[i] ? 1 : 0;
    w[i] = mass[d] > 0.0 ? w[i] / mass[d] : 1.0 / static_cast<double>(count[d]);
  }
  return w;
}

Matrix signed_domain_row(const std::vector<int>& psi, const std::vector<double>& weights,
                         const std::vector<bool>& include_biased) {
  if (weights.size() != psi.size()) throw ShapeError("signed_domain_row: weight length mismatch");
  Matrix r = Matrix::Zero(1, static_cast<Eigen::Index>(psi.size()));
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    if (psi[i] == 0)
      r(0, c) = weights[i];
    else if (include_biased.empty() || include_biased[i])
      r(0, c) = -weights[i];
  }
  return r;
}

bool has_both_domains(const std::vector<int>& psi) {
  const bool any_biased = std::find(psi.begin(), psi.end(), 1) != psi.end();
  const bool any_complete = std::find(psi.begin(), psi.end(), 0) != psi.end();
  return any_biased && any_complete;
}

}  // namespace hktgnn
