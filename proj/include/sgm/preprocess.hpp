#pragma once

#include <string>
#include <utility>

#include "sgm/targets.hpp"
#include "sgm/types.hpp"

namespace sgm {

// x -> kappa diag(1/d_scale) (x - mu), kappa = 1/sqrt(2 lambda_max(corr)).
struct PreprocessTransform {
  Vec mu;
  Vec d_scale;
  double kappa = 1.0;

  RowMat apply(const RowMat& x) const;
  RowMat inverse(const RowMat& x) const;
  // Image of N(m, S) under the forward map.
  GaussianTarget apply(const GaussianTarget& g) const;
  GaussianTarget inverse(const GaussianTarget& g) const;
  // Upper bound on the original-scale W2 from a scaled-space W2 bound.
  double transfer_bound(double w2_scaled) const;

  std::string to_json() const;
  static PreprocessTransform from_json(const std::string& text);
};

std::pair<PreprocessTransform, RowMat> fit_transform(const RowMat& x);

}  // namespace sgm
