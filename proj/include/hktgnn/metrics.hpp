#pragma once

#include <vector>

#include "hktgnn/error.hpp"

namespace hktgnn {

/// Raised when a split has only one class and AUC is undefined.
class DegenerateSplit : public Error {
 public:
  using Error::Error;
};

/// F1 of the positive class; 0 when there are no true positives.
double f1_score(const std::vector<int>& preds, const std::vector<int>& labels);

/// Mann-Whitney rank statistic with tied ranks averaged.
double auc_score(const std::vector<double>& scores, const std::vector<int>& labels);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
};
MeanStd mean_std(const std::vector<double>& values);

}  // namespace hktgnn
