#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hktgnn/autodiff.hpp"

namespace hktgnn {

using Rng = std::mt19937_64;

struct ParamId {
  std::size_t index = 0;
};

/// Flat, ordered collection of trainable matrices. Modules keep ParamIds into it.
class ParamStore {
 public:
  ParamId add(std::string name, Matrix init, std::string group);

  Matrix& value(ParamId id) { return values_[id.index]; }
  const Matrix& value(ParamId id) const { return values_[id.index]; }
  Matrix& value(std::size_t i) { return values_[i]; }
  const Matrix& value(std::size_t i) const { return values_[i]; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const std::string& group(std::size_t i) const { return groups_[i]; }
  std::size_t size() const noexcept { return values_.size(); }

  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  std::vector<Matrix> values_;
  std::vector<std::string> names_;
  std::vector<std::string> groups_;
};

/// Glorot-normal initialized rows x cols matrix.
Matrix glorot(Rng& rng, Eigen::Index rows, Eigen::Index cols);
Matrix normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev);

/// Binds a ParamStore onto one Tape. Parameters become leaves on first use;
/// parameters in frozen groups are bound as constants.
class Binding {
 public:
  Binding(ad::Tape& tape, const ParamStore& store, std::vector<std::string> frozen_groups = {});

  ad::Var operator()(ParamId id);
  ad::Tape& tape() { return tape_; }
  bool trainable(std::size_t i) const;

  /// Gradient per parameter (zeros where unused or frozen). Call after backward.
  std::vector<Matrix> gradients() const;

 private:
  ad::Tape& tape_;
  const ParamStore& store_;
  std::vector<std::string> frozen_;
  std::vector<ad::Var> bound_;
  std::vector<bool> is_bound_;
};

struct AdamConfig {
  double lr = 3e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(const ParamStore& store, AdamConfig cfg = {});

  /// One bias-corrected Adam update; entries with trainable[i] == false are skipped.
  void step(ParamStore& store, const std::vector<Matrix>& grads, const std::vector<bool>& trainable = {});
  long steps() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long t_ = 0;
};

}  // namespace hktgnn
