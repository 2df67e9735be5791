#include "hktgnn/params.hpp"

#include <algorithm>
#include <cmath>

#include "hktgnn/error.hpp"

namespace hktgnn {

ParamId ParamStore::add(std::string name, Matrix init, std::string group) {
  values_.push_back(std::move(init));
  names_.push_back(std::move(name));
  groups_.push_back(std::move(group));
  return ParamId{values_.size() - 1};
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  if (a.size() != b.size() || a.names_ != b.names_) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Matrix& x = a.values_[i];
    const Matrix& y = b.values_[i];
    if (x.rows() != y.rows() || x.cols() != y.cols() || x != y) return false;
  }
  return true;
}

Matrix normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

Matrix glorot(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  return normal_matrix(rng, rows, cols, std::sqrt(2.0 / static_cast<double>(rows + cols)));
}

Binding::Binding(ad::Tape& tape, const ParamStore& store, std::vector<std::string> frozen_groups)
    : tape_(tape), store_(store), frozen_(std::move(frozen_groups)), bound_(store.size()),
      is_bound_(store.size(), false) {}

bool Binding::trainable(std::size_t i) const {
  return std::find(frozen_.begin(), frozen_.end(), store_.group(i)) == frozen_.end();
}

ad::Var Binding::operator()(ParamId id) {
  if (id.index >= store_.size()) throw Error("Binding: unknown parameter");
  if (!is_bound_[id.index]) {
    const Matrix& v = store_.value(id);
    bound_[id.index] = trainable(id.index) ? tape_.variable(v) : tape_.constant(v);
    is_bound_[id.index] = true;
  }
  return bound_[id.index];
}

std::vector<Matrix> Binding::gradients() const {
  std::vector<Matrix> out;
  out.reserve(store_.size());
  for (std::size_t i = 0; i < store_.size(); ++i) {
    const Matrix& v = store_.value(i);
    if (is_bound_[i] && bound_[i].grad().size() != 0)
      out.push_back(bound_[i].grad());
    else
      out.push_back(Matrix::Zero(v.rows(), v.cols()));
  }
  return out;
}

Adam::Adam(const ParamStore& store, AdamConfig cfg) : cfg_(cfg) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    m_.push_back(Matrix::Zero(store.value(i).rows(), store.value(i).cols()));
    v_.push_back(Matrix::Zero(store.value(i).rows(), store.value(i).cols()));
  }
}

void Adam::step(ParamStore& store, const std::vector<Matrix>& grads, const std::vector<bool>& trainable) {
  if (grads.size() != store.size()) throw ShapeError("Adam::step: gradient count mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (!trainable.empty() && !trainable[i]) continue;
    const Matrix& g = grads[i];
    Matrix& p = store.value(i);
    if (g.rows() != p.rows() || g.cols() != p.cols())
      throw ShapeError("Adam::step: gradient for '" + store.name(i) + "' has shape " + ad::shape_of(g));
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    p.array() -= cfg_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
  }
}

}  // namespace hktgnn
