#include "hktgnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hktgnn/error.hpp"

namespace hktgnn::ad {

std::string shape_of(const Matrix& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ShapeError("scalar(): value has shape " + shape_of(v));
  return v(0, 0);
}

Var Tape::constant(Matrix value) { return record(std::move(value), false, nullptr); }
Var Tape::variable(Matrix value) { return record(std::move(value), true, nullptr); }

Var Tape::record(Matrix value, bool requires_grad, Backward backward) {
#ifndef NDEBUG
  if (!value.allFinite()) throw Error("non-finite value recorded on tape (node " +
                                      std::to_string(nodes_.size()) + ")");
#endif
  nodes_.push_back(Node{std::move(value), Matrix(), requires_grad,
                        requires_grad ? std::move(backward) : Backward()});
  return Var(this, nodes_.size() - 1);
}

Matrix& Tape::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0 && n.value.size() != 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  if (!nodes_[id].requires_grad) return;
  Node& n = nodes_[id];
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

void Tape::accumulate(std::size_t id, Matrix&& g) {
  if (!nodes_[id].requires_grad) return;
  Node& n = nodes_[id];
  if (n.grad.size() == 0)
    n.grad = std::move(g);
  else
    n.grad += g;
}

void Tape::backward(const Var& loss) {
  if (&loss.tape() != this) throw Error("backward: loss lives on another tape");
  if (value(loss.id()).size() != 1)
    throw ShapeError("backward: loss must be 1x1, got " + shape_of(value(loss.id())));
  if (!nodes_[loss.id()].requires_grad) return;
  grad_slot(loss.id())(0, 0) += 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && n.grad.size() != 0) n.backward(*this, n.grad);
  }
}

namespace {

Tape& same_tape(const Var& a, const Var& b) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) throw Error("operands live on different tapes");
  return a.tape();
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shapes " + shape_of(a) + " and " + shape_of(b) + " differ");
}

template <class F>
Var unary(const Var& a, Matrix out, F local_grad) {
  Tape& t = a.tape();
  const std::size_t ia = a.id();
  return t.record(std::move(out), a.requires_grad(), [ia, local_grad](Tape& tp, const Matrix& g) {
    tp.accumulate(ia, local_grad(tp.value(ia), g));
  });
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows())
    throw ShapeError("matmul: shapes " + shape_of(av) + " and " + shape_of(bv) + " are incompatible");
  Matrix out(av.rows(), bv.cols());
  out.noalias() = av * bv;
  const std::size_t ia = a.id(), ib = b.id();
  const bool ra = a.requires_grad(), rb = b.requires_grad();
  return t.record(std::move(out), ra || rb, [ia, ib, ra, rb](Tape& tp, const Matrix& g) {
    if (ra) tp.grad_slot(ia).noalias() += g * tp.value(ib).transpose();
    if (rb) tp.grad_slot(ib).noalias() += tp.value(ia).transpose() * g;
  });
}

Var add(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  require_same_shape("add", a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(a.value() + b.value(), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape& tp, const Matrix& g) {
                    tp.accumulate(ia, g);
                    tp.accumulate(ib, g);
                  });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  require_same_shape("sub", a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(a.value() - b.value(), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape& tp, const Matrix& g) {
                    tp.accumulate(ia, g);
                    if (tp.requires_grad(ib)) tp.grad_slot(ib) -= g;
                  });
}

Var mul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  require_same_shape("mul", a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  Matrix out = a.value().cwiseProduct(b.value());
  return t.record(std::move(out), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape& tp, const Matrix& g) {
                    if (tp.requires_grad(ia)) tp.grad_slot(ia) += g.cwiseProduct(tp.value(ib));
                    if (tp.requires_grad(ib)) tp.grad_slot(ib) += g.cwiseProduct(tp.value(ia));
                  });
}

Var add_row(const Var& a, const Var& row) {
  Tape& t = same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols())
    throw ShapeError("add_row: shapes " + shape_of(a.value()) + " and " + shape_of(row.value()) +
                     " are incompatible");
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  const std::size_t ia = a.id(), ir = row.id();
  return t.record(std::move(out), a.requires_grad() || row.requires_grad(),
                  [ia, ir](Tape& tp, const Matrix& g) {
                    tp.accumulate(ia, g);
                    if (tp.requires_grad(ir)) tp.grad_slot(ir) += g.colwise().sum();
                  });
}

Var mul_col(const Var& a, const Var& col) {
  Tape& t = same_tape(a, col);
  if (col.cols() != 1 || col.rows() != a.rows())
    throw ShapeError("mul_col: shapes " + shape_of(a.value()) + " and " + shape_of(col.value()) +
                     " are incompatible");
  Matrix out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) out.row(r) *= col.value()(r, 0);
  const std::size_t ia = a.id(), ic = col.id();
  return t.record(std::move(out), a.requires_grad() || col.requires_grad(),
                  [ia, ic](Tape& tp, const Matrix& g) {
                    if (tp.requires_grad(ia)) {
                      Matrix& ga = tp.grad_slot(ia);
                      const Matrix& c = tp.value(ic);
                      for (Eigen::Index r = 0; r < g.rows(); ++r) ga.row(r) += c(r, 0) * g.row(r);
                    }
                    if (tp.requires_grad(ic))
                      tp.grad_slot(ic) += g.cwiseProduct(tp.value(ia)).rowwise().sum();
                  });
}

Var scale(const Var& a, double factor) {
  return unary(a, a.value() * factor, [factor](const Matrix&, const Matrix& g) -> Matrix { return g * factor; });
}

Var mul_scalar(const Var& a, const Var& s) {
  Tape& t = same_tape(a, s);
  if (s.value().size() != 1) throw ShapeError("mul_scalar: factor has shape " + shape_of(s.value()));
  const std::size_t ia = a.id(), is = s.id();
  return t.record(a.value() * s.value()(0, 0), a.requires_grad() || s.requires_grad(),
                  [ia, is](Tape& tp, const Matrix& g) {
                    if (tp.requires_grad(ia)) tp.grad_slot(ia) += g * tp.value(is)(0, 0);
                    if (tp.requires_grad(is)) tp.grad_slot(is)(0, 0) += g.cwiseProduct(tp.value(ia)).sum();
                  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  Tape& t = parts.front().tape();
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  bool rg = false;
  for (const auto& p : parts) {
    same_tape(parts.front(), p);
    if (p.rows() != rows)
      throw ShapeError("concat_cols: shapes " + shape_of(parts.front().value()) + " and " +
                       shape_of(p.value()) + " have different row counts");
    cols += p.cols();
    rg = rg || p.requires_grad();
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.cols();
  }
  return t.record(std::move(out), rg, [ids, offsets](Tape& tp, const Matrix& g) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tp.requires_grad(ids[k])) continue;
      tp.grad_slot(ids[k]) += g.middleCols(offsets[k], tp.value(ids[k]).cols());
    }
  });
}

Var concat_cols(const Var& a, const Var& b) {
  const Var parts[] = {a, b};
  return concat_cols(parts);
}

Var gather_rows(const Var& a, const Index& rows) {
  const Matrix& av = a.value();
  Matrix out(static_cast<Eigen::Index>(rows.size()), av.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= static_cast<std::size_t>(av.rows()))
      throw ShapeError("gather_rows: index " + std::to_string(rows[r]) + " out of range for " + shape_of(av));
    out.row(static_cast<Eigen::Index>(r)) = av.row(static_cast<Eigen::Index>(rows[r]));
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), a.requires_grad(), [ia, rows](Tape& tp, const Matrix& g) {
    Matrix& ga = tp.grad_slot(ia);
    for (std::size_t r = 0; r < rows.size(); ++r)
      ga.row(static_cast<Eigen::Index>(rows[r])) += g.row(static_cast<Eigen::Index>(r));
  });
}

Var scatter_add_rows(const Var& a, const Index& rows, std::size_t n) {
  const Matrix& av = a.value();
  if (static_cast<Eigen::Index>(rows.size()) != av.rows())
    throw ShapeError("scatter_add_rows: " + std::to_string(rows.size()) + " targets for " + shape_of(av));
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n), av.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n) throw ShapeError("scatter_add_rows: target " + std::to_string(rows[r]) + " >= " + std::to_string(n));
    out.row(static_cast<Eigen::Index>(rows[r])) += av.row(static_cast<Eigen::Index>(r));
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), a.requires_grad(), [ia, rows](Tape& tp, const Matrix& g) {
    Matrix& ga = tp.grad_slot(ia);
    for (std::size_t r = 0; r < rows.size(); ++r)
      ga.row(static_cast<Eigen::Index>(r)) += g.row(static_cast<Eigen::Index>(rows[r]));
  });
}

Var repeat_rows(const Var& row, std::size_t n) {
  if (row.rows() != 1) throw ShapeError("repeat_rows: expected a row vector, got " + shape_of(row.value()));
  return gather_rows(row, Index(n, 0));
}

Var column(const Var& a, Eigen::Index j) {
  if (j < 0 || j >= a.cols()) throw ShapeError("column: index out of range for " + shape_of(a.value()));
  Matrix out = a.value().col(j);
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), a.requires_grad(), [ia, j](Tape& tp, const Matrix& g) {
    tp.grad_slot(ia).col(j) += g.col(0);
  });
}

Var detach(const Var& a) { return a.tape().constant(a.value()); }

Var linear(const Var& x, const Var& w, const Var& b, double slope) {
  Tape& t = same_tape(x, w);
  same_tape(x, b);
  const Matrix& xv = x.value();
  const Matrix& wv = w.value();
  if (xv.cols() != wv.rows() || b.rows() != 1 || b.cols() != wv.cols())
    throw ShapeError("linear: shapes " + shape_of(xv) + ", " + shape_of(wv) + " and " + shape_of(b.value()) +
                     " are incompatible");
  if (!(slope > 0.0)) throw ShapeError("linear: slope must be positive");
  Matrix out(xv.rows(), wv.cols());
  out.noalias() = xv * wv;
  out.rowwise() += b.value().row(0);
  if (slope != 1.0) out = out.unaryExpr([slope](double v) { return v > 0 ? v : slope * v; });
  const std::size_t ix = x.id(), iw = w.id(), ib = b.id(), self = t.size();
  const bool rx = x.requires_grad(), rw = w.requires_grad(), rb = b.requires_grad();
  return t.record(std::move(out), rx || rw || rb, [=](Tape& tp, const Matrix& g) {
    // With a positive slope the sign of the output equals the sign of the pre-activation.
    Matrix gp;
    const Matrix* gl = &g;
    if (slope != 1.0) {
      gp = g.binaryExpr(tp.value(self), [slope](double gv, double o) { return o > 0 ? gv : slope * gv; });
      gl = &gp;
    }
    if (rx) tp.accumulate(ix, Matrix(*gl * tp.value(iw).transpose()));
    if (rw) tp.accumulate(iw, Matrix(tp.value(ix).transpose() * *gl));
    if (rb) tp.accumulate(ib, Matrix(gl->colwise().sum()));
  });
}

Var neighbor_sum(const Var& h, const Var& eps, const Index& src, const Index& dst) {
  Tape& t = same_tape(h, eps);
  if (eps.value().size() != 1) throw ShapeError("neighbor_sum: eps has shape " + shape_of(eps.value()));
  if (src.size() != dst.size()) throw ShapeError("neighbor_sum: src/dst length mismatch");
  const Matrix& hv = h.value();
  const auto n = static_cast<std::size_t>(hv.rows());
  for (std::size_t e = 0; e < src.size(); ++e)
    if (src[e] >= n || dst[e] >= n) throw ShapeError("neighbor_sum: edge endpoint out of range");
  Matrix out = hv * (1.0 + eps.value()(0, 0));
  for (std::size_t e = 0; e < src.size(); ++e)
    out.row(static_cast<Eigen::Index>(dst[e])) += hv.row(static_cast<Eigen::Index>(src[e]));
  const std::size_t ih = h.id(), ie = eps.id();
  const bool rh = h.requires_grad(), re = eps.requires_grad();
  return t.record(std::move(out), rh || re, [ih, ie, rh, re, src, dst](Tape& tp, const Matrix& g) {
    const Matrix& hv = tp.value(ih);
    if (re) tp.grad_slot(ie)(0, 0) += g.cwiseProduct(hv).sum();
    if (rh) {
      Matrix gh = g * (1.0 + tp.value(ie)(0, 0));
      for (std::size_t e = 0; e < src.size(); ++e)
        gh.row(static_cast<Eigen::Index>(src[e])) += g.row(static_cast<Eigen::Index>(dst[e]));
      tp.accumulate(ih, std::move(gh));
    }
  });
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return unary(a, std::move(out), [](const Matrix& x, const Matrix& g) -> Matrix {
    return Matrix::Constant(x.rows(), x.cols(), g(0, 0));
  });
}

Var mean(const Var& a) {
  if (a.value().size() == 0) throw ShapeError("mean: empty operand");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var squared_l2(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().squaredNorm();
  return unary(a, std::move(out), [](const Matrix& x, const Matrix& g) -> Matrix { return 2.0 * g(0, 0) * x; });
}

Var softsign(const Var& a) {
  Matrix out = a.value().unaryExpr([](double x) { return x / (1.0 + std::abs(x)); });
  return unary(a, std::move(out), [](const Matrix& x, const Matrix& g) -> Matrix {
    return g.cwiseProduct(x.unaryExpr([](double v) {
      const double d = 1.0 + std::abs(v);
      return 1.0 / (d * d);
    }));
  });
}

Var sigmoid(const Var& a) {
  auto f = [](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  };
  Matrix out = a.value().unaryExpr(f);
  return unary(a, std::move(out), [f](const Matrix& x, const Matrix& g) -> Matrix {
    return g.cwiseProduct(x.unaryExpr([f](double v) {
      const double s = f(v);
      return s * (1.0 - s);
    }));
  });
}

Var leaky_relu(const Var& a, double slope) {
  Matrix out = a.value().unaryExpr([slope](double x) { return x > 0 ? x : slope * x; });
  return unary(a, std::move(out), [slope](const Matrix& x, const Matrix& g) -> Matrix {
    return g.cwiseProduct(x.unaryExpr([slope](double v) { return v > 0 ? 1.0 : slope; }));
  });
}

Var prelu(const Var& a, const Var& slope) {
  Tape& t = same_tape(a, slope);
  if (slope.value().size() != 1) throw ShapeError("prelu: slope has shape " + shape_of(slope.value()));
  const double s = slope.value()(0, 0);
  Matrix out = a.value().unaryExpr([s](double x) { return x > 0 ? x : s * x; });
  const std::size_t ia = a.id(), is = slope.id();
  return t.record(std::move(out), a.requires_grad() || slope.requires_grad(),
                  [ia, is](Tape& tp, const Matrix& g) {
                    const Matrix& x = tp.value(ia);
                    const double sv = tp.value(is)(0, 0);
                    if (tp.requires_grad(ia))
                      tp.grad_slot(ia) += g.cwiseProduct(x.unaryExpr([sv](double v) { return v > 0 ? 1.0 : sv; }));
                    if (tp.requires_grad(is))
                      tp.grad_slot(is)(0, 0) +=
                          g.cwiseProduct(x.unaryExpr([](double v) { return v > 0 ? 0.0 : v; })).sum();
                  });
}

Var segment_softmax(const Var& scores, const Index& segments, std::size_t n_segments) {
  const Matrix& s = scores.value();
  if (s.cols() != 1 || static_cast<std::size_t>(s.rows()) != segments.size())
    throw ShapeError("segment_softmax: scores " + shape_of(s) + " for " + std::to_string(segments.size()) +
                     " segment ids");
  std::vector<double> maxv(n_segments, -std::numeric_limits<double>::infinity());
  for (std::size_t e = 0; e < segments.size(); ++e) {
    if (segments[e] >= n_segments) throw ShapeError("segment_softmax: segment id out of range");
    maxv[segments[e]] = std::max(maxv[segments[e]], s(static_cast<Eigen::Index>(e), 0));
  }
  std::vector<double> denom(n_segments, 0.0);
  Matrix out(s.rows(), 1);
  for (std::size_t e = 0; e < segments.size(); ++e) {
    const double v = std::exp(s(static_cast<Eigen::Index>(e), 0) - maxv[segments[e]]);
    out(static_cast<Eigen::Index>(e), 0) = v;
    denom[segments[e]] += v;
  }
  for (std::size_t e = 0; e < segments.size(); ++e) out(static_cast<Eigen::Index>(e), 0) /= denom[segments[e]];

  const std::size_t is = scores.id();
  Tape& t = scores.tape();
  const std::size_t out_id = t.size();
  return t.record(std::move(out), scores.requires_grad(),
                  [is, out_id, segments, n_segments](Tape& tp, const Matrix& g) {
                    const Matrix& y = tp.value(out_id);
                    std::vector<double> dot(n_segments, 0.0);
                    for (std::size_t e = 0; e < segments.size(); ++e)
                      dot[segments[e]] += g(static_cast<Eigen::Index>(e), 0) * y(static_cast<Eigen::Index>(e), 0);
                    Matrix& gs = tp.grad_slot(is);
                    for (std::size_t e = 0; e < segments.size(); ++e) {
                      const auto r = static_cast<Eigen::Index>(e);
                      gs(r, 0) += y(r, 0) * (g(r, 0) - dot[segments[e]]);
                    }
                  });
}

Var standardize_columns(const Var& a, double eps) {
  const Matrix& x = a.value();
  if (x.rows() == 0) throw ShapeError("standardize_columns: empty operand");
  const double n = static_cast<double>(x.rows());
  const Eigen::RowVectorXd mu = x.colwise().mean();
  Matrix centered = x.rowwise() - mu;
  const Eigen::RowVectorXd inv_sd =
      ((centered.array().square().colwise().sum() / n) + eps).sqrt().inverse().matrix();
  Matrix out = centered.array().rowwise() * inv_sd.array();
  Tape& t = a.tape();
  const std::size_t ia = a.id(), out_id = t.size();
  return t.record(std::move(out), a.requires_grad(), [ia, out_id, inv_sd, n](Tape& tp, const Matrix& g) {
    const Matrix& y = tp.value(out_id);
    const Eigen::RowVectorXd g_mean = g.colwise().sum() / n;
    const Eigen::RowVectorXd gy_mean = g.cwiseProduct(y).colwise().sum() / n;
    Matrix gx = (g.rowwise() - g_mean) - Matrix(y.array().rowwise() * gy_mean.array());
    gx.array().rowwise() *= inv_sd.array();
    tp.accumulate(ia, std::move(gx));
  });
}

Var softmax_rows(const Var& a) {
  Matrix out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  Tape& t = a.tape();
  const std::size_t ia = a.id();
  const std::size_t out_id = t.size();
  return t.record(std::move(out), a.requires_grad(), [ia, out_id](Tape& tp, const Matrix& g) {
    const Matrix& y = tp.value(out_id);
    Matrix& ga = tp.grad_slot(ia);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = g.row(r).dot(y.row(r));
      ga.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
    }
  });
}

Var binary_cross_entropy(const Var& p, const std::vector<int>& labels, const Index& rows) {
  const Matrix& pv = p.value();
  if (pv.cols() != 1) throw ShapeError("binary_cross_entropy: p must be a column, got " + shape_of(pv));
  if (labels.size() != static_cast<std::size_t>(pv.rows()))
    throw ShapeError("binary_cross_entropy: " + std::to_string(labels.size()) + " labels for " + shape_of(pv));
  if (rows.empty()) throw ShapeError("binary_cross_entropy: no rows selected");
  double total = 0.0;
  for (std::size_t r : rows) {
    const double q = std::clamp(pv(static_cast<Eigen::Index>(r), 0), kProbClamp, 1.0 - kProbClamp);
    total -= labels[r] ? std::log(q) : std::log(1.0 - q);
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  Matrix out(1, 1);
  out(0, 0) = total * inv;
  const std::size_t ip = p.id();
  return p.tape().record(std::move(out), p.requires_grad(), [ip, labels, rows, inv](Tape& tp, const Matrix& g) {
    const Matrix& x = tp.value(ip);
    Matrix& gp = tp.grad_slot(ip);
    for (std::size_t r : rows) {
      const auto i = static_cast<Eigen::Index>(r);
      const double raw = x(i, 0);
      if (raw < kProbClamp || raw > 1.0 - kProbClamp) continue;
      gp(i, 0) += g(0, 0) * inv * (labels[r] ? -1.0 / raw : 1.0 / (1.0 - raw));
    }
  });
}

Var kl_divergence_rows(const Var& p, const Var& q) {
  Tape& t = same_tape(p, q);
  require_same_shape("kl_divergence_rows", p.value(), q.value());
  const Matrix& pv = p.value();
  const Matrix& qv = q.value();
  if (pv.rows() == 0) {
    Matrix zero = Matrix::Zero(1, 1);
    return t.constant(std::move(zero));
  }
  auto clamp = [](double v) { return std::clamp(v, kProbClamp, 1.0 - kProbClamp); };
  double total = 0.0;
  for (Eigen::Index r = 0; r < pv.rows(); ++r)
    for (Eigen::Index c = 0; c < pv.cols(); ++c) {
      const double a = clamp(pv(r, c)), b = clamp(qv(r, c));
      total += a * (std::log(a) - std::log(b));
    }
  const double inv = 1.0 / static_cast<double>(pv.rows());
  Matrix out(1, 1);
  out(0, 0) = total * inv;
  const std::size_t ip = p.id(), iq = q.id();
  return t.record(std::move(out), p.requires_grad() || q.requires_grad(),
                  [ip, iq, inv, clamp](Tape& tp, const Matrix& g) {
                    const Matrix& a = tp.value(ip);
                    const Matrix& b = tp.value(iq);
                    const double k = g(0, 0) * inv;
                    const bool rp = tp.requires_grad(ip), rq = tp.requires_grad(iq);
                    for (Eigen::Index r = 0; r < a.rows(); ++r)
                      for (Eigen::Index c = 0; c < a.cols(); ++c) {
                        const double av = a(r, c), bv = b(r, c);
                        const bool a_in = av >= kProbClamp && av <= 1.0 - kProbClamp;
                        const bool b_in = bv >= kProbClamp && bv <= 1.0 - kProbClamp;
                        const double ac = clamp(av), bc = clamp(bv);
                        if (rp && a_in) tp.grad_slot(ip)(r, c) += k * (std::log(ac) - std::log(bc) + 1.0);
                        if (rq && b_in) tp.grad_slot(iq)(r, c) -= k * ac / bc;
                      }
                  });
}

}  // namespace hktgnn::ad
