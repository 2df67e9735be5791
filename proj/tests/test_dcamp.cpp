#include <doctest.h>

#include "hktgnn/dcamp.hpp"
#include "hktgnn/domain.hpp"
#include "hktgnn/error.hpp"
#include "support.hpp"

using namespace hktgnn;
namespace oracle = hktgnn::testing::oracle;

namespace {

constexpr int kIn = 5;

struct Fixture {
  ParamStore store;
  dcamp::DCAMPParams p;
  explicit Fixture(std::uint64_t seed, dcamp::DCAMPConfig cfg = {.hidden = 6, .attn_dim = 4}) {
    Rng rng(seed);
    p = dcamp::DCAMPParams::create(store, rng, cfg, kIn);
  }
};

struct Instance {
  std::vector<int> psi;
  std::vector<double> weights;
  dcamp::EdgeList edges;
  Matrix h;
};

Instance random_instance(Rng& rng, std::size_t n, int dim, double edge_p = 0.3) {
  Instance in;
  in.psi = testing::random_labels(rng, n, 0.4);
  in.weights = domain_weights(in.psi, {}, false);
  in.edges = dcamp::make_edges(n, testing::random_digraph(rng, n, edge_p).edges, false);
  in.h = testing::random_matrix(rng, static_cast<Eigen::Index>(n), dim);
  return in;
}

dcamp::LayerOutput layer(Fixture& m, Binding& bind, const Instance& in, const Matrix& delta) {
  return dcamp::dcamp_layer(bind, m.p, m.p.layers[0], bind.tape().constant(in.h), in.edges, in.psi,
                            bind.tape().constant(delta));
}

double max_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_SUITE("dcamp") {
  TEST_CASE("edge construction") {
    const auto directed = dcamp::make_edges(3, {{0, 1}, {0, 1}, {2, 2}, {1, 2}}, false);
    CHECK(directed.src == ad::Index{0, 1});
    CHECK(directed.dst == ad::Index{1, 2});
    const auto sym = dcamp::make_edges(3, {{0, 1}, {1, 0}}, true);
    CHECK(sym.src.size() == 2);
    CHECK_THROWS_AS(dcamp::make_edges(2, {{0, 2}}, false), ShapeError);
  }

  TEST_CASE("domain difference of states by hand") {
    ad::Tape tape;
    Matrix h(3, 2);
    h << 1, 2, 3, 4, 10, 20;
    const std::vector<int> psi{0, 0, 1};
    const auto d = dcamp::delta_xc(tape, tape.constant(h), psi, domain_weights(psi, {}, false));
    CHECK(d.value()(0, 0) == doctest::Approx(2.0 - 10.0));
    CHECK(d.value()(0, 1) == doctest::Approx(3.0 - 20.0));
    const std::vector<int> one{1, 1, 1};
    CHECK(dcamp::delta_xc(tape, tape.constant(h), one, domain_weights(one, {}, false)).value().isZero());
    CHECK_THROWS_AS(dcamp::delta_xc(tape, tape.constant(h), {0, 1}, {0.5, 0.5}), ShapeError);
  }

  TEST_CASE("shift is zero within a domain, signed across and bounded by the gap") {
    Fixture m(1);
    Rng rng(2);
    ad::Tape tape;
    Binding bind(tape, m.store);
    const Matrix h_src = testing::random_matrix(rng, 4, 6);
    const Matrix delta = testing::random_matrix(rng, 1, 6);
    for (int target = 0; target < 2; ++target) {
      const std::vector<int> src_domain{0, 1, 0, 1};
      const Matrix s = dcamp::distribution_shift(bind, m.p.layers[0], tape.constant(h_src), tape.constant(delta),
                                                 src_domain, target).value();
      for (Eigen::Index k = 0; k < 4; ++k) {
        if (src_domain[static_cast<std::size_t>(k)] == target) {
          CHECK(s.row(k).isZero());
          continue;
        }
        // s = sign * gate * delta with |gate| < 1
        const double ratio = s(k, 0) / delta(0, 0);
        CHECK(std::abs(ratio) < 1.0);
        CHECK(max_diff(s.row(k), ratio * delta) < 1e-14);
        CHECK(s.row(k).norm() <= delta.norm());
      }
    }
  }

  TEST_CASE("layer matches an edge-by-edge recomputation") {
    Fixture m(3);
    Rng rng(4);
    for (int trial = 0; trial < 30; ++trial) {
      const Instance in = random_instance(rng, 3 + static_cast<std::size_t>(trial % 10), 6);
      const Matrix delta = testing::random_matrix(rng, 1, 6);
      ad::Tape tape;
      Binding bind(tape, m.store);
      const auto out = layer(m, bind, in, delta);
      const auto expected = oracle::dcamp_layer(m.store, m.p, m.p.layers[0], in.h, in.edges, in.psi, delta);
      CHECK(max_diff(out.h.value(), expected.h) <= 1e-12);
      if (in.edges.src.empty()) continue;
      CHECK(max_diff(out.shift.value(), expected.shift) <= 1e-12);
      for (std::size_t k = 0; k < in.edges.src.size(); ++k)
        CHECK(std::abs(out.attention.value()(static_cast<Eigen::Index>(k), 0) - expected.attention[k]) <= 1e-12);
    }
  }

  TEST_CASE("attention sums to one over every in-neighborhood") {
    Fixture m(5);
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
      const Instance in = random_instance(rng, 12, 6);
      ad::Tape tape;
      Binding bind(tape, m.store);
      const auto out = layer(m, bind, in, testing::random_matrix(rng, 1, 6));
      std::vector<double> mass(12, 0.0);
      std::vector<bool> has_in(12, false);
      for (std::size_t k = 0; k < in.edges.src.size(); ++k) {
        mass[in.edges.dst[k]] += out.attention.value()(static_cast<Eigen::Index>(k), 0);
        has_in[in.edges.dst[k]] = true;
      }
      for (std::size_t i = 0; i < 12; ++i)
        if (has_in[i]) CHECK(std::abs(mass[i] - 1.0) <= 1e-12);
    }
  }

  TEST_CASE("single in-neighbor gets all the attention") {
    Fixture m(7);
    Rng rng(8);
    Instance in;
    in.psi = {0, 1};
    in.weights = domain_weights(in.psi, {}, false);
    in.edges = dcamp::make_edges(2, {{0, 1}}, false);
    in.h = testing::random_matrix(rng, 2, 6);
    ad::Tape tape;
    Binding bind(tape, m.store);
    const auto out = layer(m, bind, in, testing::random_matrix(rng, 1, 6));
    CHECK(out.attention.value()(0, 0) == 1.0);
    CHECK(max_diff(out.messages.value(), in.h.row(0) + out.shift.value()) < 1e-15);
  }

  TEST_CASE("edgeless graph updates every node from its own state") {
    Fixture m(9);
    Rng rng(10);
    Instance in;
    in.psi = {0, 1, 0};
    in.weights = domain_weights(in.psi, {}, false);
    in.edges = dcamp::make_edges(3, {}, false);
    in.h = testing::random_matrix(rng, 3, 6);
    ad::Tape tape;
    Binding bind(tape, m.store);
    const auto out = layer(m, bind, in, testing::random_matrix(rng, 1, 6));
    CHECK(out.attention.rows() == 0);
    const auto expected = oracle::dcamp_layer(m.store, m.p, m.p.layers[0], in.h, in.edges, in.psi, Matrix::Zero(1, 6));
    CHECK(max_diff(out.h.value(), expected.h) <= 1e-14);
  }

  TEST_CASE("messages across the four domain pairs") {
    Fixture m(11);
    Rng rng(12);
    Instance in;
    // 0 (complete) and 1 (biased) both send to 2 (complete) and 3 (biased).
    in.psi = {0, 1, 0, 1};
    in.weights = domain_weights(in.psi, {}, false);
    in.edges = dcamp::make_edges(4, {{0, 2}, {1, 2}, {0, 3}, {1, 3}}, false);
    in.h = testing::random_matrix(rng, 4, 6);
    const Matrix delta = testing::random_matrix(rng, 1, 6);
    ad::Tape tape;
    Binding bind(tape, m.store);
    const auto out = layer(m, bind, in, delta);
    const Matrix& s = out.shift.value();
    CHECK(s.row(0).isZero());       // complete -> complete
    CHECK_FALSE(s.row(1).isZero()); // biased -> complete, shifted by +g delta
    CHECK_FALSE(s.row(2).isZero()); // complete -> biased, shifted by -g delta
    CHECK(s.row(3).isZero());       // biased -> biased
    Eigen::RowVectorXd joined(12);
    joined << in.h.row(1), delta.row(0);
    const double g = (joined * m.store.value(m.p.layers[0].gate[0]))(0, 0);
    CHECK(max_diff(s.row(1), g / (1.0 + std::abs(g)) * delta) < 1e-14);
    joined << in.h.row(0), delta.row(0);
    const double g1 = (joined * m.store.value(m.p.layers[0].gate[1]))(0, 0);
    CHECK(max_diff(s.row(2), -g1 / (1.0 + std::abs(g1)) * delta) < 1e-14);
  }

  TEST_CASE("single-domain graph reduces to plain attention") {
    Fixture m(13);
    Rng rng(14);
    for (int trial = 0; trial < 10; ++trial) {
      Instance in = random_instance(rng, 10, 6);
      std::fill(in.psi.begin(), in.psi.end(), 0);
      in.weights = domain_weights(in.psi, {}, false);
      ad::Tape tape;
      Binding bind(tape, m.store);
      const auto delta = dcamp::delta_xc(tape, tape.constant(in.h), in.psi, in.weights);
      const auto out = dcamp::dcamp_layer(bind, m.p, m.p.layers[0], tape.constant(in.h), in.edges, in.psi, delta);
      const auto plain = oracle::dcamp_layer(m.store, m.p, m.p.layers[0], in.h, in.edges, in.psi,
                                             Matrix::Zero(1, 6), true);
      CHECK(max_diff(out.h.value(), plain.h) <= 1e-10);
    }
  }

  TEST_CASE("forward output shape and input check") {
    Fixture m(15);
    Rng rng(16);
    const Instance in = random_instance(rng, 8, kIn);
    ad::Tape tape;
    Binding bind(tape, m.store);
    const auto h = dcamp::forward(bind, m.p, tape.constant(in.h), in.edges, in.psi, in.weights);
    CHECK(h.rows() == 8);
    CHECK(h.cols() == 6);
    CHECK_THROWS_AS(dcamp::forward(bind, m.p, tape.constant(Matrix::Zero(8, 2)), in.edges, in.psi, in.weights), ShapeError);
  }

  TEST_CASE("two-layer forward gradients match finite differences") {
    Rng rng(17);
    for (dcamp::DCAMPConfig cfg : {dcamp::DCAMPConfig{.hidden = 6, .attn_dim = 4},
                                   dcamp::DCAMPConfig{.hidden = 6, .attn_dim = 4, .freeze_delta = true, .project_delta = true}}) {
      Fixture m(18, cfg);
      const Instance in = random_instance(rng, 9, kIn);
      testing::LossFn loss = [&](Binding& bind) {
        return testing::probe_loss(dcamp::forward(bind, m.p, bind.tape().constant(in.h), in.edges, in.psi, in.weights), 3);
      };
      const auto report = testing::fd_check_all(m.store, loss, rng, 12);
      CAPTURE(report.worst);
      CHECK(report.max_rel < 1e-4);
    }
  }
}
