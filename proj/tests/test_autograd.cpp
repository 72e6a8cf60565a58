#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "attnkit/autograd.hpp"
#include "attnkit/tensor.hpp"

using namespace attnkit;

namespace {

Tensor random_tensor(std::vector<Axis> axes, uint64_t seed) {
  Rng rng(seed);
  return normal_init(std::move(axes), 1.0, rng);
}

// Checks d(sum of f(x))/dx for a single-input tape program.
double check_single_input(const Tensor& x,
                          const std::function<NodeId(Tape&, NodeId)>& build) {
  Tape tape;
  NodeId in = tape.leaf(x);
  NodeId out = build(tape, in);
  NodeId loss = tape.einsum({out}, {});
  Tensor analytic = tape.backward(loss).at(in);

  const auto f = [&](const Tensor& probe) {
    Tape t2;
    NodeId p = t2.leaf(probe);
    NodeId o = build(t2, p);
    return t2.value(t2.einsum({o}, {})).data()[0];
  };
  return finite_diff_check(f, x, analytic).max_rel_err;
}

}  // namespace

TEST_CASE("einsum adjoints match finite differences") {
  Tensor a = random_tensor({{"i", 3}, {"j", 4}}, 1);
  Tensor b = random_tensor({{"j", 4}, {"k", 2}}, 2);

  Tape tape;
  NodeId na = tape.leaf(a);
  NodeId nb = tape.leaf(b);
  NodeId c = tape.einsum({na, nb}, {"i", "k"});
  NodeId loss = tape.einsum({c}, {});
  auto grads = tape.backward(loss);

  const auto f_a = [&](const Tensor& probe) {
    Tape t;
    NodeId o = t.einsum({t.leaf(probe), t.leaf(b)}, {"i", "k"});
    return t.value(t.einsum({o}, {})).data()[0];
  };
  CHECK(finite_diff_check(f_a, a, grads.at(na)).max_rel_err < 1e-7);

  const auto f_b = [&](const Tensor& probe) {
    Tape t;
    NodeId o = t.einsum({t.leaf(a), t.leaf(probe)}, {"i", "k"});
    return t.value(t.einsum({o}, {})).data()[0];
  };
  CHECK(finite_diff_check(f_b, b, grads.at(nb)).max_rel_err < 1e-7);
}

TEST_CASE("softmax adjoint matches finite differences") {
  Tensor x = random_tensor({{"n", 2}, {"m", 5}}, 3);
  // Weight the softmax output so the gradient is not annihilated by the
  // rows-sum-to-one constraint.
  Tensor w = random_tensor({{"n", 2}, {"m", 5}}, 4);
  const double err = check_single_input(x, [&](Tape& t, NodeId in) {
    NodeId s = t.softmax(in, "m");
    return t.einsum({s, t.leaf(w)}, {"n", "m"});
  });
  CHECK(err < 1e-6);
}

TEST_CASE("layer_norm adjoints for input, gain, and bias") {
  Tensor x = random_tensor({{"n", 3}, {"d", 4}}, 5);
  Tensor gain = random_tensor({{"d", 4}}, 6);
  Tensor bias = random_tensor({{"d", 4}}, 7);
  Tensor w = random_tensor({{"n", 3}, {"d", 4}}, 8);

  Tape tape;
  NodeId nx = tape.leaf(x), ng = tape.leaf(gain), nb = tape.leaf(bias);
  NodeId y = tape.layer_norm(nx, "d", ng, nb);
  NodeId loss = tape.einsum({y, tape.leaf(w)}, {});
  auto grads = tape.backward(loss);

  const auto run = [&](const Tensor& px, const Tensor& pg, const Tensor& pb) {
    Tape t;
    NodeId o = t.layer_norm(t.leaf(px), "d", t.leaf(pg), t.leaf(pb));
    return t.value(t.einsum({o, t.leaf(w)}, {})).data()[0];
  };
  CHECK(finite_diff_check([&](const Tensor& p) { return run(p, gain, bias); }, x, grads.at(nx))
            .max_rel_err < 1e-5);
  CHECK(finite_diff_check([&](const Tensor& p) { return run(x, p, bias); }, gain, grads.at(ng))
            .max_rel_err < 1e-6);
  CHECK(finite_diff_check([&](const Tensor& p) { return run(x, gain, p); }, bias, grads.at(nb))
            .max_rel_err < 1e-6);
}

TEST_CASE("layer_norm rejects a non-trailing axis") {
  Tape tape;
  NodeId x = tape.leaf(random_tensor({{"d", 4}, {"n", 3}}, 9));
  NodeId g = tape.leaf(random_tensor({{"d", 4}}, 10));
  NodeId b = tape.leaf(random_tensor({{"d", 4}}, 11));
  CHECK_THROWS_AS(tape.layer_norm(x, "d", g, b), std::invalid_argument);
}

TEST_CASE("cross entropy value and adjoint") {
  Tensor logits({{"k", 2}, {"v", 3}}, {1.0, 2.0, 0.5, -1.0, 0.0, 3.0});
  const std::vector<int64_t> targets{1, 2};

  // Hand-computed mean of logsumexp - target logit.
  double expected = 0.0;
  expected += std::log(std::exp(1.0) + std::exp(2.0) + std::exp(0.5)) - 2.0;
  expected += std::log(std::exp(-1.0) + std::exp(0.0) + std::exp(3.0)) - 3.0;
  expected /= 2.0;

  Tape tape;
  NodeId nl = tape.leaf(logits);
  NodeId loss = tape.cross_entropy_mean(nl, targets);
  CHECK(tape.value(loss).data()[0] == doctest::Approx(expected).epsilon(1e-12));

  Tensor analytic = tape.backward(loss).at(nl);
  const auto f = [&](const Tensor& probe) {
    Tape t;
    return t.value(t.cross_entropy_mean(t.leaf(probe), targets)).data()[0];
  };
  CHECK(finite_diff_check(f, logits, analytic).max_rel_err < 1e-7);
}

TEST_CASE("gather_rows forward and scatter-add adjoint") {
  Tensor table({{"rows", 3}, {"d", 2}}, {1, 2, 3, 4, 5, 6});
  Tape tape;
  NodeId nt = tape.leaf(table);
  NodeId g = tape.gather_rows(nt, {2, 0, 2}, {{"k", 3}});
  CHECK(tape.value(g).at({0, 1}) == 6.0);
  CHECK(tape.value(g).at({1, 0}) == 1.0);

  Tensor w = random_tensor({{"k", 3}, {"d", 2}}, 12);
  NodeId loss = tape.einsum({g, tape.leaf(w)}, {});
  Tensor analytic = tape.backward(loss).at(nt);
  // Row 2 was gathered twice, so its adjoint accumulates both weights.
  CHECK(analytic.at({2, 0}) == doctest::Approx(w.at({0, 0}) + w.at({2, 0})));
  CHECK(analytic.at({1, 0}) == 0.0);

  CHECK_THROWS_AS(tape.gather_rows(nt, {3}, {{"k", 1}}), std::invalid_argument);
}

TEST_CASE("relu, scale, add, reshape, rename adjoints compose") {
  Tensor x = random_tensor({{"i", 2}, {"j", 3}}, 13);
  const double err = check_single_input(x, [](Tape& t, NodeId in) {
    NodeId r = t.relu(in);
    NodeId s = t.scale(r, 2.5);
    NodeId a = t.add(s, s);
    NodeId rs = t.reshape(a, {{"f", 6}});
    return t.rename(rs, {"g"});
  });
  CHECK(err < 1e-6);
}

TEST_CASE("backward rejects non-scalar outputs and zero-fills unused leaves") {
  Tape tape;
  NodeId a = tape.leaf(random_tensor({{"i", 2}}, 14));
  NodeId b = tape.leaf(random_tensor({{"j", 3}}, 15));
  CHECK_THROWS_AS(tape.backward(a), std::invalid_argument);

  NodeId loss = tape.einsum({a}, {});
  auto grads = tape.backward(loss);
  REQUIRE(grads.count(b) == 1);
  for (double v : grads.at(b).data()) CHECK(v == 0.0);
  for (double v : grads.at(a).data()) CHECK(v == 1.0);
}
