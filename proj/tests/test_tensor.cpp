#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "vmask/rng.hpp"
#include "vmask/tensor.hpp"

using namespace vmask;
using namespace vmask::tg;

namespace {

Tensor randt(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return Tensor::uniform(std::move(shape), lo, hi, rng);
}

}  // namespace

TEST_CASE("matmul values") {
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor c = matmul(eye, a);
  CHECK(c.data() == a.data());

  Tensor r({1, 2}, {1, 0});
  Tensor v({2, 1}, {0, 1});
  CHECK(matmul(r, v).item() == 0.0);

  CHECK_THROWS_AS(matmul(Tensor({2, 3}), Tensor({2, 3})), std::invalid_argument);
}

TEST_CASE("matmul gradients vs finite differences") {
  Rng rng(7);
  for (int it = 0; it < 50; ++it) {
    Tensor a = randt({3, 4}, rng);
    Tensor b = randt({4, 2}, rng);
    Tensor w = randt({3, 2}, rng);  // weights to make the loss non-trivial
    auto rep = gradcheck::check([&]() { return sum(mul(matmul(a, b), w)); }, {a, b});
    CHECK(rep.max_rel_err <= 1e-6);
  }
}

TEST_CASE("elementwise values") {
  Tensor z = Tensor::scalar(0.0);
  CHECK(sigmoid(z).item() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(relu(Tensor::scalar(-1.5)).item() == 0.0);
  {
    Tensor x = Tensor::scalar(-1.5);
    x.set_requires_grad(true);
    Tape tape;
    Tensor loss = sum(relu(x));
    tape.backward(loss);
    CHECK(x.grad()[0] == 0.0);
  }
  CHECK_THROWS_AS(log_(Tensor::scalar(0.0)), std::domain_error);
  CHECK_THROWS_AS(log_(Tensor::scalar(-2.0)), std::domain_error);
  CHECK_THROWS_AS(add(Tensor({2, 2}), Tensor({3})), std::invalid_argument);
}

TEST_CASE("elementwise and composed gradients") {
  Rng rng(11);
  for (int it = 0; it < 50; ++it) {
    Tensor x = randt({2, 3}, rng);
    Tensor w = randt({3, 3}, rng);
    Tensor b = randt({3}, rng);
    auto rep = gradcheck::check(
        [&]() { return mean(tanh_(add(matmul(x, w), b))); }, {x, w, b});
    CHECK(rep.max_rel_err <= 1e-6);

    Tensor u = randt({2, 3}, rng, 0.2, 2.0);
    Tensor v = randt({2, 3}, rng);
    auto rep2 = gradcheck::check(
        [&]() {
          return sum(add(mul(log_(u), v), sub(exp_(scale(v, 0.3)), sigmoid(neg(u)))));
        },
        {u, v});
    CHECK(rep2.max_rel_err <= 1e-6);
  }
}

TEST_CASE("broadcast vector over rows") {
  Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor v({3}, {10, 20, 30});
  Tensor s = add(a, v);
  CHECK(s(1, 2) == 36.0);
  Rng rng(3);
  for (int it = 0; it < 20; ++it) {
    Tensor x = randt({3, 4}, rng);
    Tensor b = randt({4}, rng);
    auto rep = gradcheck::check([&]() { return sum(mul(x, b)); }, {x, b});
    CHECK(rep.max_rel_err <= 1e-6);
  }
}

TEST_CASE("softmax rows") {
  Tensor a({1, 2}, {0, 0});
  Tensor s = softmax_rows(a);
  CHECK(s(0, 0) == doctest::Approx(0.5).epsilon(1e-15));

  Tensor big({1, 2}, {1000, 0});
  Tensor sb = softmax_rows(big);
  CHECK(sb(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sb(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::isfinite(sb(0, 0)));

  Rng rng(5);
  for (int it = 0; it < 50; ++it) {
    Tensor x = randt({2, 4}, rng);
    Tensor w = randt({2, 4}, rng);
    auto rep = gradcheck::check([&]() { return sum(mul(softmax_rows(x), w)); }, {x});
    CHECK(rep.max_rel_err <= 1e-6);
  }
}

TEST_CASE("cross entropy") {
  Tensor logits({1, 2}, {0.3, 0.3});
  CHECK(cross_entropy(logits, {0}).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // loss decreases monotonically as the correct-class margin grows
  double prev = 1e9;
  for (double margin = 0.0; margin < 8.0; margin += 1.0) {
    Tensor z({1, 2}, {margin, 0.0});
    const double l = cross_entropy(z, {0}).item();
    CHECK(l < prev);
    prev = l;
  }

  CHECK_THROWS_AS(cross_entropy(Tensor({1, 2}), {2}), std::invalid_argument);

  Rng rng(13);
  for (int it = 0; it < 50; ++it) {
    Tensor z = randt({3, 4}, rng);
    std::vector<int> labels = {rng.uniform_int(4), rng.uniform_int(4), rng.uniform_int(4)};
    auto rep = gradcheck::check([&]() { return cross_entropy(z, labels); }, {z});
    CHECK(rep.max_rel_err <= 1e-6);
  }
}

TEST_CASE("cross entropy gradient equals softmax minus onehot") {
  Tensor z({2, 3}, {0.1, -0.4, 1.2, 0.0, 0.0, 0.0});
  z.set_requires_grad(true);
  std::vector<int> labels = {2, 0};
  {
    Tape tape;
    Tensor loss = cross_entropy(z, labels);
    tape.backward(loss);
  }
  Tensor sm = softmax_rows(z);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) {
      const double expect = (sm(i, j) - (labels[i] == j ? 1.0 : 0.0)) / 2.0;
      CHECK(z.grad()[i * 3 + j] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("embedding lookup") {
  Tensor table({3, 2}, {0, 0, 1, 2, 3, 4});
  Tensor out = embedding_lookup(table, {0, 0});
  CHECK(out(0, 0) == out(1, 0));
  CHECK(out(0, 1) == out(1, 1));
  CHECK_THROWS_AS(embedding_lookup(table, {3}), std::invalid_argument);

  // scatter-add multiplicity
  table.set_requires_grad(true);
  table.zero_grad();
  {
    Tape tape;
    Tensor o = embedding_lookup(table, {1, 1, 2});
    tape.backward(sum(o));
  }
  CHECK(table.grad()[2] == 2.0);  // row 1 appears twice
  CHECK(table.grad()[4] == 1.0);
  table.set_requires_grad(false);

  Rng rng(17);
  for (int it = 0; it < 50; ++it) {
    Tensor t = randt({5, 3}, rng);
    std::vector<int> ids = {rng.uniform_int(5), rng.uniform_int(5), rng.uniform_int(5),
                            rng.uniform_int(5)};
    Tensor w = randt({4, 3}, rng);
    auto rep = gradcheck::check([&]() { return sum(mul(embedding_lookup(t, ids), w)); }, {t});
    CHECK(rep.max_rel_err <= 1e-6);
  }
}

TEST_CASE("conv1d maxpool") {
  // constant sequence + averaging filter: pooled value independent of length
  for (int l : {4, 7, 12}) {
    Tensor seq = Tensor::full({l, 2}, 0.5);
    Tensor filt = Tensor::full({1, 6}, 1.0 / 6.0);  // width 3, d 2
    Tensor bias({1});
    Tensor pooled = conv1d_maxpool(seq, filt, bias, 3);
    CHECK(pooled[0] == doctest::Approx(0.5).epsilon(1e-12));
  }

  // a filter matching a planted pattern routes gradient through that window
  Tensor seq({5, 1}, {0, 0, 9, 0, 0});
  Tensor filt({1, 2}, {1, 1});
  Tensor bias({1});
  seq.set_requires_grad(true);
  {
    Tape tape;
    Tensor pooled = conv1d_maxpool(seq, filt, bias, 2);
    CHECK(pooled[0] == 9.0);
    tape.backward(sum(pooled));
  }
  CHECK(seq.grad() == std::vector<double>{0, 1, 1, 0, 0});

  CHECK_THROWS_AS(conv1d_maxpool(Tensor({2, 3}), Tensor({1, 9}), Tensor({1}), 3),
                  std::invalid_argument);

  Rng rng(19);
  for (int it = 0; it < 50; ++it) {
    Tensor s = randt({6, 3}, rng);
    Tensor f = randt({4, 6}, rng);  // width 2
    Tensor b = randt({4}, rng);
    Tensor w = randt({4}, rng, 0.1, 1.0);
    auto rep = gradcheck::check([&]() { return sum(mul(conv1d_maxpool(s, f, b, 2), w)); },
                                {s, f, b});
    CHECK(rep.max_rel_err <= 1e-6);
  }
}

TEST_CASE("backward basics") {
  Tensor x({3}, {1, 2, 3});
  x.set_requires_grad(true);
  {
    Tape tape;
    Tensor loss = sum(x);
    tape.backward(loss);
  }
  CHECK(x.grad() == std::vector<double>{1, 1, 1});

  x.zero_grad();
  {
    Tape tape;
    Tensor loss = scale(sum(mul(x, x)), 0.0);
    tape.backward(loss);
  }
  CHECK(x.grad() == std::vector<double>{0, 0, 0});

  {
    Tape tape;
    Tensor v = add(x, x);
    CHECK_THROWS_AS(tape.backward(v), std::invalid_argument);  // non-scalar
  }
  {
    Tape tape;
    CHECK_THROWS_AS(tape.backward(Tensor::scalar(1.0)), std::invalid_argument);  // off-tape
  }
}

TEST_CASE("backward accumulates across calls") {
  Tensor x({2}, {3, 4});
  x.set_requires_grad(true);
  Tape tape;
  Tensor loss = sum(mul(x, x));
  tape.backward(loss);
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(12.0).epsilon(1e-15));  // 2 * (2*x)
  CHECK(x.grad()[1] == doctest::Approx(16.0).epsilon(1e-15));
}

TEST_CASE("backward linearity") {
  Rng rng(23);
  Tensor x = randt({4}, rng);
  const double alpha = 0.7, beta = -1.3;

  auto f = [&]() { return sum(mul(x, x)); };
  auto g = [&]() { return sum(sigmoid(x)); };

  x.set_requires_grad(true);
  x.zero_grad();
  {
    Tape tape;
    tape.backward(f());
  }
  std::vector<double> gf = x.grad();
  x.zero_grad();
  {
    Tape tape;
    tape.backward(g());
  }
  std::vector<double> gg = x.grad();
  x.zero_grad();
  {
    Tape tape;
    tape.backward(add(scale(f(), alpha), scale(g(), beta)));
  }
  for (size_t k = 0; k < x.size(); ++k) {
    CHECK(x.grad()[k] == doctest::Approx(alpha * gf[k] + beta * gg[k]).epsilon(1e-12));
  }
}

TEST_CASE("dropout") {
  Rng rng(29);
  Tensor x = randt({10}, rng);

  Rng r0(1);
  Tensor same = dropout(x, 0.0, r0, true);
  CHECK(same.data() == x.data());
  Tensor infer = dropout(x, 0.9, r0, false);
  CHECK(infer.data() == x.data());
  CHECK_THROWS_AS(dropout(x, 1.0, r0, true), std::invalid_argument);

  // empirical zero rate at rho=0.2 over 1e5 elements
  Tensor big = Tensor::full({100000}, 1.0);
  Rng r1(42);
  Tensor dropped = dropout(big, 0.2, r1, true);
  int zeros = 0;
  for (double v : dropped.data()) {
    if (v == 0.0) ++zeros;
  }
  const double rate = zeros / 1e5;
  CHECK(rate >= 0.195);
  CHECK(rate <= 0.205);

  // gradient with frozen mask (same seed every evaluation)
  for (int it = 0; it < 20; ++it) {
    Tensor y = randt({8}, rng);
    auto rep = gradcheck::check(
        [&]() {
          Rng r(123);
          return sum(mul(dropout(y, 0.3, r, true), y));
        },
        {y});
    CHECK(rep.max_rel_err <= 1e-6);
  }
}

TEST_CASE("structural ops gradients") {
  Rng rng(31);
  for (int it = 0; it < 50; ++it) {
    Tensor x = randt({3, 4}, rng);
    Tensor v = randt({3}, rng);
    auto rep = gradcheck::check([&]() { return sum(row_scale(x, v)); }, {x, v});
    CHECK(rep.max_rel_err <= 1e-6);

    Tensor a = randt({3, 4}, rng);
    Tensor b = randt({3, 4}, rng);
    auto rep2 = gradcheck::check([&]() { return mean(rows_dot(a, b)); }, {a, b});
    CHECK(rep2.max_rel_err <= 1e-6);

    Tensor m = randt({4, 3}, rng);
    auto rep3 = gradcheck::check(
        [&]() {
          Tensor c1 = column(m, 1);
          Tensor joined = concat_vec({c1, column(m, 0)});
          return sum(mul(as_row(joined), as_row(joined)));
        },
        {m});
    CHECK(rep3.max_rel_err <= 1e-6);

    Tensor p = randt({1, 3}, rng);
    Tensor q = randt({2, 3}, rng);
    auto rep4 = gradcheck::check(
        [&]() { return mean(mul(concat_rows({p, q}), concat_rows({p, q}))); }, {p, q});
    CHECK(rep4.max_rel_err <= 1e-6);

    Tensor cl = randt({5}, rng, -2.0, 2.0);
    auto rep5 = gradcheck::check([&]() { return sum(mul(clamp(cl, -0.9, 0.9), cl)); }, {cl});
    CHECK(rep5.max_rel_err <= 1e-6);
  }
}

TEST_CASE("determinism: identical inputs give bitwise identical results") {
  auto run = [](uint64_t seed) {
    Rng rng(seed);
    Tensor x = randt({4, 4}, rng);
    Tensor w = randt({4, 2}, rng);
    x.set_requires_grad(true);
    w.set_requires_grad(true);
    Tape tape;
    Tensor loss = cross_entropy(matmul(tanh_(x), w), {0, 1, 0, 1});
    tape.backward(loss);
    std::vector<double> out = {loss.item()};
    out.insert(out.end(), x.grad().begin(), x.grad().end());
    out.insert(out.end(), w.grad().begin(), w.grad().end());
    return out;
  };
  CHECK(run(99) == run(99));
}
