#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "temp_path.hpp"
#include "vmask/models.hpp"

using namespace vmask;
using namespace vmask::models;

namespace {

corpus::Vocab toy_vocab() {
  return corpus::build_vocab({{"sun", "moon", "star", "sky", "sun", "moon"}}, 0);
}

corpus::Example make_example(const std::vector<int>& ids, int true_length, int label = 0) {
  corpus::Example ex;
  ex.token_ids = ids;
  ex.true_length = true_length;
  ex.label = label;
  return ex;
}

ClassifierSpec small_cnn(int classes = 2) {
  ClassifierSpec spec;
  spec.kind = HeadKind::cnn;
  spec.embed_dim = 6;
  spec.filter_widths = {2, 3};
  spec.filters_per_width = 3;
  spec.num_classes = classes;
  return spec;
}

ClassifierSpec small_boe(int classes = 2) {
  ClassifierSpec spec;
  spec.kind = HeadKind::boe;
  spec.embed_dim = 6;
  spec.hidden = 5;
  spec.num_classes = classes;
  return spec;
}

}  // namespace

TEST_CASE("forward determinism in infer mode") {
  corpus::Vocab v = toy_vocab();
  for (Strategy s : {Strategy::base, Strategy::vmask, Strategy::l2x, Strategy::iba}) {
    Model m(small_cnn(), s, v.size(), 7);
    corpus::Example ex = make_example({2, 3, 4, 0, 0, 0}, 3);
    auto f1 = m.forward({ex}, Mode::infer, nullptr);
    auto f2 = m.forward({ex}, Mode::infer, nullptr);
    CHECK(f1.logits.data() == f2.logits.data());
  }
}

TEST_CASE("pad region content does not affect outputs") {
  corpus::Vocab v = toy_vocab();
  for (auto spec : {small_cnn(), small_boe()}) {
    for (Strategy s : {Strategy::base, Strategy::vmask, Strategy::iba}) {
      Model m(spec, s, v.size(), 11);
      corpus::Example a = make_example({2, 3, 4, 0, 0, 0}, 3);
      corpus::Example b = make_example({2, 3, 4, 5, 5, 5}, 3);  // junk beyond true_length
      CHECK(m.forward({a}, Mode::infer, nullptr).logits.data() ==
            m.forward({b}, Mode::infer, nullptr).logits.data());
    }
  }
}

TEST_CASE("all-pad example is rejected") {
  corpus::Vocab v = toy_vocab();
  Model m(small_boe(), Strategy::base, v.size(), 3);
  corpus::Example ex = make_example({0, 0, 0}, 0);
  CHECK_THROWS_AS(m.forward({ex}, Mode::infer, nullptr), std::invalid_argument);
}

TEST_CASE("vocab mismatch is an error") {
  corpus::Vocab v = toy_vocab();
  Model m(small_boe(), Strategy::base, v.size(), 3);
  corpus::Example ex = make_example({v.size() + 4, 2}, 2);
  CHECK_THROWS_AS(m.forward({ex}, Mode::infer, nullptr), std::invalid_argument);
}

TEST_CASE("vmask infer logits equal a plain forward on pre-scaled embeddings") {
  corpus::Vocab v = toy_vocab();
  const uint64_t seed = 21;
  ClassifierSpec spec = small_cnn();
  Model masked(spec, Strategy::vmask, v.size(), seed);
  Model plain(spec, Strategy::base, v.size(), seed);
  // same seed, same registration order: embedding and head match bitwise
  CHECK(masked.embedding().data() == plain.embedding().data());
  CHECK(masked.param("cnn.w_out").data() == plain.param("cnn.w_out").data());

  corpus::Example ex = make_example({2, 4, 3, 5, 0, 0}, 4);

  // per-token expectations from the mask net
  tg::Tensor emb = tg::embedding_lookup(masked.embedding(), {2, 4, 3, 5});
  tg::Tensor probs = mask::mask_probs(masked.mask_net(), emb);

  // pre-scale the plain model's table rows by E[R] per token id
  tg::Tensor scaled({v.size(), spec.embed_dim}, masked.embedding().data());
  const std::vector<int> ids = {2, 4, 3, 5};
  for (size_t t = 0; t < ids.size(); ++t) {
    for (int j = 0; j < spec.embed_dim; ++j) scaled(ids[t], j) *= probs[t];
  }
  plain.set_embedding(scaled);

  auto masked_logits = masked.forward({ex}, Mode::infer, nullptr).logits;
  auto plain_logits = plain.forward({ex}, Mode::infer, nullptr).logits;
  CHECK(masked_logits.data() == plain_logits.data());
}

TEST_CASE("predict_proba") {
  corpus::Vocab v = toy_vocab();
  Model m(small_cnn(3), Strategy::base, v.size(), 13);
  corpus::Example ex = make_example({2, 3, 4, 5, 0}, 4);
  auto p = m.predict_proba(ex);
  double total = 0.0;
  for (double x : p) total += x;
  CHECK(std::abs(total - 1.0) <= 1e-12);

  CHECK(softmax({1.3, 1.3}) == std::vector<double>{0.5, 0.5});
  auto a = softmax({0.2, -0.4, 1.0});
  auto b = softmax({0.2 + 5.0, -0.4 + 5.0, 1.0 + 5.0});
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("boe forward on a one-token sentence is the head on that embedding") {
  corpus::Vocab v = toy_vocab();
  ClassifierSpec spec = small_boe();
  Model m(spec, Strategy::base, v.size(), 17);
  corpus::Example ex = make_example({3, 0, 0, 0}, 1);
  auto logits = m.forward({ex}, Mode::infer, nullptr).logits;

  tg::Tensor emb = tg::embedding_lookup(m.embedding(), {3});
  tg::Tensor pooled = tg::scale(tg::matmul(tg::Tensor::full({1, 1}, 1.0), emb), 1.0);
  tg::Tensor hidden = tg::tanh_(tg::add(tg::matmul(pooled, m.param("boe.w1")), m.param("boe.b1")));
  tg::Tensor expect = tg::add(tg::matmul(hidden, m.param("boe.w2")), m.param("boe.b2"));
  for (size_t k = 0; k < expect.size(); ++k) {
    CHECK(logits.data()[k] == doctest::Approx(expect.data()[k]).epsilon(1e-15));
  }
}

TEST_CASE("keep mask zeroes tokens") {
  corpus::Vocab v = toy_vocab();
  Model m(small_boe(), Strategy::base, v.size(), 19);
  corpus::Example full = make_example({2, 3, 0, 0}, 2);

  ForwardOptions opts;
  std::vector<double> keep = {1.0, 0.0};
  opts.keep = &keep;
  auto kept = m.forward_one(full, Mode::infer, nullptr, opts).logits;

  // the same prediction as a sentence whose second embedding is zeroed; with
  // boe mean over n=2 that equals looking up only token 2 and halving
  tg::Tensor emb = tg::embedding_lookup(m.embedding(), {2});
  tg::Tensor pooled = tg::scale(emb, 0.5);
  tg::Tensor hidden = tg::tanh_(tg::add(tg::matmul(pooled, m.param("boe.w1")), m.param("boe.b1")));
  tg::Tensor expect = tg::add(tg::matmul(hidden, m.param("boe.w2")), m.param("boe.b2"));
  for (size_t k = 0; k < expect.size(); ++k) {
    CHECK(kept.data()[k] == doctest::Approx(expect.data()[k]).epsilon(1e-12));
  }
}

TEST_CASE("train mode forward produces aux mask state") {
  corpus::Vocab v = toy_vocab();
  Model m(small_cnn(), Strategy::vmask, v.size(), 23);
  corpus::Example ex = make_example({2, 3, 4, 0}, 3);
  Rng rng(1);
  ForwardOptions opts;
  opts.tau = 0.5;
  auto fwd = m.forward({ex, ex}, Mode::train, &rng, opts);
  REQUIRE(fwd.mask_probs.size() == 2);
  CHECK(fwd.mask_probs[0].size() == 3);
  // same word types -> same probabilities, independent samples
  CHECK(fwd.mask_probs[0].data() == fwd.mask_probs[1].data());

  CHECK_THROWS_AS(m.forward({ex}, Mode::train, nullptr), std::invalid_argument);
}

TEST_CASE("load pretrained embeddings") {
  corpus::Vocab v = toy_vocab();
  testutil::TempFile f("3 4\nmoon 1 2 3 4\nnova 9 9 9 9\nsun -1 -2 -3 -4\n");
  PretrainedLoad load = load_pretrained_embeddings(f.path, v, 4, 99);
  CHECK(load.coverage == 2);  // moon and sun; nova not in vocab

  const int moon = v.id_of("moon");
  CHECK(load.table(moon, 0) == 1.0);
  CHECK(load.table(moon, 3) == 4.0);
  const int sun = v.id_of("sun");
  CHECK(load.table(sun, 0) == -1.0);

  // pad row zero
  for (int j = 0; j < 4; ++j) CHECK(load.table(corpus::kPadId, j) == 0.0);

  // missing tokens keep their uniform init, bounded by 0.1
  const int star = v.id_of("star");
  for (int j = 0; j < 4; ++j) CHECK(std::abs(load.table(star, j)) <= 0.1);

  CHECK_THROWS_AS(load_pretrained_embeddings(f.path, v, 5, 99), std::runtime_error);
}

TEST_CASE("iba stats recorded as frozen params") {
  corpus::Vocab v = toy_vocab();
  Model m(small_cnn(), Strategy::iba, v.size(), 29);
  auto [mu, sigma] = baselines::embedding_stats(m.embedding());
  CHECK(m.iba_mu() == mu);
  CHECK(m.iba_sigma() == sigma);
  for (const NamedParam& p : m.params()) {
    if (p.name == "iba.mu" || p.name == "iba.sigma") CHECK(p.frozen);
  }
}
