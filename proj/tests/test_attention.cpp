#include <doctest.h>

#include <cmath>

#include "gwn/attention.hpp"
#include "gwn/grad_check.hpp"
#include "gwn/rng.hpp"
#include "test_util.hpp"

using namespace gwn;
using gwn::test::random_tensor;

namespace {

ParamStore attention_store(int common, int heads, int ffn, std::uint64_t seed) {
  Rng rng(seed);
  ParamStore store;
  add_attention_params(store, common, heads, ffn, rng);
  return store;
}

Tensor forward_output(const ParamStore& store, int heads, const Tensor& x) {
  Tape t;
  auto nodes = bind_params(t, store);
  AttentionNodes attn = bind_attention(store, nodes, heads);
  return t.value(attention_forward(t, t.input(x), attn).output);
}

}  // namespace

TEST_SUITE("attention") {

TEST_CASE("scaled attention: worked two-modality example") {
  Tape t;
  NodeId q = t.input(Tensor::matrix({{1}, {0}}));
  NodeId v = t.input(Tensor::matrix({{2}, {4}}));
  auto [context, scores] = scaled_attention(t, q, q, v);
  const Tensor& s = t.value(scores);
  CHECK(s.at(0, 0) == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(s.at(0, 1) == doctest::Approx(0.2689).epsilon(1e-4));
  CHECK(s.at(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.at(1, 1) == doctest::Approx(0.5).epsilon(1e-12));
  const Tensor& c = t.value(context);
  CHECK(c.at(0, 0) == doctest::Approx(2.5379).epsilon(1e-4));
  CHECK(c.at(1, 0) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("scaled attention: zero queries give uniform scores and column means") {
  Rng rng(4);
  Tape t;
  NodeId z = t.input(Tensor::zeros({3, 5}));
  Tensor values = random_tensor({3, 5}, rng);
  auto [context, scores] = scaled_attention(t, z, z, t.input(values));
  const Tensor& s = t.value(scores);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(s.at(i, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  const Tensor& c = t.value(context);
  for (int j = 0; j < 5; ++j) {
    const double mean = (values.at(0, j) + values.at(1, j) + values.at(2, j)) / 3.0;
    CHECK(c.at(0, j) == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("multi-head: single head with identity output projection") {
  ParamStore store = attention_store(4, 1, 4, 7);
  store.set("attn.WO", Tensor::identity(4));
  Rng rng(8);
  Tensor x = random_tensor({2, 4}, rng);

  Tape t;
  auto nodes = bind_params(t, store);
  AttentionNodes attn = bind_attention(store, nodes, 1);
  auto [merged, scores] = multi_head(t, t.input(x), attn);

  Tape t2;
  NodeId xin = t2.input(x);
  NodeId q = t2.matmul(xin, t2.input(store.at("attn.head0.WQ")));
  NodeId k = t2.matmul(xin, t2.input(store.at("attn.head0.WK")));
  NodeId v = t2.matmul(xin, t2.input(store.at("attn.head0.WV")));
  auto [context, s2] = scaled_attention(t2, q, k, v);
  CHECK(gwn::test::bitwise_equal(t.value(merged), t2.value(context)));
}

TEST_CASE("multi-head: zero output projection annihilates") {
  ParamStore store = attention_store(4, 2, 4, 7);
  store.set("attn.WO", Tensor::zeros({8, 4}));
  Rng rng(9);
  Tape t;
  auto nodes = bind_params(t, store);
  auto [merged, scores] = multi_head(t, t.input(random_tensor({2, 4}, rng)), bind_attention(store, nodes, 2));
  CHECK(t.value(merged) == Tensor::zeros({2, 4}));
  CHECK(scores.size() == 2);
}

TEST_CASE("multi-head: shapes at working size") {
  ParamStore store = attention_store(32, 4, 64, 1);
  Rng rng(2);
  Tape t;
  auto nodes = bind_params(t, store);
  auto [out, scores] = multi_head(t, t.input(random_tensor({2, 32}, rng)), bind_attention(store, nodes, 4));
  CHECK(t.value(out).shape() == std::vector<int>{2, 32});
  CHECK(scores.size() == 4);
  for (NodeId s : scores) CHECK(t.value(s).shape() == std::vector<int>{2, 2});
}

TEST_CASE("attention forward: zero FFN reduces to stacked layer norms") {
  ParamStore store = attention_store(4, 2, 6, 3);
  store.set("attn.ffn.W1", Tensor::zeros({4, 6}));
  store.set("attn.ffn.W2", Tensor::zeros({6, 4}));
  Rng rng(12);
  Tensor x = random_tensor({2, 4}, rng);

  Tape t;
  auto nodes = bind_params(t, store);
  AttentionNodes attn = bind_attention(store, nodes, 2);
  NodeId xin = t.input(x);
  AttentionStep step = attention_forward(t, xin, attn);

  auto [merged, scores] = multi_head(t, xin, attn);
  NodeId z = t.layer_norm(t.add(merged, xin), attn.ln1_gain, attn.ln1_bias);
  NodeId expected = t.layer_norm(z, attn.ln2_gain, attn.ln2_bias);
  for (std::size_t i = 0; i < t.value(expected).numel(); ++i)
    CHECK(t.value(step.output).data()[i] == doctest::Approx(t.value(expected).data()[i]).epsilon(1e-12));
}

TEST_CASE("attention forward: stateless across calls and timesteps") {
  ParamStore store = attention_store(6, 2, 8, 5);
  Rng rng(6);
  Tensor x = random_tensor({2, 6}, rng);
  CHECK(gwn::test::bitwise_equal(forward_output(store, 2, x), forward_output(store, 2, x)));

  Tape t;
  auto nodes = bind_params(t, store);
  AttentionNodes attn = bind_attention(store, nodes, 2);
  std::vector<NodeId> seq = {t.input(x), t.input(x)};
  auto steps = run_attention_sequence(t, seq, attn);
  CHECK(gwn::test::bitwise_equal(t.value(steps[0].output), t.value(steps[1].output)));
  CHECK(gwn::test::bitwise_equal(t.value(steps[0].scores[0]), t.value(steps[1].scores[0])));
}

TEST_CASE("attention sequence: trace size is T x K") {
  ParamStore store = attention_store(8, 4, 8, 15);
  Rng rng(15);
  Tape t;
  auto nodes = bind_params(t, store);
  AttentionNodes attn = bind_attention(store, nodes, 4);
  std::vector<NodeId> seq;
  for (int i = 0; i < 10; ++i) seq.push_back(t.input(random_tensor({2, 8}, rng)));
  auto steps = run_attention_sequence(t, seq, attn);
  std::size_t matrices = 0;
  for (const auto& step : steps) matrices += step.scores.size();
  CHECK(matrices == 40);
  for (const auto& step : steps)
    for (NodeId s : step.scores) CHECK(t.value(s).shape() == std::vector<int>{2, 2});
}

TEST_CASE("score matrices are row-stochastic") {
  ParamStore store = attention_store(8, 3, 8, 19);
  Rng rng(19);
  for (int trial = 0; trial < 200; ++trial) {
    Tape t;
    auto nodes = bind_params(t, store);
    AttentionNodes attn = bind_attention(store, nodes, 3);
    AttentionStep step = attention_forward(t, t.input(random_tensor({3, 8}, rng, 4.0)), attn);
    for (NodeId sid : step.scores) {
      const Tensor& s = t.value(sid);
      for (int i = 0; i < s.rows(); ++i) {
        double row = 0.0;
        for (int j = 0; j < s.cols(); ++j) {
          CHECK(s.at(i, j) >= 0.0);
          row += s.at(i, j);
        }
        CHECK(std::abs(row - 1.0) < 1e-9);
      }
    }
  }
}

TEST_CASE("row-permutation equivariance") {
  ParamStore store = attention_store(6, 2, 8, 23);
  Rng rng(23);
  const int m = 3;
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = random_tensor({m, 6}, rng, 2.0);
    std::vector<int> perm = {0, 1, 2};
    rng.shuffle(perm);
    Tensor px = Tensor::zeros({m, 6});
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < 6; ++j) px.at(i, j) = x.at(perm[static_cast<std::size_t>(i)], j);

    Tape t1, t2;
    auto n1 = bind_params(t1, store);
    auto n2 = bind_params(t2, store);
    AttentionStep s1 = attention_forward(t1, t1.input(x), bind_attention(store, n1, 2));
    AttentionStep s2 = attention_forward(t2, t2.input(px), bind_attention(store, n2, 2));

    const Tensor& y = t1.value(s1.output);
    const Tensor& py = t2.value(s2.output);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < 6; ++j)
        CHECK(std::abs(py.at(i, j) - y.at(perm[static_cast<std::size_t>(i)], j)) < 1e-9);

    // scores transform as P S P^T
    for (std::size_t k = 0; k < s1.scores.size(); ++k) {
      const Tensor& s = t1.value(s1.scores[k]);
      const Tensor& ps = t2.value(s2.scores[k]);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
          CHECK(std::abs(ps.at(i, j) -
                         s.at(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)])) < 1e-9);
    }
  }
}

TEST_CASE("gradients through the full attention stack") {
  Rng rng(29);
  ParamStore store = attention_store(4, 2, 5, 31);
  Tensor x = random_tensor({2, 4}, rng);
  Tensor weights = random_tensor({2, 4}, rng, 2.0);
  ScalarFn f = [&](const ParamStore& p, ParamGrads* grads) {
    Tape t;
    auto nodes = bind_params(t, p);
    AttentionStep step = attention_forward(t, t.input(x), bind_attention(p, nodes, 2));
    NodeId loss = t.sum(t.hadamard(step.output, t.input(weights)));
    if (grads) *grads = t.backward(loss, nodes);
    return t.value(loss).data()[0];
  };
  CHECK(finite_diff_check(f, store).worst < 1e-4);
}

TEST_CASE("trace CSV round trip") {
  AttentionTrace trace;
  trace.instance_id = "inst7";
  trace.heads = 2;
  trace.scores = {{Tensor::matrix({{0.9, 0.1}, {0.4, 0.6}}), Tensor::matrix({{0.5, 0.5}, {0.25, 0.75}})},
                  {Tensor::matrix({{1.0, 0.0}, {0.0, 1.0}}), Tensor::matrix({{0.3, 0.7}, {0.8, 0.2}})}};
  trace.valid = {0, 1};
  std::string csv = traces_to_csv(std::vector<AttentionTrace>{trace});
  auto parsed = traces_from_csv(csv);
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0].instance_id == "inst7");
  CHECK(parsed[0].heads == 2);
  CHECK(parsed[0].valid == std::vector<std::uint8_t>{0, 1});
  CHECK(gwn::test::bitwise_equal(parsed[0].scores[1][1], trace.scores[1][1]));
}

}  // TEST_SUITE
