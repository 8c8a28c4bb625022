#include <doctest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "slukit/decoders.hpp"
#include "slukit/encoders.hpp"
#include "slukit/error.hpp"

using namespace slukit;
using namespace slukit::nn;
using slukit::testing::gradcheck;
using slukit::testing::random_tensor;
using slukit::testing::weighted_sum;

namespace {

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

HiddenData random_hidden(std::size_t batch, std::size_t steps, std::size_t width,
                         std::vector<std::size_t> lengths, std::mt19937_64& rng) {
  return {random_tensor({batch, steps, width}, rng), random_tensor({batch, steps, width}, rng),
          mask_from_lengths(lengths, steps), {}};
}

void zero(Tensor t) {
  for (double& v : t.mutable_values()) v = 0.0;
}

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

TEST_CASE("identity interaction") {
  std::mt19937_64 rng(1);
  const auto h = random_hidden(2, 3, 4, {3, 2}, rng);
  const IdentityInteraction id;
  const auto once = id.apply(h);
  const auto twice = id.apply(once);
  CHECK(vals(once.slot_hidden) == vals(h.slot_hidden));
  CHECK(vals(once.intent_hidden) == vals(h.intent_hidden));
  CHECK(once.mask == h.mask);
  CHECK(vals(twice.slot_hidden) == vals(once.slot_hidden));
}

TEST_CASE("single flow interaction") {
  std::mt19937_64 rng(2);
  auto h = random_hidden(2, 3, 4, {3, 1}, rng);
  SingleFlowInteraction sf(4, 2, rng);
  CHECK_THROWS_AS(sf.apply(h), ContractError);

  h.aux[kIntentTokenProbs] = ad::softmax_rows(random_tensor({2, 3, 2}, rng));
  const auto out = sf.apply(h);
  CHECK(vals(out.intent_hidden) == vals(h.intent_hidden));
  CHECK(out.slot_hidden.shape() == h.slot_hidden.shape());
  CHECK(out.mask == h.mask);

  SUBCASE("zero intent block leaves a linear map of the slot stream") {
    auto w = sf.projection().weight().mutable_values();
    for (std::size_t i = 4 * 4; i < w.size(); ++i) w[i] = 0.0;
    const Linear& proj = sf.projection();
    const Tensor w_slot = ad::slice_rows(proj.params()[0].second, 0, 4);
    const Tensor expect = ad::add_bias(
        ad::matmul(flatten_steps(h.slot_hidden), w_slot), proj.params()[1].second);
    const auto got = vals(sf.apply(h).slot_hidden);
    const auto want = vals(expect);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-14));
  }

  SUBCASE("permuting intent classes with the projection rows changes nothing") {
    HiddenData swapped = h;
    const auto p = vals(h.aux.at(kIntentTokenProbs));
    std::vector<double> q(p.size());
    for (std::size_t i = 0; i < p.size(); i += 2) {
      q[i] = p[i + 1];
      q[i + 1] = p[i];
    }
    swapped.aux[kIntentTokenProbs] = Tensor::from({2, 3, 2}, q);
    std::mt19937_64 same(9);
    SingleFlowInteraction a(4, 2, same);
    SingleFlowInteraction b = a;
    b.projection() = Linear(6, 4, same);
    auto wa = a.projection().weight().values();
    auto wb = b.projection().weight().mutable_values();
    std::copy(wa.begin(), wa.end(), wb.begin());
    for (std::size_t c = 0; c < 4; ++c) std::swap(wb[4 * 4 + c], wb[5 * 4 + c]);
    const auto ra = vals(a.apply(h).slot_hidden);
    const auto rb = vals(b.apply(swapped).slot_hidden);
    for (std::size_t i = 0; i < ra.size(); ++i) CHECK(ra[i] == doctest::Approx(rb[i]).epsilon(1e-14));
  }
}

TEST_CASE("slot gated interaction") {
  std::mt19937_64 rng(3);
  const auto h = random_hidden(2, 4, 3, {4, 2}, rng);
  SlotGatedInteraction sg(3, 3, rng);
  const auto g = sg.gate(h);
  CHECK(g.shape() == ad::Shape{2});

  const auto out = sg.apply(h);
  const auto s = vals(h.slot_hidden), o = vals(out.slot_hidden);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 12; ++i)
      CHECK(o[b * 12 + i] == doctest::Approx(s[b * 12 + i] * (1.0 + g.values()[b])).epsilon(1e-14));
  CHECK(vals(out.intent_hidden) == vals(h.intent_hidden));

  auto r = gradcheck(
      [&](const auto&) { return weighted_sum(sg.apply(h).slot_hidden, 4); },
      {sg.w(), sg.v(), h.slot_hidden, h.intent_hidden});
  CHECK(r.max_relative_error < 1e-4);

  zero(sg.v());
  CHECK(vals(sg.apply(h).slot_hidden) == vals(h.slot_hidden));
}

TEST_CASE("bidirectional interaction") {
  std::mt19937_64 rng(4);
  const auto h = random_hidden(2, 3, 4, {3, 2}, rng);
  BidirectionalInteraction bi(4, 3, rng);
  const auto out = bi.apply(h);
  CHECK(out.slot_hidden.shape() == h.slot_hidden.shape());
  CHECK(out.intent_hidden.shape() == h.intent_hidden.shape());
  CHECK(vals(out.slot_hidden) != vals(h.slot_hidden));
  CHECK(vals(out.intent_hidden) != vals(h.intent_hidden));

  SUBCASE("swapping streams and blocks swaps the outputs") {
    BidirectionalInteraction mirrored(bi.slot_block(), bi.intent_block());
    const HiddenData flipped{h.slot_hidden, h.intent_hidden, h.mask, {}};
    const auto m = mirrored.apply(flipped);
    CHECK(vals(m.intent_hidden) == vals(out.slot_hidden));
    CHECK(vals(m.slot_hidden) == vals(out.intent_hidden));
  }

  SUBCASE("zero value projections give the residual identity") {
    for (auto* block : {&bi.intent_block(), &bi.slot_block()}) {
      zero(block->value.weight());
      zero(block->value.bias());
    }
    const auto z = bi.apply(h);
    CHECK(vals(z.slot_hidden) == vals(h.slot_hidden));
    CHECK(vals(z.intent_hidden) == vals(h.intent_hidden));
  }

  SUBCASE("fully masked row") {
    auto dead = h;
    dead.mask = mask_from_lengths(std::vector<std::size_t>{3, 0}, 3);
    CHECK_THROWS_AS(bi.apply(dead), DegenerateError);
  }

  SUBCASE("gradients") {
    std::vector<Tensor> inputs{h.intent_hidden, h.slot_hidden};
    for (const auto& p : bi.params()) inputs.push_back(p.second);
    auto r = gradcheck([&](const auto&) {
      const auto o = bi.apply(h);
      return ad::add(weighted_sum(o.intent_hidden, 1), weighted_sum(o.slot_hidden, 2));
    }, inputs);
    CHECK(r.max_relative_error < 1e-4);
  }
}

TEST_CASE("mlp classifier") {
  std::mt19937_64 rng(5);
  MlpClassifier mlp(3, 5, 4, ad::Activation::kRelu, rng);
  const Tensor x = random_tensor({1, 4, 3}, rng);
  const auto logits = vals(mlp.classify({x}));
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  std::vector<double> px;
  for (auto p : perm)
    for (std::size_t j = 0; j < 3; ++j) px.push_back(x.values()[p * 3 + j]);
  const auto plogits = vals(mlp.classify({Tensor::from({1, 4, 3}, px)}));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < 4; ++k) CHECK(plogits[i * 4 + k] == logits[perm[i] * 4 + k]);

  std::vector<Tensor> inputs{x};
  for (const auto& p : mlp.params()) inputs.push_back(p.second);
  std::mt19937_64 r2(6);
  MlpClassifier smooth(3, 5, 4, ad::Activation::kTanh, r2);
  inputs = {x};
  for (const auto& p : smooth.params()) inputs.push_back(p.second);
  auto r = gradcheck([&](const auto& in) { return weighted_sum(smooth.classify({in[0]}), 7); },
                     inputs);
  CHECK(r.max_relative_error < 1e-4);

  zero(mlp.first().weight());
  zero(mlp.second().weight());
  auto b = mlp.second().bias().mutable_values();
  for (std::size_t k = 0; k < 4; ++k) b[k] = static_cast<double>(k) - 1.5;
  const auto flat = vals(mlp.classify({x}));
  for (std::size_t i = 0; i < flat.size(); ++i)
    CHECK(flat[i] == static_cast<double>(i % 4) - 1.5);
}

TEST_CASE("lstm classifier") {
  std::mt19937_64 rng(7);
  LstmClassifier clf(3, 4, 5, 2, rng);
  const ad::Mask mask(2 * 4, 1);

  SUBCASE("teacher forcing needs gold") {
    ClassifyInput in{random_tensor({2, 4, 3}, rng), &mask, DecodeMode::kTeacherForced, {}};
    CHECK_THROWS_AS(clf.classify(in), ContractError);
  }

  SUBCASE("single step has no history") {
    const ad::Mask one(2, 1);
    const Tensor x = random_tensor({2, 1, 3}, rng);
    const std::vector<int> gold{3, 1};
    const auto a = vals(clf.classify({x, &one, DecodeMode::kAutoregressive, {}}));
    const auto b = vals(clf.classify({x, &one, DecodeMode::kTeacherForced, gold}));
    CHECK(a == b);
  }

  SUBCASE("modes agree when gold equals the model's own argmax") {
    const Tensor x = random_tensor({2, 4, 3}, rng);
    const Tensor auto_logits = clf.classify({x, &mask, DecodeMode::kAutoregressive, {}});
    const auto gold = argmax_rows(auto_logits);
    const auto forced = clf.classify({x, &mask, DecodeMode::kTeacherForced, gold});
    CHECK(vals(forced) == vals(auto_logits));
  }

  SUBCASE("changing gold at t only moves later positions") {
    const Tensor x = random_tensor({1, 4, 3}, rng);
    const ad::Mask m(4, 1);
    std::vector<int> gold{0, 1, 2, 3};
    const auto a = vals(clf.classify({x, &m, DecodeMode::kTeacherForced, gold}));
    gold[1] = 4;
    const auto b = vals(clf.classify({x, &m, DecodeMode::kTeacherForced, gold}));
    for (std::size_t i = 0; i < 10; ++i) CHECK(a[i] == b[i]);
    bool moved = false;
    for (std::size_t i = 10; i < 20; ++i) moved = moved || a[i] != b[i];
    CHECK(moved);
  }

  SUBCASE("autoregressive logits ignore later hidden inputs") {
    Tensor x = random_tensor({1, 4, 3}, rng);
    const ad::Mask m(4, 1);
    const auto a = vals(clf.classify({x, &m, DecodeMode::kAutoregressive, {}}));
    auto xv = x.mutable_values();
    for (std::size_t i = 6; i < 12; ++i) xv[i] += 2.0;
    const auto b = vals(clf.classify({x, &m, DecodeMode::kAutoregressive, {}}));
    for (std::size_t i = 0; i < 10; ++i) CHECK(a[i] == b[i]);
  }

  SUBCASE("gradients under teacher forcing") {
    const Tensor x = random_tensor({2, 3, 3}, rng);
    const ad::Mask m(6, 1);
    const std::vector<int> gold{0, 4, 2, 1, -100, 3};
    std::vector<Tensor> inputs{x};
    for (const auto& p : clf.params()) inputs.push_back(p.second);
    auto r = gradcheck([&](const auto& in) {
      return weighted_sum(clf.classify({in[0], &m, DecodeMode::kTeacherForced, gold}), 8);
    }, inputs);
    CHECK(r.max_relative_error < 1e-4);
  }
}

TEST_CASE("token intent vote") {
  const ad::Mask all(3, 1);
  // votes A, A, B
  CHECK(token_intent_vote(Tensor::from({1, 3, 2}, {2, 0, 1, 0, 0, 3}), all) == std::vector<int>{0});
  const ad::Mask one(1, 1);
  CHECK(token_intent_vote(Tensor::from({1, 1, 3}, {0, 0.5, -1}), one) == std::vector<int>{1});

  // Two weak votes for A against two confident votes for B. Mean P(B) is
  // (2·σ(-0.1) + 2·σ(2)) / 4 ≈ 0.678 > 0.5.
  const ad::Mask four(4, 1);
  CHECK(token_intent_vote(Tensor::from({1, 4, 2}, {0.1, 0, 0.1, 0, 0, 2, 0, 2}), four) ==
        std::vector<int>{1});
  // Symmetric tie on votes and means goes to the lower id.
  const ad::Mask two(2, 1);
  CHECK(token_intent_vote(Tensor::from({1, 2, 2}, {0, 1, 1, 0}), two) == std::vector<int>{0});
  // Masked tokens do not vote.
  const ad::Mask partial{1, 0, 0};
  CHECK(token_intent_vote(Tensor::from({1, 3, 2}, {0, 1, 5, 0, 5, 0}), partial) ==
        std::vector<int>{1});
  const ad::Mask none(2, 0);
  CHECK_THROWS_AS(token_intent_vote(Tensor::from({1, 2, 2}, {0, 1, 1, 0}), none), ContractError);
}

TEST_CASE("multi-intent decoding") {
  const Tensor s = Tensor::from({1, 3}, {logit(0.7), logit(0.4), logit(0.51)});
  CHECK(decode_multi_intent(s, 0.5) == std::vector<std::vector<int>>{{0, 2}});
  const Tensor low = Tensor::from({1, 3}, {logit(0.1), logit(0.3), logit(0.2)});
  CHECK(decode_multi_intent(low, 0.5) == std::vector<std::vector<int>>{{1}});
  CHECK(decode_multi_intent(low, 0.0) == std::vector<std::vector<int>>{{0, 1, 2}});
}
