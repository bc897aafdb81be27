#include <cmath>

#include "doctest.h"
#include "support.hpp"

#include "bljust/errors.hpp"
#include "bljust/model.hpp"
#include "bljust/objectives.hpp"
#include "bljust/verify.hpp"

using namespace bljust;

namespace {

void set_identity(ParamVector& p, const DenseLayout& l) {
  auto v = p.mutable_values();
  for (std::size_t j = 0; j < l.out; ++j) {
    for (std::size_t k = 0; k < l.in; ++k) v[l.weight_offset + j * l.in + k] = j == k ? 1.0 : 0.0;
    v[l.bias_offset + j] = 0.0;
  }
}

}  // namespace

TEST_CASE("partition counts weights and biases per segment") {
  ModelSpec spec{3, {4, 2}, Activation::tanh, 5};
  auto p = spec.partition();
  CHECK(p.d_theta == 4 * 3 + 4 + 2 * 4 + 2);
  CHECK(p.d_phi == 5 * 2 + 5);
  CHECK(p.d_eta == 3 * 2 + 3);
  CHECK(spec.recon_dim() == 3);
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS((ModelSpec{0, {}, Activation::tanh, 2}).validate(), InvalidArgument);
  CHECK_THROWS_AS((ModelSpec{2, {}, Activation::tanh, 1}).validate(), InvalidArgument);
  CHECK_THROWS_AS((ModelSpec{2, {0}, Activation::tanh, 2}).validate(), InvalidArgument);
  CHECK_THROWS_AS(parse_activation("sigmoid"), InvalidArgument);
}

TEST_CASE("forward_backbone") {
  Rng rng(1);
  Matrix batch = test::random_matrix(5, 3, rng);
  SUBCASE("zero weights give zero features") {
    ModelSpec spec{3, {4}, Activation::identity, 2};
    ParamVector p(spec.partition());
    auto r = forward_backbone(spec, p, batch);
    for (double v : r.features.data) CHECK(v == 0.0);
  }
  SUBCASE("identity layer reproduces the batch") {
    ModelSpec spec{3, {3}, Activation::identity, 2};
    ParamVector p(spec.partition());
    set_identity(p, backbone_layout(spec)[0]);
    auto r = forward_backbone(spec, p, batch);
    CHECK(r.features.data == batch.data);
  }
  SUBCASE("shape mismatch") {
    ModelSpec spec{4, {3}, Activation::tanh, 2};
    ParamVector p(spec.partition());
    CHECK_THROWS_AS(forward_backbone(spec, p, batch), InvalidArgument);
    ModelSpec other{3, {5}, Activation::tanh, 2};
    CHECK_THROWS_AS(forward_backbone(other, p, batch), InvalidArgument);
  }
  SUBCASE("non-finite batch") {
    ModelSpec spec{3, {}, Activation::tanh, 2};
    ParamVector p(spec.partition());
    batch(0, 0) = std::nan("");
    CHECK_THROWS_AS(forward_backbone(spec, p, batch), InvalidArgument);
  }
}

TEST_CASE("heads") {
  ModelSpec spec{2, {}, Activation::identity, 2};
  ParamVector p(spec.partition());
  Matrix features(1, 2);
  features(0, 0) = 1.0;
  features(0, 1) = 2.0;
  SUBCASE("zero phi gives zero logits") {
    auto logits = head_supervised(spec, p, features);
    CHECK(logits.data == std::vector<double>{0.0, 0.0});
  }
  SUBCASE("empty batch") {
    CHECK(head_supervised(spec, p, Matrix(0, 2)).rows == 0);
    CHECK(head_unsupervised(spec, p, Matrix(0, 2)).rows == 0);
  }
  SUBCASE("identity classifier") {
    set_identity(p, classifier_layout(spec));
    CHECK(head_supervised(spec, p, features).data == std::vector<double>{1.0, 2.0});
    CHECK(head_unsupervised(spec, p, features).data == std::vector<double>{0.0, 0.0});
  }
  SUBCASE("identity decoder") {
    set_identity(p, decoder_layout(spec));
    CHECK(head_unsupervised(spec, p, features).data == std::vector<double>{1.0, 2.0});
    CHECK(head_supervised(spec, p, features).data == std::vector<double>{0.0, 0.0});
  }
}

TEST_CASE("backward") {
  Rng rng(2);
  ModelSpec spec{3, {4, 3}, Activation::tanh, 2};
  auto p = init_params(spec.partition(), InitScheme::uniform(0.5), 3);
  Matrix batch = test::random_matrix(6, 3, rng);
  auto fwd = forward_backbone(spec, p, batch);
  const auto part = spec.partition();

  SUBCASE("zero upstream gives zero gradient") {
    auto g = backward(spec, p, fwd.cache, Head::supervised, Matrix(6, 2));
    for (double v : g) CHECK(v == 0.0);
  }
  SUBCASE("supervised path leaves eta at exactly zero") {
    auto g = backward(spec, p, fwd.cache, Head::supervised, test::random_matrix(6, 2, rng));
    for (std::size_t i = part.offset(Segment::eta); i < part.total(); ++i) CHECK(g[i] == 0.0);
  }
  SUBCASE("unsupervised path leaves phi at exactly zero") {
    auto g = backward(spec, p, fwd.cache, Head::unsupervised, test::random_matrix(6, 3, rng));
    for (std::size_t i = part.offset(Segment::phi); i < part.offset(Segment::eta); ++i) {
      CHECK(g[i] == 0.0);
    }
  }
  SUBCASE("stale cache") {
    p.mutable_values()[0] += 1e-3;
    CHECK_THROWS_AS(backward(spec, p, fwd.cache, Head::supervised, Matrix(6, 2)), InvalidState);
  }
  SUBCASE("upstream shape") {
    CHECK_THROWS_AS(backward(spec, p, fwd.cache, Head::supervised, Matrix(6, 3)),
                    InvalidArgument);
  }
}

TEST_CASE("two-layer tanh gradients agree with central differences") {
  Rng rng(5);
  ModelSpec spec{3, {5, 4}, Activation::tanh, 3};
  LabeledBatch lb{test::random_matrix(7, 3, rng), {0, 1, 2, 2, 1, 0, 1}};
  SupervisedObjective f(spec, lb, InitScheme::uniform(0.5));
  auto p = init_params(spec.partition(), InitScheme::uniform(0.5), 9);
  auto rep = fd_check(f, p, 1e-6);
  CHECK(rep.skipped.empty());
  CHECK(rep.checked == p.size());
  CHECK(rep.max_rel_error <= 1e-6);
}

TEST_CASE("forward and backward are pure") {
  Rng rng(6);
  ModelSpec spec{3, {4}, Activation::relu, 2};
  auto p = init_params(spec.partition(), InitScheme::uniform(0.5), 1);
  LabeledBatch lb{test::random_matrix(5, 3, rng), {0, 1, 1, 0, 1}};
  auto a = sup_loss_ce(spec, p, lb);
  auto b = sup_loss_ce(spec, p, lb);
  CHECK(a.value == b.value);
  CHECK(a.gradient == b.gradient);
}

TEST_CASE("extended-precision outputs match the double forward pass") {
  Rng rng(7);
  for (auto act : {Activation::tanh, Activation::relu, Activation::identity}) {
    ModelSpec spec{3, {4, 2}, act, 3};
    auto p = init_params(spec.partition(), InitScheme::uniform(0.7), 4);
    Matrix x = test::random_matrix(5, 3, rng);
    auto feats = forward_backbone(spec, p, x).features;
    auto logits = head_supervised(spec, p, feats);
    auto ext = head_outputs_extended(spec, p, x, Head::supervised);
    REQUIRE(ext.size() == logits.data.size());
    for (std::size_t i = 0; i < ext.size(); ++i) {
      CHECK(static_cast<double>(ext[i]) == doctest::Approx(logits.data[i]).epsilon(1e-13));
    }
  }
}
