#include <filesystem>
#include <string>

#include "doctest.h"

#include "bljust/config.hpp"
#include "bljust/errors.hpp"
#include "bljust/reference.hpp"

using namespace bljust;

namespace {

const std::filesystem::path kConfigDir = BLJUST_CONFIG_DIR;

int error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

nlohmann::json without_source(const ExperimentConfig& c) {
  auto j = config_to_json(c);
  j.erase("source");
  return j;
}

}  // namespace

TEST_CASE("defaults") {
  auto c = parse_config("");
  CHECK(c.model.family == ModelFamily::mlp);
  CHECK(c.model.hidden_dims == std::vector<std::size_t>{16});
  CHECK(c.strategy.kind == StrategyKind::bljust);
  CHECK(c.data.batch_size == 32);
  CHECK(c.data.mask_prob == 0.1);
  CHECK(c.verify.suite == "all");
  CHECK(c.source == "<string>");
}

TEST_CASE("parse a full config") {
  auto c = parse_config(R"(
# comment
[model]
hidden = 12, 6
activation = relu
init = gaussian
init_scale = 0.3

[data]
preset = 100-100
input_dim = 10
num_classes = 3
mask_prob = 0.2
batch_size = 8
overlap = labeled_subset_of_unlabeled

[strategy]
kind = ptft
rho = 0.1
epochs = 7
pretrain_epochs = 4
finetune_epochs = 5
seed = 99

[schedule]
kind = constant
constant_value = 0.7
)");
  CHECK(c.model.hidden_dims == std::vector<std::size_t>{12, 6});
  CHECK(c.model.activation == Activation::relu);
  CHECK(c.model.init.kind == InitScheme::Kind::gaussian);
  CHECK(c.model.init.scale == 0.3);
  CHECK(c.data.task.n_labeled == 500);
  CHECK(c.data.task.n_unlabeled == 500);
  CHECK(c.data.task.input_dim == 10);
  CHECK(c.data.task.overlap == OverlapMode::labeled_subset_of_unlabeled);
  CHECK(c.data.batch_size == 8);
  CHECK(c.strategy.kind == StrategyKind::ptft);
  CHECK(c.strategy.base.rho == 0.1);
  CHECK(c.strategy.base.epochs() == 7);
  CHECK(c.strategy.base.seed == 99);
  CHECK(c.strategy.pretrain_epochs == 4);
  CHECK(c.strategy.base.schedule.kind == PenaltySchedule::Kind::constant);
  CHECK(penalty_at(c.strategy.base.schedule, 3) == 0.7);
  auto spec = model_spec(c);
  CHECK(spec.input_dim == 10);
  CHECK(spec.num_classes == 3);
}

TEST_CASE("explicit sizes override the preset") {
  auto c = parse_config("[data]\nn_labeled = 40\npreset = 300-2000\n");
  CHECK(c.data.task.n_labeled == 40);
  CHECK(c.data.task.n_unlabeled == 5000);
}

TEST_CASE("hidden = none gives a linear model") {
  auto c = parse_config("[model]\nhidden = none\n");
  CHECK(c.model.hidden_dims.empty());
}

TEST_CASE("quadratic family defaults to a zero init") {
  auto c = parse_config("[model]\nfamily = quadratic\na = 4\n");
  CHECK(c.model.family == ModelFamily::quadratic);
  CHECK(c.model.quadratic.a == 4.0);
  CHECK(c.model.init.kind == InitScheme::Kind::zeros);
}

TEST_CASE("errors carry the offending line") {
  CHECK(error_line("[model]\nhidden = 4\n[nope]\n") == 3);
  CHECK(error_line("[model]\nwidth = 4\n") == 2);
  CHECK(error_line("[model]\nhidden = 4\nhidden = 5\n") == 3);
  CHECK(error_line("alpha = 1\n") == 1);
  CHECK(error_line("[strategy]\n\nalpha = fast\n") == 3);
  CHECK(error_line("[strategy]\nkind = sgd\n") == 2);
  CHECK(error_line("[model]\nno equals sign\n") == 2);
  CHECK(error_line("[model\n") == 1);
  CHECK(error_line("[model]\n[model]\n") == 2);
  CHECK(error_line("[data]\npreset = 1-2\n") == 2);
}

TEST_CASE("invalid values are config errors") {
  CHECK_THROWS_AS(parse_config("[strategy]\nalpha = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[strategy]\nepochs = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[data]\nmask_prob = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(load_config(kConfigDir / "missing.ini"), IoError);
}

TEST_CASE("config JSON echoes resolved values") {
  auto c = parse_config("[strategy]\nalpha = 0.125\n[schedule]\ngamma_max = 3\n");
  auto j = config_to_json(c);
  CHECK(j["strategy"]["alpha"] == 0.125);
  CHECK(j["schedule"]["gamma_max"] == 3.0);
  CHECK(j["data"]["batch_size"] == 32);
}

TEST_CASE("shipped configs parse") {
  for (const auto& entry : std::filesystem::directory_iterator(kConfigDir)) {
    if (entry.path().extension() != ".ini") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path()));
  }
}

TEST_CASE("reference configs match the reference definitions") {
  CHECK(without_source(load_config(kConfigDir / "reference_bljust.ini")) ==
        without_source(reference::semi_supervised(StrategyKind::bljust)));
  CHECK(without_source(load_config(kConfigDir / "reference_ptft.ini")) ==
        without_source(reference::semi_supervised(StrategyKind::ptft)));
  auto quad = load_config(kConfigDir / "quadratic.ini");
  CHECK(quad.model.family == ModelFamily::quadratic);
  auto ref = reference::quadratic_bljust();
  CHECK(quad.strategy.base.alpha == ref.alpha);
  CHECK(quad.strategy.base.rho == ref.rho);
  CHECK(quad.strategy.base.tau == ref.tau);
  CHECK(quad.strategy.base.lr_decay == ref.lr_decay);
  CHECK(quad.strategy.base.epochs() == ref.epochs());
  CHECK(quad.strategy.base.schedule.gamma_max == ref.schedule.gamma_max);
}
