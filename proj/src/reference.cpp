#include "bljust/reference.hpp"

#include "bljust/errors.hpp"

namespace bljust::reference {

QuadraticBilevel quadratic_problem() { return {1.0, 2.0, 3.0, -1.0}; }

BlJustConfig quadratic_bljust() {
  BlJustConfig c;
  c.rho = 0.25;
  c.alpha = 0.05;
  c.tau = 5e-5;
  c.schedule = PenaltySchedule::linear(10.0, 50);
  c.explore_steps = 20;
  c.joint_steps = 20;
  c.finetune_steps = 10;
  c.lr_decay = 0.8;
  c.seed = 0;
  return c;
}

ExperimentConfig semi_supervised(StrategyKind kind) {
  ExperimentConfig c;
  c.source = "reference";
  c.model.hidden_dims = {8};
  c.model.activation = Activation::tanh;
  c.data.preset = "100-860";
  apply_preset(c.data.task, c.data.preset);
  c.data.task.input_dim = 16;
  c.data.task.num_classes = 4;
  c.data.task.informative_dims = 4;
  c.data.task.separation = 2.1;
  c.data.task.label_noise = 0.1;

  auto& b = c.strategy.base;
  b.rho = 0.2;
  b.alpha = 0.02;
  b.tau = 0.002;
  b.explore_steps = 10;
  b.joint_steps = 10;
  b.finetune_steps = 200;
  b.schedule = PenaltySchedule::linear(0.2, 100);
  c.strategy.kind = kind;
  switch (kind) {
    case StrategyKind::bljust:
      break;
    case StrategyKind::ptft:
      c.strategy.pretrain_epochs = 100;
      c.strategy.finetune_epochs = 120;
      break;
    default:
      throw InvalidArgument("reference task defined for bljust and ptft only");
  }
  return c;
}

std::vector<ModelSpec> gradient_grid() {
  return {
      {4, {6}, Activation::tanh, 3},
      {5, {8, 4}, Activation::tanh, 2},
      {3, {5}, Activation::relu, 3},
      {6, {}, Activation::identity, 4},
      {4, {6, 5}, Activation::relu, 2},
  };
}

}  // namespace bljust::reference
