#pragma once

#include <vector>

#include "bljust/config.hpp"
#include "bljust/model.hpp"
#include "bljust/objectives.hpp"
#include "bljust/pbgd.hpp"

namespace bljust::reference {

/// a=1, b=2, c=3, d=-1.
QuadraticBilevel quadratic_problem();

/// BL-JUST on the quadratic family with K=50, gamma_max=10 and the literal
/// ramp. Exploration re-solves the lower level every epoch, and alpha decays
/// so the late joint steps no longer pull theta off the lower-level optimum.
BlJustConfig quadratic_bljust();

/// Reference semi-supervised task: gaussian clusters at the 100-860 preset
/// (500 labeled, 4300 unlabeled), 16 inputs of which 4 carry the class
/// signal, 4 classes, 10% label noise, one tanh hidden layer of width 8.
/// BL-JUST runs K=100 epochs of 10+10 steps with gamma ramping to 0.2,
/// rho = 10 alpha and a final 200 steps at tau = alpha / 10. PT+FT
/// pretrains for 100 epochs and fine-tunes for 120, so both strategies
/// take 2200 labeled steps. Supported kinds: bljust, ptft.
ExperimentConfig semi_supervised(StrategyKind kind);

/// Model specs used by the gradient-check grid.
std::vector<ModelSpec> gradient_grid();

}  // namespace bljust::reference
