#pragma once

#include <cmath>
#include <cstdint>

#include "bljust/data.hpp"
#include "bljust/model.hpp"
#include "bljust/problem.hpp"
#include "bljust/rng.hpp"

namespace bljust::test {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.gaussian();
  return m;
}

/// Small semi-supervised problem that trains in milliseconds.
inline SemiSupervisedProblem small_problem(std::uint64_t data_seed = 3,
                                           std::size_t hidden = 5) {
  SyntheticTask task;
  task.input_dim = 4;
  task.num_classes = 3;
  task.n_labeled = 60;
  task.n_unlabeled = 120;
  task.seed = data_seed;
  SemiSupervisedOptions opts;
  opts.batch_size = 16;
  opts.mask_prob = 0.25;
  return SemiSupervisedProblem(ModelSpec{4, {hidden}, Activation::tanh, 3}, generate(task),
                               opts);
}

}  // namespace bljust::test
