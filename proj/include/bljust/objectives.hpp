#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bljust/matrix.hpp"
#include "bljust/model.hpp"
#include "bljust/param.hpp"
#include "bljust/rng.hpp"

namespace bljust {

/// Loss value plus its gradient over the full [theta|phi|eta] partition.
/// `degenerate` marks a vacuous evaluation (empty batch, no masked entries).
struct Evaluation {
  double value = 0.0;
  std::vector<double> gradient;
  bool degenerate = false;
};

struct LabeledBatch {
  Matrix x;
  std::vector<std::size_t> y;
};

struct UnlabeledBatch {
  Matrix x;
  std::vector<unsigned char> mask;  // rows x cols, 1 = masked
  double mask_prob = 0.0;
};

/// Draws an independent Bernoulli(mask_prob) mask for every entry of x.
UnlabeledBatch make_unlabeled_batch(Matrix x, double mask_prob, Rng& rng);

/// Mean cross-entropy of softmax(logits) against y. Fills theta and phi.
Evaluation sup_loss_ce(const ModelSpec& spec, const ParamVector& params,
                       const LabeledBatch& batch);

/// Mean squared reconstruction error over masked entries, with masked
/// inputs zeroed before the forward pass. Fills theta and eta.
Evaluation unsup_loss_masked_mse(const ModelSpec& spec, const ParamVector& params,
                                 const UnlabeledBatch& batch);

/// The masked loss on an input the caller has already corrupted (or not),
/// against an explicit reconstruction target.
Evaluation masked_mse(const ModelSpec& spec, const ParamVector& params,
                      const Matrix& input, const Matrix& target,
                      std::span<const unsigned char> mask);

/// f = (theta-a)^2 + (phi-b)^2 and g = (theta-c)^2 + (eta-d)^2 on a 1/1/1
/// partition. The bilevel solution is (c, b, d) and min g = 0.
struct QuadraticBilevel {
  double a = 1.0;
  double b = 2.0;
  double c = 3.0;
  double d = -1.0;

  static Partition partition() { return {1, 1, 1}; }
  std::array<double, 3> solution() const { return {c, b, d}; }
};

enum class Level { upper, lower };

Evaluation quad_eval(const QuadraticBilevel& problem, const ParamVector& params,
                     Level level);

/// Minimizer of f + gamma * g for the quadratic family, as (theta, phi, eta).
std::array<double, 3> quad_penalized_argmin(const QuadraticBilevel& problem,
                                            double gamma);

/// A deterministic scalar objective over a fixed data set.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual Partition partition() const = 0;
  virtual Evaluation eval(const ParamVector& params) const = 0;
  virtual double value(const ParamVector& params) const { return eval(params).value; }
  /// Value in extended precision, for finite-difference reference checks.
  virtual long double value_extended(const ParamVector& params) const { return value(params); }
  /// Starting point for solvers that need a fresh initialization.
  virtual ParamVector fresh_params(std::uint64_t seed) const = 0;
  /// Quantities whose sign changes mark non-differentiable points (ReLU
  /// pre-activations). Empty for smooth objectives.
  virtual std::vector<double> kink_probes(const ParamVector&) const { return {}; }
};

class SupervisedObjective final : public Objective {
 public:
  SupervisedObjective(ModelSpec spec, LabeledBatch batch, InitScheme init);
  Partition partition() const override { return spec_.partition(); }
  Evaluation eval(const ParamVector& params) const override;
  long double value_extended(const ParamVector& params) const override;
  ParamVector fresh_params(std::uint64_t seed) const override;
  std::vector<double> kink_probes(const ParamVector& params) const override;
  const LabeledBatch& batch() const { return batch_; }

 private:
  ModelSpec spec_;
  LabeledBatch batch_;
  InitScheme init_;
};

class UnsupervisedObjective final : public Objective {
 public:
  UnsupervisedObjective(ModelSpec spec, UnlabeledBatch batch, InitScheme init);
  Partition partition() const override { return spec_.partition(); }
  Evaluation eval(const ParamVector& params) const override;
  long double value_extended(const ParamVector& params) const override;
  ParamVector fresh_params(std::uint64_t seed) const override;
  std::vector<double> kink_probes(const ParamVector& params) const override;
  const UnlabeledBatch& batch() const { return batch_; }

 private:
  ModelSpec spec_;
  UnlabeledBatch batch_;
  Matrix corrupted_;
  InitScheme init_;
};

class QuadraticObjective final : public Objective {
 public:
  QuadraticObjective(QuadraticBilevel problem, Level level)
      : problem_(problem), level_(level) {}
  Partition partition() const override { return QuadraticBilevel::partition(); }
  Evaluation eval(const ParamVector& params) const override {
    return quad_eval(problem_, params, level_);
  }
  ParamVector fresh_params(std::uint64_t seed) const override;

 private:
  QuadraticBilevel problem_;
  Level level_;
};

/// Best lower-level value found by `budget` full-gradient steps from
/// objective.fresh_params(seed). Nonincreasing in budget.
double estimate_value_function(const Objective& lower, int budget, double lr,
                               std::uint64_t seed);

struct ValueGap {
  double value = 0.0;
  bool stale = false;  // negative gap: the current point beats v_hat
};

ValueGap value_gap(const Objective& lower, const ParamVector& params, double v_hat);

}  // namespace bljust
