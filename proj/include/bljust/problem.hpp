#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "bljust/data.hpp"
#include "bljust/model.hpp"
#include "bljust/objectives.hpp"
#include "bljust/param.hpp"
#include "bljust/rng.hpp"

namespace bljust {

/// Infinite stream of mini-batch indices over a pool. Each pass is a fresh
/// shuffle; a batch may straddle two passes. Also owns the RNG used for
/// per-batch randomness such as masks.
class BatchStream {
 public:
  BatchStream() = default;
  BatchStream(std::size_t pool_size, std::size_t batch_size, std::uint64_t seed);

  std::vector<std::size_t> next();
  Rng& rng() { return rng_; }
  std::size_t pool_size() const { return order_.size(); }

 private:
  void reshuffle();

  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t batch_size_ = 0;
  Rng rng_{0};
};

/// Upper-level f(theta, phi) and lower-level g(theta, eta) over shared
/// parameters, with full-data objectives for evaluation and stochastic
/// sampling for training.
class BilevelProblem {
 public:
  virtual ~BilevelProblem() = default;

  virtual Partition partition() const = 0;
  virtual ParamVector initial_params(std::uint64_t seed) const = 0;
  virtual void reinit_segment(ParamVector& params, Segment segment,
                              std::uint64_t seed) const = 0;

  virtual const Objective& upper() const = 0;
  virtual const Objective& lower() const = 0;

  virtual BatchStream stream(Level level, std::uint64_t seed) const = 0;
  virtual Evaluation sample(Level level, const ParamVector& params,
                            BatchStream& stream) const = 0;

  /// Exact min g when known analytically.
  virtual std::optional<double> known_value() const { return std::nullopt; }
  virtual const QuadraticBilevel* quadratic() const { return nullptr; }
};

class QuadraticProblem final : public BilevelProblem {
 public:
  explicit QuadraticProblem(QuadraticBilevel q,
                            InitScheme init = InitScheme::zeros());

  Partition partition() const override { return QuadraticBilevel::partition(); }
  ParamVector initial_params(std::uint64_t seed) const override;
  void reinit_segment(ParamVector& params, Segment segment,
                      std::uint64_t seed) const override;
  const Objective& upper() const override { return upper_; }
  const Objective& lower() const override { return lower_; }
  BatchStream stream(Level, std::uint64_t seed) const override {
    return BatchStream(0, 0, seed);
  }
  Evaluation sample(Level level, const ParamVector& params,
                    BatchStream&) const override {
    return quad_eval(q_, params, level);
  }
  std::optional<double> known_value() const override { return 0.0; }
  const QuadraticBilevel* quadratic() const override { return &q_; }

 private:
  QuadraticBilevel q_;
  InitScheme init_;
  QuadraticObjective upper_;
  QuadraticObjective lower_;
};

struct SemiSupervisedOptions {
  std::size_t batch_size = 32;
  double mask_prob = 0.1;
  InitScheme init = InitScheme::uniform(0.5);
  std::uint64_t eval_mask_seed = 0;
};

/// Classification with a labeled pool for f and a masked-reconstruction
/// unlabeled pool for g.
class SemiSupervisedProblem final : public BilevelProblem {
 public:
  SemiSupervisedProblem(ModelSpec spec, Dataset data, SemiSupervisedOptions opts);

  Partition partition() const override { return spec_.partition(); }
  ParamVector initial_params(std::uint64_t seed) const override;
  void reinit_segment(ParamVector& params, Segment segment,
                      std::uint64_t seed) const override;
  const Objective& upper() const override { return *upper_; }
  const Objective& lower() const override { return *lower_; }
  BatchStream stream(Level level, std::uint64_t seed) const override;
  Evaluation sample(Level level, const ParamVector& params,
                    BatchStream& stream) const override;

  const ModelSpec& spec() const { return spec_; }
  const Dataset& data() const { return data_; }
  const SemiSupervisedOptions& options() const { return opts_; }

  std::vector<std::size_t> predict(const ParamVector& params, const Matrix& x) const;

  /// Copy whose labeled pool is extended by (x, y).
  SemiSupervisedProblem with_extra_labels(const Matrix& x,
                                          const std::vector<std::size_t>& y) const;

 private:
  ModelSpec spec_;
  Dataset data_;
  SemiSupervisedOptions opts_;
  std::shared_ptr<const SupervisedObjective> upper_;
  std::shared_ptr<const UnsupervisedObjective> lower_;
};

}  // namespace bljust
