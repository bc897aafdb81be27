#include "bljust/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bljust/errors.hpp"

namespace bljust {

namespace {

Matrix zero_masked(const Matrix& x, std::span<const unsigned char> mask) {
  Matrix out = x;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (mask[i]) out.data[i] = 0.0;
  }
  return out;
}

Evaluation ce_impl(const ModelSpec& spec, const ParamVector& params,
                   const LabeledBatch& batch, bool want_grad) {
  if (batch.y.size() != batch.x.rows) {
    throw InvalidArgument("label count does not match batch rows");
  }
  for (auto y : batch.y) {
    if (y >= spec.num_classes) {
      throw InvalidArgument("label " + std::to_string(y) + " out of range");
    }
  }
  Evaluation e;
  const std::size_t n = batch.x.rows;
  if (n == 0) {
    if (want_grad) e.gradient.assign(params.size(), 0.0);
    e.degenerate = true;
    return e;
  }
  auto fwd = forward_backbone(spec, params, batch.x);
  Matrix logits = head_supervised(spec, params, fwd.features);
  Matrix upstream(n, spec.num_classes);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto z = logits.row(i);
    double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    double lse = zmax + std::log(sum);
    total += lse - z[batch.y[i]];
    if (want_grad) {
      auto u = upstream.row(i);
      for (std::size_t k = 0; k < z.size(); ++k) {
        u[k] = std::exp(z[k] - lse) / static_cast<double>(n);
      }
      u[batch.y[i]] -= 1.0 / static_cast<double>(n);
    }
  }
  e.value = total / static_cast<double>(n);
  if (want_grad) e.gradient = backward(spec, params, fwd.cache, Head::supervised, upstream);
  return e;
}

Evaluation mse_impl(const ModelSpec& spec, const ParamVector& params,
                    const Matrix& corrupted, const Matrix& target,
                    std::span<const unsigned char> mask, bool want_grad) {
  if (target.rows != corrupted.rows || target.cols != corrupted.cols ||
      mask.size() != target.data.size()) {
    throw InvalidArgument("masked MSE: input, target and mask shapes differ");
  }
  std::size_t masked = 0;
  for (auto m : mask) masked += m ? 1 : 0;
  Evaluation e;
  if (masked == 0) {
    if (want_grad) e.gradient.assign(params.size(), 0.0);
    e.degenerate = true;
    return e;
  }
  auto fwd = forward_backbone(spec, params, corrupted);
  Matrix recon = head_unsupervised(spec, params, fwd.features);
  Matrix upstream(recon.rows, recon.cols);
  const double inv = 1.0 / static_cast<double>(masked);
  double total = 0.0;
  for (std::size_t i = 0; i < recon.data.size(); ++i) {
    if (!mask[i]) continue;
    double r = recon.data[i] - target.data[i];
    total += r * r;
    upstream.data[i] = 2.0 * r * inv;
  }
  e.value = total * inv;
  if (want_grad) e.gradient = backward(spec, params, fwd.cache, Head::unsupervised, upstream);
  return e;
}

void check_quadratic(const ParamVector& params) {
  if (params.partition() != QuadraticBilevel::partition()) {
    throw InvalidArgument("quadratic family needs a 1/1/1 partition");
  }
}

}  // namespace

UnlabeledBatch make_unlabeled_batch(Matrix x, double mask_prob, Rng& rng) {
  if (!(mask_prob >= 0.0 && mask_prob <= 1.0)) {
    throw InvalidArgument("mask_prob must lie in [0, 1]");
  }
  UnlabeledBatch b;
  b.mask.resize(x.data.size());
  for (auto& m : b.mask) m = rng.bernoulli(mask_prob) ? 1 : 0;
  b.x = std::move(x);
  b.mask_prob = mask_prob;
  return b;
}

Evaluation sup_loss_ce(const ModelSpec& spec, const ParamVector& params,
                       const LabeledBatch& batch) {
  return ce_impl(spec, params, batch, true);
}

Evaluation masked_mse(const ModelSpec& spec, const ParamVector& params,
                      const Matrix& input, const Matrix& target,
                      std::span<const unsigned char> mask) {
  return mse_impl(spec, params, input, target, mask, true);
}

Evaluation unsup_loss_masked_mse(const ModelSpec& spec, const ParamVector& params,
                                 const UnlabeledBatch& batch) {
  if (batch.mask.size() != batch.x.data.size()) {
    throw InvalidArgument("mask size does not match input");
  }
  return mse_impl(spec, params, zero_masked(batch.x, batch.mask), batch.x, batch.mask, true);
}

Evaluation quad_eval(const QuadraticBilevel& q, const ParamVector& params,
                     Level level) {
  check_quadratic(params);
  const double theta = params[0], phi = params[1], eta = params[2];
  Evaluation e;
  if (level == Level::upper) {
    e.value = (theta - q.a) * (theta - q.a) + (phi - q.b) * (phi - q.b);
    e.gradient = {2.0 * (theta - q.a), 2.0 * (phi - q.b), 0.0};
  } else {
    e.value = (theta - q.c) * (theta - q.c) + (eta - q.d) * (eta - q.d);
    e.gradient = {2.0 * (theta - q.c), 0.0, 2.0 * (eta - q.d)};
  }
  return e;
}

std::array<double, 3> quad_penalized_argmin(const QuadraticBilevel& q, double gamma) {
  if (!(gamma >= 0.0)) throw InvalidArgument("gamma must be >= 0");
  return {(q.a + gamma * q.c) / (1.0 + gamma), q.b, q.d};
}

SupervisedObjective::SupervisedObjective(ModelSpec spec, LabeledBatch batch,
                                         InitScheme init)
    : spec_(std::move(spec)), batch_(std::move(batch)), init_(init) {
  spec_.validate();
}

Evaluation SupervisedObjective::eval(const ParamVector& params) const {
  return ce_impl(spec_, params, batch_, true);
}

long double SupervisedObjective::value_extended(const ParamVector& params) const {
  const std::size_t n = batch_.x.rows;
  if (n == 0) return 0.0L;
  auto logits = head_outputs_extended(spec_, params, batch_.x, Head::supervised);
  const std::size_t c = spec_.num_classes;
  long double total = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    const long double* z = logits.data() + i * c;
    long double zmax = *std::max_element(z, z + c);
    long double sum = 0.0L;
    for (std::size_t k = 0; k < c; ++k) sum += std::exp(z[k] - zmax);
    total += zmax + std::log(sum) - z[batch_.y[i]];
  }
  return total / static_cast<long double>(n);
}

ParamVector SupervisedObjective::fresh_params(std::uint64_t seed) const {
  return init_params(spec_.partition(), init_, seed);
}

std::vector<double> SupervisedObjective::kink_probes(const ParamVector& params) const {
  return relu_preactivations(spec_, params, batch_.x);
}

UnsupervisedObjective::UnsupervisedObjective(ModelSpec spec, UnlabeledBatch batch,
                                             InitScheme init)
    : spec_(std::move(spec)), batch_(std::move(batch)), init_(init) {
  spec_.validate();
  if (batch_.mask.size() != batch_.x.data.size()) {
    throw InvalidArgument("mask size does not match unlabeled batch");
  }
  corrupted_ = zero_masked(batch_.x, batch_.mask);
}

Evaluation UnsupervisedObjective::eval(const ParamVector& params) const {
  return mse_impl(spec_, params, corrupted_, batch_.x, batch_.mask, true);
}

long double UnsupervisedObjective::value_extended(const ParamVector& params) const {
  std::size_t masked = 0;
  for (auto m : batch_.mask) masked += m ? 1 : 0;
  if (masked == 0) return 0.0L;
  auto recon = head_outputs_extended(spec_, params, corrupted_, Head::unsupervised);
  long double total = 0.0L;
  for (std::size_t i = 0; i < recon.size(); ++i) {
    if (!batch_.mask[i]) continue;
    long double r = recon[i] - batch_.x.data[i];
    total += r * r;
  }
  return total / static_cast<long double>(masked);
}

ParamVector UnsupervisedObjective::fresh_params(std::uint64_t seed) const {
  return init_params(spec_.partition(), init_, seed);
}

std::vector<double> UnsupervisedObjective::kink_probes(const ParamVector& params) const {
  return relu_preactivations(spec_, params, corrupted_);
}

ParamVector QuadraticObjective::fresh_params(std::uint64_t seed) const {
  return init_params(partition(), InitScheme::uniform(1.0), seed);
}

double estimate_value_function(const Objective& lower, int budget, double lr,
                               std::uint64_t seed) {
  if (budget < 1) throw InvalidArgument("value-function budget must be >= 1");
  if (!(lr > 0.0)) throw InvalidArgument("value-function learning rate must be > 0");
  ParamVector p = lower.fresh_params(seed);
  double best = std::numeric_limits<double>::infinity();
  for (int step = 0; step <= budget; ++step) {
    Evaluation e = lower.eval(p);
    if (!std::isfinite(e.value)) {
      throw NumericError("value-function estimate diverged at step " +
                         std::to_string(step));
    }
    best = std::min(best, e.value);
    if (step == budget) break;
    try {
      axpy_segment_inplace(p, Segment::all, lr, e.gradient);
    } catch (const NumericError&) {
      throw NumericError("value-function estimate diverged at step " +
                         std::to_string(step + 1));
    }
  }
  return best;
}

ValueGap value_gap(const Objective& lower, const ParamVector& params, double v_hat) {
  ValueGap gap;
  gap.value = lower.value(params) - v_hat;
  gap.stale = gap.value < 0.0;
  return gap;
}

}  // namespace bljust
