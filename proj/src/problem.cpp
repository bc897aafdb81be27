#include "bljust/problem.hpp"

#include <algorithm>
#include <numeric>

#include "bljust/errors.hpp"

namespace bljust {

BatchStream::BatchStream(std::size_t pool_size, std::size_t batch_size,
                         std::uint64_t seed)
    : order_(pool_size),
      batch_size_(std::min(batch_size, pool_size)),
      rng_(seed) {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  reshuffle();
}

void BatchStream::reshuffle() {
  for (std::size_t i = order_.size(); i > 1; --i) {
    std::swap(order_[i - 1], order_[rng_.below(i)]);
  }
  cursor_ = 0;
}

std::vector<std::size_t> BatchStream::next() {
  std::vector<std::size_t> out;
  out.reserve(batch_size_);
  while (out.size() < batch_size_) {
    if (cursor_ == order_.size()) reshuffle();
    out.push_back(order_[cursor_++]);
  }
  return out;
}

QuadraticProblem::QuadraticProblem(QuadraticBilevel q, InitScheme init)
    : q_(q), init_(init), upper_(q, Level::upper), lower_(q, Level::lower) {}

ParamVector QuadraticProblem::initial_params(std::uint64_t seed) const {
  return init_params(partition(), init_, seed);
}

void QuadraticProblem::reinit_segment(ParamVector& params, Segment segment,
                                      std::uint64_t seed) const {
  bljust::reinit_segment(params, segment, init_, seed);
}

SemiSupervisedProblem::SemiSupervisedProblem(ModelSpec spec, Dataset data,
                                             SemiSupervisedOptions opts)
    : spec_(std::move(spec)), data_(std::move(data)), opts_(opts) {
  spec_.validate();
  if (data_.labeled_x.rows > 0 && data_.labeled_x.cols != spec_.input_dim) {
    throw InvalidArgument("labeled data width does not match model input_dim");
  }
  if (data_.unlabeled_x.rows > 0 && data_.unlabeled_x.cols != spec_.input_dim) {
    throw InvalidArgument("unlabeled data width does not match model input_dim");
  }
  if (opts_.batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  // Empty pools still need the right column count for the forward pass.
  if (data_.labeled_x.rows == 0) data_.labeled_x = Matrix(0, spec_.input_dim);
  if (data_.unlabeled_x.rows == 0) data_.unlabeled_x = Matrix(0, spec_.input_dim);
  upper_ = std::make_shared<const SupervisedObjective>(
      spec_, LabeledBatch{data_.labeled_x, data_.labeled_y}, opts_.init);
  Rng mask_rng(opts_.eval_mask_seed);
  lower_ = std::make_shared<const UnsupervisedObjective>(
      spec_, make_unlabeled_batch(data_.unlabeled_x, opts_.mask_prob, mask_rng),
      opts_.init);
}

ParamVector SemiSupervisedProblem::initial_params(std::uint64_t seed) const {
  return init_params(partition(), opts_.init, seed);
}

void SemiSupervisedProblem::reinit_segment(ParamVector& params, Segment segment,
                                           std::uint64_t seed) const {
  bljust::reinit_segment(params, segment, opts_.init, seed);
}

BatchStream SemiSupervisedProblem::stream(Level level, std::uint64_t seed) const {
  const std::size_t pool =
      level == Level::upper ? data_.labeled_x.rows : data_.unlabeled_x.rows;
  return BatchStream(pool, opts_.batch_size, seed);
}

Evaluation SemiSupervisedProblem::sample(Level level, const ParamVector& params,
                                         BatchStream& stream) const {
  auto idx = stream.next();
  if (level == Level::upper) {
    LabeledBatch b;
    b.x = gather_rows(data_.labeled_x, idx);
    b.y.reserve(idx.size());
    for (auto i : idx) b.y.push_back(data_.labeled_y[i]);
    return sup_loss_ce(spec_, params, b);
  }
  auto b = make_unlabeled_batch(gather_rows(data_.unlabeled_x, idx), opts_.mask_prob,
                                stream.rng());
  return unsup_loss_masked_mse(spec_, params, b);
}

std::vector<std::size_t> SemiSupervisedProblem::predict(const ParamVector& params,
                                                        const Matrix& x) const {
  auto fwd = forward_backbone(spec_, params, x);
  Matrix logits = head_supervised(spec_, params, fwd.features);
  std::vector<std::size_t> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto row = logits.row(i);
    out[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) -
                                      row.begin());
  }
  return out;
}

SemiSupervisedProblem SemiSupervisedProblem::with_extra_labels(
    const Matrix& x, const std::vector<std::size_t>& y) const {
  if (x.rows != y.size() || (x.rows > 0 && x.cols != spec_.input_dim)) {
    throw InvalidArgument("extra labels: shape mismatch");
  }
  Dataset d = data_;
  d.labeled_x.data.insert(d.labeled_x.data.end(), x.data.begin(), x.data.end());
  d.labeled_x.rows += x.rows;
  d.labeled_y.insert(d.labeled_y.end(), y.begin(), y.end());
  return SemiSupervisedProblem(spec_, std::move(d), opts_);
}

}  // namespace bljust
