#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "bljust/matrix.hpp"
#include "bljust/param.hpp"

namespace bljust {

enum class Activation { tanh, relu, identity };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// MLP backbone feeding a classifier head (phi) and a reconstruction
/// decoder head (eta). Backbone weights and biases live in theta.
struct ModelSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims;
  Activation activation = Activation::tanh;
  std::size_t num_classes = 2;

  std::size_t recon_dim() const { return input_dim; }
  std::size_t feature_dim() const {
    return hidden_dims.empty() ? input_dim : hidden_dims.back();
  }

  void validate() const;
  Partition partition() const;
};

/// Offsets of one dense layer inside the flat parameter vector.
/// Weights are stored out x in, row-major, followed by the biases.
struct DenseLayout {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
};

std::vector<DenseLayout> backbone_layout(const ModelSpec& spec);
DenseLayout classifier_layout(const ModelSpec& spec);
DenseLayout decoder_layout(const ModelSpec& spec);

enum class Head { supervised, unsupervised };

/// Backbone intermediates for one batch. Tied to the parameter version it
/// was computed from; backward() rejects it once the parameters change.
struct ForwardCache {
  std::uint64_t params_version = 0;
  std::vector<Matrix> activations;      // activations[0] is the input batch
  std::vector<Matrix> preactivations;   // one per backbone layer
};

struct BackboneResult {
  Matrix features;
  ForwardCache cache;
};

BackboneResult forward_backbone(const ModelSpec& spec, const ParamVector& params,
                                const Matrix& batch);

Matrix head_supervised(const ModelSpec& spec, const ParamVector& params,
                       const Matrix& features);

Matrix head_unsupervised(const ModelSpec& spec, const ParamVector& params,
                         const Matrix& features);

/// Gradient of a scalar loss w.r.t. all parameters, given the loss
/// gradient w.r.t. the chosen head's output. Segments off the active path
/// are exactly zero.
std::vector<double> backward(const ModelSpec& spec, const ParamVector& params,
                             const ForwardCache& cache, Head head,
                             const Matrix& upstream);

/// Head outputs (row-major, rows x head width) computed end to end in long
/// double. Only finite-difference checks use it.
std::vector<long double> head_outputs_extended(const ModelSpec& spec,
                                               const ParamVector& params,
                                               const Matrix& batch, Head head);

/// Backbone pre-activations of every ReLU unit, flattened. Empty for other
/// activations. Used to find coordinates where a finite difference would
/// straddle a kink.
std::vector<double> relu_preactivations(const ModelSpec& spec,
                                        const ParamVector& params,
                                        const Matrix& batch);

}  // namespace bljust
