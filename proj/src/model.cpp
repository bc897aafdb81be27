#include "bljust/model.hpp"

#include <cmath>
#include <string>

#include "bljust/errors.hpp"

namespace bljust {

namespace {

Matrix dense_forward(const ParamVector& params, const DenseLayout& l,
                     const Matrix& in) {
  auto w = params.values().subspan(l.weight_offset, l.in * l.out);
  auto b = params.values().subspan(l.bias_offset, l.out);
  Matrix out(in.rows, l.out);
  for (std::size_t n = 0; n < in.rows; ++n) {
    auto x = in.row(n);
    auto y = out.row(n);
    for (std::size_t j = 0; j < l.out; ++j) {
      double acc = b[j];
      const double* wj = w.data() + j * l.in;
      for (std::size_t k = 0; k < l.in; ++k) acc += wj[k] * x[k];
      y[j] = acc;
    }
  }
  return out;
}

// Accumulates dW = upstream^T * in and db = colsum(upstream) into grad,
// and returns upstream * W (gradient w.r.t. the layer input).
Matrix dense_backward(const ParamVector& params, const DenseLayout& l,
                      const Matrix& in, const Matrix& upstream,
                      std::vector<double>& grad, bool need_input_grad) {
  auto w = params.values().subspan(l.weight_offset, l.in * l.out);
  double* gw = grad.data() + l.weight_offset;
  double* gb = grad.data() + l.bias_offset;
  Matrix din;
  if (need_input_grad) din = Matrix(in.rows, l.in);
  for (std::size_t n = 0; n < in.rows; ++n) {
    auto x = in.row(n);
    auto d = upstream.row(n);
    for (std::size_t j = 0; j < l.out; ++j) {
      const double dj = d[j];
      if (dj == 0.0) continue;
      gb[j] += dj;
      double* gwj = gw + j * l.in;
      for (std::size_t k = 0; k < l.in; ++k) gwj[k] += dj * x[k];
      if (need_input_grad) {
        const double* wj = w.data() + j * l.in;
        auto dx = din.row(n);
        for (std::size_t k = 0; k < l.in; ++k) dx[k] += dj * wj[k];
      }
    }
  }
  return din;
}

double activate(Activation a, double z) {
  switch (a) {
    case Activation::tanh: return std::tanh(z);
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::identity: return z;
  }
  return z;
}

// Derivative in terms of pre-activation z and activation y. ReLU uses 0 at z == 0.
double activate_grad(Activation a, double z, double y) {
  switch (a) {
    case Activation::tanh: return 1.0 - y * y;
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

void check_inputs(const ModelSpec& spec, const ParamVector& params,
                  std::size_t cols, std::size_t expected_cols) {
  if (params.partition() != spec.partition()) {
    throw InvalidArgument("parameter partition does not match model spec");
  }
  if (cols != expected_cols) {
    throw InvalidArgument("input has " + std::to_string(cols) +
                          " columns, expected " + std::to_string(expected_cols));
  }
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  if (name == "identity") return Activation::identity;
  throw InvalidArgument("unknown activation '" + std::string(name) + "'");
}

void ModelSpec::validate() const {
  if (input_dim < 1) throw InvalidArgument("input_dim must be >= 1");
  if (num_classes < 2) throw InvalidArgument("num_classes must be >= 2");
  for (auto h : hidden_dims) {
    if (h < 1) throw InvalidArgument("hidden layer width must be >= 1");
  }
}

Partition ModelSpec::partition() const {
  Partition p;
  std::size_t in = input_dim;
  for (auto h : hidden_dims) {
    p.d_theta += h * in + h;
    in = h;
  }
  p.d_phi = num_classes * in + num_classes;
  p.d_eta = recon_dim() * in + recon_dim();
  return p;
}

std::vector<DenseLayout> backbone_layout(const ModelSpec& spec) {
  std::vector<DenseLayout> layers;
  std::size_t in = spec.input_dim;
  std::size_t off = 0;
  for (auto h : spec.hidden_dims) {
    layers.push_back({in, h, off, off + h * in});
    off += h * in + h;
    in = h;
  }
  return layers;
}

DenseLayout classifier_layout(const ModelSpec& spec) {
  auto p = spec.partition();
  std::size_t in = spec.feature_dim();
  std::size_t off = p.offset(Segment::phi);
  return {in, spec.num_classes, off, off + spec.num_classes * in};
}

DenseLayout decoder_layout(const ModelSpec& spec) {
  auto p = spec.partition();
  std::size_t in = spec.feature_dim();
  std::size_t off = p.offset(Segment::eta);
  return {in, spec.recon_dim(), off, off + spec.recon_dim() * in};
}

BackboneResult forward_backbone(const ModelSpec& spec, const ParamVector& params,
                                const Matrix& batch) {
  check_inputs(spec, params, batch.cols, spec.input_dim);
  if (!all_finite(batch)) throw InvalidArgument("batch contains non-finite values");
  BackboneResult r;
  r.cache.params_version = params.version();
  r.cache.activations.push_back(batch);
  for (const auto& layer : backbone_layout(spec)) {
    Matrix z = dense_forward(params, layer, r.cache.activations.back());
    Matrix a = z;
    for (double& v : a.data) v = activate(spec.activation, v);
    r.cache.preactivations.push_back(std::move(z));
    r.cache.activations.push_back(std::move(a));
  }
  r.features = r.cache.activations.back();
  return r;
}

Matrix head_supervised(const ModelSpec& spec, const ParamVector& params,
                       const Matrix& features) {
  check_inputs(spec, params, features.cols, spec.feature_dim());
  return dense_forward(params, classifier_layout(spec), features);
}

Matrix head_unsupervised(const ModelSpec& spec, const ParamVector& params,
                         const Matrix& features) {
  check_inputs(spec, params, features.cols, spec.feature_dim());
  return dense_forward(params, decoder_layout(spec), features);
}

std::vector<double> backward(const ModelSpec& spec, const ParamVector& params,
                             const ForwardCache& cache, Head head,
                             const Matrix& upstream) {
  if (cache.params_version != params.version()) {
    throw InvalidState("forward cache is stale: parameters changed since forward pass");
  }
  const auto layers = backbone_layout(spec);
  if (cache.preactivations.size() != layers.size() ||
      cache.activations.size() != layers.size() + 1) {
    throw InvalidState("forward cache does not match model spec");
  }
  const DenseLayout head_layout =
      head == Head::supervised ? classifier_layout(spec) : decoder_layout(spec);
  const Matrix& features = cache.activations.back();
  if (upstream.rows != features.rows || upstream.cols != head_layout.out) {
    throw InvalidArgument("upstream gradient has wrong shape");
  }

  std::vector<double> grad(params.size(), 0.0);
  Matrix delta = dense_backward(params, head_layout, features, upstream, grad,
                                !layers.empty());
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Matrix& z = cache.preactivations[l];
    const Matrix& y = cache.activations[l + 1];
    for (std::size_t i = 0; i < delta.data.size(); ++i) {
      delta.data[i] *= activate_grad(spec.activation, z.data[i], y.data[i]);
    }
    delta = dense_backward(params, layers[l], cache.activations[l], delta, grad,
                           l > 0);
  }
  return grad;
}

std::vector<double> relu_preactivations(const ModelSpec& spec,
                                        const ParamVector& params,
                                        const Matrix& batch) {
  if (spec.activation != Activation::relu) return {};
  auto r = forward_backbone(spec, params, batch);
  std::vector<double> out;
  for (const auto& z : r.cache.preactivations) {
    out.insert(out.end(), z.data.begin(), z.data.end());
  }
  return out;
}

std::vector<long double> head_outputs_extended(const ModelSpec& spec,
                                               const ParamVector& params,
                                               const Matrix& batch, Head head) {
  check_inputs(spec, params, batch.cols, spec.input_dim);
  std::vector<long double> cur(batch.data.begin(), batch.data.end());
  std::size_t width = batch.cols;
  auto dense = [&](const DenseLayout& l) {
    std::vector<long double> out(batch.rows * l.out);
    for (std::size_t n = 0; n < batch.rows; ++n) {
      for (std::size_t j = 0; j < l.out; ++j) {
        long double acc = params[l.bias_offset + j];
        for (std::size_t k = 0; k < l.in; ++k) {
          acc += static_cast<long double>(params[l.weight_offset + j * l.in + k]) *
                 cur[n * width + k];
        }
        out[n * l.out + j] = acc;
      }
    }
    cur = std::move(out);
    width = l.out;
  };
  for (const auto& layer : backbone_layout(spec)) {
    dense(layer);
    for (long double& v : cur) {
      switch (spec.activation) {
        case Activation::tanh: v = std::tanh(v); break;
        case Activation::relu: v = v > 0.0L ? v : 0.0L; break;
        case Activation::identity: break;
      }
    }
  }
  dense(head == Head::supervised ? classifier_layout(spec) : decoder_layout(spec));
  return cur;
}

}  // namespace bljust
