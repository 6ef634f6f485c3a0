#include "vmask/nn.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace vmask {

Tensor fc_forward(const LinearLayer& layer, const Tensor& x) {
  require_rank(x, 2, "fc_forward");
  if (x.cols() != layer.in_dim()) {
    throw std::invalid_argument("fc_forward: input " + shape_str(x) +
                                " does not match weight " +
                                shape_str(layer.weight));
  }
  return add_rowwise(matmul(x, transpose(layer.weight)), layer.bias);
}

FcGrads fc_backward(const LinearLayer& layer, const Tensor& x,
                    const Tensor& grad_out) {
  require_rank(grad_out, 2, "fc_backward");
  if (x.rows() != grad_out.rows() || grad_out.cols() != layer.out_dim() ||
      x.cols() != layer.in_dim()) {
    throw std::invalid_argument("fc_backward: x " + shape_str(x) + ", grad " +
                                shape_str(grad_out) + ", weight " +
                                shape_str(layer.weight));
  }
  FcGrads g;
  g.weight = matmul(transpose(grad_out), x);
  g.bias = colsum(grad_out);
  g.input = matmul(grad_out, layer.weight);
  return g;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& preact, const Tensor& grad_out) {
  require_same_shape(preact, grad_out, "relu_backward");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (preact.data[i] <= 0.0) g.data[i] = 0.0;
  return g;
}

ForwardCache model_forward(const Model& m, const Tensor& x) {
  if (m.layers.empty()) throw std::invalid_argument("model_forward: no layers");
  ForwardCache c;
  Tensor z = x;
  for (std::size_t j = 0; j < m.layers.size(); ++j) {
    c.inputs.push_back(z);
    z = fc_forward(m.layers[j], z);
    c.preacts.push_back(z);
    if (j + 1 < m.layers.size() && m.activation == Activation::ReLU) z = relu(z);
  }
  c.output = z;
  return c;
}

BackwardResult model_backward(const Model& m, const ForwardCache& cache,
                              const Tensor& grad_out) {
  if (cache.inputs.size() != m.layers.size()) {
    throw std::invalid_argument("model_backward: cache depth mismatch");
  }
  BackwardResult r;
  r.grads.resize(m.layers.size());
  Tensor g = grad_out;
  for (std::size_t j = m.layers.size(); j-- > 0;) {
    if (j + 1 < m.layers.size() && m.activation == Activation::ReLU) {
      g = relu_backward(cache.preacts[j], g);
    }
    FcGrads fg = fc_backward(m.layers[j], cache.inputs[j], g);
    r.grads[j] = LayerGrad{fg.weight, fg.bias};
    g = fg.input;
  }
  r.grad_input = g;
  return r;
}

CeResult softmax_ce(const Tensor& logits, const std::vector<int>& labels) {
  require_rank(logits, 2, "softmax_ce");
  const std::size_t b = logits.rows(), c = logits.cols();
  if (labels.size() != b) {
    throw std::invalid_argument("softmax_ce: " + std::to_string(labels.size()) +
                                " labels for batch " + std::to_string(b));
  }
  if (b == 0) throw std::invalid_argument("softmax_ce: empty batch");
  CeResult r;
  r.grad = Tensor(b, c);
  for (std::size_t i = 0; i < b; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw std::invalid_argument("softmax_ce: label " + std::to_string(y) +
                                  " out of range for " + std::to_string(c) +
                                  " classes");
    }
    double mx = logits.at(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits.at(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(logits.at(i, j) - mx);
    r.loss += -(logits.at(i, y) - mx - std::log(sum));
    for (std::size_t j = 0; j < c; ++j) {
      const double p = std::exp(logits.at(i, j) - mx) / sum;
      r.grad.at(i, j) =
          (p - (static_cast<std::size_t>(y) == j ? 1.0 : 0.0)) / double(b);
    }
  }
  r.loss /= double(b);
  return r;
}

double accuracy(const Tensor& logits, const std::vector<int>& labels) {
  require_rank(logits, 2, "accuracy");
  if (labels.size() != logits.rows() || logits.rows() == 0) {
    throw std::invalid_argument("accuracy: label/batch mismatch");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.cols(); ++j)
      if (logits.at(i, j) > logits.at(i, best)) best = j;
    if (best == static_cast<std::size_t>(labels[i])) ++hits;
  }
  return double(hits) / double(logits.rows());
}

void sgd_step(LinearLayer& layer, const LayerGrad& g, double lr) {
  require_same_shape(layer.weight, g.weight, "sgd_step");
  require_same_shape(layer.bias, g.bias, "sgd_step");
  for (std::size_t i = 0; i < layer.weight.size(); ++i)
    layer.weight.data[i] -= lr * g.weight.data[i];
  for (std::size_t i = 0; i < layer.bias.size(); ++i)
    layer.bias.data[i] -= lr * g.bias.data[i];
}

void sgd_step(Model& m, const std::vector<LayerGrad>& grads, double lr) {
  if (grads.size() != m.layers.size()) {
    throw std::invalid_argument("sgd_step: grad count mismatch");
  }
  for (std::size_t j = 0; j < m.layers.size(); ++j) {
    if (m.layers[j].mask_status == MaskStatus::Masked) {
      throw std::runtime_error("sgd_step: layer " + std::to_string(j + 1) +
                               " is masked; plaintext update refused");
    }
    sgd_step(m.layers[j], grads[j], lr);
  }
}

Model init_model(ModelRole role, const std::vector<std::size_t>& dims, Rng& rng,
                 Activation act) {
  if (dims.size() < 2) throw std::invalid_argument("init_model: need >=2 dims");
  Model m;
  m.role = role;
  m.activation = act;
  for (std::size_t j = 0; j + 1 < dims.size(); ++j) {
    LinearLayer layer;
    layer.weight = Tensor(dims[j + 1], dims[j]);
    layer.bias = Tensor(dims[j + 1]);
    const double bound = 1.0 / std::sqrt(double(dims[j]));
    for (double& v : layer.weight.data) v = rng.uniform(-bound, bound);
    for (double& v : layer.bias.data) v = rng.uniform(-bound, bound);
    m.layers.push_back(std::move(layer));
  }
  return m;
}

std::vector<std::size_t> model_dims(const Model& m) {
  std::vector<std::size_t> dims;
  dims.push_back(m.layers.front().in_dim());
  for (const auto& l : m.layers) dims.push_back(l.out_dim());
  return dims;
}

}  // namespace vmask
