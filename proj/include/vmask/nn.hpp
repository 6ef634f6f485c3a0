#pragma once

#include <cstdint>
#include <vector>

#include "vmask/rng.hpp"
#include "vmask/tensor.hpp"

namespace vmask {

enum class MaskStatus : std::uint8_t { Plaintext = 0, Masked = 1 };
enum class Activation : std::uint8_t { ReLU = 0, None = 1 };
enum class ModelRole : std::uint8_t {
  Bottom = 0,
  Top = 1,
  Shadow = 2,
  InferenceHead = 3,
};

// Fully connected layer, y = x W^T + b with W of shape (out x in).
// While a layer is masked, `weight`/`bias` hold this party's additive share
// (the Ring domain stores the decoded fixed-point view here; the exact share
// lives with the secure-training state) and the true parameters are only
// recoverable together with the counterparty's share.
struct LinearLayer {
  Tensor weight;
  Tensor bias;
  MaskStatus mask_status = MaskStatus::Plaintext;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
};

struct Model {
  ModelRole role = ModelRole::Bottom;
  Activation activation = Activation::ReLU;
  std::vector<LinearLayer> layers;

  std::size_t depth() const { return layers.size(); }
};

struct LayerGrad {
  Tensor weight;
  Tensor bias;
};

Tensor fc_forward(const LinearLayer& layer, const Tensor& x);

struct FcGrads {
  Tensor weight;  // grad_out^T * x
  Tensor bias;    // column sum of grad_out
  Tensor input;   // grad_out * W
};
FcGrads fc_backward(const LinearLayer& layer, const Tensor& x,
                    const Tensor& grad_out);

Tensor relu(const Tensor& x);
// Propagates grad_out through ReLU given the pre-activation values.
Tensor relu_backward(const Tensor& preact, const Tensor& grad_out);

struct ForwardCache {
  std::vector<Tensor> inputs;   // input fed to each layer
  std::vector<Tensor> preacts;  // each layer's linear output
  Tensor output;                // final layer output, no trailing activation
};
ForwardCache model_forward(const Model& m, const Tensor& x);

struct BackwardResult {
  std::vector<LayerGrad> grads;
  Tensor grad_input;
};
BackwardResult model_backward(const Model& m, const ForwardCache& cache,
                              const Tensor& grad_out);

// Mean cross-entropy over the batch with max-subtracted softmax.
// grad = (softmax - onehot) / batch.
struct CeResult {
  double loss = 0.0;
  Tensor grad;
};
CeResult softmax_ce(const Tensor& logits, const std::vector<int>& labels);

// Fraction of rows whose argmax (ties -> lowest index) equals the label.
double accuracy(const Tensor& logits, const std::vector<int>& labels);

void sgd_step(LinearLayer& layer, const LayerGrad& g, double lr);
// Throws if any layer is masked: plaintext updates must never touch shares.
void sgd_step(Model& m, const std::vector<LayerGrad>& grads, double lr);

// dims = {in, hidden..., out}; weights and biases uniform in +-1/sqrt(fan_in),
// drawn row-major weight first then bias, layer by layer.
Model init_model(ModelRole role, const std::vector<std::size_t>& dims, Rng& rng,
                 Activation act = Activation::ReLU);

std::vector<std::size_t> model_dims(const Model& m);

}  // namespace vmask
