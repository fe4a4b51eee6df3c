#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rsplan/rng.hpp"

namespace rsplan {

using Vec = std::vector<double>;

/// Row-major (n x dim) batch of vectors.
struct Batch {
  int n = 0;
  int dim = 0;
  Vec x;

  static Batch zeros(int n, int dim) { return Batch{n, dim, Vec(std::size_t(n) * dim, 0.0)}; }
  static Batch from_row(const Vec& row) { return Batch{1, static_cast<int>(row.size()), row}; }

  double& at(int i, int j) { return x[std::size_t(i) * dim + j]; }
  double at(int i, int j) const { return x[std::size_t(i) * dim + j]; }
  Vec row(int i) const { return Vec(x.begin() + std::size_t(i) * dim, x.begin() + std::size_t(i + 1) * dim); }
};

struct LayerGrads {
  Vec dw;      // row-major (out x in)
  Vec db;      // out
  Vec dgamma;  // out (empty when the layer has no normalization)
  Vec dbeta;   // out
};

struct Gradients {
  std::vector<LayerGrads> layers;

  void scale(double a);
  void accumulate(const Gradients& other);
  Vec flatten() const;  // canonical parameter order: per layer W, b, gamma, beta
};

class NeuralNet;

/// Intermediate values of one train-mode forward pass, kept so backward can
/// differentiate through the batch statistics exactly.
class ForwardCache {
public:
  friend class NeuralNet;

  int layer_count() const { return static_cast<int>(layers_.size()); }
  /// Value entering the activation (normalized pre-activation on BN layers).
  const Batch& pre_activation(int layer) const { return layers_.at(layer).pre_relu; }
  const Vec& batch_variance(int layer) const { return layers_.at(layer).batch_var; }

private:
  struct LayerCache {
    Batch input;       // layer input
    Batch affine;      // W*x + b
    Vec batch_mean;    // per-unit batch mean of affine
    Vec batch_var;     // per-unit biased batch variance of affine
    Batch xhat;        // normalized affine
    Batch pre_relu;    // value entering the activation
  };
  std::vector<LayerCache> layers_;
  int batch_size_ = 0;
};

/// Dense multilayer perceptron: each hidden layer is affine -> batch
/// normalization -> rectifier, the output layer is affine only. Exact
/// analytic gradients for every parameter, including the normalization
/// scale/shift and the batch-statistic paths.
class NeuralNet {
public:
  NeuralNet() = default;

  /// Glorot-uniform affine weights, zero biases, identity normalization.
  static NeuralNet mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
                       Rng& rng);

  int input_dim() const;
  int output_dim() const;
  bool empty() const { return layers_.empty(); }

  /// Inference: normalizes with running statistics; supports batch size 1.
  Batch infer(const Batch& in) const;
  Vec infer_one(const Vec& in) const;

  /// Training: normalizes with batch statistics (batch size >= 2) and folds
  /// them into the running statistics by momentum.
  Batch train_forward(const Batch& in, ForwardCache& cache);

  /// dL/dparams for the forward pass recorded in cache, given dL/doutput.
  Gradients backward(const ForwardCache& cache, const Batch& dout) const;

  Gradients zero_grads() const;
  std::size_t parameter_count() const;
  /// Parameter storage in the canonical order used by Gradients::flatten.
  std::vector<double*> parameter_pointers();

  std::string to_json_string() const;
  static NeuralNet from_json_string(const std::string& text);

  double bn_momentum() const { return bn_momentum_; }
  double bn_eps() const { return bn_eps_; }

private:
  struct Layer {
    int in = 0, out = 0;
    Vec w;  // row-major (out x in)
    Vec b;
    bool batchnorm = false;
    bool relu = false;
    Vec gamma, beta, running_mean, running_var;
  };

  std::vector<Layer> layers_;
  double bn_momentum_ = 0.99;
  double bn_eps_ = 1e-5;
};

/// Adaptive-moment minimizer; step() applies one bias-corrected update,
/// p -= lr * mhat / (sqrt(vhat) + eps).
class Adam {
public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(NeuralNet& net, const Gradients& grads);
  long steps_taken() const { return t_; }
  double learning_rate() const { return lr_; }

private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  Vec m_, v_;
};

}  // namespace rsplan
