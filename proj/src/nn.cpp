#include "rsplan/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "rsplan/geometry.hpp"  // ValidationError

namespace rsplan {

using nlohmann::json;

void Gradients::scale(double a) {
  for (auto& l : layers) {
    for (double& v : l.dw) v *= a;
    for (double& v : l.db) v *= a;
    for (double& v : l.dgamma) v *= a;
    for (double& v : l.dbeta) v *= a;
  }
}

void Gradients::accumulate(const Gradients& other) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    for (std::size_t k = 0; k < layers[i].dw.size(); ++k) layers[i].dw[k] += other.layers[i].dw[k];
    for (std::size_t k = 0; k < layers[i].db.size(); ++k) layers[i].db[k] += other.layers[i].db[k];
    for (std::size_t k = 0; k < layers[i].dgamma.size(); ++k) layers[i].dgamma[k] += other.layers[i].dgamma[k];
    for (std::size_t k = 0; k < layers[i].dbeta.size(); ++k) layers[i].dbeta[k] += other.layers[i].dbeta[k];
  }
}

Vec Gradients::flatten() const {
  Vec out;
  for (const auto& l : layers) {
    out.insert(out.end(), l.dw.begin(), l.dw.end());
    out.insert(out.end(), l.db.begin(), l.db.end());
    out.insert(out.end(), l.dgamma.begin(), l.dgamma.end());
    out.insert(out.end(), l.dbeta.begin(), l.dbeta.end());
  }
  return out;
}

NeuralNet NeuralNet::mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
                         Rng& rng) {
  if (input_dim <= 0 || output_dim <= 0) {
    throw ValidationError("network dimensions must be positive");
  }
  NeuralNet net;
  std::vector<int> dims;
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(output_dim);

  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    Layer layer;
    layer.in = dims[i];
    layer.out = dims[i + 1];
    const double bound = std::sqrt(6.0 / (layer.in + layer.out));
    layer.w.resize(std::size_t(layer.out) * layer.in);
    for (double& w : layer.w) w = rng.uniform(-bound, bound);
    layer.b.assign(layer.out, 0.0);
    const bool is_hidden = i + 2 < dims.size();
    if (is_hidden) {
      layer.batchnorm = true;
      layer.relu = true;
      layer.gamma.assign(layer.out, 1.0);
      layer.beta.assign(layer.out, 0.0);
      layer.running_mean.assign(layer.out, 0.0);
      layer.running_var.assign(layer.out, 1.0);
    }
    net.layers_.push_back(std::move(layer));
  }
  return net;
}

int NeuralNet::input_dim() const { return layers_.empty() ? 0 : layers_.front().in; }
int NeuralNet::output_dim() const { return layers_.empty() ? 0 : layers_.back().out; }

namespace {

Batch affine_forward(const Vec& w, const Vec& b, int in, int out, const Batch& x) {
  Batch y = Batch::zeros(x.n, out);
  for (int i = 0; i < x.n; ++i) {
    for (int o = 0; o < out; ++o) {
      double acc = b[o];
      const double* wrow = &w[std::size_t(o) * in];
      for (int k = 0; k < in; ++k) acc += wrow[k] * x.at(i, k);
      y.at(i, o) = acc;
    }
  }
  return y;
}

}  // namespace

Batch NeuralNet::infer(const Batch& in) const {
  if (layers_.empty()) throw ValidationError("empty network");
  if (in.dim != input_dim()) throw ValidationError("input width does not match network");
  Batch cur = in;
  for (const Layer& layer : layers_) {
    Batch y = affine_forward(layer.w, layer.b, layer.in, layer.out, cur);
    if (layer.batchnorm) {
      for (int i = 0; i < y.n; ++i) {
        for (int o = 0; o < layer.out; ++o) {
          const double xhat =
              (y.at(i, o) - layer.running_mean[o]) / std::sqrt(layer.running_var[o] + bn_eps_);
          y.at(i, o) = layer.gamma[o] * xhat + layer.beta[o];
        }
      }
    }
    if (layer.relu) {
      for (double& v : y.x) v = v > 0.0 ? v : 0.0;
    }
    cur = std::move(y);
  }
  return cur;
}

Vec NeuralNet::infer_one(const Vec& in) const { return infer(Batch::from_row(in)).x; }

Batch NeuralNet::train_forward(const Batch& in, ForwardCache& cache) {
  if (layers_.empty()) throw ValidationError("empty network");
  if (in.dim != input_dim()) throw ValidationError("input width does not match network");
  if (in.n < 2) throw ValidationError("train-mode forward requires batch size >= 2");

  cache.layers_.clear();
  cache.layers_.resize(layers_.size());
  cache.batch_size_ = in.n;

  Batch cur = in;
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    Layer& layer = layers_[li];
    auto& lc = cache.layers_[li];
    lc.input = cur;
    Batch y = affine_forward(layer.w, layer.b, layer.in, layer.out, cur);
    lc.affine = y;

    if (layer.batchnorm) {
      const int n = y.n;
      lc.batch_mean.assign(layer.out, 0.0);
      lc.batch_var.assign(layer.out, 0.0);
      for (int o = 0; o < layer.out; ++o) {
        double mean = 0.0;
        for (int i = 0; i < n; ++i) mean += y.at(i, o);
        mean /= n;
        double var = 0.0;
        for (int i = 0; i < n; ++i) {
          const double d = y.at(i, o) - mean;
          var += d * d;
        }
        var /= n;  // biased variance normalizes the batch
        lc.batch_mean[o] = mean;
        lc.batch_var[o] = var;
        // Running statistics track the population, so use the unbiased variance.
        const double var_unbiased = var * n / (n - 1.0);
        layer.running_mean[o] = bn_momentum_ * layer.running_mean[o] + (1.0 - bn_momentum_) * mean;
        layer.running_var[o] = bn_momentum_ * layer.running_var[o] + (1.0 - bn_momentum_) * var_unbiased;
      }
      Batch xhat = Batch::zeros(n, layer.out);
      for (int i = 0; i < n; ++i) {
        for (int o = 0; o < layer.out; ++o) {
          xhat.at(i, o) = (y.at(i, o) - lc.batch_mean[o]) / std::sqrt(lc.batch_var[o] + bn_eps_);
          y.at(i, o) = layer.gamma[o] * xhat.at(i, o) + layer.beta[o];
        }
      }
      lc.xhat = std::move(xhat);
    }

    lc.pre_relu = y;
    if (layer.relu) {
      for (double& v : y.x) v = v > 0.0 ? v : 0.0;
    }
    cur = std::move(y);
  }
  return cur;
}

Gradients NeuralNet::backward(const ForwardCache& cache, const Batch& dout) const {
  if (cache.layers_.size() != layers_.size()) {
    throw ValidationError("forward cache does not match network");
  }
  if (dout.n != cache.batch_size_ || dout.dim != output_dim()) {
    throw ValidationError("output gradient shape mismatch");
  }

  Gradients grads = zero_grads();
  Batch delta = dout;  // dL/d(layer output)

  for (int li = static_cast<int>(layers_.size()) - 1; li >= 0; --li) {
    const Layer& layer = layers_[li];
    const auto& lc = cache.layers_[li];
    auto& lg = grads.layers[li];
    const int n = delta.n;

    if (layer.relu) {
      for (int i = 0; i < n; ++i) {
        for (int o = 0; o < layer.out; ++o) {
          if (lc.pre_relu.at(i, o) <= 0.0) delta.at(i, o) = 0.0;
        }
      }
    }

    if (layer.batchnorm) {
      // Differentiate y = gamma*xhat + beta through the batch statistics:
      //   dz_i = dxhat_i/sqrt(var+eps) + dvar*2(z_i-mu)/n + dmu/n
      Batch dz = Batch::zeros(n, layer.out);
      for (int o = 0; o < layer.out; ++o) {
        const double inv_std = 1.0 / std::sqrt(lc.batch_var[o] + bn_eps_);
        double dgamma = 0.0, dbeta = 0.0, dvar = 0.0, dmu_direct = 0.0, sum_centered = 0.0;
        for (int i = 0; i < n; ++i) {
          const double dy = delta.at(i, o);
          dgamma += dy * lc.xhat.at(i, o);
          dbeta += dy;
          const double dxhat = dy * layer.gamma[o];
          const double centered = lc.affine.at(i, o) - lc.batch_mean[o];
          dvar += dxhat * centered;
          dmu_direct += dxhat;
          sum_centered += centered;
        }
        dvar *= -0.5 * inv_std * inv_std * inv_std;
        const double dmu = -dmu_direct * inv_std + dvar * (-2.0 / n) * sum_centered;
        for (int i = 0; i < n; ++i) {
          const double dxhat = delta.at(i, o) * layer.gamma[o];
          const double centered = lc.affine.at(i, o) - lc.batch_mean[o];
          dz.at(i, o) = dxhat * inv_std + dvar * 2.0 * centered / n + dmu / n;
        }
        lg.dgamma[o] = dgamma;
        lg.dbeta[o] = dbeta;
      }
      delta = std::move(dz);
    }

    // Affine: dW = sum_i delta_i x_i^T, db = sum_i delta_i, dx = W^T delta.
    Batch dx = Batch::zeros(n, layer.in);
    for (int i = 0; i < n; ++i) {
      for (int o = 0; o < layer.out; ++o) {
        const double d = delta.at(i, o);
        lg.db[o] += d;
        double* drow = &lg.dw[std::size_t(o) * layer.in];
        for (int k = 0; k < layer.in; ++k) {
          drow[k] += d * lc.input.at(i, k);
          dx.at(i, k) += d * layer.w[std::size_t(o) * layer.in + k];
        }
      }
    }
    delta = std::move(dx);
  }
  return grads;
}

Gradients NeuralNet::zero_grads() const {
  Gradients g;
  for (const Layer& layer : layers_) {
    LayerGrads lg;
    lg.dw.assign(layer.w.size(), 0.0);
    lg.db.assign(layer.b.size(), 0.0);
    lg.dgamma.assign(layer.gamma.size(), 0.0);
    lg.dbeta.assign(layer.beta.size(), 0.0);
    g.layers.push_back(std::move(lg));
  }
  return g;
}

std::size_t NeuralNet::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers_) n += l.w.size() + l.b.size() + l.gamma.size() + l.beta.size();
  return n;
}

std::vector<double*> NeuralNet::parameter_pointers() {
  std::vector<double*> ptrs;
  ptrs.reserve(parameter_count());
  for (Layer& l : layers_) {
    for (double& v : l.w) ptrs.push_back(&v);
    for (double& v : l.b) ptrs.push_back(&v);
    for (double& v : l.gamma) ptrs.push_back(&v);
    for (double& v : l.beta) ptrs.push_back(&v);
  }
  return ptrs;
}

std::string NeuralNet::to_json_string() const {
  json j;
  j["format_version"] = 1;
  j["bn_momentum"] = bn_momentum_;
  j["bn_eps"] = bn_eps_;
  json layers = json::array();
  for (const Layer& l : layers_) {
    json jl;
    jl["in"] = l.in;
    jl["out"] = l.out;
    jl["w"] = l.w;
    jl["b"] = l.b;
    jl["batchnorm"] = l.batchnorm;
    jl["relu"] = l.relu;
    if (l.batchnorm) {
      jl["gamma"] = l.gamma;
      jl["beta"] = l.beta;
      jl["running_mean"] = l.running_mean;
      jl["running_var"] = l.running_var;
    }
    layers.push_back(std::move(jl));
  }
  j["layers"] = std::move(layers);
  return j.dump();
}

NeuralNet NeuralNet::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("network JSON parse error: ") + e.what());
  }
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1) {
    throw ValidationError("network checkpoint: unsupported format_version");
  }
  NeuralNet net;
  net.bn_momentum_ = j.value("bn_momentum", 0.99);
  net.bn_eps_ = j.value("bn_eps", 1e-5);
  int prev_out = -1;
  for (const auto& jl : j.at("layers")) {
    Layer l;
    l.in = jl.at("in").get<int>();
    l.out = jl.at("out").get<int>();
    if (l.in <= 0 || l.out <= 0) throw ValidationError("network layer: bad dimensions");
    if (prev_out >= 0 && l.in != prev_out) {
      throw ValidationError("network layers: consecutive dimensions disagree");
    }
    prev_out = l.out;
    l.w = jl.at("w").get<Vec>();
    l.b = jl.at("b").get<Vec>();
    if (l.w.size() != std::size_t(l.in) * l.out || l.b.size() != std::size_t(l.out)) {
      throw ValidationError("network layer: parameter array sizes disagree with dims");
    }
    l.batchnorm = jl.at("batchnorm").get<bool>();
    l.relu = jl.at("relu").get<bool>();
    if (l.batchnorm) {
      l.gamma = jl.at("gamma").get<Vec>();
      l.beta = jl.at("beta").get<Vec>();
      l.running_mean = jl.at("running_mean").get<Vec>();
      l.running_var = jl.at("running_var").get<Vec>();
      const std::size_t expect = std::size_t(l.out);
      if (l.gamma.size() != expect || l.beta.size() != expect ||
          l.running_mean.size() != expect || l.running_var.size() != expect) {
        throw ValidationError("network layer: normalization array sizes disagree");
      }
      for (double v : l.running_var) {
        if (!(v > 0.0)) throw ValidationError("network layer: running_var must be > 0");
      }
    }
    net.layers_.push_back(std::move(l));
  }
  if (net.layers_.empty()) throw ValidationError("network checkpoint: no layers");
  return net;
}

void Adam::step(NeuralNet& net, const Gradients& grads) {
  auto params = net.parameter_pointers();
  const Vec g = grads.flatten();
  if (g.size() != params.size()) throw ValidationError("gradient/parameter shape mismatch");
  if (m_.empty()) {
    m_.assign(params.size(), 0.0);
    v_.assign(params.size(), 0.0);
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g[i] * g[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    *params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
  }
}

}  // namespace rsplan
