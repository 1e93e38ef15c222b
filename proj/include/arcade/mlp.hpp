#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "arcade/error.hpp"
#include "arcade/rng.hpp"

namespace arcade {

/// Fully connected network: tanh hidden layers, linear output. Inputs and
/// outputs are column-batched (features x batch).
class Mlp {
 public:
  struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
  };

  // Activations kept from the forward pass for backprop.
  struct Cache {
    std::vector<Eigen::MatrixXd> activations;  // activations[0] is the input
  };

  Mlp() = default;

  Mlp(std::vector<int> sizes, Rng& rng) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw ConfigError("MLP needs at least input and output sizes");
    for (int s : sizes_) {
      if (s < 1) throw ConfigError("MLP layer sizes must be >= 1");
    }
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const int in = sizes_[l], out = sizes_[l + 1];
      // Glorot uniform.
      const double bound = std::sqrt(6.0 / (in + out));
      std::uniform_real_distribution<double> u(-bound, bound);
      Eigen::MatrixXd w(out, in);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
      weights_.push_back(std::move(w));
      biases_.push_back(Eigen::VectorXd::Zero(out));
    }
  }

  const std::vector<int>& sizes() const noexcept { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t layer_count() const noexcept { return weights_.size(); }

  std::vector<Eigen::MatrixXd>& weights() noexcept { return weights_; }
  std::vector<Eigen::VectorXd>& biases() noexcept { return biases_; }
  const std::vector<Eigen::MatrixXd>& weights() const noexcept { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const noexcept { return biases_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Cache* cache = nullptr) const {
    if (input.rows() != input_size()) throw DimensionError("MLP input has the wrong feature count");
    Eigen::MatrixXd a = input;
    if (cache) {
      cache->activations.clear();
      cache->activations.push_back(a);
    }
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Eigen::MatrixXd z = weights_[l] * a;
      z.colwise() += biases_[l];
      if (l + 1 < weights_.size()) z = z.array().tanh();
      a = std::move(z);
      if (cache) cache->activations.push_back(a);
    }
    return a;
  }

  /// Parameter gradients given dLoss/dOutput for the cached batch.
  Gradients backward(const Cache& cache, const Eigen::MatrixXd& grad_output) const {
    Gradients g;
    g.weights.resize(weights_.size());
    g.biases.resize(biases_.size());
    Eigen::MatrixXd delta = grad_output;
    for (std::size_t l = weights_.size(); l-- > 0;) {
      const auto& a_in = cache.activations[l];
      g.weights[l] = delta * a_in.transpose();
      g.biases[l] = delta.rowwise().sum();
      if (l > 0) {
        // a_in = tanh(z) for hidden layers, so dtanh = 1 - a_in^2.
        delta = (weights_[l].transpose() * delta).array() * (1.0 - a_in.array().square());
      }
    }
    return g;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
    return n;
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      out.insert(out.end(), weights_[l].data(), weights_[l].data() + weights_[l].size());
      out.insert(out.end(), biases_[l].data(), biases_[l].data() + biases_[l].size());
    }
    return out;
  }

  static std::vector<double> flatten(const Gradients& g) {
    std::vector<double> out;
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
      out.insert(out.end(), g.weights[l].data(), g.weights[l].data() + g.weights[l].size());
      out.insert(out.end(), g.biases[l].data(), g.biases[l].data() + g.biases[l].size());
    }
    return out;
  }

  void assign(const std::vector<double>& params) {
    if (params.size() != parameter_count()) throw DimensionError("parameter array does not match MLP topology");
    std::size_t k = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      for (Eigen::Index i = 0; i < weights_[l].size(); ++i) weights_[l].data()[i] = params[k++];
      for (Eigen::Index i = 0; i < biases_[l].size(); ++i) biases_[l].data()[i] = params[k++];
    }
  }

  static Mlp with_topology(std::vector<int> sizes) {
    Rng rng(0);
    return Mlp(std::move(sizes), rng);
  }

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

/// Adaptive-moment optimizer state for one network.
class Adam {
 public:
  struct Options {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  Adam() = default;
  Adam(const Mlp& net, Options opt) : opt_(opt) {
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      mw_.push_back(Eigen::MatrixXd::Zero(net.weights()[l].rows(), net.weights()[l].cols()));
      vw_.push_back(mw_.back());
      mb_.push_back(Eigen::VectorXd::Zero(net.biases()[l].size()));
      vb_.push_back(mb_.back());
    }
  }

  void step(Mlp& net, const Mlp::Gradients& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      update(net.weights()[l], mw_[l], vw_[l], g.weights[l], c1, c2);
      update(net.biases()[l], mb_[l], vb_[l], g.biases[l], c1, c2);
    }
  }

 private:
  template <typename P, typename G>
  void update(P& param, P& m, P& v, const G& grad, double c1, double c2) const {
    m = opt_.beta1 * m + (1.0 - opt_.beta1) * grad;
    v = opt_.beta2 * v + (1.0 - opt_.beta2) * grad.cwiseProduct(grad);
    param.array() -= opt_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + opt_.epsilon);
  }

  Options opt_{};
  long t_ = 0;
  std::vector<Eigen::MatrixXd> mw_, vw_;
  std::vector<Eigen::VectorXd> mb_, vb_;
};

inline void sgd_step(Mlp& net, const Mlp::Gradients& g, double learning_rate) {
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    net.weights()[l] -= learning_rate * g.weights[l];
    net.biases()[l] -= learning_rate * g.biases[l];
  }
}

}  // namespace arcade
