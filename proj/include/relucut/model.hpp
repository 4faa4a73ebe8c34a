#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace relucut {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Thrown for malformed input files and inconsistent instance data.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Layer {
  Mat weights;  // d(i) x d(i-1)
  Vec bias;     // d(i)
};

/// Feed-forward network of affine layers with elementwise ReLU between them.
/// Layer L (the last one) is purely affine; after canonicalization it has a
/// single output row so the network computes a scalar objective.
class ReluNetwork {
 public:
  explicit ReluNetwork(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ParseError("network has no layers");
    for (size_t i = 0; i < layers_.size(); ++i) {
      const Layer& l = layers_[i];
      if (l.weights.rows() == 0 || l.weights.cols() == 0)
        throw ParseError("layer " + std::to_string(i + 1) + " has an empty weight matrix");
      if (l.bias.size() != l.weights.rows())
        throw ParseError("layer " + std::to_string(i + 1) + ": bias length " +
                         std::to_string(l.bias.size()) + " does not match " +
                         std::to_string(l.weights.rows()) + " rows");
      if (i > 0 && l.weights.cols() != layers_[i - 1].weights.rows())
        throw ParseError("dimension mismatch at layer " + std::to_string(i + 1) + ": expected " +
                         std::to_string(layers_[i - 1].weights.rows()) + " inputs, got " +
                         std::to_string(l.weights.cols()));
      if (!l.weights.allFinite() || !l.bias.allFinite())
        throw ParseError("layer " + std::to_string(i + 1) + " contains non-finite values");
    }
  }

  int layer_count() const { return static_cast<int>(layers_.size()); }
  int input_dim() const { return static_cast<int>(layers_.front().weights.cols()); }
  int output_dim() const { return static_cast<int>(layers_.back().weights.rows()); }
  /// Width d(i) of layer i, 1-based; layer 0 is the input.
  int width(int i) const {
    return i == 0 ? input_dim() : static_cast<int>(layers_[i - 1].weights.rows());
  }
  const Layer& layer(int i) const { return layers_[i - 1]; }  // 1-based
  bool scalar_output() const { return output_dim() == 1; }

 private:
  std::vector<Layer> layers_;
};

/// ℓ∞ ball around `center` of radius `radius`.
struct InputSpec {
  Vec center;
  double radius = 0.0;

  void validate(const ReluNetwork& net) const {
    if (center.size() != net.input_dim())
      throw ParseError("input center has length " + std::to_string(center.size()) +
                       ", network expects " + std::to_string(net.input_dim()));
    if (!center.allFinite() || !std::isfinite(radius))
      throw ParseError("input specification contains non-finite values");
    if (radius < 0) throw ParseError("input radius must be nonnegative");
  }
};

/// Property "min over the ball of c^T outputs + c0 >= 0".
struct PropertySpec {
  Vec c;
  double c0 = 0.0;

  void validate(const ReluNetwork& net) const {
    if (c.size() != net.output_dim())
      throw ParseError("property row has length " + std::to_string(c.size()) +
                       ", network has " + std::to_string(net.output_dim()) + " outputs");
    if (!c.allFinite() || !std::isfinite(c0))
      throw ParseError("property specification contains non-finite values");
  }
};

/// Full forward pass; ReLU after layers 1..L-1, none after layer L.
inline Vec forward_outputs(const ReluNetwork& net, const Vec& x) {
  if (x.size() != net.input_dim())
    throw std::invalid_argument("input has length " + std::to_string(x.size()) +
                                ", network expects " + std::to_string(net.input_dim()));
  Vec v = x;
  const int L = net.layer_count();
  for (int i = 1; i <= L; ++i) {
    v = net.layer(i).weights * v + net.layer(i).bias;
    if (i < L) v = v.cwiseMax(0.0);
  }
  return v;
}

/// Pre-activation vector of layer i along the forward pass.
inline Vec preactivation(const ReluNetwork& net, const Vec& x, int target_layer) {
  Vec v = x;
  for (int i = 1; i <= target_layer; ++i) {
    v = net.layer(i).weights * v + net.layer(i).bias;
    if (i < target_layer) v = v.cwiseMax(0.0);
  }
  return v;
}

/// Scalar objective of a canonical network.
inline double evaluate(const ReluNetwork& net, const Vec& x) {
  if (!net.scalar_output())
    throw std::invalid_argument("evaluate requires a canonical single-output network");
  return forward_outputs(net, x)(0);
}

/// Folds the property row into the final layer: the result computes
/// c^T f(x) + c0 with a single output neuron.
inline ReluNetwork canonicalize(const ReluNetwork& net, const PropertySpec& prop) {
  prop.validate(net);
  std::vector<Layer> layers;
  layers.reserve(net.layer_count());
  for (int i = 1; i < net.layer_count(); ++i) layers.push_back(net.layer(i));
  const Layer& last = net.layer(net.layer_count());
  Layer folded;
  folded.weights = prop.c.transpose() * last.weights;
  folded.bias = Vec::Constant(1, prop.c.dot(last.bias) + prop.c0);
  layers.push_back(std::move(folded));
  return ReluNetwork(std::move(layers));
}

}  // namespace relucut
