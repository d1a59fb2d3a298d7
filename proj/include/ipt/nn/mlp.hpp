#pragma once

#include <span>
#include <vector>

#include "ipt/nn/layers.hpp"

namespace ipt::nn {

/// A plain layer chain, used where the two-headed Network does not fit.
struct Mlp {
  std::vector<Layer> layers;

  Mlp() = default;
  Mlp(Shape input, const std::vector<LayerSpec>& specs, Rng& rng) {
    for (const auto& s : specs) {
      layers.push_back(make_layer(s, input, rng, layers.size()));
      input = layers.back().output_shape;
    }
  }

  Tensor forward(Tensor x, std::vector<LayerCache>& caches, const ForwardContext& ctx = {}) const {
    caches.assign(layers.size(), {});
    for (std::size_t i = 0; i < layers.size(); ++i) x = layer_forward(layers[i], x, caches[i], ctx, i);
    return x;
  }

  /// `grads` holds one slot per parameter tensor in layer order.
  Tensor backward(Tensor g, const std::vector<LayerCache>& caches, std::span<Tensor> grads) const {
    std::size_t end = grads.size();
    for (std::size_t i = layers.size(); i-- > 0;) {
      const std::size_t n = layers[i].params.size();
      end -= n;
      g = layer_backward(layers[i], g, caches[i], grads.subspan(end, n), i);
    }
    return g;
  }

  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> out;
    for (auto& l : layers)
      for (auto& p : l.params) out.push_back(&p);
    return out;
  }

  std::vector<Tensor> zero_gradients() const {
    std::vector<Tensor> out;
    for (const auto& l : layers)
      for (const auto& p : l.params) out.push_back(zeros_like(p));
    return out;
  }

  friend bool operator==(const Mlp& a, const Mlp& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i)
      if (!(a.layers[i].spec == b.layers[i].spec) || a.layers[i].params != b.layers[i].params) return false;
    return true;
  }
};

}  // namespace ipt::nn
