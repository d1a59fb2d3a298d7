#pragma once

// A shared trunk feeding two heads: a regression head producing (dx, dy) and
// an activity head producing two class logits.

#include <cstdint>
#include <string>
#include <vector>

#include "ipt/core/error.hpp"
#include "ipt/nn/layers.hpp"
#include "ipt/nn/random.hpp"
#include "ipt/nn/tensor.hpp"

namespace ipt::nn {

struct NetworkSpec {
  Shape input_shape;
  std::vector<LayerSpec> trunk;
  std::vector<LayerSpec> regression_head;
  std::vector<LayerSpec> activity_head;  // logits; softmax is applied by the loss and by inference

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct NetworkOutput {
  Tensor regression;
  Tensor logits;
};

struct NetworkCache {
  std::vector<LayerCache> layers;
};

class Network {
 public:
  Network() = default;

  /// Builds all layers and initializes parameters from `seed`. Layers are
  /// numbered trunk first, then regression head, then activity head; shape
  /// errors name that index.
  Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)), seed_(seed) {
    if (spec_.input_shape.empty() || shape_size(spec_.input_shape) == 0) fail(Errc::config, "network input shape is empty");
    if (spec_.regression_head.empty() || spec_.activity_head.empty()) fail(Errc::config, "both heads need at least one layer");
    Rng rng(seed);
    Shape shape = spec_.input_shape;
    for (const auto& s : spec_.trunk) {
      layers_.push_back(make_layer(s, shape, rng, layers_.size()));
      shape = layers_.back().output_shape;
    }
    trunk_out_ = shape;
    for (const auto* head : {&spec_.regression_head, &spec_.activity_head}) {
      Shape hs = trunk_out_;
      for (const auto& s : *head) {
        layers_.push_back(make_layer(s, hs, rng, layers_.size()));
        hs = layers_.back().output_shape;
      }
      if (hs != Shape{2}) fail(Errc::config, "each head must produce 2 outputs, got " + shape_string(hs));
    }
    std::size_t offset = 0;
    for (const auto& l : layers_) {
      param_offset_.push_back(offset);
      offset += l.params.size();
    }
    param_offset_.push_back(offset);
  }

  const NetworkSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  NetworkOutput forward(const Tensor& input, NetworkCache& cache, const ForwardContext& ctx = {}) const {
    cache.layers.assign(layers_.size(), {});
    Tensor x = input;
    if (x.shape() != spec_.input_shape && x.size() == shape_size(spec_.input_shape)) x.reshape(spec_.input_shape);
    const std::size_t nt = spec_.trunk.size();
    for (std::size_t i = 0; i < nt; ++i) x = layer_forward(layers_[i], x, cache.layers[i], ctx, i);
    NetworkOutput out;
    out.regression = run_range(x, nt, nt + spec_.regression_head.size(), cache, ctx);
    out.logits = run_range(x, nt + spec_.regression_head.size(), layers_.size(), cache, ctx);
    return out;
  }

  NetworkOutput predict(const Tensor& input) const {
    NetworkCache cache;
    return forward(input, cache, {});
  }

  /// Accumulates parameter gradients into `grads` (layout of parameters())
  /// and returns the gradient with respect to the input.
  Tensor backward(const NetworkCache& cache, const Tensor& d_regression, const Tensor& d_logits,
                  std::vector<Tensor>& grads) const {
    if (cache.layers.size() != layers_.size()) fail(Errc::stale_cache, "cache was produced by a different network");
    if (grads.size() != param_offset_.back()) fail(Errc::shape, "gradient list does not match the network");
    const std::size_t nt = spec_.trunk.size();
    const std::size_t nr = spec_.regression_head.size();
    Tensor d_trunk = back_range(d_regression, nt, nt + nr, cache, grads);
    d_trunk += back_range(d_logits, nt + nr, layers_.size(), cache, grads);
    return back_range(d_trunk, 0, nt, cache, grads);
  }

  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> out;
    for (auto& l : layers_)
      for (auto& p : l.params) out.push_back(&p);
    return out;
  }
  std::vector<const Tensor*> parameters() const {
    std::vector<const Tensor*> out;
    for (const auto& l : layers_)
      for (const auto& p : l.params) out.push_back(&p);
    return out;
  }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      for (std::size_t k = 0; k < layers_[i].params.size(); ++k)
        out.push_back(std::to_string(i) + ":" + std::string(layer_kind_name(layers_[i].spec.kind)) + "/" +
                      std::to_string(k));
    return out;
  }

  std::vector<Tensor> zero_gradients() const {
    std::vector<Tensor> out;
    for (const auto& l : layers_)
      for (const auto& p : l.params) out.push_back(zeros_like(p));
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_)
      for (const auto& p : l.params) n += p.size();
    return n;
  }

  friend bool operator==(const Network& a, const Network& b) {
    if (!(a.spec_ == b.spec_) || a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t i = 0; i < a.layers_.size(); ++i)
      if (a.layers_[i].params != b.layers_[i].params) return false;
    return true;
  }

 private:
  Tensor run_range(Tensor x, std::size_t begin, std::size_t end, NetworkCache& cache, const ForwardContext& ctx) const {
    for (std::size_t i = begin; i < end; ++i) x = layer_forward(layers_[i], x, cache.layers[i], ctx, i);
    return x;
  }

  Tensor back_range(Tensor g, std::size_t begin, std::size_t end, const NetworkCache& cache,
                    std::vector<Tensor>& grads) const {
    for (std::size_t i = end; i-- > begin;) {
      std::span<Tensor> slots(grads.data() + param_offset_[i], layers_[i].params.size());
      g = layer_backward(layers_[i], g, cache.layers[i], slots, i);
    }
    return g;
  }

  NetworkSpec spec_;
  std::uint64_t seed_ = 0;
  std::vector<Layer> layers_;
  std::vector<std::size_t> param_offset_;
  Shape trunk_out_;
};

}  // namespace ipt::nn
