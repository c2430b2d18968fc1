// Copyright 2026 The adanpc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Small MLP feature encoder: dense layers with ReLU between them, no
// activation after the last, and an optional BN layer at the output.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "adanpc/bn_layer.hpp"

namespace adanpc {

struct DenseLayer {
  Eigen::MatrixXd weight;  // in_dim x out_dim
  Eigen::VectorXd bias;    // out_dim
};

/// Gradients and Adam moments share the dense-layer shapes.
using LayerTensors = std::vector<DenseLayer>;

struct EncoderParams {
  std::vector<DenseLayer> layers;
  std::optional<BnLayer> bn;

  std::size_t input_dim() const;
  std::size_t feature_dim() const;
  /// Throws ShapeMismatch unless shapes chain and values are finite.
  void validate() const;
};

/// He-initialized weights, zero biases. dims = {input, hidden..., feature}.
EncoderParams make_encoder(const std::vector<std::size_t>& dims, std::uint64_t seed);

/// One layer, weight = identity, bias = 0.
EncoderParams identity_encoder(std::size_t dim);

Eigen::VectorXd encoder_forward(const EncoderParams& params, const Eigen::VectorXd& x);

/// Forward pass that keeps what the backward pass needs.
struct ForwardCache {
  std::vector<Eigen::VectorXd> inputs;  // input to each dense layer
  std::vector<Eigen::VectorXd> pre_activations;
  Eigen::VectorXd output;
};
ForwardCache encoder_forward_cached(const EncoderParams& params, const Eigen::VectorXd& x);

/// Accumulates dL/dθ into `grads` given dL/d(output) for one sample.
void encoder_backward(const EncoderParams& params, const ForwardCache& cache,
                      const Eigen::VectorXd& grad_output, LayerTensors& grads);

LayerTensors zeros_like(const EncoderParams& params);

std::vector<float> to_float(const Eigen::VectorXd& v);
Eigen::VectorXd to_double(std::span<const float> v);

nlohmann::json encoder_to_json(const EncoderParams& params);
EncoderParams encoder_from_json(const nlohmann::json& j);

}  // namespace adanpc
