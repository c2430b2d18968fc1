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

#include "adanpc/encoder.hpp"

#include <cmath>
#include <random>

#include "adanpc/error.hpp"

namespace adanpc {

std::size_t EncoderParams::input_dim() const {
  if (layers.empty()) throw Error(ErrorCode::kShapeMismatch, "encoder has no layers");
  return static_cast<std::size_t>(layers.front().weight.rows());
}

std::size_t EncoderParams::feature_dim() const {
  if (layers.empty()) throw Error(ErrorCode::kShapeMismatch, "encoder has no layers");
  return static_cast<std::size_t>(layers.back().weight.cols());
}

void EncoderParams::validate() const {
  if (layers.empty()) throw Error(ErrorCode::kShapeMismatch, "encoder has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.bias.size() != layer.weight.cols()) {
      throw Error(ErrorCode::kShapeMismatch, "bias length of layer " + std::to_string(l));
    }
    if (l > 0 && layer.weight.rows() != layers[l - 1].weight.cols()) {
      throw Error(ErrorCode::kShapeMismatch, "layer " + std::to_string(l) + " does not chain");
    }
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw Error(ErrorCode::kShapeMismatch, "non-finite weights in layer " + std::to_string(l));
    }
  }
  if (bn && bn->dim() != feature_dim()) {
    throw Error(ErrorCode::kShapeMismatch, "BN layer dim differs from feature dim");
  }
}

EncoderParams make_encoder(const std::vector<std::size_t>& dims, std::uint64_t seed) {
  if (dims.size() < 2) throw Error(ErrorCode::kBadParams, "encoder needs at least two dims");
  std::mt19937_64 rng(seed);
  EncoderParams p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    auto in = static_cast<Eigen::Index>(dims[l]);
    auto out = static_cast<Eigen::Index>(dims[l + 1]);
    std::normal_distribution<double> init(0.0, std::sqrt(2.0 / static_cast<double>(in)));
    DenseLayer layer{Eigen::MatrixXd(in, out), Eigen::VectorXd::Zero(out)};
    for (Eigen::Index c = 0; c < out; ++c) {
      for (Eigen::Index r = 0; r < in; ++r) layer.weight(r, c) = init(rng);
    }
    p.layers.push_back(std::move(layer));
  }
  return p;
}

EncoderParams identity_encoder(std::size_t dim) {
  auto n = static_cast<Eigen::Index>(dim);
  EncoderParams p;
  p.layers.push_back({Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n)});
  return p;
}

ForwardCache encoder_forward_cached(const EncoderParams& params, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != params.input_dim()) {
    throw Error(ErrorCode::kDimMismatch, "encoder input has length " + std::to_string(x.size()) +
                                             ", expected " + std::to_string(params.input_dim()));
  }
  ForwardCache cache;
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    cache.inputs.push_back(a);
    Eigen::VectorXd z = layer.weight.transpose() * a + layer.bias;
    cache.pre_activations.push_back(z);
    a = (l + 1 < params.layers.size()) ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
  }
  cache.output = params.bn ? bn_forward_eval(*params.bn, a) : a;
  return cache;
}

Eigen::VectorXd encoder_forward(const EncoderParams& params, const Eigen::VectorXd& x) {
  return encoder_forward_cached(params, x).output;
}

void encoder_backward(const EncoderParams& params, const ForwardCache& cache,
                      const Eigen::VectorXd& grad_output, LayerTensors& grads) {
  Eigen::VectorXd g = grad_output;
  if (params.bn) {
    const BnLayer& bn = *params.bn;
    g = (g.array() * bn.gamma.array() / (bn.running_var.array() + bn.eps).sqrt()).matrix();
  }
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    if (l + 1 < params.layers.size()) {
      const Eigen::VectorXd& z = cache.pre_activations[l];
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        if (z(i) <= 0.0) g(i) = 0.0;
      }
    }
    grads[l].weight.noalias() += cache.inputs[l] * g.transpose();
    grads[l].bias += g;
    if (l > 0) g = params.layers[l].weight * g;
  }
}

LayerTensors zeros_like(const EncoderParams& params) {
  LayerTensors out;
  for (const auto& layer : params.layers) {
    out.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                   Eigen::VectorXd::Zero(layer.bias.size())});
  }
  return out;
}

std::vector<float> to_float(const Eigen::VectorXd& v) {
  std::vector<float> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(v(i));
  return out;
}

Eigen::VectorXd to_double(std::span<const float> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

namespace {

nlohmann::json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vec_from(const nlohmann::json& j) {
  auto v = j.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json encoder_to_json(const EncoderParams& params) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : params.layers) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      rows.push_back(vec_json(layer.weight.row(r).transpose()));
    }
    layers.push_back({{"weight", rows}, {"bias", vec_json(layer.bias)}});
  }
  nlohmann::json j = {{"layers", layers}};
  if (params.bn) {
    j["bn"] = {{"gamma", vec_json(params.bn->gamma)},
               {"beta", vec_json(params.bn->beta)},
               {"running_mean", vec_json(params.bn->running_mean)},
               {"running_var", vec_json(params.bn->running_var)},
               {"momentum", params.bn->momentum},
               {"eps", params.bn->eps}};
  }
  return j;
}

EncoderParams encoder_from_json(const nlohmann::json& j) {
  EncoderParams p;
  try {
    for (const auto& lj : j.at("layers")) {
      const auto& rows = lj.at("weight");
      DenseLayer layer;
      layer.bias = vec_from(lj.at("bias"));
      layer.weight.resize(static_cast<Eigen::Index>(rows.size()), layer.bias.size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        Eigen::VectorXd row = vec_from(rows[r]);
        if (row.size() != layer.bias.size()) {
          throw Error(ErrorCode::kShapeMismatch, "ragged weight matrix");
        }
        layer.weight.row(static_cast<Eigen::Index>(r)) = row.transpose();
      }
      p.layers.push_back(std::move(layer));
    }
    if (j.contains("bn")) {
      const auto& b = j.at("bn");
      BnLayer bn;
      bn.gamma = vec_from(b.at("gamma"));
      bn.beta = vec_from(b.at("beta"));
      bn.running_mean = vec_from(b.at("running_mean"));
      bn.running_var = vec_from(b.at("running_var"));
      bn.momentum = b.value("momentum", 0.1);
      bn.eps = b.value("eps", 1e-5);
      p.bn = std::move(bn);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBadParams, std::string("encoder json: ") + e.what());
  }
  p.validate();
  return p;
}

}  // namespace adanpc
