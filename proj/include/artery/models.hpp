// Copyright 2026 The artery-graph Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "artery/autodiff.hpp"
#include "artery/graph_build.hpp"

namespace artery::nn {

using ad::Matrix;
using ad::Tensor;

enum class Variant { GCN, GAT, GIN, SAGE };

inline constexpr Variant kAllVariants[] = {Variant::GCN, Variant::GAT, Variant::GIN, Variant::SAGE};

std::string_view variant_name(Variant v);  // "gcn", "gat", ...
std::string_view variant_label(Variant v); // "GCN", "GAT", "GIN", "GraphSAGE"
std::optional<Variant> parse_variant(std::string_view name);

struct ModelConfig {
  Variant variant = Variant::GCN;
  int in_dim = kEmbeddingDim;
  int hidden_dim = 64;
  int num_classes = 13;
  int gat_hidden_heads = 2;
  int gat_output_heads = 1;
  double gin_eps = 0.0;
  bool gin_learn_eps = true;
  double leaky_slope = 0.2;
  /// GraphSAGE neighbors sampled per node during training; 0 = all.
  int sage_sample_size = 0;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::ordered_json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::ordered_json& doc);

/// Graph structure prepared once per graph (or block-diagonal batch).
struct GraphInput {
  Matrix features;
  ad::Neighborhoods with_self;     // N(i) + {i}
  ad::Neighborhoods neighbors;     // N(i)
  Matrix gcn_weights;              // E x 1 over with_self: 1/sqrt(d_i d_j)

  std::size_t num_nodes() const { return static_cast<std::size_t>(features.rows()); }

  static GraphInput from_dense(Matrix features, const Eigen::MatrixXi& adjacency);
  /// Block-diagonal union; node order is graph order then node order.
  static GraphInput from_graphs(std::span<const SegmentGraph* const> graphs);
};

/// Uniformly samples up to k entries of each row (k = 0 keeps all).
ad::Neighborhoods sample_neighbors(const ad::Neighborhoods& nb, std::size_t k, std::mt19937_64& rng);

// Single layers. `activate` applies ReLU; pass false for the last layer.

Tensor gcn_layer(const Tensor& h, const GraphInput& g, const Tensor& w, const Tensor& b, bool activate);

struct GatHead {
  Tensor w;         // d x d'
  Tensor att_self;  // d' x 1, scores the receiving node
  Tensor att_nbr;   // d' x 1, scores the neighbor
};

struct GatOutput {
  Tensor h;                        // N x (heads * d')
  std::vector<Tensor> attention;   // per head, E x 1 over g.with_self
};

GatOutput gat_layer(const Tensor& h, const GraphInput& g, std::span<const GatHead> heads, const Tensor& b,
                    double slope, bool activate);

struct GinMlp {
  Tensor w1, b1, w2, b2;
};

/// MLP((1 + eps) h_i + sum_{j in N(i)} h_j); eps is 1 x 1. No outer activation.
Tensor gin_layer(const Tensor& h, const GraphInput& g, const Tensor& eps, const GinMlp& mlp);

/// agg_i = max_{j in N(i)} relu(h_j W_pool + b_pool) (zero when N(i) is empty);
/// out = l2_normalize(act(concat(h_i, agg_i) W_out + b_out)). The first d
/// rows of W_out act on h_i, the rest on agg_i.
Tensor sage_layer(const Tensor& h, const ad::Neighborhoods& neighbors, const Tensor& w_pool,
                  const Tensor& b_pool, const Tensor& w_out, const Tensor& b_out, bool activate);

struct NamedParam {
  std::string name;
  Matrix value;
};

/// Two message-passing layers of one variant followed by a linear head.
class Model {
 public:
  /// Glorot-uniform weights, zero biases, seeded by cfg.seed.
  explicit Model(ModelConfig cfg);
  Model(ModelConfig cfg, std::vector<NamedParam> params);

  const ModelConfig& config() const { return config_; }
  std::vector<NamedParam>& params() { return params_; }
  const std::vector<NamedParam>& params() const { return params_; }
  const Matrix& param(std::string_view name) const;
  Matrix& param(std::string_view name);

  struct Forward {
    Tensor logits;
    /// Leaves in params() order.
    std::vector<Tensor> leaves;
  };

  /// Records the forward pass; parameters become leaves requiring grad when
  /// `trainable`. `neighbors_override` replaces g.neighbors (GraphSAGE sampling).
  Forward forward(ad::Tape& tape, const GraphInput& g, bool trainable,
                  const ad::Neighborhoods* neighbors_override = nullptr) const;

  /// N x num_classes logits without recording gradients.
  Matrix logits(const GraphInput& g) const;
  Matrix logits(const SegmentGraph& g) const;

 private:
  ModelConfig config_;
  std::vector<NamedParam> params_;
};

/// Checkpoint JSON: {"format": "artery-checkpoint", "version": 1,
///   "config": {...}, "params": [{"name", "shape": [r, c], "data": [...]}]}
/// with row-major data.
nlohmann::ordered_json checkpoint_to_json(const Model& model);
Model checkpoint_from_json(const nlohmann::ordered_json& doc);
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace artery::nn
