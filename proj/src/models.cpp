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

#include "artery/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "artery/error.hpp"

namespace artery::nn {

namespace {

constexpr std::string_view kCheckpointFormat = "artery-checkpoint";
constexpr int kCheckpointVersion = 1;

Matrix glorot(int fan_in, int fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(fan_in, fan_out);
  for (ad::Index i = 0; i < m.rows(); ++i)
    for (ad::Index j = 0; j < m.cols(); ++j) m(i, j) = dist(rng);
  return m;
}

Matrix zeros_row(int n) { return Matrix::Zero(1, n); }

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::GCN: return "gcn";
    case Variant::GAT: return "gat";
    case Variant::GIN: return "gin";
    case Variant::SAGE: return "sage";
  }
  return "?";
}

std::string_view variant_label(Variant v) {
  switch (v) {
    case Variant::GCN: return "GCN";
    case Variant::GAT: return "GAT";
    case Variant::GIN: return "GIN";
    case Variant::SAGE: return "GraphSAGE";
  }
  return "?";
}

std::optional<Variant> parse_variant(std::string_view name) {
  for (Variant v : kAllVariants)
    if (variant_name(v) == name) return v;
  if (name == "graphsage") return Variant::SAGE;
  return std::nullopt;
}

void ModelConfig::validate() const {
  if (in_dim <= 0 || hidden_dim <= 0) throw std::invalid_argument("model dims must be positive");
  if (num_classes != 11 && num_classes != 13) throw std::invalid_argument("num_classes must be 11 or 13");
  if (gat_hidden_heads <= 0 || gat_output_heads <= 0) throw std::invalid_argument("GAT heads must be positive");
  if (sage_sample_size < 0) throw std::invalid_argument("sage_sample_size must be >= 0");
  if (!(leaky_slope >= 0.0)) throw std::invalid_argument("leaky_slope must be >= 0");
}

nlohmann::ordered_json to_json(const ModelConfig& cfg) {
  nlohmann::ordered_json j;
  j["variant"] = variant_name(cfg.variant);
  j["in_dim"] = cfg.in_dim;
  j["hidden_dim"] = cfg.hidden_dim;
  j["num_classes"] = cfg.num_classes;
  j["gat_hidden_heads"] = cfg.gat_hidden_heads;
  j["gat_output_heads"] = cfg.gat_output_heads;
  j["gin_eps"] = cfg.gin_eps;
  j["gin_learn_eps"] = cfg.gin_learn_eps;
  j["leaky_slope"] = cfg.leaky_slope;
  j["sage_sample_size"] = cfg.sage_sample_size;
  j["seed"] = cfg.seed;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::ordered_json& j) {
  ModelConfig cfg;
  const auto v = parse_variant(j.at("variant").get<std::string>());
  if (!v) throw ValidationError("unknown model variant in config");
  cfg.variant = *v;
  cfg.in_dim = j.at("in_dim").get<int>();
  cfg.hidden_dim = j.at("hidden_dim").get<int>();
  cfg.num_classes = j.at("num_classes").get<int>();
  cfg.gat_hidden_heads = j.value("gat_hidden_heads", cfg.gat_hidden_heads);
  cfg.gat_output_heads = j.value("gat_output_heads", cfg.gat_output_heads);
  cfg.gin_eps = j.value("gin_eps", cfg.gin_eps);
  cfg.gin_learn_eps = j.value("gin_learn_eps", cfg.gin_learn_eps);
  cfg.leaky_slope = j.value("leaky_slope", cfg.leaky_slope);
  cfg.sage_sample_size = j.value("sage_sample_size", cfg.sage_sample_size);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.validate();
  return cfg;
}

GraphInput GraphInput::from_dense(Matrix features, const Eigen::MatrixXi& adjacency) {
  if (adjacency.rows() != features.rows() || adjacency.cols() != features.rows())
    throw std::invalid_argument("adjacency does not match feature rows");
  GraphInput g;
  g.features = std::move(features);
  g.with_self = ad::Neighborhoods::from_adjacency(adjacency, true);
  g.neighbors = ad::Neighborhoods::from_adjacency(adjacency, false);
  std::vector<double> degree(g.with_self.num_rows());
  for (std::size_t i = 0; i < degree.size(); ++i)
    degree[i] = static_cast<double>(g.with_self.row(i).size());
  g.gcn_weights.resize(static_cast<ad::Index>(g.with_self.num_entries()), 1);
  for (std::size_t i = 0; i < degree.size(); ++i)
    for (std::size_t k = g.with_self.offsets[i]; k < g.with_self.offsets[i + 1]; ++k)
      g.gcn_weights(static_cast<ad::Index>(k), 0) = 1.0 / std::sqrt(degree[i] * degree[g.with_self.indices[k]]);
  return g;
}

GraphInput GraphInput::from_graphs(std::span<const SegmentGraph* const> graphs) {
  ad::Index n = 0;
  ad::Index d = -1;
  for (const SegmentGraph* sg : graphs) {
    n += sg->node_features.rows();
    if (d < 0) d = sg->node_features.cols();
    if (sg->node_features.cols() != d) throw std::invalid_argument("graphs differ in feature width");
  }
  Matrix features(n, std::max<ad::Index>(d, 0));
  Eigen::MatrixXi adjacency = Eigen::MatrixXi::Zero(n, n);
  ad::Index at = 0;
  for (const SegmentGraph* sg : graphs) {
    const ad::Index k = sg->node_features.rows();
    features.middleRows(at, k) = sg->node_features;
    adjacency.block(at, at, k, k) = sg->adjacency;
    at += k;
  }
  return from_dense(std::move(features), adjacency);
}

ad::Neighborhoods sample_neighbors(const ad::Neighborhoods& nb, std::size_t k, std::mt19937_64& rng) {
  if (k == 0) return nb;
  ad::Neighborhoods out;
  for (std::size_t i = 0; i < nb.num_rows(); ++i) {
    const auto row = nb.row(i);
    if (row.size() <= k) {
      out.indices.insert(out.indices.end(), row.begin(), row.end());
    } else {
      std::vector<std::size_t> pick(row.begin(), row.end());
      for (std::size_t a = 0; a < k; ++a) {
        std::uniform_int_distribution<std::size_t> dist(a, pick.size() - 1);
        std::swap(pick[a], pick[dist(rng)]);
      }
      pick.resize(k);
      std::sort(pick.begin(), pick.end());
      out.indices.insert(out.indices.end(), pick.begin(), pick.end());
    }
    out.offsets.push_back(out.indices.size());
  }
  return out;
}

Tensor gcn_layer(const Tensor& h, const GraphInput& g, const Tensor& w, const Tensor& b, bool activate) {
  ad::Tape& tape = *h.tape();
  const Tensor weights = tape.constant(g.gcn_weights);
  Tensor out = add_row(ad::weighted_sum_pool(ad::matmul(h, w), g.with_self, weights), b);
  return activate ? ad::relu(out) : out;
}

GatOutput gat_layer(const Tensor& h, const GraphInput& g, std::span<const GatHead> heads, const Tensor& b,
                    double slope, bool activate) {
  if (heads.empty()) throw std::invalid_argument("gat_layer: no heads");
  GatOutput result;
  Tensor concat;
  for (const GatHead& head : heads) {
    const Tensor z = ad::matmul(h, head.w);
    const Tensor scores = ad::edge_pair_sum(ad::matmul(z, head.att_self), ad::matmul(z, head.att_nbr), g.with_self);
    const Tensor alpha = ad::segment_softmax(ad::leaky_relu(scores, slope), g.with_self);
    const Tensor out = ad::weighted_sum_pool(z, g.with_self, alpha);
    result.attention.push_back(alpha);
    concat = concat.valid() ? ad::concat_cols(concat, out) : out;
  }
  Tensor out = ad::add_row(concat, b);
  result.h = activate ? ad::relu(out) : out;
  return result;
}

Tensor gin_layer(const Tensor& h, const GraphInput& g, const Tensor& eps, const GinMlp& mlp) {
  const Tensor self = ad::add(h, ad::scale_by(h, eps));
  const Tensor agg = ad::add(self, ad::row_sum_pool(h, g.neighbors));
  const Tensor hidden = ad::relu(ad::add_row(ad::matmul(agg, mlp.w1), mlp.b1));
  return ad::add_row(ad::matmul(hidden, mlp.w2), mlp.b2);
}

Tensor sage_layer(const Tensor& h, const ad::Neighborhoods& neighbors, const Tensor& w_pool,
                  const Tensor& b_pool, const Tensor& w_out, const Tensor& b_out, bool activate) {
  const Tensor pooled_in = ad::relu(ad::add_row(ad::matmul(h, w_pool), b_pool));
  const Tensor agg = ad::row_max_pool(pooled_in, neighbors);
  Tensor out = ad::add_row(ad::matmul(ad::concat_cols(h, agg), w_out), b_out);
  if (activate) out = ad::relu(out);
  return ad::l2_normalize_rows(out);
}

Model::Model(ModelConfig cfg) : config_(cfg) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  const int in = config_.in_dim;
  const int hid = config_.hidden_dim;
  auto add = [this](std::string name, Matrix value) { params_.push_back({std::move(name), std::move(value)}); };

  int layer_in = in;
  for (int layer = 1; layer <= 2; ++layer) {
    const std::string p = "layer" + std::to_string(layer) + ".";
    switch (config_.variant) {
      case Variant::GCN:
        add(p + "W", glorot(layer_in, hid, rng));
        add(p + "b", zeros_row(hid));
        layer_in = hid;
        break;
      case Variant::GAT: {
        const int heads = layer == 1 ? config_.gat_hidden_heads : config_.gat_output_heads;
        for (int k = 0; k < heads; ++k) {
          const std::string hp = p + "head" + std::to_string(k) + ".";
          add(hp + "W", glorot(layer_in, hid, rng));
          add(hp + "att_self", glorot(hid, 1, rng));
          add(hp + "att_nbr", glorot(hid, 1, rng));
        }
        add(p + "b", zeros_row(heads * hid));
        layer_in = heads * hid;
        break;
      }
      case Variant::GIN:
        add(p + "eps", Matrix::Constant(1, 1, config_.gin_eps));
        add(p + "W1", glorot(layer_in, hid, rng));
        add(p + "b1", zeros_row(hid));
        add(p + "W2", glorot(hid, hid, rng));
        add(p + "b2", zeros_row(hid));
        layer_in = hid;
        break;
      case Variant::SAGE:
        add(p + "W_pool", glorot(layer_in, hid, rng));
        add(p + "b_pool", zeros_row(hid));
        add(p + "W_out", glorot(layer_in + hid, hid, rng));
        add(p + "b_out", zeros_row(hid));
        layer_in = hid;
        break;
    }
  }
  add("head.W", glorot(layer_in, config_.num_classes, rng));
  add("head.b", zeros_row(config_.num_classes));
}

Model::Model(ModelConfig cfg, std::vector<NamedParam> params) : Model(cfg) {
  if (params.size() != params_.size())
    throw ValidationError("checkpoint has " + std::to_string(params.size()) + " tensors, config expects " +
                          std::to_string(params_.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != params_[i].name || params[i].value.rows() != params_[i].value.rows() ||
        params[i].value.cols() != params_[i].value.cols())
      throw ValidationError("checkpoint tensor '" + params[i].name + "' does not match config");
    params_[i].value = std::move(params[i].value);
  }
}

const Matrix& Model::param(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.value;
  throw std::out_of_range("no parameter named " + std::string(name));
}

Matrix& Model::param(std::string_view name) {
  return const_cast<Matrix&>(static_cast<const Model&>(*this).param(name));
}

Model::Forward Model::forward(ad::Tape& tape, const GraphInput& g, bool trainable,
                              const ad::Neighborhoods* neighbors_override) const {
  if (g.features.cols() != config_.in_dim)
    throw std::invalid_argument("feature width " + std::to_string(g.features.cols()) + " != model in_dim " +
                                std::to_string(config_.in_dim));
  Forward fwd;
  for (const auto& p : params_) {
    const bool learn = trainable && !(config_.variant == Variant::GIN && !config_.gin_learn_eps &&
                                      p.name.ends_with(".eps"));
    fwd.leaves.push_back(tape.leaf(p.value, learn));
  }
  auto leaf = [&](std::string_view name) -> const Tensor& {
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (params_[i].name == name) return fwd.leaves[i];
    throw std::out_of_range("no parameter named " + std::string(name));
  };
  const ad::Neighborhoods& nbrs = neighbors_override ? *neighbors_override : g.neighbors;

  Tensor h = tape.constant(g.features);
  for (int layer = 1; layer <= 2; ++layer) {
    const std::string p = "layer" + std::to_string(layer) + ".";
    const bool hidden = layer == 1;
    switch (config_.variant) {
      case Variant::GCN:
        h = gcn_layer(h, g, leaf(p + "W"), leaf(p + "b"), hidden);
        break;
      case Variant::GAT: {
        const int n_heads = hidden ? config_.gat_hidden_heads : config_.gat_output_heads;
        std::vector<GatHead> heads;
        for (int k = 0; k < n_heads; ++k) {
          const std::string hp = p + "head" + std::to_string(k) + ".";
          heads.push_back({leaf(hp + "W"), leaf(hp + "att_self"), leaf(hp + "att_nbr")});
        }
        h = gat_layer(h, g, heads, leaf(p + "b"), config_.leaky_slope, hidden).h;
        break;
      }
      case Variant::GIN:
        h = gin_layer(h, g, leaf(p + "eps"), {leaf(p + "W1"), leaf(p + "b1"), leaf(p + "W2"), leaf(p + "b2")});
        if (hidden) h = ad::relu(h);
        break;
      case Variant::SAGE:
        h = sage_layer(h, nbrs, leaf(p + "W_pool"), leaf(p + "b_pool"), leaf(p + "W_out"), leaf(p + "b_out"),
                       hidden);
        break;
    }
  }
  fwd.logits = ad::add_row(ad::matmul(h, leaf("head.W")), leaf("head.b"));
  return fwd;
}

Matrix Model::logits(const GraphInput& g) const {
  ad::Tape tape;
  return forward(tape, g, false).logits.value();
}

Matrix Model::logits(const SegmentGraph& g) const {
  const SegmentGraph* one[] = {&g};
  return logits(GraphInput::from_graphs(one));
}

nlohmann::ordered_json checkpoint_to_json(const Model& model) {
  nlohmann::ordered_json doc;
  doc["format"] = kCheckpointFormat;
  doc["version"] = kCheckpointVersion;
  doc["config"] = to_json(model.config());
  auto params = nlohmann::ordered_json::array();
  for (const auto& p : model.params()) {
    nlohmann::ordered_json t;
    t["name"] = p.name;
    t["shape"] = {p.value.rows(), p.value.cols()};
    t["data"] = std::vector<double>(p.value.data(), p.value.data() + p.value.size());
    params.push_back(std::move(t));
  }
  doc["params"] = std::move(params);
  return doc;
}

Model checkpoint_from_json(const nlohmann::ordered_json& doc) {
  try {
    if (doc.at("format").get<std::string>() != kCheckpointFormat)
      throw ValidationError("not an artery checkpoint");
    if (doc.at("version").get<int>() != kCheckpointVersion)
      throw ValidationError("unsupported checkpoint version " + doc.at("version").dump());
    const ModelConfig cfg = model_config_from_json(doc.at("config"));
    std::vector<NamedParam> params;
    for (const auto& t : doc.at("params")) {
      const auto rows = t.at("shape").at(0).get<ad::Index>();
      const auto cols = t.at("shape").at(1).get<ad::Index>();
      const auto data = t.at("data").get<std::vector<double>>();
      if (static_cast<ad::Index>(data.size()) != rows * cols)
        throw ValidationError("checkpoint tensor '" + t.at("name").get<std::string>() + "' has wrong length");
      Matrix m(rows, cols);
      std::copy(data.begin(), data.end(), m.data());
      params.push_back({t.at("name").get<std::string>(), std::move(m)});
    }
    return Model(cfg, std::move(params));
  } catch (const nlohmann::ordered_json::exception& e) {
    throw ValidationError(std::string("invalid checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << checkpoint_to_json(model).dump() << "\n";
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(ss.str());
  } catch (const nlohmann::ordered_json::parse_error& e) {
    throw ValidationError(std::string("malformed checkpoint JSON: ") + e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace artery::nn
