#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fpfgnn/factor_graph.hpp"
#include "fpfgnn/nn.hpp"

namespace fpfgnn {

struct ModelConfig {
  int iterations = 4;
  int hidden = 128;
  /// Share one set of message-passing weights across all iterations.
  bool tied = false;
  nn::Aggregator aggregator = nn::Aggregator::Softmax;
  /// Factor-to-variable messages read the freshly aggregated factor
  /// embedding instead of the previous iteration's.
  bool refresh_factor = false;
  /// Add each round's aggregate to the previous embedding instead of
  /// replacing it.
  bool residual = false;
  /// Normalize every embedding row after aggregation.
  bool normalize = false;
  /// When false the readout runs directly on the projected input features.
  bool message_passing = true;
  /// Layers per message MLP (first layer acts on the concatenated input).
  int mlp_depth = 2;
  nn::Precision precision = nn::Precision::Single;
  FactorGraphConfig graph;

  /// Throws std::invalid_argument if a field is out of range.
  void check() const;
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct LayerSlots {
  nn::MlpSlots variable_to_factor;
  nn::MlpSlots factor_to_variable;
  int theta_variable_to_factor = -1;
  int theta_factor_to_variable = -1;
};

struct ModelSlots {
  nn::LinearSlots variable_projection;
  nn::LinearSlots factor_projection;
  std::vector<LayerSlots> layers;  // size 1 when tied
  nn::MlpSlots readout;

  const LayerSlots& layer(int l) const { return layers.size() == 1 ? layers[0] : layers.at(static_cast<std::size_t>(l)); }
};

struct Model {
  ModelConfig config;
  nn::ParameterSet<float> params;
  ModelSlots slots;
};

/// Kaiming-uniform weights, zero biases, zero aggregator vectors.
Model init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Dense views of one factor graph in precision T.
template <typename T>
struct GraphTensors {
  nn::Matrix<T> variable_features;
  nn::Matrix<T> factor_features;
  std::vector<int> edge_factor;       // factor-major order
  std::vector<int> edge_variable;     // factor-major order
  std::vector<int> factor_offsets;
  std::vector<int> vm_edge_factor;    // variable-major order
  std::vector<int> vm_edge_variable;  // variable-major order
  std::vector<int> variable_offsets;
  int room_count = 0;
};

template <typename T>
GraphTensors<T> make_graph_tensors(const FactorGraph& g);

/// Disjoint union of several graphs; output rows follow the input order.
template <typename T>
GraphTensors<T> batch_graph_tensors(const std::vector<const GraphTensors<T>*>& parts);

struct EmbeddingState {
  nn::Var variables;  // (4N x hidden)
  nn::Var factors;    // (|C| x hidden)
  int layer = 0;
};

template <typename T>
EmbeddingState embed_inputs(nn::Tape<T>& tape, const GraphTensors<T>& g, const nn::ParameterSet<T>& params,
                            const ModelSlots& slots);

/// One variable-to-factor then factor-to-variable sweep.
template <typename T>
EmbeddingState message_round(nn::Tape<T>& tape, const GraphTensors<T>& g, const nn::ParameterSet<T>& params,
                             const LayerSlots& layer, const ModelConfig& cfg, const EmbeddingState& state,
                             nn::Var factor_inputs);

/// Raw per-variable coordinates (4N x 1), unclamped.
template <typename T>
nn::Var forward(nn::Tape<T>& tape, const GraphTensors<T>& g, const nn::ParameterSet<T>& params,
                const ModelSlots& slots, const ModelConfig& cfg);

/// Inference helper: forward without recording, clamped to [0,1].
std::vector<double> predict_coordinates(const Model& model, const FactorGraph& g);
/// Same as above for many graphs, run as batched disjoint unions.
std::vector<std::vector<double>> predict_coordinates(const Model& model, const std::vector<FactorGraph>& graphs,
                                                     std::size_t batch = 4);

/// Groups 4N coordinates (x_min, x_max, y_min, y_max per room) into boxes,
/// repairing swapped pairs and widening degenerate sides to one pixel.
std::vector<BBox> predict_boxes(const std::vector<double>& coords, int room_count, Canvas canvas = {});

/// Training target laid out like the forward output.
std::vector<double> coordinate_targets(const std::vector<BBox>& boxes);

extern template GraphTensors<float> make_graph_tensors<float>(const FactorGraph&);
extern template GraphTensors<double> make_graph_tensors<double>(const FactorGraph&);
extern template GraphTensors<float> batch_graph_tensors<float>(const std::vector<const GraphTensors<float>*>&);
extern template GraphTensors<double> batch_graph_tensors<double>(const std::vector<const GraphTensors<double>*>&);

}  // namespace fpfgnn
