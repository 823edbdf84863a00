#include "fpfgnn/model.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fpfgnn {

using nn::Matrix;
using nn::Tape;
using nn::Var;

void ModelConfig::check() const {
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (hidden < 1) throw std::invalid_argument("hidden dimension must be positive");
  if (mlp_depth < 1) throw std::invalid_argument("mlp depth must be >= 1");
  if (graph.grid_order < 1) throw std::invalid_argument("grid order must be positive");
  if (!(graph.probe_offset > 0.0)) throw std::invalid_argument("probe offset must be positive");
}

nlohmann::json to_json(const ModelConfig& cfg) {
  nlohmann::json relations = nlohmann::json::array();
  for (RelationType r : kAllRelations)
    if (cfg.graph.relation_enabled[static_cast<std::size_t>(r)]) relations.push_back(relation_name(r));
  return {{"iterations", cfg.iterations},
          {"hidden", cfg.hidden},
          {"tied", cfg.tied},
          {"aggregator", nn::aggregator_name(cfg.aggregator)},
          {"refresh_factor", cfg.refresh_factor},
          {"residual", cfg.residual},
          {"normalize", cfg.normalize},
          {"message_passing", cfg.message_passing},
          {"mlp_depth", cfg.mlp_depth},
          {"precision", cfg.precision == nn::Precision::Single ? "single" : "double"},
          {"graph",
           {{"box", cfg.graph.box_factors},
            {"relation", cfg.graph.relation_factors},
            {"boundary", cfg.graph.boundary_factors},
            {"complete", cfg.graph.complete_factor},
            {"relations_enabled", relations},
            {"corner_distance", cfg.graph.corner_distance_features},
            {"corner_probes", cfg.graph.corner_probe_features},
            {"amend_inside_factor", cfg.graph.amend_inside_factor},
            {"grid_order", cfg.graph.grid_order},
            {"probe_offset", cfg.graph.probe_offset}}}};
}

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw std::invalid_argument("unknown field " + where + "." + k);
}

}  // namespace

ModelConfig model_config_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"iterations", "hidden", "tied", "aggregator", "refresh_factor", "residual", "normalize", "message_passing",
                     "mlp_depth", "precision", "graph"},
                 "$");
  ModelConfig c;
  c.iterations = j.value("iterations", c.iterations);
  c.hidden = j.value("hidden", c.hidden);
  c.tied = j.value("tied", c.tied);
  if (j.contains("aggregator")) c.aggregator = nn::aggregator_from_name(j.at("aggregator").get<std::string>());
  c.refresh_factor = j.value("refresh_factor", c.refresh_factor);
  c.residual = j.value("residual", c.residual);
  c.normalize = j.value("normalize", c.normalize);
  c.message_passing = j.value("message_passing", c.message_passing);
  c.mlp_depth = j.value("mlp_depth", c.mlp_depth);
  if (j.contains("precision")) {
    const auto p = j.at("precision").get<std::string>();
    if (p != "single" && p != "double") throw std::invalid_argument("precision must be single or double");
    c.precision = p == "single" ? nn::Precision::Single : nn::Precision::Double;
  }
  if (j.contains("graph")) {
    const auto& g = j.at("graph");
    reject_unknown(g, {"box", "relation", "boundary", "complete", "relations_enabled", "corner_distance",
                       "corner_probes", "amend_inside_factor", "grid_order", "probe_offset"},
                   "$.graph");
    c.graph.box_factors = g.value("box", true);
    c.graph.relation_factors = g.value("relation", true);
    c.graph.boundary_factors = g.value("boundary", true);
    c.graph.complete_factor = g.value("complete", true);
    if (g.contains("relations_enabled")) {
      c.graph.relation_enabled.fill(false);
      for (const auto& name : g.at("relations_enabled")) {
        const auto r = relation_from_name(name.get<std::string>());
        if (!r) throw std::invalid_argument("unknown relation " + name.get<std::string>());
        c.graph.relation_enabled[static_cast<std::size_t>(*r)] = true;
      }
    }
    c.graph.corner_distance_features = g.value("corner_distance", true);
    c.graph.corner_probe_features = g.value("corner_probes", true);
    c.graph.amend_inside_factor = g.value("amend_inside_factor", false);
    c.graph.grid_order = g.value("grid_order", kDefaultGridOrder);
    c.graph.probe_offset = g.value("probe_offset", kDefaultProbeOffset);
  }
  c.check();
  return c;
}

Model init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.check();
  Model m;
  m.config = cfg;
  nn::Rng rng(seed);
  const FeatureLayout layout{cfg.graph.grid_order};
  const int h = cfg.hidden;
  m.slots.variable_projection = nn::add_linear(m.params, "embed.variable", layout.variable_width(), h, rng);
  m.slots.factor_projection = nn::add_linear(m.params, "embed.factor", layout.factor_width(), h, rng);

  const int layer_sets = cfg.tied ? 1 : cfg.iterations;
  std::vector<int> dims{2 * h + layout.factor_width()};
  for (int d = 0; d < cfg.mlp_depth; ++d) dims.push_back(h);
  for (int l = 0; l < layer_sets; ++l) {
    const std::string p = "layer" + std::to_string(l);
    LayerSlots ls;
    ls.variable_to_factor = nn::add_mlp(m.params, p + ".vf", dims, rng);
    ls.factor_to_variable = nn::add_mlp(m.params, p + ".fv", dims, rng);
    ls.theta_variable_to_factor = m.params.add(p + ".theta_vf", Matrix<float>::Zero(1, h));
    ls.theta_factor_to_variable = m.params.add(p + ".theta_fv", Matrix<float>::Zero(1, h));
    m.slots.layers.push_back(std::move(ls));
  }
  m.slots.readout = nn::add_mlp(m.params, "readout", {h, h, 1}, rng);
  return m;
}

template <typename T>
GraphTensors<T> make_graph_tensors(const FactorGraph& g) {
  GraphTensors<T> t;
  const auto vw = static_cast<Eigen::Index>(g.layout.variable_width());
  const auto fw = static_cast<Eigen::Index>(g.layout.factor_width());
  t.variable_features.resize(static_cast<Eigen::Index>(g.variables.size()), vw);
  for (Eigen::Index i = 0; i < t.variable_features.size(); ++i)
    t.variable_features.data()[i] = static_cast<T>(g.variable_features[static_cast<std::size_t>(i)]);
  t.factor_features.resize(static_cast<Eigen::Index>(g.factors.size()), fw);
  for (Eigen::Index i = 0; i < t.factor_features.size(); ++i)
    t.factor_features.data()[i] = static_cast<T>(g.factor_features[static_cast<std::size_t>(i)]);
  for (const GraphEdge& e : g.edges) {
    t.edge_factor.push_back(e.factor);
    t.edge_variable.push_back(e.variable);
  }
  t.factor_offsets = g.factor_offsets;
  for (int id : g.variable_order) {
    t.vm_edge_factor.push_back(g.edges[static_cast<std::size_t>(id)].factor);
    t.vm_edge_variable.push_back(g.edges[static_cast<std::size_t>(id)].variable);
  }
  t.variable_offsets = g.variable_offsets;
  t.room_count = g.room_count;
  return t;
}

template GraphTensors<float> make_graph_tensors<float>(const FactorGraph&);
template GraphTensors<double> make_graph_tensors<double>(const FactorGraph&);

template <typename T>
GraphTensors<T> batch_graph_tensors(const std::vector<const GraphTensors<T>*>& parts) {
  GraphTensors<T> out;
  if (parts.empty()) throw std::invalid_argument("cannot batch zero graphs");
  Eigen::Index vars = 0, factors = 0;
  for (const auto* p : parts) {
    if (p->variable_features.cols() != parts[0]->variable_features.cols() ||
        p->factor_features.cols() != parts[0]->factor_features.cols())
      throw nn::ShapeError("batched graphs differ in feature width");
    vars += p->variable_features.rows();
    factors += p->factor_features.rows();
  }
  out.variable_features.resize(vars, parts[0]->variable_features.cols());
  out.factor_features.resize(factors, parts[0]->factor_features.cols());
  out.factor_offsets.push_back(0);
  out.variable_offsets.push_back(0);
  int v0 = 0, f0 = 0, e0 = 0;
  for (const auto* p : parts) {
    const auto nv = static_cast<int>(p->variable_features.rows());
    const auto nf = static_cast<int>(p->factor_features.rows());
    out.variable_features.middleRows(v0, nv) = p->variable_features;
    out.factor_features.middleRows(f0, nf) = p->factor_features;
    for (std::size_t k = 0; k < p->edge_factor.size(); ++k) {
      out.edge_factor.push_back(p->edge_factor[k] + f0);
      out.edge_variable.push_back(p->edge_variable[k] + v0);
      out.vm_edge_factor.push_back(p->vm_edge_factor[k] + f0);
      out.vm_edge_variable.push_back(p->vm_edge_variable[k] + v0);
    }
    for (std::size_t k = 1; k < p->factor_offsets.size(); ++k) out.factor_offsets.push_back(p->factor_offsets[k] + e0);
    for (std::size_t k = 1; k < p->variable_offsets.size(); ++k)
      out.variable_offsets.push_back(p->variable_offsets[k] + e0);
    v0 += nv;
    f0 += nf;
    e0 += static_cast<int>(p->edge_factor.size());
    out.room_count += p->room_count;
  }
  return out;
}

template GraphTensors<float> batch_graph_tensors<float>(const std::vector<const GraphTensors<float>*>&);
template GraphTensors<double> batch_graph_tensors<double>(const std::vector<const GraphTensors<double>*>&);

template <typename T>
EmbeddingState embed_inputs(Tape<T>& tape, const GraphTensors<T>& g, const nn::ParameterSet<T>& params,
                            const ModelSlots& slots) {
  const Var xv = tape.constant(g.variable_features);
  const Var xf = tape.constant(g.factor_features);
  const auto& wv = params.values.at(static_cast<std::size_t>(slots.variable_projection.weight));
  const auto& wf = params.values.at(static_cast<std::size_t>(slots.factor_projection.weight));
  if (wv.rows() != g.variable_features.cols() || wf.rows() != g.factor_features.cols())
    throw nn::ShapeError("feature width does not match the input projections");
  EmbeddingState s;
  s.variables = nn::linear_apply(tape, params, slots.variable_projection, xv);
  s.factors = nn::linear_apply(tape, params, slots.factor_projection, xf);
  s.layer = 0;
  return s;
}

namespace {

// MLP(concat[f_c, v_i, e_ci]) for every edge. The first weight matrix is
// stored in concatenation order (factor rows, variable rows, edge rows); its
// product with the concatenated input is computed per node and gathered per
// edge. e_ci is the input feature row of factor c.
template <typename T>
Var edge_messages(Tape<T>& tape, const nn::ParameterSet<T>& params, const nn::MlpSlots& mlp, int hidden,
                  Var factors, Var variables, Var factor_inputs, std::span<const int> edge_factor,
                  std::span<const int> edge_variable) {
  const auto& first = mlp.layers.front();
  const Var w = tape.parameter(params, first.weight);
  const int edge_rows = static_cast<int>(tape.value(w).rows()) - 2 * hidden;
  const Var w_factor = tape.rows(w, 0, hidden);
  const Var w_variable = tape.rows(w, hidden, hidden);
  const Var w_edge = tape.rows(w, 2 * hidden, edge_rows);
  const Var per_factor = tape.add(tape.matmul(factors, w_factor), tape.matmul(factor_inputs, w_edge));
  const Var per_variable = tape.matmul(variables, w_variable);
  Var x = tape.add(tape.gather(per_factor, edge_factor), tape.gather(per_variable, edge_variable));
  x = tape.add_bias(x, tape.parameter(params, first.bias));
  for (std::size_t i = 1; i < mlp.layers.size(); ++i) {
    x = tape.relu(x);
    x = nn::linear_apply(tape, params, mlp.layers[i], x);
  }
  return x;
}

}  // namespace

template <typename T>
EmbeddingState message_round(Tape<T>& tape, const GraphTensors<T>& g, const nn::ParameterSet<T>& params,
                             const LayerSlots& layer, const ModelConfig& cfg, const EmbeddingState& state,
                             Var factor_inputs) {
  const int h = cfg.hidden;
  const Var theta_vf = tape.parameter(params, layer.theta_variable_to_factor);
  const Var theta_fv = tape.parameter(params, layer.theta_factor_to_variable);

  const Var to_factor = edge_messages(tape, params, layer.variable_to_factor, h, state.factors, state.variables,
                                      factor_inputs, g.edge_factor, g.edge_variable);
  Var factors_next = tape.segment_aggregate(to_factor, g.factor_offsets, cfg.aggregator, theta_vf);
  if (cfg.residual) factors_next = tape.add(state.factors, factors_next);
  if (cfg.normalize) factors_next = tape.row_normalize(factors_next);

  const Var factor_source = cfg.refresh_factor ? factors_next : state.factors;
  const Var to_variable = edge_messages(tape, params, layer.factor_to_variable, h, factor_source, state.variables,
                                        factor_inputs, g.vm_edge_factor, g.vm_edge_variable);
  Var variables_next = tape.segment_aggregate(to_variable, g.variable_offsets, cfg.aggregator, theta_fv);
  if (cfg.residual) variables_next = tape.add(state.variables, variables_next);
  if (cfg.normalize) variables_next = tape.row_normalize(variables_next);

  return EmbeddingState{variables_next, factors_next, state.layer + 1};
}

template <typename T>
Var forward(Tape<T>& tape, const GraphTensors<T>& g, const nn::ParameterSet<T>& params, const ModelSlots& slots,
            const ModelConfig& cfg) {
  cfg.check();
  EmbeddingState state = embed_inputs(tape, g, params, slots);
  if (cfg.message_passing) {
    const Var factor_inputs = tape.constant(g.factor_features);
    for (int l = 0; l < cfg.iterations; ++l)
      state = message_round(tape, g, params, slots.layer(l), cfg, state, factor_inputs);
  }
  return nn::mlp_apply(tape, params, slots.readout, state.variables);
}

template EmbeddingState embed_inputs(Tape<float>&, const GraphTensors<float>&, const nn::ParameterSet<float>&,
                                     const ModelSlots&);
template EmbeddingState embed_inputs(Tape<double>&, const GraphTensors<double>&, const nn::ParameterSet<double>&,
                                     const ModelSlots&);
template EmbeddingState message_round(Tape<float>&, const GraphTensors<float>&, const nn::ParameterSet<float>&,
                                      const LayerSlots&, const ModelConfig&, const EmbeddingState&, Var);
template EmbeddingState message_round(Tape<double>&, const GraphTensors<double>&, const nn::ParameterSet<double>&,
                                      const LayerSlots&, const ModelConfig&, const EmbeddingState&, Var);
template Var forward(Tape<float>&, const GraphTensors<float>&, const nn::ParameterSet<float>&, const ModelSlots&,
                     const ModelConfig&);
template Var forward(Tape<double>&, const GraphTensors<double>&, const nn::ParameterSet<double>&,
                     const ModelSlots&, const ModelConfig&);

namespace {

template <typename T>
std::vector<std::vector<double>> run_batches(const Model& model, const nn::ParameterSet<T>& params,
                                             const std::vector<FactorGraph>& graphs, std::size_t batch) {
  std::vector<std::vector<double>> out;
  out.reserve(graphs.size());
  for (std::size_t lo = 0; lo < graphs.size(); lo += batch) {
    const std::size_t hi = std::min(graphs.size(), lo + batch);
    std::vector<GraphTensors<T>> parts;
    parts.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) parts.push_back(make_graph_tensors<T>(graphs[i]));
    std::vector<const GraphTensors<T>*> views;
    for (const auto& p : parts) views.push_back(&p);
    const GraphTensors<T> joined = batch_graph_tensors(views);
    Tape<T> tape(false);
    const Var y = forward(tape, joined, params, model.slots, model.config);
    const T* v = tape.value(y).data();
    for (std::size_t i = lo; i < hi; ++i) {
      const std::size_t n = 4 * static_cast<std::size_t>(graphs[i].room_count);
      std::vector<double> coords(n);
      for (std::size_t k = 0; k < n; ++k) coords[k] = std::clamp(static_cast<double>(v[k]), 0.0, 1.0);
      v += n;
      out.push_back(std::move(coords));
    }
  }
  return out;
}

}  // namespace

std::vector<std::vector<double>> predict_coordinates(const Model& model, const std::vector<FactorGraph>& graphs,
                                                     std::size_t batch) {
  if (batch == 0) throw std::invalid_argument("batch must be positive");
  if (model.config.precision == nn::Precision::Double)
    return run_batches(model, nn::cast_parameters<double>(model.params), graphs, batch);
  return run_batches(model, model.params, graphs, batch);
}

std::vector<double> predict_coordinates(const Model& model, const FactorGraph& g) {
  return predict_coordinates(model, std::vector<FactorGraph>{g}, 1).front();
}

std::vector<BBox> predict_boxes(const std::vector<double>& coords, int room_count, Canvas canvas) {
  if (coords.size() != static_cast<std::size_t>(4 * room_count))
    throw std::invalid_argument("expected 4 coordinates per room");
  const auto repair = [](double lo, double hi, double pixel) {
    lo = std::clamp(lo, 0.0, 1.0);
    hi = std::clamp(hi, 0.0, 1.0);
    if (lo > hi) std::swap(lo, hi);
    if (hi - lo < pixel) {
      hi = lo + pixel;
      if (hi > 1.0) {
        hi = 1.0;
        lo = 1.0 - pixel;
      }
    }
    return std::pair{lo, hi};
  };
  std::vector<BBox> boxes;
  for (int i = 0; i < room_count; ++i) {
    const double* c = coords.data() + 4 * i;
    const auto [x0, x1] = repair(c[0], c[1], 1.0 / canvas.width);
    const auto [y0, y1] = repair(c[2], c[3], 1.0 / canvas.height);
    boxes.push_back(BBox{x0, y0, x1, y1});
  }
  return boxes;
}

std::vector<double> coordinate_targets(const std::vector<BBox>& boxes) {
  std::vector<double> t;
  t.reserve(boxes.size() * 4);
  for (const BBox& b : boxes) {
    t.push_back(b.x_min);
    t.push_back(b.x_max);
    t.push_back(b.y_min);
    t.push_back(b.y_max);
  }
  return t;
}

}  // namespace fpfgnn
