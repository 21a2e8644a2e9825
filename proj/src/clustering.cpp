#include "dsg/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dsg/error.hpp"
#include "json.hpp"

namespace dsg {

std::string to_string(ClusteringObjective objective) {
  return objective == ClusteringObjective::kDmon ? "dmon" : "mincut";
}

ClusteringObjective parse_objective(const std::string& text) {
  if (text == "dmon") return ClusteringObjective::kDmon;
  if (text == "mincut") return ClusteringObjective::kMinCut;
  throw ConfigError("unknown clustering objective '" + text + "' (expected dmon or mincut)");
}

void ClusterAssignment::validate(double tolerance) const {
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    double sum = 0.0;
    for (double v : matrix.row(i)) {
      if (!(v >= 0.0 && v <= 1.0))
        throw InvalidArgument("assignment entry outside [0, 1] in row " + std::to_string(i));
      sum += v;
    }
    if (std::abs(sum - 1.0) > tolerance)
      throw InvalidArgument("assignment row " + std::to_string(i) + " sums to " +
                            std::to_string(sum));
  }
}

ClusterAssignment one_hot_assignment(std::span<const std::size_t> labels, std::size_t clusters) {
  Tensor2 c(labels.size(), clusters);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= clusters)
      throw InvalidArgument("label " + std::to_string(labels[i]) + " >= cluster count");
    c(i, labels[i]) = 1.0;
  }
  return {std::move(c)};
}

namespace {

double inner(const Tensor2& a, const Tensor2& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void check_assignment_shape(const Tensor2& c, const SparseMatrix& a) {
  if (!a.is_square() || a.rows() != c.rows()) {
    throw ShapeError("clustering loss: adjacency " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " does not match " + std::to_string(c.rows()) +
                     " assigned nodes");
  }
  if (c.cols() == 0) throw ShapeError("clustering loss: zero clusters");
}

}  // namespace

ClusteringLossVar dmon_loss(Var assignment, const SparseMatrix& adjacency,
                            double collapse_weight) {
  const Tensor2& c = assignment.value();
  check_assignment_shape(c, adjacency);
  const double two_m = adjacency.total();
  if (!(two_m > 0.0)) throw NumericError("dmon_loss: graph has no edges (m = 0)");
  const std::size_t n = c.rows();
  const std::size_t k = c.cols();

  const std::vector<double> degree = adjacency.row_sums();
  const Tensor2 ac = adjacency.multiply(c);
  Tensor2 cd(1, k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) cd[j] += degree[i] * c(i, j);
  double cd_sq = 0.0;
  for (double v : cd.values()) cd_sq += v * v;
  const double modularity = -(inner(c, ac) - cd_sq / two_m) / two_m;

  const Tensor2 sizes = column_sums(c);
  const double size_norm = frobenius_norm(sizes);
  const double collapse_scale = std::sqrt(static_cast<double>(k)) / static_cast<double>(n);
  const double collapse = collapse_scale * size_norm - 1.0;

  ClusteringLoss terms;
  terms.objective = ClusteringObjective::kDmon;
  terms.modularity_term = modularity;
  terms.collapse_term = collapse;
  terms.total = modularity + collapse_weight * collapse;

  const SparseMatrix* a = &adjacency;
  Var total = assignment.tape->record(
      Tensor2::scalar(terms.total), {assignment.id},
      [x = assignment.id, a, degree, cd, sizes, size_norm, collapse_scale, collapse_weight, two_m](
          Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        const Tensor2& c = t.value(x);
        const Tensor2 sym = a->multiply(c) + a->transpose_multiply(c);
        Tensor2& gc = t.grad_buffer(x);
        for (std::size_t i = 0; i < c.rows(); ++i) {
          for (std::size_t j = 0; j < c.cols(); ++j) {
            const double d_mod = -(sym(i, j) - 2.0 * degree[i] * cd[j] / two_m) / two_m;
            const double d_col = collapse_scale * sizes[j] / size_norm;
            gc(i, j) += g * (d_mod + collapse_weight * d_col);
          }
        }
      });
  return {total, terms};
}

ClusteringLossVar mincut_loss(Var assignment, const SparseMatrix& adjacency, double ortho_weight) {
  const Tensor2& c = assignment.value();
  check_assignment_shape(c, adjacency);
  if (!(adjacency.total() > 0.0)) throw NumericError("mincut_loss: graph has no edges");
  const std::size_t k = c.cols();
  const std::vector<double> degree = adjacency.row_sums();

  const double num = inner(c, adjacency.multiply(c));
  double den = 0.0;
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (double v : c.row(i)) den += degree[i] * v * v;
  if (!(den > 0.0)) throw NumericError("mincut_loss: assignment covers no edge volume");
  const double cut = -num / den;

  const Tensor2 s = matmul_tn(c, c);
  const double s_norm = frobenius_norm(s);
  if (!(s_norm > 0.0)) throw NumericError("mincut_loss: empty assignment");
  Tensor2 m = s * (1.0 / s_norm);
  const double inv_sqrt_k = 1.0 / std::sqrt(static_cast<double>(k));
  for (std::size_t i = 0; i < k; ++i) m(i, i) -= inv_sqrt_k;
  const double ortho = frobenius_norm(m);

  ClusteringLoss terms;
  terms.objective = ClusteringObjective::kMinCut;
  terms.cut_term = cut;
  terms.ortho_term = ortho;
  terms.total = cut + ortho_weight * ortho;

  const SparseMatrix* a = &adjacency;
  Var total = assignment.tape->record(
      Tensor2::scalar(terms.total), {assignment.id},
      [x = assignment.id, a, degree, num, den, s, s_norm, m, ortho, ortho_weight](
          Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        const Tensor2& c = t.value(x);
        const Tensor2 sym = a->multiply(c) + a->transpose_multiply(c);
        Tensor2& gc = t.grad_buffer(x);
        for (std::size_t i = 0; i < c.rows(); ++i) {
          for (std::size_t j = 0; j < c.cols(); ++j) {
            const double d_num = sym(i, j);
            const double d_den = 2.0 * degree[i] * c(i, j);
            gc(i, j) += g * (-(d_num * den - num * d_den) / (den * den));
          }
        }
        if (ortho > 0.0 && ortho_weight != 0.0) {
          // ortho = ‖S/‖S‖ - I/√K‖ with S = CᵀC
          const Tensor2 g_m = m * (1.0 / ortho);
          const double proj = inner(g_m, s) / (s_norm * s_norm * s_norm);
          Tensor2 g_s = g_m * (1.0 / s_norm) - s * proj;
          const Tensor2 g_sym = g_s + transpose(g_s);
          gc += matmul(c, g_sym) * (g * ortho_weight);
        }
      });
  return {total, terms};
}

ClusteringLoss dmon_loss(const ClusterAssignment& c, const SparseMatrix& adjacency,
                         double collapse_weight) {
  Tape t;
  return dmon_loss(t.constant(c.matrix), adjacency, collapse_weight).terms;
}

ClusteringLoss mincut_loss(const ClusterAssignment& c, const SparseMatrix& adjacency,
                           double ortho_weight) {
  Tape t;
  return mincut_loss(t.constant(c.matrix), adjacency, ortho_weight).terms;
}

ClusteringLoss dmon_loss(const ClusterAssignment& c, const DynamicGraph& g,
                         double collapse_weight) {
  return dmon_loss(c, g.combined_adjacency(), collapse_weight);
}

ClusteringLoss mincut_loss(const ClusterAssignment& c, const DynamicGraph& g,
                           double ortho_weight) {
  return mincut_loss(c, g.combined_adjacency(), ortho_weight);
}

PreparedGraph PreparedGraph::from(const DynamicGraph& g, double spatial_weight,
                                  double temporal_weight) {
  PreparedGraph p;
  p.window = g.window;
  p.patches = g.patches;
  p.adjacency = g.combined_adjacency(spatial_weight, temporal_weight);
  p.normalized = gcn_normalize(p.adjacency);
  p.features = g.node_features;
  return p;
}

ClusteringHead::ClusteringHead(std::size_t input_dim, const ClusteringHeadConfig& config, Rng& rng,
                               const std::string& prefix)
    : input_dim_(input_dim), config_(config) {
  if (config.clusters < 2) throw ConfigError("clustering head needs K >= 2");
  std::size_t in = input_dim;
  for (std::size_t l = 0; l < config.gcn_hidden.size(); ++l) {
    gcn_weights_.emplace_back(prefix + ".gcn" + std::to_string(l) + ".weight",
                              glorot_uniform(in, config.gcn_hidden[l], rng));
    in = config.gcn_hidden[l];
  }
  out_weight_ = Parameter(prefix + ".out.weight", glorot_uniform(in, config.clusters, rng));
  out_bias_ = Parameter(prefix + ".out.bias", Tensor2(1, config.clusters));
}

Var ClusteringHead::forward(Tape& tape, const PreparedGraph& graph, Var features) {
  if (config_.clusters > graph.nodes()) {
    throw InvalidArgument("cluster count K=" + std::to_string(config_.clusters) +
                          " exceeds node count " + std::to_string(graph.nodes()));
  }
  if (features.cols() != input_dim_) {
    throw ShapeError("clustering head expects " + std::to_string(input_dim_) +
                     "-dim features, got " + std::to_string(features.cols()));
  }
  Var h = features;
  for (Parameter& w : gcn_weights_)
    h = gcn_layer(graph.normalized, h, tape.parameter(w), Activation::kSelu);
  Var logits = dense(h, tape.parameter(out_weight_), tape.parameter(out_bias_));
  return softmax_rows(logits);
}

Var ClusteringHead::forward(Tape& tape, const PreparedGraph& graph) {
  return forward(tape, graph, tape.constant(graph.features));
}

std::vector<Parameter*> ClusteringHead::parameters() {
  std::vector<Parameter*> out;
  for (Parameter& w : gcn_weights_) out.push_back(&w);
  out.push_back(&out_weight_);
  out.push_back(&out_bias_);
  return out;
}

ClusterAssignment assign_clusters(ClusteringHead& head, const PreparedGraph& graph) {
  if (graph.nodes() == 0) throw InvalidArgument("assign_clusters: empty graph");
  Tape t;
  return {head.forward(t, graph).value()};
}

ClusterAssignment assign_clusters(ClusteringHead& head, const DynamicGraph& g) {
  return assign_clusters(head, PreparedGraph::from(g));
}

PooledSceneGraph pool_graph(const ClusterAssignment& c, const SparseMatrix& adjacency,
                            const Tensor2& features) {
  if (c.nodes() != features.rows() || adjacency.rows() != c.nodes())
    throw ShapeError("pool_graph: assignment, adjacency and features disagree on node count");
  PooledSceneGraph sg;
  sg.features = matmul_tn(c.matrix, features);
  sg.adjacency = matmul_tn(c.matrix, adjacency.multiply(c.matrix));
  for (std::size_t i = 0; i < sg.adjacency.rows(); ++i) sg.adjacency(i, i) = 0.0;
  const double peak = max_abs(sg.adjacency);
  sg.edge_weights = peak > 0.0 ? sg.adjacency * (1.0 / peak)
                               : Tensor2(sg.adjacency.rows(), sg.adjacency.cols());
  return sg;
}

PooledSceneGraph pool_graph(const ClusterAssignment& c, const DynamicGraph& g) {
  return pool_graph(c, g.combined_adjacency(), g.node_features);
}

PooledVars pool_graph(Var assignment, Var features, const SparseMatrix& adjacency) {
  Var x_pool = matmul_tn(assignment, features);
  Var a_pool = zero_diagonal(matmul_tn(assignment, spmm(adjacency, assignment)));
  return {x_pool, a_pool};
}

namespace {

nlohmann::json matrix_json(const Tensor2& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i)
    rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  return rows;
}

}  // namespace

std::string scene_graph_to_json(const PooledSceneGraph& sg, bool include_features) {
  nlohmann::json j;
  j["K"] = sg.clusters();
  nlohmann::json xp;
  xp["shape"] = {sg.features.rows(), sg.features.cols()};
  if (include_features) xp["values"] = matrix_json(sg.features);
  j["X_pool"] = xp;
  j["A_pool"] = matrix_json(sg.adjacency);
  j["W_pool"] = matrix_json(sg.edge_weights);
  j["cluster_labels"] = sg.cluster_labels;
  j["frame_span"] = {sg.frame_span.first, sg.frame_span.second};
  return j.dump();
}

std::string scene_graph_to_dot(const PooledSceneGraph& sg,
                               const std::vector<std::string>* class_names) {
  std::ostringstream os;
  os << "graph scene_graph {\n  node [shape=ellipse];\n";
  for (std::size_t k = 0; k < sg.clusters(); ++k) {
    os << "  c" << k << " [label=\"cluster " << k;
    if (k < sg.cluster_labels.size()) {
      const std::size_t label = sg.cluster_labels[k];
      if (class_names != nullptr && label < class_names->size())
        os << "\\n" << (*class_names)[label];
      else
        os << "\\nclass " << label;
    }
    os << "\"];\n";
  }
  for (std::size_t i = 0; i < sg.clusters(); ++i) {
    for (std::size_t j = i + 1; j < sg.clusters(); ++j) {
      if (sg.adjacency(i, j) <= 0.0) continue;
      const double w = sg.edge_weights(i, j);
      os << "  c" << i << " -- c" << j << " [penwidth=" << 0.25 + 6.0 * w
         << ", label=\"" << w << "\"];\n";
    }
  }
  os << "}\n";
  return os.str();
}

ClusterAssignment optimize_clustering(const PreparedGraph& graph,
                                      const PerClipClusteringOptions& options) {
  Rng rng(options.seed);
  ClusteringHead head(graph.features.cols(), options.head, rng);
  Adam adam(head.parameters(), AdamConfig{.learning_rate = options.learning_rate});
  for (std::size_t step = 0; step < options.steps; ++step) {
    Tape t;
    Var c = head.forward(t, graph);
    Var loss = options.objective == ClusteringObjective::kDmon
                   ? dmon_loss(c, graph.adjacency, options.regularization_weight).total
                   : mincut_loss(c, graph.adjacency, options.regularization_weight).total;
    t.backward(loss);
    adam.zero_grad();
    t.flush_gradients();
    adam.step();
  }
  return assign_clusters(head, graph);
}

}  // namespace dsg
