#include <cmath>

#include "dsg/clustering.hpp"
#include "dsg/downstream.hpp"
#include "dsg/gradcheck.hpp"
#include "dsg/ops.hpp"

namespace dsg {

namespace {

Tensor2 random_tensor(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor2 t(r, c);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Strictly positive weights, diagonal included, so a finite-difference probe
// never crosses into negative entries.
Tensor2 random_positive_adjacency(std::size_t n, Rng& rng) {
  Tensor2 a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) a(i, j) = a(j, i) = rng.uniform(0.1, 1.0);
  return a;
}

SparseMatrix random_sparse_graph(std::size_t n, double density, Rng& rng) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (rng.uniform() >= density && j != i + 1) continue;
      const double w = rng.uniform(0.2, 1.0);
      t.push_back({i, j, w});
      t.push_back({j, i, w});
    }
  }
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

// Two frames of a 3x3 grid whose patches fall into three loose groups.
FeatureClip toy_clip(Rng& rng) {
  FeatureClip clip;
  clip.window = 2;
  clip.patches = 9;
  clip.dim = 8;
  clip.grid = {3, 3};
  clip.frame_ids = {0, 1};
  clip.phase_label = 1;
  clip.features = Tensor2(18, 8);
  const Tensor2 centers = random_tensor(3, 8, rng);
  for (std::size_t i = 0; i < 18; ++i)
    for (std::size_t k = 0; k < 8; ++k)
      clip.features(i, k) = centers((i % 9) / 3, k) + 0.3 * rng.uniform(-1.0, 1.0);
  return clip;
}

}  // namespace

std::vector<GradcheckResult> run_gradient_suite(std::uint64_t first_seed, int seeds,
                                                const GradcheckOptions& options) {
  std::vector<GradcheckResult> results;
  for (int s = 0; s < seeds; ++s) {
    const std::uint64_t seed = first_seed + static_cast<std::uint64_t>(s);
    Rng rng(seed);
    auto check = [&](const std::string& name, const TapeFunction& f, std::vector<Tensor2> in) {
      results.push_back(check_gradient(name, f, std::move(in), rng, options));
    };

    check("dense", [](Tape&, std::span<const Var> v) { return dense(v[0], v[1], v[2]); },
          {random_tensor(4, 3, rng), random_tensor(3, 2, rng), random_tensor(1, 2, rng)});
    check("matmul", [](Tape&, std::span<const Var> v) { return matmul(v[0], v[1]); },
          {random_tensor(3, 4, rng), random_tensor(4, 2, rng)});
    check("matmul_tn", [](Tape&, std::span<const Var> v) { return matmul_tn(v[0], v[1]); },
          {random_tensor(4, 3, rng), random_tensor(4, 2, rng)});
    {
      const SparseMatrix s = random_sparse_graph(5, 0.5, rng);
      check("spmm", [&s](Tape&, std::span<const Var> v) { return spmm(s, v[0]); },
            {random_tensor(5, 3, rng)});
    }
    check("add", [](Tape&, std::span<const Var> v) { return add(v[0], v[1]); },
          {random_tensor(2, 3, rng), random_tensor(2, 3, rng)});
    check("scale", [](Tape&, std::span<const Var> v) { return scale(v[0], -1.7); },
          {random_tensor(2, 3, rng)});
    check("add_bias", [](Tape&, std::span<const Var> v) { return add_bias(v[0], v[1]); },
          {random_tensor(3, 2, rng), random_tensor(1, 2, rng)});
    check("selu", [](Tape&, std::span<const Var> v) { return selu(v[0]); },
          {random_tensor(3, 4, rng, -2.0, 2.0)});
    check("sigmoid", [](Tape&, std::span<const Var> v) { return sigmoid(v[0]); },
          {random_tensor(3, 4, rng, -3.0, 3.0)});
    check("softmax_rows", [](Tape&, std::span<const Var> v) { return softmax_rows(v[0]); },
          {random_tensor(3, 4, rng, -2.0, 2.0)});
    {
      std::vector<std::size_t> labels{0, 2, 1};
      check("softmax_cross_entropy",
            [labels](Tape&, std::span<const Var> v) { return softmax_cross_entropy(v[0], labels); },
            {random_tensor(3, 4, rng, -2.0, 2.0)});
    }
    check("hadamard", [](Tape&, std::span<const Var> v) { return hadamard(v[0], v[1]); },
          {random_tensor(3, 3, rng), random_tensor(3, 3, rng)});
    check("zero_diagonal", [](Tape&, std::span<const Var> v) { return zero_diagonal(v[0]); },
          {random_tensor(3, 3, rng)});
    check("symmetrize", [](Tape&, std::span<const Var> v) { return symmetrize(v[0]); },
          {random_tensor(3, 3, rng)});
    check("sum_rows", [](Tape&, std::span<const Var> v) { return sum_rows(v[0]); },
          {random_tensor(4, 3, rng)});
    check("pair_concat", [](Tape&, std::span<const Var> v) { return pair_concat(v[0]); },
          {random_tensor(3, 2, rng)});
    check("reshape", [](Tape&, std::span<const Var> v) { return reshape(v[0], 2, 6); },
          {random_tensor(4, 3, rng)});
    check("gcn_normalize", [](Tape&, std::span<const Var> v) { return gcn_normalize(v[0]); },
          {random_positive_adjacency(4, rng)});
    check("gcn_layer",
          [](Tape&, std::span<const Var> v) {
            return gcn_layer(v[0], v[1], v[2], Activation::kSelu);
          },
          {random_positive_adjacency(5, rng), random_tensor(5, 3, rng), random_tensor(3, 2, rng)});
    {
      const NormalizedAdjacency a = gcn_normalize(random_sparse_graph(5, 0.4, rng));
      check("gcn_layer_sparse",
            [&a](Tape&, std::span<const Var> v) {
              return gcn_layer(a, v[0], v[1], Activation::kSelu);
            },
            {random_tensor(5, 3, rng), random_tensor(3, 2, rng)});
    }
    {
      const SparseMatrix g = random_sparse_graph(6, 0.5, rng);
      check("dmon_loss",
            [&g](Tape&, std::span<const Var> v) { return dmon_loss(softmax_rows(v[0]), g).total; },
            {random_tensor(6, 3, rng, -2.0, 2.0)});
      check("mincut_loss",
            [&g](Tape&, std::span<const Var> v) {
              return mincut_loss(softmax_rows(v[0]), g).total;
            },
            {random_tensor(6, 3, rng, -2.0, 2.0)});
      check("pool_graph",
            [&g](Tape&, std::span<const Var> v) {
              const PooledVars p = pool_graph(softmax_rows(v[0]), v[1], g);
              return add(sum_rows(p.features), sum_rows(matmul(p.adjacency, p.features)));
            },
            {random_tensor(6, 3, rng, -2.0, 2.0), random_tensor(6, 2, rng)});
    }

    // Heads and the joint objective, checked on their own parameters.
    Rng model_rng(seed);
    const FeatureClip clip = toy_clip(model_rng);
    PrepareOptions prep;
    prep.graph.tau = 0.0;
    prep.match_min_confidence = 0.0;
    const PreparedClip prepared = prepare_clip(clip, prep);

    ModelConfig mc;
    mc.input_dim = 8;
    mc.phases = 3;
    mc.clustering.clusters = 3;
    mc.clustering.gcn_hidden = {6};
    mc.edge_hidden = 5;
    mc.classifier_hidden = {4};
    Model model(mc, seed);

    const Tensor2 pooled = random_tensor(3, 8, rng);
    results.push_back(check_parameter_gradient(
        "edge_head",
        [&](Tape& t) { return model.edges().forward(t, t.constant(pooled)); },
        model.edges().parameters(), rng, options));
    const Tensor2 a_pool = random_positive_adjacency(3, rng);
    results.push_back(check_parameter_gradient(
        "phase_classifier",
        [&](Tape& t) {
          Var x = t.constant(pooled);
          return model.classifier().forward(t, t.constant(a_pool), model.edges().forward(t, x), x);
        },
        model.downstream_parameters(), rng, options));
    for (ClusteringObjective objective : {ClusteringObjective::kDmon, ClusteringObjective::kMinCut}) {
      ObjectiveConfig oc;
      oc.objective = objective;
      results.push_back(check_parameter_gradient(
          "joint_loss_" + to_string(objective),
          [&](Tape& t) { return joint_loss(model, t, prepared, oc).total; }, model.parameters(),
          rng, options));
    }
  }
  return results;
}

}  // namespace dsg
