#include "gtvd/bipartite.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <string>

#include <Eigen/Cholesky>

#include "gtvd/errors.hpp"

namespace gtvd {

const char* color_name(Color c) { return c == Color::Red ? "red" : "blue"; }

std::vector<std::size_t> Bipartition::members(Color c) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < colors.size(); ++i)
    if (colors[i] == c) out.push_back(i);
  return out;
}

namespace {

double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// Factorization of the reference precision, shared by both candidates of one
// greedy step.
struct KldReference {
  Eigen::MatrixXd covariance;  // (L_orig + delta I)^-1
  double log_det_precision = 0.0;
  Eigen::Index n = 0;

  KldReference(const Eigen::MatrixXd& laplacian_orig, double delta) : n(laplacian_orig.rows()) {
    Eigen::MatrixXd precision = laplacian_orig;
    precision.diagonal().array() += delta;
    Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success) throw InvalidArgument("original precision is not positive definite");
    log_det_precision = log_det_from_llt(llt);
    covariance = llt.solve(Eigen::MatrixXd::Identity(n, n));
  }

  double divergence(const Eigen::MatrixXd& laplacian_bip, double delta) const {
    Eigen::MatrixXd precision = laplacian_bip;
    precision.diagonal().array() += delta;
    Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success) throw InvalidArgument("bipartite precision is not positive definite");
    // Both factors symmetric: tr(X Y) = sum of elementwise products.
    const double trace = precision.cwiseProduct(covariance).sum();
    return 0.5 * (trace + log_det_precision - log_det_from_llt(llt) - static_cast<double>(n));
  }
};

void check_delta(double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw InvalidArgument("GMRF regularizer delta must be finite and > 0");
}

}  // namespace

double kld(const Eigen::MatrixXd& laplacian_orig, const Eigen::MatrixXd& laplacian_bip, double delta) {
  check_delta(delta);
  if (laplacian_orig.rows() != laplacian_orig.cols() || laplacian_bip.rows() != laplacian_bip.cols() ||
      laplacian_orig.rows() != laplacian_bip.rows())
    throw InvalidArgument("KLD: Laplacian dimension mismatch");
  if (laplacian_orig.rows() == 0) return 0.0;
  return KldReference(laplacian_orig, delta).divergence(laplacian_bip, delta);
}

namespace {

constexpr int kUnassigned = -1;

class GreedyBipartition {
 public:
  GreedyBipartition(const WeightedGraph& graph, const BipartiteOptions& opt,
                    std::vector<GreedyStep>* trace)
      : graph_(graph), opt_(opt), trace_(trace), color_(graph.node_count(), kUnassigned),
        hop_(graph.node_count(), kNoHop), local_(graph.node_count(), kNoLocal) {}

  Bipartition run() {
    const std::size_t n = graph_.node_count();
    std::vector<bool> queued(n, false);
    bfs_from(opt_.start_node, /*first=*/true, queued);
    for (std::size_t s = 0; s < n; ++s) {
      if (!queued[s]) bfs_from(s, /*first=*/false, queued);
    }
    Bipartition bp;
    bp.colors.reserve(n);
    for (int c : color_) bp.colors.push_back(static_cast<Color>(c));
    return bp;
  }

 private:
  static constexpr std::size_t kNoHop = static_cast<std::size_t>(-1);
  static constexpr std::size_t kNoLocal = static_cast<std::size_t>(-1);

  void bfs_from(std::size_t seed, bool first, std::vector<bool>& queued) {
    std::deque<std::size_t> queue{seed};
    queued[seed] = true;
    while (!queue.empty()) {
      const std::size_t v = queue.front();
      queue.pop_front();
      if (v == seed) {
        assign_seed(v, first);
      } else {
        assign_greedy(v);
      }
      for (const auto& nb : graph_.neighbors(v)) {
        if (!queued[nb.node]) {
          queued[nb.node] = true;
          queue.push_back(nb.node);
        }
      }
    }
  }

  Color take_tie() {
    const Color c = next_tie_;
    next_tie_ = opposite(next_tie_);
    return c;
  }

  void assign_seed(std::size_t v, bool first) {
    GreedyStep step;
    step.node = v;
    step.seed = true;
    step.chosen = first ? Color::Red : take_tie();
    step.tie = !first;
    color_[v] = static_cast<int>(step.chosen);
    if (trace_) trace_->push_back(step);
  }

  // Candidate plus the already-assigned nodes inside the hop window.
  std::vector<std::size_t> window_for(std::size_t v) {
    std::vector<std::size_t> window{v};
    if (opt_.window_hops == 0) {
      for (std::size_t u = 0; u < color_.size(); ++u)
        if (color_[u] != kUnassigned) window.push_back(u);
      return window;
    }
    std::vector<std::size_t> touched{v};
    std::deque<std::size_t> queue{v};
    hop_[v] = 0;
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      if (hop_[u] == opt_.window_hops) continue;
      for (const auto& nb : graph_.neighbors(u)) {
        if (hop_[nb.node] != kNoHop) continue;
        hop_[nb.node] = hop_[u] + 1;
        touched.push_back(nb.node);
        queue.push_back(nb.node);
        if (color_[nb.node] != kUnassigned) window.push_back(nb.node);
      }
    }
    for (auto u : touched) hop_[u] = kNoHop;
    std::sort(window.begin() + 1, window.end());
    return window;
  }

  void assign_greedy(std::size_t v) {
    const auto window = window_for(v);
    const auto m = static_cast<Eigen::Index>(window.size());
    for (std::size_t a = 0; a < window.size(); ++a) local_[window[a]] = a;

    Eigen::MatrixXd orig = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd fixed_part = Eigen::MatrixXd::Zero(m, m);  // edges not touching v
    std::vector<std::pair<Eigen::Index, double>> v_edges;      // (local index, weight)
    for (std::size_t a = 0; a < window.size(); ++a) {
      const std::size_t u = window[a];
      for (const auto& nb : graph_.neighbors(u)) {
        const std::size_t b = local_[nb.node];
        if (b == kNoLocal || b <= a) continue;
        const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
        add_edge(orig, ia, ib, nb.w);
        if (a == 0) {
          v_edges.emplace_back(ib, nb.w);
        } else if (color_[u] != color_[nb.node]) {
          add_edge(fixed_part, ia, ib, nb.w);
        }
      }
    }
    for (auto u : window) local_[u] = kNoLocal;

    auto candidate = [&](Color c) {
      Eigen::MatrixXd lb = fixed_part;
      for (auto [b, w] : v_edges) {
        if (color_[window[static_cast<std::size_t>(b)]] != static_cast<int>(c)) add_edge(lb, 0, b, w);
      }
      return lb;
    };

    const KldReference ref(orig, opt_.delta);
    GreedyStep step;
    step.node = v;
    step.kld_red = ref.divergence(candidate(Color::Red), opt_.delta);
    step.kld_blue = ref.divergence(candidate(Color::Blue), opt_.delta);
    const double gap = step.kld_blue - step.kld_red;
    if (std::abs(gap) <= 1e-12 * std::max(1.0, std::abs(step.kld_red))) {
      step.tie = true;
      step.chosen = take_tie();
    } else {
      step.chosen = gap > 0.0 ? Color::Red : Color::Blue;
    }
    color_[v] = static_cast<int>(step.chosen);
    if (trace_) trace_->push_back(step);
  }

  static void add_edge(Eigen::MatrixXd& L, Eigen::Index a, Eigen::Index b, double w) {
    L(a, a) += w;
    L(b, b) += w;
    L(a, b) -= w;
    L(b, a) -= w;
  }

  const WeightedGraph& graph_;
  const BipartiteOptions& opt_;
  std::vector<GreedyStep>* trace_;
  std::vector<int> color_;
  std::vector<std::size_t> hop_;
  std::vector<std::size_t> local_;
  Color next_tie_ = Color::Red;
};

}  // namespace

Bipartition approximate_bipartite(const WeightedGraph& graph, const BipartiteOptions& options,
                                  std::vector<GreedyStep>* trace) {
  check_delta(options.delta);
  if (graph.node_count() == 0) throw InvalidArgument("cannot bipartition an empty graph");
  if (options.start_node >= graph.node_count())
    throw InvalidArgument("start node " + std::to_string(options.start_node) + " out of range");
  return GreedyBipartition(graph, options, trace).run();
}

WeightedGraph induced_bipartite_graph(const WeightedGraph& graph, const Bipartition& bp) {
  if (bp.size() != graph.node_count())
    throw InvalidArgument("bipartition covers " + std::to_string(bp.size()) + " nodes, graph has " +
                          std::to_string(graph.node_count()));
  std::vector<Edge> kept;
  for (const auto& e : graph.edges())
    if (bp[e.i] != bp[e.j]) kept.push_back(e);
  return WeightedGraph(graph.node_count(), std::move(kept));
}

void write_bipartition(std::ostream& out, const Bipartition& bp) {
  for (std::size_t i = 0; i < bp.size(); ++i) out << i << ' ' << color_name(bp[i]) << '\n';
}

}  // namespace gtvd
