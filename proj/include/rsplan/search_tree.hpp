#pragma once

#include <stdexcept>
#include <vector>

#include "rsplan/dynamics.hpp"
#include "rsplan/geometry.hpp"

namespace rsplan {

/// Planner tree: nodes hold a configuration, a parent link, and the obstacle
/// clearance cached at insertion time. Node 0 is the root.
template <typename Config>
struct SearchTree {
  struct Node {
    Config q;
    int parent = -1;
    double clearance = 0.0;
  };

  std::vector<Node> nodes;

  bool empty() const { return nodes.empty(); }
  int size() const { return static_cast<int>(nodes.size()); }

  int add(const Config& q, int parent, double clearance) {
    nodes.push_back(Node{q, parent, clearance});
    return size() - 1;
  }

  std::vector<Config> path_from_root(int idx) const {
    std::vector<Config> path;
    for (int i = idx; i >= 0; i = nodes[i].parent) path.push_back(nodes[i].q);
    std::reverse(path.begin(), path.end());
    return path;
  }
};

using GeomTree = SearchTree<Point>;
using PendTree = SearchTree<PendulumState>;

/// Exact linear-scan nearest neighbor; ties broken by lowest index.
template <typename Config, typename Metric>
int nearest(const SearchTree<Config>& tree, const Config& q, Metric&& metric) {
  if (tree.empty()) throw std::logic_error("nearest: empty tree");
  int best = 0;
  double best_d = metric(tree.nodes[0].q, q);
  for (int i = 1; i < tree.size(); ++i) {
    const double d = metric(tree.nodes[i].q, q);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

inline int nearest(const GeomTree& tree, const Point& q) {
  return nearest(tree, q, [](const Point& a, const Point& b) { return distance(a, b); });
}

inline int nearest(const PendTree& tree, const PendulumState& q) {
  return nearest(tree, q, [](const PendulumState& a, const PendulumState& b) {
    return pendulum_distance(a, b);
  });
}

/// Number of tree nodes within radius of the given node, itself included.
inline int est_weight(const GeomTree& tree, int node, double radius) {
  if (node < 0 || node >= tree.size()) throw std::logic_error("est_weight: bad node index");
  if (radius <= 0.0) throw std::logic_error("est_weight: radius must be > 0");
  int count = 0;
  const Point& q = tree.nodes[node].q;
  for (const auto& n : tree.nodes) {
    if (distance(n.q, q) <= radius) ++count;
  }
  return count;
}

}  // namespace rsplan
