#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "igap/error.hpp"

namespace igap {

using NodeId = std::uint32_t;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Undirected attributed graph. Edges are stored once, u < v, sorted, no
// self-loops, no duplicates. Node labels use -1 for "unlabeled".
struct Graph {
  NodeId n_nodes = 0;
  std::vector<std::pair<NodeId, NodeId>> edges;
  Mat signals;                   // n_nodes x F
  std::vector<int> node_labels;  // empty, or one entry per node
  int n_classes = 0;             // 0 when the graph carries no labels

  NodeId num_edges() const { return static_cast<NodeId>(edges.size()); }
  int signal_dim() const { return static_cast<int>(signals.cols()); }
  bool labeled() const { return n_classes > 0; }

  std::vector<std::vector<NodeId>> adjacency() const;
  std::vector<NodeId> degrees() const;

  bool operator==(const Graph& o) const;
};

// Ordered collection of graphs sharing one signal dimension.
struct GraphSet {
  std::vector<Graph> graphs;
  Eigen::MatrixXi graph_labels;  // graphs x tasks, -1 = missing; 0x0 when unlabeled

  std::size_t size() const { return graphs.size(); }
  int signal_dim() const { return graphs.empty() ? 0 : graphs.front().signal_dim(); }
};

enum class LaplacianKind { Combinatorial, SymmetricNormalized };

// Sparse symmetric Laplacian: combinatorial L = D - A by default, or the
// normalized I - D^{-1/2} A D^{-1/2} extension. Diagonal plus CSR
// off-diagonal values.
struct Laplacian {
  NodeId n = 0;
  LaplacianKind kind = LaplacianKind::Combinatorial;
  std::vector<NodeId> degree;
  Vec diag;
  std::vector<std::uint32_t> row_ptr;  // size n+1
  std::vector<NodeId> col;             // neighbor lists, ascending per row
  std::vector<double> offdiag;         // parallel to col

  Vec matvec(const Vec& x) const;
  Mat apply(const Mat& X) const;  // column-wise matvec
  Mat dense() const;
};

// Validating constructor: normalizes edges to u < v and sorts them, rejects
// self-loops, duplicates and out-of-range endpoints.
Graph make_graph(NodeId n_nodes, std::vector<std::pair<NodeId, NodeId>> edges, Mat signals,
                 std::vector<int> node_labels = {}, int n_classes = 0);

Laplacian build_laplacian(const Graph& g, LaplacianKind kind = LaplacianKind::Combinatorial);

// Induced subgraph on nodes within `radius` hops of `center`. Node 0 of the
// result is the center; remaining nodes appear in (hop, id) order. When
// node_map is given it receives the original id of each subgraph node.
Graph ego_subgraph(const Graph& g, NodeId center, int radius,
                   std::vector<NodeId>* node_map = nullptr);

// Invariant violations as human-readable strings; empty means valid. Never
// throws: callable on arbitrarily broken structs.
std::vector<std::string> validate_graph(const Graph& g);

Graph load_graph(const std::string& path);
void save_graph(const Graph& g, const std::string& path);

// GraphSet directory layout: an index file naming per-graph files (relative to
// the index) plus an optional label matrix.
GraphSet load_graph_set(const std::string& index_path);
void save_graph_set(const GraphSet& gs, const std::string& dir);

int connected_components(const Graph& g);

}  // namespace igap
