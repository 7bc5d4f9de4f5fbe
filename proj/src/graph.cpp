#include "igap/graph.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace igap {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::vector<NodeId>> Graph::adjacency() const {
  std::vector<std::vector<NodeId>> adj(n_nodes);
  for (auto [u, v] : edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  for (auto& nbrs : adj) std::sort(nbrs.begin(), nbrs.end());
  return adj;
}

std::vector<NodeId> Graph::degrees() const {
  std::vector<NodeId> deg(n_nodes, 0);
  for (auto [u, v] : edges) {
    ++deg[u];
    ++deg[v];
  }
  return deg;
}

bool Graph::operator==(const Graph& o) const {
  return n_nodes == o.n_nodes && edges == o.edges && n_classes == o.n_classes &&
         node_labels == o.node_labels && signals.rows() == o.signals.rows() &&
         signals.cols() == o.signals.cols() && signals == o.signals;
}

Graph make_graph(NodeId n_nodes, std::vector<std::pair<NodeId, NodeId>> edges, Mat signals,
                 std::vector<int> node_labels, int n_classes) {
  for (auto& [u, v] : edges) {
    if (u == v) throw ContractError("SelfLoop: edge (" + std::to_string(u) + "," + std::to_string(v) + ")");
    if (u > v) std::swap(u, v);
    if (v >= n_nodes) throw ContractError("EdgeOutOfRange: endpoint " + std::to_string(v));
  }
  std::sort(edges.begin(), edges.end());
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (edges[i] == edges[i - 1]) {
      throw ContractError("DuplicateEdge: (" + std::to_string(edges[i].first) + "," +
                          std::to_string(edges[i].second) + ")");
    }
  }
  if (static_cast<NodeId>(signals.rows()) != n_nodes) {
    throw ContractError("SignalRowMismatch: " + std::to_string(signals.rows()) + " rows for " +
                        std::to_string(n_nodes) + " nodes");
  }
  if (!node_labels.empty() && node_labels.size() != n_nodes) {
    throw ContractError("LabelCountMismatch");
  }
  for (int l : node_labels) {
    if (l < -1 || l >= n_classes) throw ContractError("LabelOutOfRange: " + std::to_string(l));
  }
  Graph g;
  g.n_nodes = n_nodes;
  g.edges = std::move(edges);
  g.signals = std::move(signals);
  g.node_labels = std::move(node_labels);
  g.n_classes = n_classes;
  return g;
}

Laplacian build_laplacian(const Graph& g, LaplacianKind kind) {
  Laplacian L;
  L.n = g.n_nodes;
  L.kind = kind;
  L.degree.assign(g.n_nodes, 0);
  auto adj = g.adjacency();
  L.row_ptr.assign(g.n_nodes + 1, 0);
  for (NodeId i = 0; i < g.n_nodes; ++i) {
    L.degree[i] = static_cast<NodeId>(adj[i].size());
    L.row_ptr[i + 1] = L.row_ptr[i] + static_cast<std::uint32_t>(adj[i].size());
  }
  L.col.reserve(L.row_ptr.back());
  for (NodeId i = 0; i < g.n_nodes; ++i) {
    L.col.insert(L.col.end(), adj[i].begin(), adj[i].end());
  }
  L.diag.resize(g.n_nodes);
  L.offdiag.resize(L.col.size());
  if (kind == LaplacianKind::Combinatorial) {
    for (NodeId i = 0; i < g.n_nodes; ++i) L.diag[i] = double(L.degree[i]);
    std::fill(L.offdiag.begin(), L.offdiag.end(), -1.0);
  } else {
    // I - D^{-1/2} A D^{-1/2}; rows of isolated nodes are zero
    for (NodeId i = 0; i < g.n_nodes; ++i) {
      L.diag[i] = L.degree[i] > 0 ? 1.0 : 0.0;
      for (std::uint32_t p = L.row_ptr[i]; p < L.row_ptr[i + 1]; ++p) {
        L.offdiag[p] = -1.0 / std::sqrt(double(L.degree[i]) * double(L.degree[L.col[p]]));
      }
    }
  }
  return L;
}

Vec Laplacian::matvec(const Vec& x) const {
  if (static_cast<NodeId>(x.size()) != n) throw ContractError("Laplacian::matvec: size mismatch");
  Vec y(n);
  for (NodeId i = 0; i < n; ++i) {
    double acc = diag[i] * x[i];
    for (std::uint32_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) acc += offdiag[p] * x[col[p]];
    y[i] = acc;
  }
  return y;
}

Mat Laplacian::apply(const Mat& X) const {
  if (static_cast<NodeId>(X.rows()) != n) throw ContractError("Laplacian::apply: row mismatch");
  Mat Y(X.rows(), X.cols());
  for (Eigen::Index c = 0; c < X.cols(); ++c) Y.col(c) = matvec(X.col(c));
  return Y;
}

Mat Laplacian::dense() const {
  Mat D = Mat::Zero(n, n);
  for (NodeId i = 0; i < n; ++i) {
    D(i, i) = diag[i];
    for (std::uint32_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) D(i, col[p]) = offdiag[p];
  }
  return D;
}

Graph ego_subgraph(const Graph& g, NodeId center, int radius, std::vector<NodeId>* node_map) {
  if (center >= g.n_nodes) throw ContractError("ego_subgraph: invalid center " + std::to_string(center));
  if (radius < 1) throw ContractError("ego_subgraph: radius must be >= 1");

  auto adj = g.adjacency();
  std::vector<int> hop(g.n_nodes, -1);
  hop[center] = 0;
  std::vector<NodeId> order{center};
  std::deque<NodeId> frontier{center};
  while (!frontier.empty()) {
    NodeId u = frontier.front();
    frontier.pop_front();
    if (hop[u] == radius) continue;
    for (NodeId v : adj[u]) {
      if (hop[v] < 0) {
        hop[v] = hop[u] + 1;
        order.push_back(v);
        frontier.push_back(v);
      }
    }
  }
  // order is center-first BFS; neighbors expand in ascending id per level
  std::vector<NodeId> inv(g.n_nodes, 0);
  for (NodeId i = 0; i < order.size(); ++i) inv[order[i]] = i;

  std::vector<std::pair<NodeId, NodeId>> sub_edges;
  for (auto [u, v] : g.edges) {
    if (hop[u] >= 0 && hop[v] >= 0) {
      NodeId a = inv[u], b = inv[v];
      if (a > b) std::swap(a, b);
      sub_edges.emplace_back(a, b);
    }
  }
  Mat sub_signals(order.size(), g.signals.cols());
  std::vector<int> sub_labels;
  if (!g.node_labels.empty()) sub_labels.resize(order.size());
  for (NodeId i = 0; i < order.size(); ++i) {
    sub_signals.row(i) = g.signals.row(order[i]);
    if (!sub_labels.empty()) sub_labels[i] = g.node_labels[order[i]];
  }
  if (node_map) *node_map = order;
  return make_graph(static_cast<NodeId>(order.size()), std::move(sub_edges), std::move(sub_signals),
                    std::move(sub_labels), g.n_classes);
}

std::vector<std::string> validate_graph(const Graph& g) {
  std::vector<std::string> report;
  std::set<std::pair<NodeId, NodeId>> seen;
  for (auto [u, v] : g.edges) {
    if (u == v) report.push_back("self-loop at node " + std::to_string(u));
    if (u >= g.n_nodes || v >= g.n_nodes)
      report.push_back("edge endpoint out of range: (" + std::to_string(u) + "," + std::to_string(v) + ")");
    auto key = std::minmax(u, v);
    if (!seen.insert({key.first, key.second}).second)
      report.push_back("duplicate edge (" + std::to_string(u) + "," + std::to_string(v) + ")");
  }
  if (static_cast<NodeId>(g.signals.rows()) != g.n_nodes)
    report.push_back("signal row count " + std::to_string(g.signals.rows()) + " != n_nodes " +
                     std::to_string(g.n_nodes));
  if (!g.node_labels.empty() && g.node_labels.size() != g.n_nodes)
    report.push_back("label count mismatch");
  for (std::size_t i = 0; i < g.node_labels.size(); ++i) {
    if (g.node_labels[i] < -1 || g.node_labels[i] >= g.n_classes)
      report.push_back("label out of range at node " + std::to_string(i));
  }
  return report;
}

namespace {

struct LineReader {
  std::ifstream in;
  int line_no = 0;
  explicit LineReader(const std::string& path) : in(path) {}
  bool next(std::string& out) {
    while (std::getline(in, out)) {
      ++line_no;
      return true;
    }
    return false;
  }
};

}  // namespace

Graph load_graph(const std::string& path) {
  LineReader rd(path);
  if (!rd.in) throw IoError("cannot open graph file: " + path);

  std::string line;
  if (!rd.next(line)) throw ParseError("MalformedHeader: empty file", 1);
  std::istringstream hs(line);
  long long n = -1, m = -1, f = -1, d = -1;
  if (!(hs >> n >> m >> f >> d) || n < 0 || m < 0 || f < 0 || d < 0) {
    throw ParseError("MalformedHeader: expected `N M F d`", rd.line_no);
  }
  std::string junk;
  if (hs >> junk) throw ParseError("MalformedHeader: trailing content", rd.line_no);

  std::vector<std::pair<NodeId, NodeId>> edges;
  edges.reserve(m);
  std::set<std::pair<NodeId, NodeId>> seen;
  for (long long e = 0; e < m; ++e) {
    if (!rd.next(line)) throw ParseError("EdgeCountMismatch: expected " + std::to_string(m) + " edges", rd.line_no);
    std::istringstream es(line);
    long long u = -1, v = -1;
    if (!(es >> u >> v) || (es >> junk)) throw ParseError("MalformedEdge: expected `u v`", rd.line_no);
    if (u < 0 || v < 0 || u >= n || v >= n)
      throw ParseError("EdgeOutOfRange: endpoint beyond node count", rd.line_no);
    if (u == v) throw ParseError("SelfLoop: (" + std::to_string(u) + "," + std::to_string(v) + ")", rd.line_no);
    if (u >= v) throw ParseError("EdgeOrder: endpoints must satisfy u < v", rd.line_no);
    if (!seen.insert({NodeId(u), NodeId(v)}).second)
      throw ParseError("DuplicateEdge: (" + std::to_string(u) + "," + std::to_string(v) + ")", rd.line_no);
    edges.emplace_back(NodeId(u), NodeId(v));
  }

  Mat signals(n, f);
  for (long long i = 0; i < n; ++i) {
    if (!rd.next(line)) throw ParseError("SignalRowMismatch: expected " + std::to_string(n) + " signal rows", rd.line_no);
    std::istringstream ss(line);
    for (long long j = 0; j < f; ++j) {
      double val;
      if (!(ss >> val)) throw ParseError("MalformedSignalRow: expected " + std::to_string(f) + " values", rd.line_no);
      signals(i, j) = val;
    }
    if (ss >> junk) throw ParseError("MalformedSignalRow: trailing content", rd.line_no);
  }

  std::vector<int> labels;
  if (d > 0) {
    labels.resize(n);
    for (long long i = 0; i < n; ++i) {
      if (!rd.next(line)) throw ParseError("LabelRowMismatch: expected " + std::to_string(n) + " label rows", rd.line_no);
      std::istringstream ls(line);
      long long lab;
      if (!(ls >> lab) || (ls >> junk)) throw ParseError("MalformedLabel", rd.line_no);
      if (lab < -1 || lab >= d) throw ParseError("LabelOutOfRange: " + std::to_string(lab), rd.line_no);
      labels[i] = int(lab);
    }
  }
  while (rd.next(line)) {
    if (!line.empty() && line.find_first_not_of(" \t\r") != std::string::npos)
      throw ParseError("TrailingContent", rd.line_no);
  }
  return make_graph(NodeId(n), std::move(edges), std::move(signals), std::move(labels), int(d));
}

void save_graph(const Graph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write graph file: " + path);
  out << g.n_nodes << ' ' << g.num_edges() << ' ' << g.signal_dim() << ' ' << g.n_classes << '\n';
  for (auto [u, v] : g.edges) out << u << ' ' << v << '\n';
  for (NodeId i = 0; i < g.n_nodes; ++i) {
    for (int j = 0; j < g.signal_dim(); ++j) {
      if (j) out << ' ';
      out << fmt_double(g.signals(i, j));
    }
    out << '\n';
  }
  if (g.labeled()) {
    for (NodeId i = 0; i < g.n_nodes; ++i) out << g.node_labels[i] << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

GraphSet load_graph_set(const std::string& index_path) {
  LineReader rd(index_path);
  if (!rd.in) throw IoError("cannot open graph set index: " + index_path);
  std::string line, junk;
  if (!rd.next(line)) throw ParseError("MalformedHeader: empty index", 1);
  std::istringstream hs(line);
  long long count = -1, tasks = -1;
  if (!(hs >> count >> tasks) || count < 0 || tasks < 0 || (hs >> junk))
    throw ParseError("MalformedHeader: expected `G T`", rd.line_no);

  const auto base = std::filesystem::path(index_path).parent_path();
  GraphSet gs;
  if (tasks > 0) gs.graph_labels.resize(count, tasks);
  for (long long i = 0; i < count; ++i) {
    if (!rd.next(line)) throw ParseError("IndexRowMismatch: expected " + std::to_string(count) + " entries", rd.line_no);
    std::istringstream es(line);
    std::string fname;
    if (!(es >> fname)) throw ParseError("MalformedIndexRow", rd.line_no);
    for (long long t = 0; t < tasks; ++t) {
      long long lab;
      if (!(es >> lab)) throw ParseError("MalformedIndexRow: expected " + std::to_string(tasks) + " labels", rd.line_no);
      gs.graph_labels(i, t) = int(lab);
    }
    if (es >> junk) throw ParseError("MalformedIndexRow: trailing content", rd.line_no);
    gs.graphs.push_back(load_graph((base / fname).string()));
  }
  for (const auto& g : gs.graphs) {
    if (g.signal_dim() != gs.signal_dim())
      throw ContractError("GraphSet: inconsistent signal dimensions");
  }
  return gs;
}

void save_graph_set(const GraphSet& gs, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto base = std::filesystem::path(dir);
  std::ofstream idx(base / "index.txt");
  if (!idx) throw IoError("cannot write graph set index in " + dir);
  const long long tasks = gs.graph_labels.size() > 0 ? gs.graph_labels.cols() : 0;
  idx << gs.graphs.size() << ' ' << tasks << '\n';
  for (std::size_t i = 0; i < gs.graphs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "g%05zu.graph", i);
    idx << name;
    for (long long t = 0; t < tasks; ++t) idx << ' ' << gs.graph_labels(Eigen::Index(i), t);
    idx << '\n';
    save_graph(gs.graphs[i], (base / name).string());
  }
}

int connected_components(const Graph& g) {
  auto adj = g.adjacency();
  std::vector<char> seen(g.n_nodes, 0);
  int components = 0;
  std::deque<NodeId> stack;
  for (NodeId s = 0; s < g.n_nodes; ++s) {
    if (seen[s]) continue;
    ++components;
    seen[s] = 1;
    stack.push_back(s);
    while (!stack.empty()) {
      NodeId u = stack.back();
      stack.pop_back();
      for (NodeId v : adj[u]) {
        if (!seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
  }
  return components;
}

}  // namespace igap
