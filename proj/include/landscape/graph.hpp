#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "landscape/error.hpp"

namespace landscape {

using Index = std::int64_t;

enum class GraphKind { Chain, Lattice, Sierpinski, Custom };

struct GraphLabel {
  GraphKind kind = GraphKind::Custom;
  int d = 1;
  Index N = 0;
  int W = 1;
  int level = 0;

  std::string to_string() const {
    switch (kind) {
      case GraphKind::Chain:
        return "chain(" + std::to_string(N) + "," + std::to_string(W) + ")";
      case GraphKind::Lattice:
        return "lattice(" + std::to_string(d) + "," + std::to_string(N) + "," + std::to_string(W) + ")";
      case GraphKind::Sierpinski:
        return "sierpinski(" + std::to_string(level) + ")";
      case GraphKind::Custom:
        break;
    }
    return "custom(" + std::to_string(N) + ")";
  }
};

// Finite graph with sorted adjacency and per-vertex ambient degree.
//
// One-dimensional band graphs (x ~ y iff 1 <= |x-y| <= W) are stored
// implicitly so that chains of 2^24 sites cost no adjacency memory; every
// other graph uses compressed rows. Vertices are 0-based.
class GraphTopology {
 public:
  static GraphTopology band(Index n, int w, GraphLabel label) {
    GraphTopology g;
    g.n_ = n;
    g.band_ = w;
    g.ambient_const_ = 2 * w;
    g.label_ = label;
    return g;
  }

  // Validates symmetry, loops, duplicates, ambient >= degree and connectivity.
  static GraphTopology from_adjacency(const std::vector<std::vector<Index>>& adj, std::vector<int> ambient,
                                      GraphLabel label) {
    GraphTopology g;
    g.n_ = static_cast<Index>(adj.size());
    if (g.n_ == 0) throw ValidationError("graph has no vertices");
    if (static_cast<Index>(ambient.size()) != g.n_) throw ValidationError("ambient degree length mismatch");
    g.offsets_.assign(g.n_ + 1, 0);
    for (Index x = 0; x < g.n_; ++x) g.offsets_[x + 1] = g.offsets_[x] + static_cast<Index>(adj[x].size());
    g.targets_.reserve(g.offsets_.back());
    for (Index x = 0; x < g.n_; ++x) {
      std::vector<Index> row = adj[x];
      std::sort(row.begin(), row.end());
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (row[i] < 0 || row[i] >= g.n_) throw ValidationError("neighbor index out of range");
        if (row[i] == x) throw ValidationError("self-loop at vertex " + std::to_string(x));
        if (i > 0 && row[i] == row[i - 1]) throw ValidationError("duplicate neighbor at vertex " + std::to_string(x));
      }
      g.targets_.insert(g.targets_.end(), row.begin(), row.end());
    }
    bool constant = std::all_of(ambient.begin(), ambient.end(), [&](int a) { return a == ambient.front(); });
    if (constant) {
      g.ambient_const_ = ambient.front();
    } else {
      g.ambient_ = std::move(ambient);
    }
    g.label_ = label;
    g.upper_start_.assign(g.n_ + 1, 0);
    for (Index x = 0; x < g.n_; ++x) {
      auto row = g.row(x);
      auto above = std::upper_bound(row.begin(), row.end(), x);
      g.upper_start_[x + 1] = g.upper_start_[x] + static_cast<Index>(row.end() - above);
    }
    g.validate();
    return g;
  }

  Index vertex_count() const noexcept { return n_; }
  const GraphLabel& label() const noexcept { return label_; }
  bool is_band() const noexcept { return band_ > 0; }
  int band_width() const noexcept { return band_; }

  Index degree(Index x) const {
    if (band_ > 0) return std::min<Index>(x, band_) + std::min<Index>(n_ - 1 - x, band_);
    return offsets_[x + 1] - offsets_[x];
  }

  int ambient_degree(Index x) const { return ambient_.empty() ? ambient_const_ : ambient_[x]; }
  bool constant_ambient_degree() const noexcept { return ambient_.empty(); }
  int max_ambient_degree() const {
    return ambient_.empty() ? ambient_const_ : *std::max_element(ambient_.begin(), ambient_.end());
  }

  // Calls f(y) for each neighbor y of x in ascending order.
  template <class F>
  void for_each_neighbor(Index x, F&& f) const {
    if (band_ > 0) {
      Index lo = std::max<Index>(0, x - band_), hi = std::min<Index>(n_ - 1, x + band_);
      for (Index y = lo; y <= hi; ++y)
        if (y != x) f(y);
      return;
    }
    for (Index k = offsets_[x]; k < offsets_[x + 1]; ++k) f(targets_[k]);
  }

  std::vector<Index> neighbors(Index x) const {
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(degree(x)));
    for_each_neighbor(x, [&](Index y) { out.push_back(y); });
    return out;
  }

  // k-th neighbor of x in ascending order, k < degree(x).
  Index neighbor(Index x, Index k) const {
    if (band_ > 0) {
      Index lo = std::max<Index>(0, x - band_);
      Index y = lo + k;
      return y >= x ? y + 1 : y;
    }
    return targets_[offsets_[x] + k];
  }

  Index edge_count() const {
    if (band_ > 0) {
      Index total = 0;
      for (int d = 1; d <= band_; ++d) total += std::max<Index>(0, n_ - d);
      return total;
    }
    return upper_start_.back();
  }

  // Canonical edge order: pairs (u, v) with u < v, sorted lexicographically.
  // Calls f(edge_id, u, v).
  template <class F>
  void for_each_edge(F&& f) const {
    Index id = 0;
    for (Index u = 0; u < n_; ++u) {
      for_each_neighbor(u, [&](Index v) {
        if (v > u) f(id++, u, v);
      });
    }
  }

  // Canonical id of edge {u, v}, or nullopt when they are not adjacent.
  std::optional<Index> edge_index(Index u, Index v) const {
    if (u > v) std::swap(u, v);
    if (u == v || u < 0 || v >= n_) return std::nullopt;
    if (band_ > 0) {
      if (v - u > band_) return std::nullopt;
      Index full = std::max<Index>(0, n_ - band_);  // vertices with W forward neighbors
      Index before;
      if (u <= full) {
        before = u * band_;
      } else {
        Index t = u - full;  // vertices full..u-1 have n-1-x forward neighbors
        before = full * band_ + t * (n_ - 1 - full) - t * (t - 1) / 2;
      }
      return before + (v - u - 1);
    }
    auto r = row(u);
    auto above = std::upper_bound(r.begin(), r.end(), u);
    auto it = std::lower_bound(above, r.end(), v);
    if (it == r.end() || *it != v) return std::nullopt;
    return upper_start_[u] + (it - above);
  }

  std::vector<std::array<Index, 2>> edges() const {
    std::vector<std::array<Index, 2>> out;
    out.reserve(static_cast<std::size_t>(edge_count()));
    for_each_edge([&](Index, Index u, Index v) { out.push_back({u, v}); });
    return out;
  }

  std::vector<std::vector<Index>> adjacency() const {
    std::vector<std::vector<Index>> out(static_cast<std::size_t>(n_));
    for (Index x = 0; x < n_; ++x) out[x] = neighbors(x);
    return out;
  }

 private:
  std::span<const Index> row(Index x) const {
    return {targets_.data() + offsets_[x], static_cast<std::size_t>(offsets_[x + 1] - offsets_[x])};
  }

  void validate() const {
    for (Index x = 0; x < n_; ++x) {
      for (Index y : row(x)) {
        auto r = row(y);
        if (!std::binary_search(r.begin(), r.end(), x))
          throw ValidationError("adjacency not symmetric at (" + std::to_string(x) + "," + std::to_string(y) + ")");
      }
      if (ambient_degree(x) < degree(x))
        throw ValidationError("ambient degree below truncated degree at vertex " + std::to_string(x));
    }
    std::vector<char> seen(static_cast<std::size_t>(n_), 0);
    std::vector<Index> stack{0};
    seen[0] = 1;
    Index reached = 1;
    while (!stack.empty()) {
      Index x = stack.back();
      stack.pop_back();
      for (Index y : row(x)) {
        if (!seen[y]) {
          seen[y] = 1;
          ++reached;
          stack.push_back(y);
        }
      }
    }
    if (reached != n_) throw ValidationError("graph is not connected");
  }

  Index n_ = 0;
  int band_ = 0;
  std::vector<Index> offsets_, targets_, upper_start_;
  std::vector<int> ambient_;
  int ambient_const_ = 0;
  GraphLabel label_;
};

// 1-D band graph on N vertices: x ~ y iff 1 <= |x-y| <= W, ambient degree 2W.
inline GraphTopology build_chain(Index N, int W) {
  if (W < 1) throw InvalidParameter("chain band width must be >= 1");
  if (N <= W) throw InvalidParameter("chain requires W < N");
  return GraphTopology::band(N, W, GraphLabel{GraphKind::Chain, 1, N, W, 0});
}

// Integer offsets v != 0 with |v|_2 <= W in d dimensions.
inline std::vector<std::vector<int>> lattice_offsets(int d, int W) {
  std::vector<std::vector<int>> out;
  std::vector<int> v(static_cast<std::size_t>(d), -W);
  const long long w2 = static_cast<long long>(W) * W;
  while (true) {
    long long r2 = 0;
    for (int c : v) r2 += static_cast<long long>(c) * c;
    if (r2 >= 1 && r2 <= w2) out.push_back(v);
    int i = d - 1;
    while (i >= 0 && v[i] == W) v[i--] = -W;
    if (i < 0) break;
    ++v[i];
  }
  return out;
}

inline constexpr Index kLatticeVertexCap = Index{1} << 26;
inline constexpr Index kLatticeEdgeCap = Index{1} << 28;

// Box [1,N]^d of Z^d, row-major, with x ~ y iff 1 <= |x-y|_2 <= W.
inline GraphTopology build_lattice(int d, Index N, int W) {
  if (d < 1 || N < 1 || W < 1) throw InvalidParameter("lattice requires d, N, W >= 1");
  Index n = 1;
  for (int i = 0; i < d; ++i) {
    if (n > kLatticeVertexCap / N) throw CapacityError("N^d exceeds the lattice vertex cap");
    n *= N;
  }
  GraphLabel label{GraphKind::Lattice, d, N, W, 0};
  if (d == 1) {
    if (W >= N) throw InvalidParameter("1-D lattice requires W < N");
    return GraphTopology::band(N, W, label);
  }
  auto offs = lattice_offsets(d, W);
  const int ambient = static_cast<int>(offs.size());
  if (n * static_cast<Index>(ambient) / 2 > kLatticeEdgeCap) throw CapacityError("lattice edge count exceeds cap");
  std::vector<std::vector<Index>> adj(static_cast<std::size_t>(n));
  std::vector<Index> coord(static_cast<std::size_t>(d));
  for (Index x = 0; x < n; ++x) {
    Index r = x;
    for (int i = d - 1; i >= 0; --i) {
      coord[i] = r % N;
      r /= N;
    }
    auto& row = adj[x];
    for (const auto& v : offs) {
      Index y = 0;
      bool inside = true;
      for (int i = 0; i < d; ++i) {
        Index c = coord[i] + v[i];
        if (c < 0 || c >= N) {
          inside = false;
          break;
        }
        y = y * N + c;
      }
      if (inside) row.push_back(y);
    }
  }
  return GraphTopology::from_adjacency(adj, std::vector<int>(static_cast<std::size_t>(n), ambient), label);
}

inline constexpr int kSierpinskiLevelCap = 8;

// Level-m corner triangle of the infinite gasket graph.
//
// Points use the triangular basis: level 0 is (0,0),(1,0),(0,1) and level m
// is three copies of level m-1 shifted by (0,0), (s,0), (0,s) with
// s = 2^(m-1), merged by coordinate. Vertices are ordered by (row, column).
inline GraphTopology build_sierpinski(int level, int cap = kSierpinskiLevelCap) {
  if (level < 0) throw InvalidParameter("gasket level must be non-negative");
  if (level > cap) throw CapacityError("gasket level " + std::to_string(level) + " above cap " + std::to_string(cap));
  using Point = std::pair<long long, long long>;
  std::vector<Point> pts{{0, 0}, {1, 0}, {0, 1}};
  std::vector<std::pair<Point, Point>> edges{{pts[0], pts[1]}, {pts[0], pts[2]}, {pts[1], pts[2]}};
  for (int m = 1; m <= level; ++m) {
    const long long s = 1LL << (m - 1);
    std::map<Point, char> merged;
    std::vector<std::pair<Point, Point>> next_edges;
    next_edges.reserve(edges.size() * 3);
    for (const Point& shift : {Point{0, 0}, Point{s, 0}, Point{0, s}}) {
      auto mv = [&](const Point& p) { return Point{p.first + shift.first, p.second + shift.second}; };
      for (const auto& p : pts) merged.emplace(mv(p), 0);
      for (const auto& e : edges) next_edges.emplace_back(mv(e.first), mv(e.second));
    }
    pts.clear();
    for (const auto& kv : merged) pts.push_back(kv.first);
    edges = std::move(next_edges);
  }
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  std::map<Point, Index> id;
  for (std::size_t i = 0; i < pts.size(); ++i) id[pts[i]] = static_cast<Index>(i);
  std::vector<std::vector<Index>> adj(pts.size());
  for (const auto& e : edges) {
    Index a = id.at(e.first), b = id.at(e.second);
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (auto& row : adj) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
  GraphLabel label{GraphKind::Sierpinski, 2, static_cast<Index>(pts.size()), 1, level};
  return GraphTopology::from_adjacency(adj, std::vector<int>(pts.size(), 4), label);
}

// Closed-form gasket sizes.
inline Index sierpinski_vertex_count(int level) {
  Index p = 1;
  for (int i = 0; i < level; ++i) p *= 3;
  return 3 * (p + 1) / 2;
}
inline Index sierpinski_edge_count(int level) {
  Index p = 3;
  for (int i = 0; i < level; ++i) p *= 3;
  return p;
}

// Vertex subset A on which Dirichlet conditions are imposed.
struct DomainMask {
  std::vector<std::uint8_t> member_flags;
  Index member_count = 0;

  static DomainMask all(Index n) {
    if (n < 1) throw ValidationError("mask must have at least one member");
    return DomainMask{std::vector<std::uint8_t>(static_cast<std::size_t>(n), 1), n};
  }
  static DomainMask from_flags(std::vector<std::uint8_t> flags) {
    Index count = 0;
    for (auto& f : flags) {
      f = f ? 1 : 0;
      count += f;
    }
    if (count < 1) throw ValidationError("mask must have at least one member");
    return DomainMask{std::move(flags), count};
  }
  static DomainMask from_members(Index n, std::span<const Index> members) {
    std::vector<std::uint8_t> flags(static_cast<std::size_t>(n), 0);
    for (Index x : members) {
      if (x < 0 || x >= n) throw ValidationError("mask member out of range");
      flags[x] = 1;
    }
    return from_flags(std::move(flags));
  }
  // Members first..last inclusive.
  static DomainMask interval(Index n, Index first, Index last) {
    if (first < 0 || last >= n || first > last) throw ValidationError("mask interval out of range");
    std::vector<std::uint8_t> flags(static_cast<std::size_t>(n), 0);
    std::fill(flags.begin() + first, flags.begin() + last + 1, 1);
    return DomainMask{std::move(flags), last - first + 1};
  }

  Index size() const noexcept { return static_cast<Index>(member_flags.size()); }
  bool contains(Index x) const { return member_flags[x] != 0; }
  bool is_full() const noexcept { return member_count == size(); }
  std::vector<Index> members() const {
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(member_count));
    for (Index x = 0; x < size(); ++x)
      if (member_flags[x]) out.push_back(x);
    return out;
  }
};

struct MetricSummary {
  Index source = -1;
  std::vector<Index> distances_from;     // -1 when unreachable inside A or outside A
  Index inradius = 0;                    // rho_A
  std::vector<Index> boundary_distance;  // delta(x) for members, 0 outside
  Index components = 0;
  std::vector<std::string> warnings;
};

// Breadth-first distances from source, walking only through members of A.
inline std::vector<Index> bfs_distances(const GraphTopology& g, const DomainMask& A, Index source) {
  if (A.size() != g.vertex_count()) throw ValidationError("mask size does not match graph");
  if (!A.contains(source)) throw ValidationError("BFS source outside the mask");
  std::vector<Index> dist(static_cast<std::size_t>(g.vertex_count()), -1);
  std::queue<Index> q;
  dist[source] = 0;
  q.push(source);
  while (!q.empty()) {
    Index x = q.front();
    q.pop();
    g.for_each_neighbor(x, [&](Index y) {
      if (A.contains(y) && dist[y] < 0) {
        dist[y] = dist[x] + 1;
        q.push(y);
      }
    });
  }
  return dist;
}

// Members with a neighbor outside A or with missing ambient edges.
inline bool on_interior_boundary(const GraphTopology& g, const DomainMask& A, Index x) {
  if (g.ambient_degree(x) > g.degree(x)) return true;
  bool out = false;
  g.for_each_neighbor(x, [&](Index y) { out = out || !A.contains(y); });
  return out;
}

// delta(x) = 1 + BFS distance inside A to the interior boundary, rho_A = max delta.
inline MetricSummary metric_summary(const GraphTopology& g, const DomainMask& A, Index source = -1) {
  if (A.size() != g.vertex_count()) throw ValidationError("mask size does not match graph");
  MetricSummary out;
  const Index n = g.vertex_count();
  out.boundary_distance.assign(static_cast<std::size_t>(n), 0);
  std::vector<Index> dist(static_cast<std::size_t>(n), -1);
  std::queue<Index> q;
  for (Index x = 0; x < n; ++x) {
    if (A.contains(x) && on_interior_boundary(g, A, x)) {
      dist[x] = 0;
      q.push(x);
    }
  }
  while (!q.empty()) {
    Index x = q.front();
    q.pop();
    g.for_each_neighbor(x, [&](Index y) {
      if (A.contains(y) && dist[y] < 0) {
        dist[y] = dist[x] + 1;
        q.push(y);
      }
    });
  }
  for (Index x = 0; x < n; ++x) {
    if (!A.contains(x)) continue;
    if (dist[x] < 0) throw ValidationError("mask component without boundary: delta undefined");
    out.boundary_distance[x] = dist[x] + 1;
    out.inradius = std::max(out.inradius, dist[x] + 1);
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (Index x = 0; x < n; ++x) {
    if (!A.contains(x) || seen[x]) continue;
    ++out.components;
    std::vector<Index> stack{x};
    seen[x] = 1;
    while (!stack.empty()) {
      Index z = stack.back();
      stack.pop_back();
      g.for_each_neighbor(z, [&](Index y) {
        if (A.contains(y) && !seen[y]) {
          seen[y] = 1;
          stack.push_back(y);
        }
      });
    }
  }
  if (out.components > 1)
    out.warnings.push_back("mask has " + std::to_string(out.components) +
                           " components; distances computed per component");
  if (source < 0) {
    for (Index x = 0; x < n && source < 0; ++x)
      if (A.contains(x)) source = x;
  }
  out.source = source;
  out.distances_from = bfs_distances(g, A, source);
  return out;
}

// #{y : d(x,y) <= r} in the full graph.
inline Index ball_volume(const GraphTopology& g, Index x, Index r) {
  auto d = bfs_distances(g, DomainMask::all(g.vertex_count()), x);
  return std::count_if(d.begin(), d.end(), [&](Index v) { return v >= 0 && v <= r; });
}

}  // namespace landscape
