#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "landscape/error.hpp"
#include "landscape/graph.hpp"

namespace landscape {

enum class Normalization { Probabilistic, Combinatorial };

inline std::string to_string(Normalization n) {
  return n == Normalization::Probabilistic ? "probabilistic" : "combinatorial";
}

// 64-bit FNV-1a accumulator.
class Fnv1a {
 public:
  void bytes(const void* p, std::size_t len) {
    auto c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h_ ^= c[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  template <class T>
  void value(const T& v) {
    bytes(&v, sizeof(T));
  }
  template <class T>
  void values(std::span<const T> v) {
    value(static_cast<std::uint64_t>(v.size()));
    if (!v.empty()) bytes(v.data(), v.size() * sizeof(T));
  }
  void text(const std::string& s) {
    value(static_cast<std::uint64_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::uint64_t digest() const noexcept { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

struct OperatorSpec {
  std::shared_ptr<const GraphTopology> graph;
  DomainMask mask;                 // empty flags mean every vertex
  std::vector<double> hopping;     // canonical edge order; empty means all 1
  std::vector<double> potential;   // per vertex; empty means 0
  Normalization normalization = Normalization::Combinatorial;
};

// off[k] is the entry (k, k+1).
struct TridiagonalMatrix {
  std::vector<double> diag, off;
  Index size() const noexcept { return static_cast<Index>(diag.size()); }
};

// Lower bands packed band-major: data[d*n + i] holds entry (i+d, i) for i < n-d.
struct BandedMatrix {
  Index n = 0;
  int w = 0;
  std::vector<double> data;

  BandedMatrix() = default;
  BandedMatrix(Index n_, int w_) : n(n_), w(w_), data(static_cast<std::size_t>((w_ + 1) * n_), 0.0) {}
  double band(int d, Index i) const { return data[static_cast<std::size_t>(d * n + i)]; }
  double& band(int d, Index i) { return data[static_cast<std::size_t>(d * n + i)]; }
  double get(Index i, Index j) const {
    if (i < j) std::swap(i, j);
    Index d = i - j;
    return d > w ? 0.0 : band(static_cast<int>(d), j);
  }
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

class AssembledOperator {
 public:
  using Storage = std::variant<TridiagonalMatrix, BandedMatrix, SparseMatrix>;

  AssembledOperator(Storage storage, std::uint64_t hash, Normalization norm = Normalization::Combinatorial,
                    std::vector<Index> vertices = {}, std::vector<double> weights = {})
      : storage_(std::move(storage)),
        hash_(hash),
        norm_(norm),
        vertices_(std::move(vertices)),
        weights_(std::move(weights)) {
    dim_ = std::visit(
        [](const auto& s) -> Index {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, TridiagonalMatrix>) {
            return s.size();
          } else if constexpr (std::is_same_v<S, BandedMatrix>) {
            return s.n;
          } else {
            return s.rows();
          }
        },
        storage_);
  }

  const Storage& storage() const noexcept { return storage_; }
  Index dimension() const noexcept { return dim_; }
  std::uint64_t spec_hash() const noexcept { return hash_; }
  Normalization normalization() const noexcept { return norm_; }
  // Graph vertex of each row; empty when rows are the graph vertices in order.
  const std::vector<Index>& vertices() const noexcept { return vertices_; }
  Index vertex_of(Index row) const { return vertices_.empty() ? row : vertices_[row]; }
  // Ambient degree of each row, used by the degree-weighted form.
  const std::vector<double>& weights() const noexcept { return weights_; }

  const TridiagonalMatrix* tridiagonal() const { return std::get_if<TridiagonalMatrix>(&storage_); }
  const BandedMatrix* banded() const { return std::get_if<BandedMatrix>(&storage_); }
  const SparseMatrix* sparse() const { return std::get_if<SparseMatrix>(&storage_); }

  std::string storage_name() const {
    if (tridiagonal()) return "tridiagonal";
    if (banded()) return "banded";
    return "sparse";
  }

  double entry(Index i, Index j) const {
    if (const auto* t = tridiagonal()) {
      if (i == j) return t->diag[i];
      if (j == i + 1) return t->off[i];
      if (i == j + 1) return t->off[j];
      return 0.0;
    }
    if (const auto* b = banded()) return b->get(i, j);
    return sparse()->coeff(i, j);
  }

 private:
  Storage storage_;
  std::uint64_t hash_;
  Normalization norm_;
  std::vector<Index> vertices_;
  std::vector<double> weights_;
  Index dim_ = 0;
};

inline std::uint64_t storage_hash(const AssembledOperator::Storage& s) {
  Fnv1a h;
  if (const auto* t = std::get_if<TridiagonalMatrix>(&s)) {
    h.text("tridiagonal");
    h.values<double>(t->diag);
    h.values<double>(t->off);
  } else if (const auto* b = std::get_if<BandedMatrix>(&s)) {
    h.text("banded");
    h.value(b->w);
    h.values<double>(b->data);
  } else {
    const auto& m = std::get<SparseMatrix>(s);
    h.text("sparse");
    for (int k = 0; k < m.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
        h.value(static_cast<Index>(it.row()));
        h.value(static_cast<Index>(it.col()));
        h.value(it.value());
      }
  }
  return h.digest();
}

inline AssembledOperator make_tridiagonal(std::vector<double> diag, std::vector<double> off) {
  if (diag.empty()) throw ValidationError("operator dimension must be positive");
  if (off.size() + 1 != diag.size()) throw ValidationError("off-diagonal length must be dimension - 1");
  TridiagonalMatrix t{std::move(diag), std::move(off)};
  AssembledOperator::Storage s = std::move(t);
  auto h = storage_hash(s);
  return AssembledOperator(std::move(s), h);
}

inline AssembledOperator make_banded(BandedMatrix b) {
  if (b.n < 1) throw ValidationError("operator dimension must be positive");
  AssembledOperator::Storage s = std::move(b);
  auto h = storage_hash(s);
  return AssembledOperator(std::move(s), h);
}

inline AssembledOperator make_sparse(SparseMatrix m) {
  if (m.rows() != m.cols() || m.rows() < 1) throw ValidationError("sparse operator must be square and nonempty");
  m.makeCompressed();
  AssembledOperator::Storage s = std::move(m);
  auto h = storage_hash(s);
  return AssembledOperator(std::move(s), h);
}

// Free Dirichlet Laplacian on l sites: tridiag(-1, 2, -1).
inline AssembledOperator free_laplacian(Index l) {
  if (l < 1) throw InvalidParameter("free Laplacian needs at least one site");
  return make_tridiagonal(std::vector<double>(static_cast<std::size_t>(l), 2.0),
                          std::vector<double>(static_cast<std::size_t>(l - 1), -1.0));
}

// 1-D hopping operator with diagonal 2 and couplings[k] between sites k and k+1.
inline AssembledOperator hopping_chain(std::span<const double> couplings) {
  std::vector<double> off(couplings.size());
  for (std::size_t k = 0; k < couplings.size(); ++k) off[k] = -couplings[k];
  return make_tridiagonal(std::vector<double>(couplings.size() + 1, 2.0), std::move(off));
}

inline std::uint64_t spec_hash(const OperatorSpec& spec) {
  Fnv1a h;
  h.text(spec.graph->label().to_string());
  h.value(spec.graph->vertex_count());
  h.value(spec.graph->edge_count());
  h.values<std::uint8_t>(spec.mask.member_flags);
  h.values<double>(spec.hopping);
  h.values<double>(spec.potential);
  h.value(static_cast<int>(spec.normalization));
  return h.digest();
}

// Builds the Dirichlet-restricted operator on the masked vertices.
//
// Combinatorial: diagonal deg(x)(1+V(x)), off-diagonal -a(x,y).
// Probabilistic: diagonal 1+V(x), off-diagonal -a(x,y)/deg(x).
// deg is always the ambient degree. Storage is tridiagonal for W = 1 band
// graphs, banded for W > 1 band graphs and compressed rows otherwise.
inline AssembledOperator assemble(const OperatorSpec& spec) {
  if (!spec.graph) throw ValidationError("operator spec has no graph");
  const GraphTopology& g = *spec.graph;
  const Index n = g.vertex_count();
  const DomainMask mask = spec.mask.member_flags.empty() ? DomainMask::all(n) : spec.mask;
  if (mask.size() != n) throw ValidationError("mask size does not match graph");
  if (mask.member_count < 1) throw ValidationError("mask must have at least one member");
  if (!spec.hopping.empty() && static_cast<Index>(spec.hopping.size()) != g.edge_count())
    throw ValidationError("hopping length must equal edge count");
  for (double a : spec.hopping)
    if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("hopping value outside [0,1]");
  if (!spec.potential.empty() && static_cast<Index>(spec.potential.size()) != n)
    throw ValidationError("potential length must equal vertex count");
  for (double v : spec.potential)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("potential must be finite and non-negative");
  const bool prob = spec.normalization == Normalization::Probabilistic;
  if (prob && !g.constant_ambient_degree())
    throw UnsupportedNormalization("probabilistic normalization needs a constant ambient degree");

  const bool full = mask.is_full();
  const Index m = mask.member_count;
  std::vector<Index> local, vertices;
  if (!full) {
    local.assign(static_cast<std::size_t>(n), -1);
    vertices.reserve(static_cast<std::size_t>(m));
    for (Index x = 0; x < n; ++x)
      if (mask.contains(x)) {
        local[x] = static_cast<Index>(vertices.size());
        vertices.push_back(x);
      }
  }
  auto loc = [&](Index x) { return full ? x : local[x]; };
  auto pot = [&](Index x) { return spec.potential.empty() ? 0.0 : spec.potential[x]; };
  auto hop = [&](Index e) { return spec.hopping.empty() ? 1.0 : spec.hopping[e]; };
  auto diag_of = [&](Index x) {
    double deg = g.ambient_degree(x);
    return prob ? 1.0 + pot(x) : deg * (1.0 + pot(x));
  };
  auto off_of = [&](Index e, Index u) {
    double a = hop(e);
    return prob ? -a / g.ambient_degree(u) : -a;
  };

  std::vector<double> weights(static_cast<std::size_t>(m));
  for (Index r = 0; r < m; ++r) weights[r] = g.ambient_degree(full ? r : vertices[r]);

  AssembledOperator::Storage storage;
  if (g.is_band() && g.band_width() == 1) {
    TridiagonalMatrix t;
    t.diag.resize(static_cast<std::size_t>(m));
    t.off.assign(static_cast<std::size_t>(m - 1), 0.0);
    for (Index x = 0; x < n; ++x)
      if (full || mask.contains(x)) t.diag[loc(x)] = diag_of(x);
    for (Index u = 0; u + 1 < n; ++u) {
      if (full || (mask.contains(u) && mask.contains(u + 1))) t.off[loc(u)] = off_of(u, u);
    }
    storage = std::move(t);
  } else if (g.is_band()) {
    BandedMatrix b(m, g.band_width());
    for (Index x = 0; x < n; ++x)
      if (full || mask.contains(x)) b.band(0, loc(x)) = diag_of(x);
    g.for_each_edge([&](Index e, Index u, Index v) {
      if (!full && !(mask.contains(u) && mask.contains(v))) return;
      Index lu = loc(u), lv = loc(v);
      b.band(static_cast<int>(lv - lu), lu) = off_of(e, u);
    });
    storage = std::move(b);
  } else {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(m + 2 * g.edge_count()));
    for (Index x = 0; x < n; ++x)
      if (mask.contains(x)) trip.emplace_back(loc(x), loc(x), diag_of(x));
    g.for_each_edge([&](Index e, Index u, Index v) {
      if (!(mask.contains(u) && mask.contains(v))) return;
      double val = off_of(e, u);
      if (val == 0.0) return;
      trip.emplace_back(loc(u), loc(v), val);
      trip.emplace_back(loc(v), loc(u), val);
    });
    SparseMatrix s(m, m);
    s.setFromTriplets(trip.begin(), trip.end());
    s.makeCompressed();
    storage = std::move(s);
  }
  return AssembledOperator(std::move(storage), spec_hash(spec), spec.normalization, std::move(vertices),
                           std::move(weights));
}

inline std::vector<double> apply_operator(const AssembledOperator& op, std::span<const double> f) {
  const Index n = op.dimension();
  if (static_cast<Index>(f.size()) != n) throw ValidationError("vector length does not match operator dimension");
  std::vector<double> y(static_cast<std::size_t>(n), 0.0);
  if (const auto* t = op.tridiagonal()) {
    for (Index i = 0; i < n; ++i) {
      double s = t->diag[i] * f[i];
      if (i > 0) s += t->off[i - 1] * f[i - 1];
      if (i + 1 < n) s += t->off[i] * f[i + 1];
      y[i] = s;
    }
  } else if (const auto* b = op.banded()) {
    for (Index i = 0; i < n; ++i) y[i] = b->band(0, i) * f[i];
    for (int d = 1; d <= b->w; ++d)
      for (Index i = 0; i + d < n; ++i) {
        double a = b->band(d, i);
        y[i] += a * f[i + d];
        y[i + d] += a * f[i];
      }
  } else {
    Eigen::Map<const Eigen::VectorXd> fm(f.data(), n);
    Eigen::Map<Eigen::VectorXd> ym(y.data(), n);
    ym.noalias() = *op.sparse() * fm;
  }
  return y;
}

struct QuadraticForm {
  double plain = 0.0;                 // <f, Hf>
  std::optional<double> weighted;     // (f, Hf)_mu = sum deg(x) f(x) (Hf)(x), probabilistic mode only
};

inline QuadraticForm quadratic_form(const AssembledOperator& op, std::span<const double> f) {
  auto hf = apply_operator(op, f);
  QuadraticForm q;
  for (std::size_t i = 0; i < f.size(); ++i) q.plain += f[i] * hf[i];
  if (op.normalization() == Normalization::Probabilistic && !op.weights().empty()) {
    double w = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) w += op.weights()[i] * f[i] * hf[i];
    q.weighted = w;
  }
  return q;
}

inline AssembledOperator scale(const AssembledOperator& op, double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw ValidationError("scale factor must be positive");
  AssembledOperator::Storage s = op.storage();
  std::visit(
      [c](auto& st) {
        using S = std::decay_t<decltype(st)>;
        if constexpr (std::is_same_v<S, TridiagonalMatrix>) {
          for (auto& v : st.diag) v *= c;
          for (auto& v : st.off) v *= c;
        } else if constexpr (std::is_same_v<S, BandedMatrix>) {
          for (auto& v : st.data) v *= c;
        } else {
          st *= c;
        }
      },
      s);
  Fnv1a h;
  h.value(op.spec_hash());
  h.value(c);
  return AssembledOperator(std::move(s), h.digest(), op.normalization(), op.vertices(), op.weights());
}

inline constexpr Index kDenseCap = 2000;

inline Eigen::MatrixXd to_dense(const AssembledOperator& op, Index cap = kDenseCap) {
  const Index n = op.dimension();
  if (n > cap) throw CapacityError("dense conversion above dimension cap " + std::to_string(cap));
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  if (const auto* t = op.tridiagonal()) {
    for (Index i = 0; i < n; ++i) m(i, i) = t->diag[i];
    for (Index i = 0; i + 1 < n; ++i) m(i, i + 1) = m(i + 1, i) = t->off[i];
  } else if (const auto* b = op.banded()) {
    for (int d = 0; d <= b->w; ++d)
      for (Index i = 0; i + d < n; ++i) m(i + d, i) = m(i, i + d) = b->band(d, i);
  } else {
    m = Eigen::MatrixXd(*op.sparse());
  }
  return m;
}

inline Eigen::SparseMatrix<double> to_sparse(const AssembledOperator& op) {
  const Index n = op.dimension();
  if (const auto* s = op.sparse()) return Eigen::SparseMatrix<double>(*s);
  std::vector<Eigen::Triplet<double>> trip;
  if (const auto* t = op.tridiagonal()) {
    for (Index i = 0; i < n; ++i) trip.emplace_back(i, i, t->diag[i]);
    for (Index i = 0; i + 1 < n; ++i) {
      if (t->off[i] == 0.0) continue;
      trip.emplace_back(i, i + 1, t->off[i]);
      trip.emplace_back(i + 1, i, t->off[i]);
    }
  } else {
    const auto* b = op.banded();
    for (Index i = 0; i < n; ++i) trip.emplace_back(i, i, b->band(0, i));
    for (int d = 1; d <= b->w; ++d)
      for (Index i = 0; i + d < n; ++i) {
        double a = b->band(d, i);
        if (a == 0.0) continue;
        trip.emplace_back(i + d, i, a);
        trip.emplace_back(i, i + d, a);
      }
  }
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(trip.begin(), trip.end());
  m.makeCompressed();
  return m;
}

// Calls f(i, j, value) for each stored entry with i <= j.
template <class F>
void for_each_upper_entry(const AssembledOperator& op, F&& f) {
  const Index n = op.dimension();
  if (const auto* t = op.tridiagonal()) {
    for (Index i = 0; i < n; ++i) {
      f(i, i, t->diag[i]);
      if (i + 1 < n && t->off[i] != 0.0) f(i, i + 1, t->off[i]);
    }
  } else if (const auto* b = op.banded()) {
    for (Index i = 0; i < n; ++i)
      for (int d = 0; d <= b->w && i + d < n; ++d) {
        double v = b->band(d, i);
        if (d == 0 || v != 0.0) f(i, i + d, v);
      }
  } else {
    const auto& s = *op.sparse();
    for (int k = 0; k < s.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(s, k); it; ++it)
        if (it.row() <= it.col()) f(static_cast<Index>(it.row()), static_cast<Index>(it.col()), it.value());
  }
}

// Largest absolute row sum, an upper bound on the spectral radius.
inline double norm_inf(const AssembledOperator& op) {
  std::vector<double> rows(static_cast<std::size_t>(op.dimension()), 0.0);
  for_each_upper_entry(op, [&](Index i, Index j, double v) {
    rows[i] += std::abs(v);
    if (i != j) rows[j] += std::abs(v);
  });
  double m = 0.0;
  for (double r : rows) m = std::max(m, r);
  return m;
}

// Gershgorin interval [lo, hi] containing the spectrum.
inline std::pair<double, double> gershgorin(const AssembledOperator& op) {
  const auto n = static_cast<std::size_t>(op.dimension());
  std::vector<double> diag(n, 0.0), radius(n, 0.0);
  for_each_upper_entry(op, [&](Index i, Index j, double v) {
    if (i == j) {
      diag[i] = v;
    } else {
      radius[i] += std::abs(v);
      radius[j] += std::abs(v);
    }
  });
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < n; ++i) {
    lo = std::min(lo, diag[i] - radius[i]);
    hi = std::max(hi, diag[i] + radius[i]);
  }
  return {lo, hi};
}

}  // namespace landscape
