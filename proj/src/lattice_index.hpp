#pragma once

// Bucket grid over lattice points, shared by construction and verification.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "orbisect/lattice.hpp"

namespace orbisect::detail {

inline constexpr int kMaxRealDim = 8;
using CellKey = std::array<int, kMaxRealDim + 1>;  // [tag, cell_0, ..., cell_{d-1}]

/// Cells are unit boxes centred on integer points in frame coordinates f = F x. On a torus the frame is
/// diag(n) * B^{-1}, points are stored reduced, and queries walk unwrapped cells so
/// every lattice translate within the radius is visited exactly once.
class CellIndex {
 public:
  CellIndex(const SeparatedLattice& lat, double cell_gk) : lat_(lat), d_(lat.real_dim) {
    if (d_ > kMaxRealDim) throw Error(ErrorCode::DimensionMismatch, "lattice", "real dimension above 8");
    const double cell = cell_gk / lat.unit;
    if (lat.torus) {
      const RMatrix& B = lat.torus->basis();
      wrap_.resize(static_cast<std::size_t>(d_));
      frame_ = lat.torus->basis_inverse();
      for (int i = 0; i < d_; ++i) {
        const int n = std::max(1, static_cast<int>(std::floor(B.col(i).norm() / cell)));
        wrap_[static_cast<std::size_t>(i)] = n;
        frame_.row(i) *= n;
      }
    } else {
      frame_ = RMatrix::Identity(d_, d_) / cell;
    }
    row_norm_.resize(static_cast<std::size_t>(d_));
    for (int i = 0; i < d_; ++i) row_norm_[static_cast<std::size_t>(i)] = frame_.row(i).norm();
  }

  void insert(const RVector& x, int tag, int id) {
    std::array<double, kMaxRealDim> y{}, f{};
    load(x, y);
    to_frame(y.data(), f);
    CellKey key{};
    key[0] = tag;
    for (int i = 0; i < d_; ++i) {
      int c = static_cast<int>(std::floor(f[static_cast<std::size_t>(i)] + 0.5));
      if (!wrap_.empty()) {
        // A point rounding up to cell n is filed under cell 0, so store the translate that sits there.
        const int n = wrap_[static_cast<std::size_t>(i)];
        const int w = static_cast<int>(std::floor(static_cast<double>(c) / n));
        if (w != 0) {
          const RMatrix& B = lat_.torus->basis();
          for (int a = 0; a < d_; ++a) y[static_cast<std::size_t>(a)] -= w * B(a, i);
        }
        c -= w * n;
      }
      key[static_cast<std::size_t>(i + 1)] = c;
    }
    const int item = static_cast<int>(ids_.size());
    Slot& slot = slot_for(key);
    next_.push_back(slot.head);
    slot.head = item;
    pos_.insert(pos_.end(), y.begin(), y.begin() + d_);
    ids_.push_back(id);
  }

  /// Calls f(id, gk_distance) for every stored item of `tag` within radius (g_k) of x,
  /// the cell containing x first. Stops when f returns true; returns whether it stopped.
  template <class F>
  bool query(const RVector& x, int tag, double radius_gk, F&& f) const {
    std::array<double, kMaxRealDim> y{}, fy{};
    load(x, y);
    to_frame(y.data(), fy);
    const double rs = radius_gk / lat_.unit;
    std::array<int, kMaxRealDim> lo{}, hi{}, cur{}, home{};
    for (std::size_t i = 0; i < static_cast<std::size_t>(d_); ++i) {
      const double w = rs * row_norm_[i];
      lo[i] = static_cast<int>(std::floor(fy[i] - w + 0.5));
      hi[i] = static_cast<int>(std::floor(fy[i] + w + 0.5));
      home[i] = static_cast<int>(std::floor(fy[i] + 0.5));
    }
    const double r2 = rs * rs;
    if (visit(y, tag, home, r2, f)) return true;
    cur = lo;
    while (true) {
      if (cur != home && visit(y, tag, cur, r2, f)) return true;
      int j = 0;
      while (j < d_ && cur[static_cast<std::size_t>(j)] == hi[static_cast<std::size_t>(j)]) {
        cur[static_cast<std::size_t>(j)] = lo[static_cast<std::size_t>(j)];
        ++j;
      }
      if (j == d_) return false;
      ++cur[static_cast<std::size_t>(j)];
    }
  }

 private:
  struct Slot {
    CellKey key;
    int head = -1;  // first item of the cell's chain, -1 when the slot is free
  };

  void load(const RVector& x, std::array<double, kMaxRealDim>& y) const {
    if (lat_.torus) {
      const RVector r = lat_.torus->reduce(x);
      std::copy(r.data(), r.data() + d_, y.begin());
    } else {
      std::copy(x.data(), x.data() + d_, y.begin());
    }
  }

  static std::size_t hash(const CellKey& k) {
    std::uint64_t h = 0x9e3779b97f4a7c15ull;
    for (int v : k) {
      h ^= static_cast<std::uint32_t>(v);
      h *= 0xbf58476d1ce4e5b9ull;
      h ^= h >> 29;
    }
    return static_cast<std::size_t>(h);
  }

  const Slot* find(const CellKey& key) const {
    if (slots_.empty()) return nullptr;
    const std::size_t mask = slots_.size() - 1;
    for (std::size_t i = hash(key) & mask;; i = (i + 1) & mask) {
      const Slot& s = slots_[i];
      if (s.head < 0) return nullptr;
      if (s.key == key) return &s;
    }
  }

  Slot& slot_for(const CellKey& key) {
    if (2 * (used_ + 1) > slots_.size()) rehash(std::max<std::size_t>(64, 2 * slots_.size()));
    const std::size_t mask = slots_.size() - 1;
    for (std::size_t i = hash(key) & mask;; i = (i + 1) & mask) {
      Slot& s = slots_[i];
      if (s.head < 0) {
        s.key = key;
        ++used_;
        return s;
      }
      if (s.key == key) return s;
    }
  }

  void rehash(std::size_t size) {
    std::vector<Slot> old = std::move(slots_);
    slots_.assign(size, Slot{});
    for (const Slot& s : old) {
      if (s.head < 0) continue;
      for (std::size_t i = hash(s.key) & (size - 1);; i = (i + 1) & (size - 1))
        if (slots_[i].head < 0) {
          slots_[i] = s;
          break;
        }
    }
  }

  void to_frame(const double* y, std::array<double, kMaxRealDim>& f) const {
    for (int i = 0; i < d_; ++i) {
      double v = 0.0;
      for (int j = 0; j < d_; ++j) v += frame_(i, j) * y[j];
      f[static_cast<std::size_t>(i)] = v;
    }
  }

  template <class F>
  bool visit(const std::array<double, kMaxRealDim>& y, int tag, const std::array<int, kMaxRealDim>& unwrapped,
             double r2, F& f) const {
    CellKey key{};
    key[0] = tag;
    std::array<double, kMaxRealDim> q = y;
    bool shifted = false;
    std::array<double, kMaxRealDim> shift{};
    for (int i = 0; i < d_; ++i) {
      int c = unwrapped[static_cast<std::size_t>(i)];
      if (!wrap_.empty()) {
        const int n = wrap_[static_cast<std::size_t>(i)];
        const int w = static_cast<int>(std::floor(static_cast<double>(c) / n));
        c -= w * n;
        shift[static_cast<std::size_t>(i)] = w;
        shifted = shifted || w != 0;
      }
      key[static_cast<std::size_t>(i + 1)] = c;
    }
    const Slot* cell = find(key);
    if (!cell) return false;
    if (shifted) {
      // Compare y against p + B*shift, i.e. y - B*shift against p.
      const RMatrix& B = lat_.torus->basis();
      for (int a = 0; a < d_; ++a)
        for (int b = 0; b < d_; ++b) q[static_cast<std::size_t>(a)] -= B(a, b) * shift[static_cast<std::size_t>(b)];
    }
    for (int idx = cell->head; idx >= 0; idx = next_[static_cast<std::size_t>(idx)]) {
      const double* p = pos_.data() + static_cast<std::size_t>(idx) * static_cast<std::size_t>(d_);
      double s = 0.0;
      for (int i = 0; i < d_; ++i) {
        const double t = q[static_cast<std::size_t>(i)] - p[i];
        s += t * t;
      }
      if (s <= r2 && f(ids_[static_cast<std::size_t>(idx)], std::sqrt(s) * lat_.unit)) return true;
    }
    return false;
  }

  const SeparatedLattice& lat_;
  int d_;
  RMatrix frame_;
  std::vector<double> row_norm_;
  std::vector<int> wrap_;
  std::vector<double> pos_;  // reduced positions, row-major
  std::vector<int> ids_;
  std::vector<int> next_;
  std::vector<Slot> slots_;
  std::size_t used_ = 0;
};

}  // namespace orbisect::detail
