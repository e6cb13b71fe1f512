#ifndef ERGODEC_GROUP_HPP
#define ERGODEC_GROUP_HPP

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ergodec/error.hpp"
#include "ergodec/random.hpp"

namespace ergodec {

// Points of the acted-on index set are 1-based throughout.
using Index = std::uint32_t;

// Largest n for which S(n) is enumerated element by element.
inline constexpr std::size_t kMaxEnumerableLevel = 8;

/// Index n of the finite subgroup S(n) in the chain S(1) < S(2) < ...
struct ChainLevel {
  explicit ChainLevel(std::size_t level) : n(level) {
    if (n == 0) throw ConfigError("chain level must be positive");
  }
  std::size_t n;

  friend bool operator==(const ChainLevel&, const ChainLevel&) = default;
};

/// A point of the window {0,1}^N; coordinates are addressed 1..N.
class BinaryConfig {
 public:
  BinaryConfig() = default;
  explicit BinaryConfig(std::size_t length) : bits_(length, 0) {}
  explicit BinaryConfig(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto& b : bits_) b = b ? 1 : 0;
  }

  // "0110" -> bits 1..4
  static BinaryConfig parse(std::string_view text) {
    std::vector<std::uint8_t> bits;
    bits.reserve(text.size());
    for (char c : text) {
      if (c != '0' && c != '1') {
        throw ConfigError("configuration must be a 0/1 string: '" +
                          std::string(text) + "'");
      }
      bits.push_back(c == '1');
    }
    return BinaryConfig(std::move(bits));
  }

  static BinaryConfig from_index(std::uint64_t code, std::size_t length) {
    BinaryConfig x(length);
    for (std::size_t i = 0; i < length; ++i) x.bits_[i] = (code >> i) & 1U;
    return x;
  }

  std::uint64_t index() const {
    std::uint64_t code = 0;
    for (std::size_t i = 0; i < bits_.size() && i < 64; ++i) {
      code |= std::uint64_t{bits_[i]} << i;
    }
    return code;
  }

  std::size_t size() const { return bits_.size(); }
  std::uint8_t bit(Index i) const { return bits_[i - 1]; }
  void set(Index i, bool value) { bits_[i - 1] = value ? 1 : 0; }
  std::span<const std::uint8_t> bits() const { return bits_; }

  std::size_t count_ones() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
  }
  std::size_t count_ones(std::size_t prefix) const {
    return static_cast<std::size_t>(
        std::count(bits_.begin(), bits_.begin() + static_cast<std::ptrdiff_t>(
                                                      std::min(prefix, bits_.size())),
                   1));
  }

  std::string to_string() const {
    std::string s(bits_.size(), '0');
    for (std::size_t i = 0; i < bits_.size(); ++i) s[i] = bits_[i] ? '1' : '0';
    return s;
  }

  friend auto operator<=>(const BinaryConfig&, const BinaryConfig&) = default;
  friend bool operator==(const BinaryConfig&, const BinaryConfig&) = default;
  friend std::ostream& operator<<(std::ostream& os, const BinaryConfig& x) {
    return os << x.to_string();
  }

 private:
  std::vector<std::uint8_t> bits_;
};

struct BinaryConfigHash {
  std::size_t operator()(const BinaryConfig& x) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto b : x.bits()) h = (h ^ b) * 0x100000001b3ULL;
    return static_cast<std::size_t>(h ^ x.size());
  }
};

/**
 * A finitely supported bijection of the positive integers.
 *
 * Only moved points are stored, as (point, image) pairs sorted by point.
 */
class Permutation {
 public:
  Permutation() = default;

  // One-line notation: images[i - 1] is the image of i.
  static Permutation from_images(std::span<const Index> images) {
    std::vector<bool> seen(images.size() + 1, false);
    Permutation g;
    for (std::size_t i = 0; i < images.size(); ++i) {
      const Index img = images[i];
      if (img < 1 || img > images.size() || seen[img]) {
        throw ConfigError("one-line notation is not a bijection of {1..n}");
      }
      seen[img] = true;
      if (img != i + 1) g.moved_.emplace_back(static_cast<Index>(i + 1), img);
    }
    return g;
  }

  static Permutation transposition(Index a, Index b) {
    Permutation g;
    if (a == b) return g;
    if (a > b) std::swap(a, b);
    g.moved_ = {{a, b}, {b, a}};
    return g;
  }

  static Permutation identity() { return {}; }

  Index operator()(Index i) const {
    auto it = std::lower_bound(
        moved_.begin(), moved_.end(), i,
        [](const std::pair<Index, Index>& e, Index v) { return e.first < v; });
    return (it != moved_.end() && it->first == i) ? it->second : i;
  }

  bool is_identity() const { return moved_.empty(); }

  // Smallest n with support inside {1..n}; the identity has degree 1.
  std::size_t degree() const { return moved_.empty() ? 1 : moved_.back().first; }

  std::span<const std::pair<Index, Index>> moved() const { return moved_; }

  Permutation inverse() const {
    Permutation inv;
    inv.moved_.reserve(moved_.size());
    for (auto [p, q] : moved_) inv.moved_.emplace_back(q, p);
    std::sort(inv.moved_.begin(), inv.moved_.end());
    return inv;
  }

  // Cycle notation, e.g. "(1 2)(3 5 4)"; the identity prints as "()".
  std::string to_string() const {
    if (moved_.empty()) return "()";
    std::string out;
    std::vector<Index> done;
    for (auto [start, img] : moved_) {
      if (std::binary_search(done.begin(), done.end(), start)) continue;
      out += "(" + std::to_string(start);
      done.insert(std::upper_bound(done.begin(), done.end(), start), start);
      for (Index j = img; j != start; j = (*this)(j)) {
        out += " " + std::to_string(j);
        done.insert(std::upper_bound(done.begin(), done.end(), j), j);
      }
      out += ")";
    }
    return out;
  }

  friend auto operator<=>(const Permutation&, const Permutation&) = default;
  friend bool operator==(const Permutation&, const Permutation&) = default;
  friend std::ostream& operator<<(std::ostream& os, const Permutation& g) {
    return os << g.to_string();
  }

 private:
  friend Permutation compose(const Permutation& g, const Permutation& h);
  std::vector<std::pair<Index, Index>> moved_;
};

/// (g o h)(i) = g(h(i)).
inline Permutation compose(const Permutation& g, const Permutation& h) {
  std::vector<Index> points;
  points.reserve(g.moved_.size() + h.moved_.size());
  for (auto [p, q] : g.moved_) points.push_back(p);
  for (auto [p, q] : h.moved_) points.push_back(p);
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  Permutation gh;
  for (Index i : points) {
    const Index img = g(h(i));
    if (img != i) gh.moved_.emplace_back(i, img);
  }
  return gh;
}

inline Permutation inverse(const Permutation& g) { return g.inverse(); }

/// Uniform (Haar) draw from S(n) by a Fisher-Yates shuffle.
inline Permutation haar_sample(ChainLevel level, RandomStream& rng) {
  std::vector<Index> images(level.n);
  std::iota(images.begin(), images.end(), Index{1});
  for (std::size_t i = level.n; i > 1; --i) {
    const auto j = rng.uniform_below(i);
    std::swap(images[i - 1], images[j]);
  }
  return Permutation::from_images(images);
}

namespace detail {

inline std::vector<Permutation> enumerate_uncached(std::size_t n) {
  std::vector<Index> images(n);
  std::iota(images.begin(), images.end(), Index{1});
  std::vector<Permutation> out;
  do {
    out.push_back(Permutation::from_images(images));
  } while (std::next_permutation(images.begin(), images.end()));
  return out;
}

}  // namespace detail

/// All n! elements of S(n) in lexicographic one-line order. Requires n <= 8.
inline const std::vector<Permutation>& elements(ChainLevel level) {
  if (level.n > kMaxEnumerableLevel) {
    throw CapacityError("S(" + std::to_string(level.n) +
                        ") is too large to enumerate (limit n <= 8)");
  }
  static std::array<std::vector<Permutation>, kMaxEnumerableLevel + 1> cache;
  static std::array<std::once_flag, kMaxEnumerableLevel + 1> flags;
  std::call_once(flags[level.n],
                 [&] { cache[level.n] = detail::enumerate_uncached(level.n); });
  return cache[level.n];
}

inline std::vector<Permutation> enumerate(ChainLevel level) { return elements(level); }

/// T_g x: the result has at position g(i) the bit x_i.
inline BinaryConfig act(const Permutation& g, const BinaryConfig& x) {
  if (g.degree() > x.size()) {
    throw DegreeOverflowError("permutation " + g.to_string() +
                              " moves indices beyond window length " +
                              std::to_string(x.size()));
  }
  BinaryConfig y = x;
  for (auto [p, q] : g.moved()) y.set(q, x.bit(p));
  return y;
}

/**
 * Preimages k^{-1}(t) for each target t of a Haar-random k in S(n).
 *
 * Only the requested coordinates are drawn (a sparse partial shuffle). The
 * targets must be distinct; targets above n are fixed by every k.
 */
inline void sample_preimages(std::size_t n, std::span<const Index> targets,
                             RandomStream& rng, std::span<Index> out) {
  // Slots of the virtual shuffle that have been swapped, as (slot, value).
  std::vector<std::pair<std::uint64_t, std::uint64_t>> state;
  state.reserve(2 * targets.size());
  auto lookup = [&](std::uint64_t slot) {
    for (auto& [s, v] : state) {
      if (s == slot) return v;
    }
    return slot;
  };
  auto store = [&](std::uint64_t slot, std::uint64_t value) {
    for (auto& [s, v] : state) {
      if (s == slot) {
        v = value;
        return;
      }
    }
    state.emplace_back(slot, value);
  };
  std::uint64_t drawn = 0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (targets[t] > n) {
      out[t] = targets[t];
      continue;
    }
    const std::uint64_t j = drawn + rng.uniform_below(n - drawn);
    const std::uint64_t vj = lookup(j);
    const std::uint64_t vi = lookup(drawn);
    store(j, vi);
    store(drawn, vj);
    out[t] = static_cast<Index>(vj + 1);
    ++drawn;
  }
}

/// Distinct configurations in the S(n)-orbit of x (rearrangements of x_1..x_n).
inline std::vector<BinaryConfig> orbit_points(const BinaryConfig& x, std::size_t n) {
  n = std::min(n, x.size());
  std::vector<std::uint8_t> prefix(x.bits().begin(), x.bits().begin() + static_cast<std::ptrdiff_t>(n));
  std::sort(prefix.begin(), prefix.end());
  std::vector<BinaryConfig> out;
  std::vector<std::uint8_t> bits(x.bits().begin(), x.bits().end());
  do {
    std::copy(prefix.begin(), prefix.end(), bits.begin());
    out.emplace_back(bits);
  } while (std::next_permutation(prefix.begin(), prefix.end()));
  return out;
}

/// Some k in S(n) with act(k, x) == y; x and y must lie in one S(n)-orbit.
inline Permutation transporter(const BinaryConfig& x, const BinaryConfig& y, std::size_t n) {
  std::vector<Index> ones;
  std::vector<Index> zeros;
  for (Index i = 1; i <= n; ++i) (x.bit(i) ? ones : zeros).push_back(i);
  std::vector<Index> images(n);
  std::size_t next_one = 0;
  std::size_t next_zero = 0;
  for (Index i = 1; i <= n; ++i) {
    // k maps the source position holding y_i onto i.
    auto& pool = y.bit(i) ? ones : zeros;
    auto& cursor = y.bit(i) ? next_one : next_zero;
    if (cursor >= pool.size()) {
      throw ConfigError("configurations are not in one S(n)-orbit");
    }
    images[pool[cursor++] - 1] = i;
  }
  return Permutation::from_images(images);
}

}  // namespace ergodec

#endif  // ERGODEC_GROUP_HPP
