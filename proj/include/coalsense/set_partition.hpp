#pragma once

// Restricted-growth-string enumeration of set partitions.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace coalsense {

/// Thrown when an exhaustive routine is asked for a problem larger than its
/// configured capacity.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Walks every set partition of {0..n-1} exactly once, in lexicographic
/// order of restricted growth strings. `labels()[i]` is the block index of
/// element i; blocks are numbered in order of first appearance.
class RgsEnumerator {
 public:
  explicit RgsEnumerator(std::size_t n) : labels_(n, 0), prefix_max_(n, 0) {
    if (n == 0) throw std::invalid_argument("RgsEnumerator: n must be >= 1");
  }

  std::span<const int> labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  int block_count() const { return prefix_max_.back() + 1; }

  /// Advances to the next partition; false once the last one (all
  /// singletons) has been visited.
  bool next() {
    const std::size_t n = labels_.size();
    for (std::size_t i = n; i-- > 1;) {
      if (labels_[i] <= prefix_max_[i - 1]) {
        ++labels_[i];
        prefix_max_[i] = std::max(prefix_max_[i - 1], labels_[i]);
        for (std::size_t j = i + 1; j < n; ++j) {
          labels_[j] = 0;
          prefix_max_[j] = prefix_max_[i];
        }
        return true;
      }
    }
    return false;
  }

  /// Block bitmasks of the current partition, in block order.
  std::vector<std::uint32_t> block_masks() const {
    std::vector<std::uint32_t> masks(static_cast<std::size_t>(block_count()), 0u);
    for (std::size_t i = 0; i < labels_.size(); ++i)
      masks[static_cast<std::size_t>(labels_[i])] |= (1u << i);
    return masks;
  }

 private:
  std::vector<int> labels_;
  std::vector<int> prefix_max_;
};

/// Bell numbers via the Bell triangle. Exact up to n = 25.
inline std::uint64_t bell_number(std::size_t n) {
  if (n > 25) throw std::overflow_error("bell_number: n too large");
  std::vector<std::uint64_t> row{1};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::uint64_t> next{row.back()};
    for (auto v : row) next.push_back(next.back() + v);
    row = std::move(next);
  }
  return row.front();
}

}  // namespace coalsense
