#pragma once

// Fixed-capacity, arrival-ordered windows over stream items.

#include "vaestream/error.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace vaestream {

/// Ring buffer that keeps the most recent `capacity` items. Index 0 is the oldest.
template <typename Item>
class SlidingWindow {
 public:
  SlidingWindow() = default;
  explicit SlidingWindow(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ContractError("window capacity must be >= 1");
    buffer_.reserve(capacity);
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return buffer_.size(); }
  bool empty() const { return buffer_.empty(); }
  bool full() const { return buffer_.size() == capacity_; }
  std::uint64_t total_pushed() const { return total_pushed_; }

  /// Appends `item`, evicting the oldest one when full.
  void push(Item item) {
    if (capacity_ == 0) throw ContractError("push into a window with zero capacity");
    ++total_pushed_;
    if (buffer_.size() < capacity_) {
      buffer_.push_back(std::move(item));
      return;
    }
    buffer_[head_] = std::move(item);
    head_ = (head_ + 1) % capacity_;
  }

  const Item& operator[](std::size_t i) const { return buffer_[physical(i)]; }
  Item& operator[](std::size_t i) { return buffer_[physical(i)]; }

  const Item& oldest() const { return (*this)[0]; }
  const Item& newest() const { return (*this)[size() - 1]; }

  /// Ordered copy, oldest first.
  std::vector<Item> snapshot() const { return last(size()); }

  /// Ordered copy of the newest `count` items (all of them if fewer are held).
  std::vector<Item> last(std::size_t count) const {
    if (count > size()) count = size();
    std::vector<Item> out;
    out.reserve(count);
    for (std::size_t i = size() - count; i < size(); ++i) out.push_back((*this)[i]);
    return out;
  }

  /// Empties the window. The total-pushed counter is kept.
  void clear() {
    buffer_.clear();
    head_ = 0;
  }

 private:
  std::size_t physical(std::size_t i) const {
    return buffer_.size() < capacity_ ? i : (head_ + i) % capacity_;
  }

  std::size_t capacity_ = 0;
  std::vector<Item> buffer_;
  std::size_t head_ = 0;  // position of the oldest item once full
  std::uint64_t total_pushed_ = 0;
};

/// Window that fills once and then becomes immutable until reset.
template <typename Item>
class FrozenWindow {
 public:
  FrozenWindow() = default;
  explicit FrozenWindow(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ContractError("window capacity must be >= 1");
    items_.reserve(capacity);
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  bool frozen() const { return capacity_ > 0 && items_.size() == capacity_; }

  void push(Item item) {
    if (frozen()) throw ContractError("push into a frozen window");
    if (capacity_ == 0) throw ContractError("push into a window with zero capacity");
    items_.push_back(std::move(item));
  }

  const Item& operator[](std::size_t i) const { return items_[i]; }
  const std::vector<Item>& items() const { return items_; }
  std::vector<Item> snapshot() const { return items_; }

  /// Drops all items; the window refills from subsequent pushes.
  void reset() { items_.clear(); }

 private:
  std::size_t capacity_ = 0;
  std::vector<Item> items_;
};

}  // namespace vaestream
