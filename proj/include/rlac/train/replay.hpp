#pragma once

#include <cstddef>
#include <deque>
#include <vector>

#include "rlac/env/cartpole.hpp"
#include "rlac/errors.hpp"
#include "rlac/rng.hpp"

namespace rlac::train {

using env::StateVec;

struct Transition {
  StateVec s{};
  double a = 0.0;
  double w = 0.0;
  double c = 0.0;  // cost of s_next
  StateVec s_next{};
  bool done = false;
  bool died = false;
  double l_target = 0.0;  // discounted cost sum over the next N steps within the episode

  friend bool operator==(const Transition&, const Transition&) = default;
};

// Bounded FIFO with uniform sampling (with replacement).
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 1'000'000) : capacity_(capacity) {
    if (capacity == 0) throw ContractError("replay capacity must be positive");
  }

  void push(const Transition& t) {
    if (items_.size() < capacity_) {
      items_.push_back(t);
    } else {
      items_[head_] = t;
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }

  // Oldest first.
  const Transition& at(std::size_t i) const { return items_[(head_ + i) % items_.size()]; }

  std::vector<Transition> sample(std::size_t n, Rng& rng) const {
    if (n > items_.size()) {
      throw ContractError("cannot sample " + std::to_string(n) + " from " + std::to_string(items_.size()));
    }
    std::vector<Transition> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(items_[rng.index(items_.size())]);
    return out;
  }

  // Raw storage access for checkpointing.
  const std::vector<Transition>& storage() const { return items_; }
  std::size_t head() const { return head_; }
  void restore(std::vector<Transition> items, std::size_t head) {
    if (items.size() > capacity_ || (head != 0 && head >= items.size()))
      throw ContractError("replay restore out of range");
    items_ = std::move(items);
    head_ = head;
  }

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::size_t head_ = 0;
};

// Holds the transitions of the running episode until their N-step cost sum
// is complete. A transition is released once N costs have been added, or
// when the episode ends (sum truncated at the episode boundary).
class HorizonTargets {
 public:
  struct Pending {
    Transition t;
    int count = 0;
    friend bool operator==(const Pending&, const Pending&) = default;
  };

  HorizonTargets(int horizon = 10, double gamma = 0.995) : horizon_(horizon), gamma_(gamma) {
    if (horizon <= 0) throw ContractError("horizon must be positive");
    powers_.resize(horizon);
    double p = 1.0;
    for (int k = 0; k < horizon; ++k, p *= gamma) powers_[k] = p;
  }

  template <class Sink>
  void add(Transition t, Sink&& sink) {
    t.l_target = 0.0;
    pending_.push_back({t, 0});
    for (Pending& p : pending_) p.t.l_target += powers_[p.count++] * t.c;
    while (!pending_.empty() && pending_.front().count == horizon_) {
      sink(pending_.front().t);
      pending_.pop_front();
    }
    if (t.done) flush(sink);
  }

  template <class Sink>
  void flush(Sink&& sink) {
    for (const Pending& p : pending_) sink(p.t);
    pending_.clear();
  }

  std::size_t pending() const { return pending_.size(); }
  const std::deque<Pending>& pending_items() const { return pending_; }
  void restore(std::deque<Pending> items) { pending_ = std::move(items); }

 private:
  int horizon_;
  double gamma_;
  std::vector<double> powers_;
  std::deque<Pending> pending_;
};

}  // namespace rlac::train
