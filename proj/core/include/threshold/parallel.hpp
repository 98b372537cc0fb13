#pragma once

#include <condition_variable>
#include <cstddef>
#include <mutex>

namespace threshold {

/// Counting limit on concurrently running compute tasks (sampler chains).
/// Sweeps may launch many fits at once; every chain holds one slot while it
/// runs, so the process never oversubscribes the configured worker count.
class WorkerBudget {
 public:
  explicit WorkerBudget(std::size_t slots);

  void acquire();
  void release();
  std::size_t slots() const;
  void resize(std::size_t slots);

  /// Process-wide budget, initially sized to the hardware concurrency.
  static WorkerBudget& global();

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::size_t slots_;
  std::size_t in_use_ = 0;
};

class BudgetSlot {
 public:
  explicit BudgetSlot(WorkerBudget& budget) : budget_(budget) { budget_.acquire(); }
  ~BudgetSlot() { budget_.release(); }
  BudgetSlot(const BudgetSlot&) = delete;
  BudgetSlot& operator=(const BudgetSlot&) = delete;

 private:
  WorkerBudget& budget_;
};

}  // namespace threshold
