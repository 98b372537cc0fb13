#include "threshold/parallel.hpp"

#include <algorithm>
#include <thread>

namespace threshold {

WorkerBudget::WorkerBudget(std::size_t slots) : slots_(std::max<std::size_t>(slots, 1)) {}

void WorkerBudget::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [this] { return in_use_ < slots_; });
  ++in_use_;
}

void WorkerBudget::release() {
  {
    std::lock_guard lock(mutex_);
    --in_use_;
  }
  cv_.notify_one();
}

std::size_t WorkerBudget::slots() const {
  std::lock_guard lock(mutex_);
  return slots_;
}

void WorkerBudget::resize(std::size_t slots) {
  {
    std::lock_guard lock(mutex_);
    slots_ = std::max<std::size_t>(slots, 1);
  }
  cv_.notify_all();
}

WorkerBudget& WorkerBudget::global() {
  static WorkerBudget budget(std::max(1u, std::thread::hardware_concurrency()));
  return budget;
}

}  // namespace threshold
