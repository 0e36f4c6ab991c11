// SPDX-License-Identifier: Apache-2.0
#include "adamd/numerics/tape.hpp"

#include <algorithm>

namespace adamd::num {

namespace {
thread_local Tape *g_active = nullptr;
}

void Tape::record(std::string_view op, Backward backward) {
  records_.push_back({op, std::move(backward)});
}

void Tape::backward(const Tensor &root) {
  if (root.size() != 1)
    throw ShapeError("Tape::backward: root must be a scalar, got " +
                     to_string(root.shape()));
  root.node()->grad_buffer()[0] += 1.0;
  // Move the records out first so a throwing backward cannot be replayed.
  std::vector<Record> records;
  records.swap(records_);
  for (auto it = records.rbegin(); it != records.rend(); ++it) {
    it->backward();
    it->backward = nullptr;
  }
}

Tape *Tape::active() noexcept { return g_active; }

Tape::Scope::Scope(Tape &tape) : previous_(g_active) { g_active = &tape; }

Tape::Scope::~Scope() { g_active = previous_; }

Tape::Pause::Pause() : previous_(g_active) { g_active = nullptr; }

Tape::Pause::~Pause() { g_active = previous_; }

} // namespace adamd::num
