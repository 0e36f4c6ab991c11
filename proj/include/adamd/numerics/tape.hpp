// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string_view>
#include <vector>

#include "adamd/numerics/tensor.hpp"

namespace adamd::num {

/// Ordered log of differentiable ops. Ops append a record when a tape is
/// active on the calling thread and at least one operand requires a gradient.
/// Records are appended in execution order, so replaying them backwards is a
/// valid reverse topological sweep.
class Tape {
public:
  using Backward = std::function<void()>;

  struct Record {
    std::string_view op;
    Backward backward;
  };

  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  void record(std::string_view op, Backward backward);

  /// Seeds d(root)/d(root) = 1 and runs every record once, newest first.
  /// The tape is empty afterwards.
  void backward(const Tensor &root);

  std::size_t size() const { return records_.size(); }
  const std::vector<Record> &records() const { return records_; }
  void clear() { records_.clear(); }

  static Tape *active() noexcept;

  /// Makes a tape the active one for the current thread until destroyed.
  class Scope {
  public:
    explicit Scope(Tape &tape);
    ~Scope();
    Scope(const Scope &) = delete;
    Scope &operator=(const Scope &) = delete;

  private:
    Tape *previous_;
  };

  /// Suspends recording on the current thread until destroyed.
  class Pause {
  public:
    Pause();
    ~Pause();
    Pause(const Pause &) = delete;
    Pause &operator=(const Pause &) = delete;

  private:
    Tape *previous_;
  };

private:
  std::vector<Record> records_;
};

} // namespace adamd::num
