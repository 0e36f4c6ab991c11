// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace adamd::experiment {

/// Keeps large activation buffers on the heap instead of fresh mmap pages,
/// which otherwise dominate a training step with page faults. No-op outside
/// glibc.
void tune_allocator();

} // namespace adamd::experiment
