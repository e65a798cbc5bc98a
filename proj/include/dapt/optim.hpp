#pragma once

#include "dapt/prompt.hpp"

namespace dapt {

struct OptimConfig {
  double base_lr = 1e-4;
  int warmup_iters = 100;
  double momentum = 0.9;
};

/// Linear warm-up: base_lr * min(1, (iter + 1) / warmup_iters), iter 0-based.
double lr_at(const OptimConfig& cfg, long iter);

struct SgdState {
  PromptParams velocity;
};

/// v <- momentum * v + g; params <- params - lr_at(iter) * v.
/// Throws NonFiniteGradientError before touching any state if the gradient
/// contains a NaN or infinity.
void sgd_step(PromptParams& params, const PromptParams& grads, SgdState& state,
              const OptimConfig& cfg, long iter);

/// min(1 - 1/(iter + 1), 0.99); iter counts updates starting at 1.
double ema_alpha(long iter);

/// Running ensemble of past parameters, used only at evaluation time.
/// Training never reads it back.
struct EmaBuffer {
  PromptParams params;
  long iter = 0;  // number of updates applied; incremented by the caller
};

/// buf.params <- alpha * buf.params + (1 - alpha) * live, with alpha from
/// buf.iter. The caller increments buf.iter before each call, so the first
/// update runs at iter = 1 (alpha = 0.5).
void ema_update(EmaBuffer& buf, const PromptParams& live);

}  // namespace dapt
