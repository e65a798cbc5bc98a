#include "dapt/optim.hpp"

#include <algorithm>
#include <string>

#include "dapt/errors.hpp"

namespace dapt {

double lr_at(const OptimConfig& cfg, long iter) {
  if (cfg.base_lr <= 0.0) throw ConfigError("base_lr must be positive");
  if (cfg.warmup_iters < 1) throw ConfigError("warmup_iters must be >= 1");
  if (iter < 0) throw ConfigError("iteration must be >= 0");
  const double progress = static_cast<double>(iter + 1) / cfg.warmup_iters;
  return cfg.base_lr * std::min(1.0, progress);
}

void sgd_step(PromptParams& params, const PromptParams& grads, SgdState& state,
              const OptimConfig& cfg, long iter) {
  if (!params.same_shape(grads) || !params.same_shape(state.velocity)) {
    throw ShapeError("params, grads, and velocity must share a shape");
  }
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) {
    throw ConfigError("momentum must be in [0, 1)");
  }
  if (!grads.all_finite()) {
    throw NonFiniteGradientError("non-finite gradient at iteration " + std::to_string(iter));
  }
  const double lr = lr_at(cfg, iter);
  const int n = params.param_count();
  for (int i = 0; i < n; ++i) {
    double& v = state.velocity.param(i);
    v = cfg.momentum * v + grads.param(i);
    params.param(i) -= lr * v;
  }
}

double ema_alpha(long iter) {
  if (iter < 1) throw ConfigError("ema iteration counts from 1");
  return std::min(1.0 - 1.0 / static_cast<double>(iter + 1), 0.99);
}

void ema_update(EmaBuffer& buf, const PromptParams& live) {
  if (!buf.params.same_shape(live)) throw ShapeError("ema buffer shape mismatch");
  const double alpha = ema_alpha(buf.iter);
  const int n = buf.params.param_count();
  for (int i = 0; i < n; ++i) {
    double& b = buf.params.param(i);
    b = alpha * b + (1.0 - alpha) * live.param(i);
  }
}

}  // namespace dapt
