#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dapt/sequence.hpp"

namespace dapt {

enum class DomainTag { Source = 0, Target = 1 };

struct PromptConfig {
  int M = 8;       // domain-invariant learnable rows
  int N = 8;       // domain-specific learnable rows (one block per domain)
  int d_tok = 32;
  double init_scale = 0.02;
  std::uint64_t seed = 0;
};

/// Learnable prompt state: a shared block Vc plus one block per domain.
/// Both domains read the same Vc; only the Vs/Vt block is swapped when a
/// sequence is assembled.
struct PromptParams {
  Matrix Vc;  // M x d_tok
  Matrix Vs;  // N x d_tok
  Matrix Vt;  // N x d_tok

  int M() const { return Vc.rows; }
  int N() const { return Vs.rows; }
  int d_tok() const { return Vc.cols > 0 ? Vc.cols : Vs.cols; }

  // flat addressing across Vc|Vs|Vt, used by the optimizer and
  // finite-difference loops
  int param_count() const;
  double& param(int idx);
  double param(int idx) const;

  void add_scaled(const PromptParams& other, double alpha);
  double max_abs() const;
  bool all_finite() const;
  bool same_shape(const PromptParams& o) const;
};

PromptParams zeros_like(const PromptParams& p);

/// Draws every entry i.i.d. Gaussian(0, init_scale^2) from a stream seeded by
/// cfg.seed, filling Vc, then Vs, then Vt row-major.
PromptParams init_params(const PromptConfig& cfg);

/// Builds the encoder input [Vc | Vs-or-Vt | class tokens | domain tokens],
/// zero-padded to l_max. domain_tokens may be empty (prompt layouts without a
/// trailing domain token). Throws ShapeError on dimension mismatch or if the
/// content does not fit in l_max.
TokenSeq assemble(const PromptParams& params, std::span<const TokenVec> class_tokens,
                  DomainTag d, std::span<const TokenVec> domain_tokens, int l_max);

/// Routes a sequence-level gradient back to the parameter blocks: rows [0,M)
/// accumulate into Vc, rows [M,M+N) into the block selected by d; gradient on
/// frozen rows (word tokens, padding) is discarded.
void scatter_grads_into(PromptParams& grads, const Matrix& seq_grads, DomainTag d);

PromptParams scatter_grads(const PromptParams& like, const Matrix& seq_grads, DomainTag d);

}  // namespace dapt
