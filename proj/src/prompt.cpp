#include "dapt/prompt.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dapt/errors.hpp"
#include "dapt/rng.hpp"

namespace dapt {

int PromptParams::param_count() const {
  return static_cast<int>(Vc.data.size() + Vs.data.size() + Vt.data.size());
}

double& PromptParams::param(int idx) {
  size_t i = static_cast<size_t>(idx);
  if (i < Vc.data.size()) return Vc.data[i];
  i -= Vc.data.size();
  if (i < Vs.data.size()) return Vs.data[i];
  i -= Vs.data.size();
  return Vt.data[i];
}

double PromptParams::param(int idx) const {
  return const_cast<PromptParams*>(this)->param(idx);
}

void PromptParams::add_scaled(const PromptParams& other, double alpha) {
  axpy(alpha, other.Vc.data, Vc.data);
  axpy(alpha, other.Vs.data, Vs.data);
  axpy(alpha, other.Vt.data, Vt.data);
}

double PromptParams::max_abs() const {
  double m = 0.0;
  for (const Matrix* b : {&Vc, &Vs, &Vt}) {
    for (double v : b->data) m = std::max(m, std::abs(v));
  }
  return m;
}

bool PromptParams::all_finite() const {
  return dapt::all_finite(Vc.data) && dapt::all_finite(Vs.data) && dapt::all_finite(Vt.data);
}

bool PromptParams::same_shape(const PromptParams& o) const {
  return Vc.same_shape(o.Vc) && Vs.same_shape(o.Vs) && Vt.same_shape(o.Vt);
}

PromptParams zeros_like(const PromptParams& p) {
  PromptParams z;
  z.Vc = Matrix(p.Vc.rows, p.Vc.cols);
  z.Vs = Matrix(p.Vs.rows, p.Vs.cols);
  z.Vt = Matrix(p.Vt.rows, p.Vt.cols);
  return z;
}

PromptParams init_params(const PromptConfig& cfg) {
  if (cfg.M < 0 || cfg.N < 0 || cfg.d_tok < 1) {
    throw ShapeError("invalid prompt config: M=" + std::to_string(cfg.M) +
                     " N=" + std::to_string(cfg.N) + " d_tok=" + std::to_string(cfg.d_tok));
  }
  PromptParams p;
  p.Vc = Matrix(cfg.M, cfg.d_tok);
  p.Vs = Matrix(cfg.N, cfg.d_tok);
  p.Vt = Matrix(cfg.N, cfg.d_tok);
  Rng rng(derive_seed(cfg.seed, "init"));
  for (Matrix* b : {&p.Vc, &p.Vs, &p.Vt}) {
    for (double& v : b->data) v = cfg.init_scale * rng.normal();
  }
  return p;
}

TokenSeq assemble(const PromptParams& params, std::span<const TokenVec> class_tokens,
                  DomainTag d, std::span<const TokenVec> domain_tokens, int l_max) {
  const int dt = params.d_tok();
  const int M = params.M();
  const int N = params.N();
  const int content =
      M + N + static_cast<int>(class_tokens.size()) + static_cast<int>(domain_tokens.size());
  if (class_tokens.empty()) throw ShapeError("assemble requires at least one class token");
  if (content > l_max) {
    throw ShapeError("assembled content length " + std::to_string(content) + " exceeds l_max " +
                     std::to_string(l_max));
  }
  for (const auto& t : class_tokens) {
    if (static_cast<int>(t.size()) != dt) throw ShapeError("class token dim mismatch");
  }
  for (const auto& t : domain_tokens) {
    if (static_cast<int>(t.size()) != dt) throw ShapeError("domain token dim mismatch");
  }

  TokenSeq seq;
  seq.tokens = Matrix(l_max, dt);
  seq.content_len = content;
  int r = 0;
  for (int i = 0; i < M; ++i, ++r) {
    std::copy(params.Vc.row(i), params.Vc.row(i) + dt, seq.tokens.row(r));
  }
  const Matrix& dom = (d == DomainTag::Source) ? params.Vs : params.Vt;
  for (int i = 0; i < N; ++i, ++r) {
    std::copy(dom.row(i), dom.row(i) + dt, seq.tokens.row(r));
  }
  for (const auto& t : class_tokens) {
    std::copy(t.begin(), t.end(), seq.tokens.row(r++));
  }
  for (const auto& t : domain_tokens) {
    std::copy(t.begin(), t.end(), seq.tokens.row(r++));
  }
  return seq;
}

void scatter_grads_into(PromptParams& grads, const Matrix& seq_grads, DomainTag d) {
  const int M = grads.M();
  const int N = grads.N();
  const int dt = grads.d_tok();
  if (seq_grads.cols != dt || seq_grads.rows < M + N) {
    throw ShapeError("sequence gradient shape does not match prompt params");
  }
  for (int i = 0; i < M; ++i) {
    axpy(1.0, seq_grads.row_span(i), grads.Vc.row_span(i));
  }
  Matrix& dom = (d == DomainTag::Source) ? grads.Vs : grads.Vt;
  for (int i = 0; i < N; ++i) {
    axpy(1.0, seq_grads.row_span(M + i), dom.row_span(i));
  }
}

PromptParams scatter_grads(const PromptParams& like, const Matrix& seq_grads, DomainTag d) {
  PromptParams g = zeros_like(like);
  scatter_grads_into(g, seq_grads, d);
  return g;
}

}  // namespace dapt
