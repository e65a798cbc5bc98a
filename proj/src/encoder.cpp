#include "dapt/encoder.hpp"

#include <cmath>
#include <string>

#include "dapt/errors.hpp"
#include "dapt/rng.hpp"

namespace dapt {

FrozenEncoder make_encoder(int l_max, int d_tok, int d_emb, std::uint64_t seed) {
  if (l_max < 1 || d_tok < 1 || d_emb < 1) {
    throw ShapeError("invalid encoder dims: l_max=" + std::to_string(l_max) +
                     " d_tok=" + std::to_string(d_tok) + " d_emb=" + std::to_string(d_emb));
  }
  FrozenEncoder enc;
  enc.l_max = l_max;
  enc.d_tok = d_tok;
  enc.d_emb = d_emb;
  enc.seed = seed;
  enc.pos = Matrix(l_max, d_tok);
  enc.W = Matrix(d_tok, d_emb);
  const double sd = 1.0 / std::sqrt(static_cast<double>(d_tok));
  Rng rng(seed);
  for (double& v : enc.pos.data) v = sd * rng.normal();
  for (double& v : enc.W.data) v = sd * rng.normal();
  return enc;
}

namespace {

struct ForwardState {
  int n = 0;
  Vec h;        // d_tok pooled input
  Vec u;        // d_emb, tanh(W^T h)
  double r = 0; // ||u||
};

ForwardState forward(const FrozenEncoder& enc, const TokenSeq& seq) {
  if (seq.tokens.rows != enc.l_max || seq.tokens.cols != enc.d_tok) {
    throw ShapeError("sequence shape " + std::to_string(seq.tokens.rows) + "x" +
                     std::to_string(seq.tokens.cols) + " does not match encoder " +
                     std::to_string(enc.l_max) + "x" + std::to_string(enc.d_tok));
  }
  if (seq.content_len < 0 || seq.content_len > enc.l_max) {
    throw ShapeError("content_len out of range");
  }
  ForwardState st;
  st.n = seq.content_len;
  if (st.n == 0) throw EmptySequenceError("cannot encode all-padding sequence");

  st.h.assign(enc.d_tok, 0.0);
  for (int l = 0; l < st.n; ++l) {
    const double* tok = seq.tokens.row(l);
    const double* pos = enc.pos.row(l);
    for (int j = 0; j < enc.d_tok; ++j) st.h[j] += tok[j] + pos[j];
  }
  const double inv_n = 1.0 / st.n;
  for (double& v : st.h) v *= inv_n;

  st.u.assign(enc.d_emb, 0.0);
  for (int j = 0; j < enc.d_tok; ++j) {
    const double hj = st.h[j];
    const double* wrow = enc.W.row(j);
    for (int e = 0; e < enc.d_emb; ++e) st.u[e] += wrow[e] * hj;
  }
  for (double& v : st.u) v = std::tanh(v);

  st.r = l2_norm(st.u);
  if (st.r < 1e-12) throw DegenerateEmbeddingError("encoder output has near-zero norm");
  return st;
}

}  // namespace

EmbeddingVec encode(const FrozenEncoder& enc, const TokenSeq& seq) {
  ForwardState st = forward(enc, seq);
  EmbeddingVec out = st.u;
  scale(out, 1.0 / st.r);
  return out;
}

Matrix encode_backward(const FrozenEncoder& enc, const TokenSeq& seq,
                       std::span<const double> upstream) {
  if (static_cast<int>(upstream.size()) != enc.d_emb) {
    throw ShapeError("upstream dim does not match d_emb");
  }
  ForwardState st = forward(enc, seq);

  // through the normalization: g_u = (up - (up . z) z) / r, z = u / r
  Vec z = st.u;
  scale(z, 1.0 / st.r);
  const double proj = dot(upstream, z);
  Vec g_u(enc.d_emb);
  for (int e = 0; e < enc.d_emb; ++e) g_u[e] = (upstream[e] - proj * z[e]) / st.r;

  // through tanh: g_a = g_u * (1 - u^2)
  Vec g_a(enc.d_emb);
  for (int e = 0; e < enc.d_emb; ++e) g_a[e] = g_u[e] * (1.0 - st.u[e] * st.u[e]);

  // through W^T: g_h = W g_a
  Vec g_h(enc.d_tok, 0.0);
  for (int j = 0; j < enc.d_tok; ++j) {
    const double* wrow = enc.W.row(j);
    double s = 0.0;
    for (int e = 0; e < enc.d_emb; ++e) s += wrow[e] * g_a[e];
    g_h[j] = s;
  }

  // through the mean: every content row gets g_h / n, padding stays zero
  Matrix g_seq(enc.l_max, enc.d_tok);
  const double inv_n = 1.0 / st.n;
  for (int l = 0; l < st.n; ++l) {
    double* dst = g_seq.row(l);
    for (int j = 0; j < enc.d_tok; ++j) dst[j] = g_h[j] * inv_n;
  }
  return g_seq;
}

}  // namespace dapt
