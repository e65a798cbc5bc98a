#pragma once

#include <cstdint>

#include "dapt/sequence.hpp"

namespace dapt {

/// Frozen text encoder. Weights are drawn once from a seeded Gaussian and
/// never trained; gradients only flow through it back to the input sequence.
///
///   h = mean over content rows l of (seq_l + pos_l)
///   u = tanh(W^T h)
///   output = u / ||u||
struct FrozenEncoder {
  int l_max = 18;
  int d_tok = 32;
  int d_emb = 32;
  std::uint64_t seed = 0;
  Matrix pos;  // l_max x d_tok
  Matrix W;    // d_tok x d_emb
};

/// Builds the encoder: pos then W filled row-major from one stream seeded by
/// seed, entries Gaussian(0, 1/d_tok).
FrozenEncoder make_encoder(int l_max, int d_tok, int d_emb, std::uint64_t seed);

/// Unit-norm embedding of a sequence. Throws EmptySequenceError when the
/// sequence has no content rows and DegenerateEmbeddingError when ||u|| is
/// numerically zero.
EmbeddingVec encode(const FrozenEncoder& enc, const TokenSeq& seq);

/// Gradient of (upstream . encode(seq)) with respect to the token rows,
/// computed analytically. Padding rows get exactly zero.
Matrix encode_backward(const FrozenEncoder& enc, const TokenSeq& seq,
                       std::span<const double> upstream);

}  // namespace dapt
