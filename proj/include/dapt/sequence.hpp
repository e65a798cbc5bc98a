#pragma once

#include "dapt/tensor.hpp"

namespace dapt {

using TokenVec = Vec;       // d_tok token embedding
using EmbeddingVec = Vec;   // d_emb encoder output

/// Fixed-length token sequence fed to the frozen encoder. Rows at index
/// >= content_len are padding and stay all-zero; the encoder skips them.
struct TokenSeq {
  Matrix tokens;        // l_max x d_tok
  int content_len = 0;  // number of leading non-padding rows

  int l_max() const { return tokens.rows; }
  int d_tok() const { return tokens.cols; }
};

}  // namespace dapt
