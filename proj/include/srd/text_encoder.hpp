#pragma once

#include <cstddef>
#include <vector>

#include "srd/rng.hpp"
#include "srd/tensor.hpp"

namespace srd {

// Fixed-length token id sequence; id 0 is the pad slot, id 1 the unknown slot.
struct TokenSequence {
  std::vector<int> token_ids;  // length exactly seq_len
};

TokenSequence pad_or_truncate(const std::vector<int>& ids, std::size_t seq_len);

struct AttentionParams {
  std::vector<Tensor> w_query;  // per head, d_model x d_head
  std::vector<Tensor> w_key;
  std::vector<Tensor> w_value;
  Tensor w_out;  // (heads * d_head) x d_model

  std::size_t heads() const { return w_query.size(); }
};

struct ConvParams {
  // One filter bank per window size: filters[w] is (window_w * d_model) x maps,
  // applied to flattened windows; bias[w] is 1 x maps.
  std::vector<std::size_t> windows;
  std::vector<Tensor> filters;
  std::vector<Tensor> bias;

  std::size_t output_width() const {
    std::size_t w = 0;
    for (const Tensor& f : filters) w += f.cols();
    return w;
  }
};

// Row i = table[token_ids[i]]; row 0 of the table is the zero pad vector.
Tensor embed(Tape& tape, const TokenSequence& seq, const Tensor& table);

// Single-layer multi-head self-attention, queries = keys = values = x.
Tensor self_attention(Tape& tape, const Tensor& x, const AttentionParams& params);

// Per window size: ReLU(conv over every window + bias), max over windows,
// then concatenation across banks. Dropout applies in training mode only.
Tensor conv_maxpool(Tape& tape, const Tensor& z, const ConvParams& params, double dropout_rate,
                    Rng& dropout_rng, bool training);

// embed -> self_attention -> conv_maxpool; the semantic representation t.
Tensor text_forward(Tape& tape, const TokenSequence& seq, const Tensor& embedding,
                    const AttentionParams& attn, const ConvParams& conv, double dropout_rate,
                    Rng& dropout_rng, bool training);

}  // namespace srd
