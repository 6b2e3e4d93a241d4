#include "srd/text_encoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace srd {

TokenSequence pad_or_truncate(const std::vector<int>& ids, std::size_t seq_len) {
  TokenSequence seq;
  seq.token_ids.assign(seq_len, 0);
  for (std::size_t i = 0; i < ids.size() && i < seq_len; ++i) seq.token_ids[i] = ids[i];
  return seq;
}

Tensor embed(Tape& tape, const TokenSequence& seq, const Tensor& table) {
  for (int id : seq.token_ids)
    if (id < 0 || static_cast<std::size_t>(id) >= table.rows())
      throw std::invalid_argument("embed: token id " + std::to_string(id) +
                                  " outside vocabulary of " + std::to_string(table.rows()));
  return gather_rows(tape, table, seq.token_ids);
}

Tensor self_attention(Tape& tape, const Tensor& x, const AttentionParams& params) {
  std::size_t h = params.heads();
  if (h == 0 || params.w_key.size() != h || params.w_value.size() != h)
    throw std::invalid_argument("self_attention: inconsistent head parameter lists");
  std::size_t d_model = x.cols();
  std::vector<Tensor> heads;
  heads.reserve(h);
  for (std::size_t i = 0; i < h; ++i) {
    if (params.w_query[i].rows() != d_model)
      throw std::invalid_argument("self_attention: input width " + x.shape_str() +
                                  " does not match projection " +
                                  params.w_query[i].shape_str());
    Tensor q = matmul(tape, x, params.w_query[i]);
    Tensor k = matmul(tape, x, params.w_key[i]);
    Tensor v = matmul(tape, x, params.w_value[i]);
    double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Tensor scores = scale(tape, matmul(tape, q, transpose(tape, k)), inv_sqrt_dk);
    heads.push_back(matmul(tape, softmax_rows(tape, scores), v));
  }
  Tensor concat = concat_cols(tape, heads);
  if (concat.cols() != params.w_out.rows())
    throw std::invalid_argument("self_attention: head concat width " + concat.shape_str() +
                                " does not match output projection " +
                                params.w_out.shape_str());
  return matmul(tape, concat, params.w_out);
}

Tensor conv_maxpool(Tape& tape, const Tensor& z, const ConvParams& params, double dropout_rate,
                    Rng& dropout_rng, bool training) {
  if (params.windows.size() != params.filters.size() ||
      params.windows.size() != params.bias.size() || params.windows.empty())
    throw std::invalid_argument("conv_maxpool: inconsistent filter banks");
  std::vector<Tensor> pooled;
  for (std::size_t b = 0; b < params.windows.size(); ++b) {
    std::size_t window = params.windows[b];
    if (window > z.rows())
      throw std::invalid_argument("conv_maxpool: window " + std::to_string(window) +
                                  " exceeds sequence length " + std::to_string(z.rows()));
    if (params.filters[b].rows() != window * z.cols())
      throw std::invalid_argument("conv_maxpool: filter bank " + std::to_string(b) +
                                  " expects window*d_model rows, got " +
                                  params.filters[b].shape_str());
    Tensor windows = im2col_rows(tape, z, window);
    Tensor act = relu(tape, add_bias(tape, matmul(tape, windows, params.filters[b]),
                                     params.bias[b]));
    pooled.push_back(max_cols(tape, act));
  }
  Tensor t = concat_cols(tape, pooled);
  return dropout(tape, t, dropout_rate, dropout_rng, training);
}

Tensor text_forward(Tape& tape, const TokenSequence& seq, const Tensor& embedding,
                    const AttentionParams& attn, const ConvParams& conv, double dropout_rate,
                    Rng& dropout_rng, bool training) {
  Tensor x = embed(tape, seq, embedding);
  Tensor z = self_attention(tape, x, attn);
  return conv_maxpool(tape, z, conv, dropout_rate, dropout_rng, training);
}

}  // namespace srd
