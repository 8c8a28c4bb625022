#include "slukit/encoders.hpp"

#include "slukit/error.hpp"

namespace slukit::nn {

ad::Mask mask_from_lengths(std::span<const std::size_t> lengths, std::size_t steps) {
  ad::Mask m(lengths.size() * steps, 0);
  for (std::size_t b = 0; b < lengths.size(); ++b)
    for (std::size_t t = 0; t < lengths[b] && t < steps; ++t) m[b * steps + t] = 1;
  return m;
}

Tensor run_lstm(const Tensor& emb, std::span<const std::size_t> lengths,
                const ad::LstmParams& p, bool reverse) {
  if (emb.rank() != 3 || emb.dim(2) != p.input_size())
    throw ShapeError("lstm encoder: input " + ad::to_string(emb.shape()) +
                     " for input size " + std::to_string(p.input_size()));
  const std::size_t batch = emb.dim(0), steps = emb.dim(1), h = p.hidden_size();
  if (lengths.size() != batch)
    throw ShapeError("lstm encoder: " + std::to_string(lengths.size()) +
                     " lengths for batch " + std::to_string(batch));
  for (auto len : lengths)
    if (len > steps) throw ContractError("lstm encoder: length exceeds T");

  // Project the whole sequence once: [(B·T)×4H].
  const Tensor proj = ad::matmul(flatten_steps(emb), p.w_x);
  const Tensor zero = Tensor::zeros({batch, h});
  Tensor hs = zero, cs = zero;
  std::vector<Tensor> outputs(steps);
  std::vector<int> rows(batch);
  ad::Mask active(batch);
  for (std::size_t i = 0; i < steps; ++i) {
    const std::size_t t = reverse ? steps - 1 - i : i;
    bool any = false;
    for (std::size_t b = 0; b < batch; ++b) {
      rows[b] = static_cast<int>(b * steps + t);
      active[b] = t < lengths[b];
      any = any || active[b];
    }
    if (!any) {
      outputs[t] = zero;
      continue;
    }
    const auto next = ad::lstm_cell_preact(ad::gather_rows(proj, rows), hs, cs, p);
    hs = ad::select_rows(active, next.h, hs);
    cs = ad::select_rows(active, next.c, cs);
    outputs[t] = ad::select_rows(active, next.h, zero);
  }
  return ad::stack_steps(outputs);
}

BiLstmEncoder::BiLstmEncoder(std::size_t input_size, std::size_t hidden_size,
                             std::mt19937_64& rng)
    : fwd_(make_lstm(input_size, hidden_size, rng)),
      bwd_(make_lstm(input_size, hidden_size, rng)) {}

BiLstmEncoder::BiLstmEncoder(ad::LstmParams forward, ad::LstmParams backward)
    : fwd_(std::move(forward)), bwd_(std::move(backward)) {
  if (fwd_.input_size() != bwd_.input_size() || fwd_.hidden_size() != bwd_.hidden_size())
    throw ShapeError("bilstm: forward and backward parameter shapes differ");
}

EncoderOutput BiLstmEncoder::encode(const Tensor& emb, const ad::Mask& mask,
                                    std::span<const std::size_t> lengths) const {
  const Tensor both[] = {run_lstm(emb, lengths, fwd_, false),
                         run_lstm(emb, lengths, bwd_, true)};
  return {ad::concat_last(both), mask};
}

NamedParams BiLstmEncoder::params() const {
  NamedParams out;
  ad::append_params(out, "forward.", fwd_.named());
  ad::append_params(out, "backward.", bwd_.named());
  return out;
}

SelfAttentiveEncoder::SelfAttentiveEncoder(std::size_t input_size,
                                           std::size_t hidden_size,
                                           std::size_t attention_size,
                                           std::mt19937_64& rng)
    : lstm_(input_size, hidden_size, rng),
      query_(input_size, attention_size, rng),
      key_(input_size, attention_size, rng),
      value_(input_size, attention_size, rng) {}

EncoderOutput SelfAttentiveEncoder::encode(const Tensor& emb, const ad::Mask& mask,
                                           std::span<const std::size_t> lengths) const {
  auto rnn = lstm_.encode(emb, mask, lengths);
  const Tensor attended = ad::batched_attention(query_(emb), key_(emb), value_(emb), mask);
  const Tensor both[] = {rnn.hidden, attended};
  return {ad::concat_last(both), mask};
}

NamedParams SelfAttentiveEncoder::params() const {
  NamedParams out = lstm_.params();
  ad::append_params(out, "query.", query_.params());
  ad::append_params(out, "key.", key_.params());
  ad::append_params(out, "value.", value_.params());
  return out;
}

}  // namespace slukit::nn
