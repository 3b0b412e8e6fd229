// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDSPLIT_MODEL_HPP
#define FEDSPLIT_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fedsplit/autograd.hpp"
#include "fedsplit/param_set.hpp"

namespace fedsplit {

// Token id 0 is padding everywhere in this library.
inline constexpr std::int32_t kPadToken = 0;

// Mini BERT-style encoder classifier.
//
// Parameters (names are a stable public contract):
//   emb.tok            [vocab x d]
//   emb.pos            [seq_len x d]
//   enc.<kk>.attn.wq|wk|wv|wo  [d x d]     enc.<kk>.attn.bq|bk|bv|bo  [d]
//   enc.<kk>.ln1.g|b   [d]
//   enc.<kk>.ffn.w1    [d x f]   ffn.b1 [f]   ffn.w2 [f x d]   ffn.b2 [d]
//   enc.<kk>.ln2.g|b   [d]
//   head.fc.w          [d x C]   head.fc.b [C]
// with f = ff_mult * d and <kk> the two-digit 0-based layer index.
//
// Parameter count:
//   vocab*d + seq_len*d + L*((4 + 2*ff_mult)*d^2 + (9 + ff_mult)*d) + d*C + C
//
// Each encoder layer is post-norm:
//   a = LN1(x + Attn(x));  y = LN2(a + W2 gelu(W1 a + b1) + b2)
// and the head mean-pools the non-pad positions before the linear classifier.
// num_classes == 1 selects a scalar regression head.
struct ModelConfig {
  std::size_t vocab_size = 200;
  std::size_t seq_len = 16;
  std::size_t hidden = 32;
  std::size_t heads = 4;
  std::size_t layers = 4;
  std::size_t ff_mult = 4;
  std::size_t num_classes = 2;

  void validate() const;
  bool regression() const noexcept { return num_classes == 1; }
};

std::size_t encoder_layer_param_count(const ModelConfig& cfg) noexcept;
std::size_t analytic_param_count(const ModelConfig& cfg) noexcept;

std::string layer_prefix(std::size_t layer);

// A packed batch of sequences. mask[i] == 0 marks padding.
struct Batch {
  std::size_t size = 0;
  std::vector<std::int32_t> tokens;
  std::vector<std::uint8_t> mask;
  std::vector<int> labels;
  std::vector<double> scores;
};

class Model {
 public:
  explicit Model(ModelConfig cfg);

  const ModelConfig& config() const noexcept { return cfg_; }

  // Weights ~ N(0, 0.02^2), biases 0, layer-norm gains 1.
  ParameterSet init_params(std::uint64_t seed) const;

  // Logits [B x C] (or [B x 1] scores for regression).
  Var forward(Graph& g, const std::map<std::string, Var>& params, const Batch& batch) const;

  // Cross-entropy for classification, mean squared error for regression.
  Var loss(Graph& g, const std::map<std::string, Var>& params, const Batch& batch) const;

  Tensor logits(const ParameterSet& params, const Batch& batch) const;

  std::set<std::string> param_names() const;
  // Shapes by name, without allocating parameters.
  std::map<std::string, Shape> param_shapes() const;

 private:
  ModelConfig cfg_;
};

// emb.* -> 0, enc.kk.* -> kk + 1, head.* -> layers + 1.
int param_depth(const std::string& name, std::size_t layers);

struct SplitSpec {
  std::size_t layers = 0;
  std::size_t critical_layer = 0;
  // Only consulted for 0 < c < L; the head is local there by default.
  std::optional<bool> head_global;

  void validate() const;
  bool is_global(const std::string& name) const;
};

struct SplitParts {
  ParameterSet global;
  ParameterSet local;
};

SplitParts split_params(const ParameterSet& params, const SplitSpec& spec);

// Fails when the parts share a name or, if `expected` is given, when their
// union is not exactly `expected`.
ParameterSet merge_params(const ParameterSet& global, const ParameterSet& local,
                          const std::set<std::string>* expected = nullptr);

}  // namespace fedsplit

#endif  // FEDSPLIT_MODEL_HPP
