// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsplit/model.hpp"

#include <cstdio>
#include <random>
#include <regex>

#include "fedsplit/error.hpp"

namespace fedsplit {
namespace {

constexpr double kInitStd = 0.02;
constexpr double kLayerNormEps = 1e-5;

const std::regex& name_pattern() {
  static const std::regex re(
      R"(^(?:emb\.(?:tok|pos)|enc\.(\d\d)\.(?:attn\.(?:wq|wk|wv|wo|bq|bk|bv|bo)|ln1\.[gb]|ffn\.(?:w1|b1|w2|b2)|ln2\.[gb])|head\.fc\.[wb])$)");
  return re;
}

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* field) {
    if (v < 1) fail(ErrorKind::Config, std::string("model.") + field + " must be >= 1");
  };
  positive(vocab_size, "vocab_size");
  positive(seq_len, "seq_len");
  positive(hidden, "hidden");
  positive(heads, "heads");
  positive(layers, "layers");
  positive(ff_mult, "ff_mult");
  positive(num_classes, "num_classes");
  if (hidden % heads != 0) {
    fail(ErrorKind::Config, "model.hidden (" + std::to_string(hidden) + ") must be divisible by model.heads (" +
                                std::to_string(heads) + ")");
  }
  if (layers > 99) fail(ErrorKind::Config, "model.layers must be <= 99 (two-digit layer names)");
}

std::size_t encoder_layer_param_count(const ModelConfig& cfg) noexcept {
  const std::size_t d = cfg.hidden, f = cfg.ff_mult;
  return (4 + 2 * f) * d * d + (9 + f) * d;
}

std::size_t analytic_param_count(const ModelConfig& cfg) noexcept {
  const std::size_t d = cfg.hidden;
  return cfg.vocab_size * d + cfg.seq_len * d + cfg.layers * encoder_layer_param_count(cfg) + d * cfg.num_classes +
         cfg.num_classes;
}

std::string layer_prefix(std::size_t layer) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "enc.%02zu", layer);
  return buf;
}

Model::Model(ModelConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::set<std::string> Model::param_names() const {
  std::set<std::string> names{"emb.tok", "emb.pos", "head.fc.w", "head.fc.b"};
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const std::string p = layer_prefix(l);
    for (const char* s : {".attn.wq", ".attn.wk", ".attn.wv", ".attn.wo", ".attn.bq", ".attn.bk", ".attn.bv",
                          ".attn.bo", ".ln1.g", ".ln1.b", ".ffn.w1", ".ffn.b1", ".ffn.w2", ".ffn.b2", ".ln2.g",
                          ".ln2.b"}) {
      names.insert(p + s);
    }
  }
  return names;
}

std::map<std::string, Shape> Model::param_shapes() const {
  const std::size_t d = cfg_.hidden, f = cfg_.ff_mult * cfg_.hidden;
  auto shape_of = [&](const std::string& name) -> Shape {
    if (name == "emb.tok") return {cfg_.vocab_size, d};
    if (name == "emb.pos") return {cfg_.seq_len, d};
    if (name == "head.fc.w") return {d, cfg_.num_classes};
    if (name == "head.fc.b") return {cfg_.num_classes};
    const std::string leaf = name.substr(7);  // after "enc.kk."
    if (leaf.rfind("attn.w", 0) == 0) return {d, d};
    if (leaf == "ffn.w1") return {d, f};
    if (leaf == "ffn.b1") return {f};
    if (leaf == "ffn.w2") return {f, d};
    return {d};
  };
  std::map<std::string, Shape> shapes;
  for (const std::string& name : param_names()) shapes.emplace(name, shape_of(name));
  return shapes;
}

ParameterSet Model::init_params(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, kInitStd);
  ParameterSet params;
  for (const auto& [name, shape] : param_shapes()) {
    Tensor t(shape);
    const char kind = name.back();
    const bool matrix = t.rank() == 2;
    if (matrix) {
      for (double& v : t.data()) v = normal(rng);
    } else if (kind == 'g') {
      t.fill(1.0);
    }
    t.round_to_precision();
    params.insert(name, std::move(t));
  }
  return params;
}

Var Model::forward(Graph& g, const std::map<std::string, Var>& p, const Batch& batch) const {
  const std::size_t B = batch.size, S = cfg_.seq_len;
  if (B == 0) fail(ErrorKind::Dimension, "empty batch");
  if (batch.tokens.size() != B * S || batch.mask.size() != B * S) {
    fail(ErrorKind::Dimension, "batch holds " + std::to_string(batch.tokens.size()) + " tokens, expected " +
                                   std::to_string(B) + "x" + std::to_string(S));
  }
  auto w = [&](const std::string& name) -> Var {
    auto it = p.find(name);
    if (it == p.end()) fail(ErrorKind::Name, "missing parameter '" + name + "'");
    if (it->second.graph != &g) fail(ErrorKind::Name, "parameter '" + name + "' belongs to another graph");
    return it->second;
  };

  Var x = embedding(w("emb.tok"), batch.tokens);
  x = add_tiled(x, w("emb.pos"));
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const std::string pre = layer_prefix(l);
    Var q = add_tiled(matmul(x, w(pre + ".attn.wq")), w(pre + ".attn.bq"));
    Var k = add_tiled(matmul(x, w(pre + ".attn.wk")), w(pre + ".attn.bk"));
    Var v = add_tiled(matmul(x, w(pre + ".attn.wv")), w(pre + ".attn.bv"));
    Var a = attention(q, k, v, batch.mask, B, cfg_.heads);
    Var o = add_tiled(matmul(a, w(pre + ".attn.wo")), w(pre + ".attn.bo"));
    Var x1 = layer_norm(add(x, o), w(pre + ".ln1.g"), w(pre + ".ln1.b"), kLayerNormEps);
    Var h = gelu(add_tiled(matmul(x1, w(pre + ".ffn.w1")), w(pre + ".ffn.b1")));
    Var h2 = add_tiled(matmul(h, w(pre + ".ffn.w2")), w(pre + ".ffn.b2"));
    x = layer_norm(add(x1, h2), w(pre + ".ln2.g"), w(pre + ".ln2.b"), kLayerNormEps);
  }
  Var pooled = mean_pool(x, batch.mask, B);
  return add_tiled(matmul(pooled, w("head.fc.w")), w("head.fc.b"));
}

Var Model::loss(Graph& g, const std::map<std::string, Var>& params, const Batch& batch) const {
  Var out = forward(g, params, batch);
  if (cfg_.regression()) return mse_loss(out, batch.scores);
  return softmax_cross_entropy(out, batch.labels);
}

Tensor Model::logits(const ParameterSet& params, const Batch& batch) const {
  Graph g;
  std::map<std::string, Var> vars;
  for (const auto& [name, t] : params) vars.emplace(name, g.constant(t));
  return forward(g, vars, batch).value();
}

int param_depth(const std::string& name, std::size_t layers) {
  std::smatch m;
  if (!std::regex_match(name, m, name_pattern())) fail(ErrorKind::Name, "unparseable parameter name '" + name + "'");
  if (name.rfind("emb.", 0) == 0) return 0;
  if (name.rfind("head.", 0) == 0) return static_cast<int>(layers) + 1;
  const int layer = std::stoi(m[1].str());
  if (static_cast<std::size_t>(layer) >= layers) {
    fail(ErrorKind::Name, "parameter '" + name + "' refers to layer " + std::to_string(layer) + " of a " +
                              std::to_string(layers) + "-layer model");
  }
  return layer + 1;
}

void SplitSpec::validate() const {
  if (critical_layer > layers) {
    fail(ErrorKind::Config, "critical layer " + std::to_string(critical_layer) + " exceeds encoder depth " +
                                std::to_string(layers));
  }
}

bool SplitSpec::is_global(const std::string& name) const {
  const int depth = param_depth(name, layers);
  if (critical_layer == 0) return false;
  if (critical_layer == layers) return true;
  if (depth == static_cast<int>(layers) + 1) return head_global.value_or(false);
  return depth <= static_cast<int>(critical_layer);
}

SplitParts split_params(const ParameterSet& params, const SplitSpec& spec) {
  spec.validate();
  SplitParts parts;
  for (const auto& [name, t] : params) {
    (spec.is_global(name) ? parts.global : parts.local).insert(name, t);
  }
  return parts;
}

ParameterSet merge_params(const ParameterSet& global, const ParameterSet& local, const std::set<std::string>* expected) {
  std::string overlap;
  for (const auto& [name, _] : global) {
    if (local.contains(name)) overlap += (overlap.empty() ? "" : ", ") + name;
  }
  if (!overlap.empty()) fail(ErrorKind::Name, "global and local parts overlap on: " + overlap);
  ParameterSet merged = global;
  for (const auto& [name, t] : local) merged.insert(name, t);
  if (expected) {
    std::string missing, extra;
    for (const auto& name : *expected) {
      if (!merged.contains(name)) missing += (missing.empty() ? "" : ", ") + name;
    }
    for (const auto& [name, _] : merged) {
      if (!expected->count(name)) extra += (extra.empty() ? "" : ", ") + name;
    }
    if (!missing.empty() || !extra.empty()) {
      fail(ErrorKind::Name, "merged parameters do not match the model; missing: [" + missing + "] unexpected: [" +
                                extra + "]");
    }
  }
  return merged;
}

}  // namespace fedsplit
