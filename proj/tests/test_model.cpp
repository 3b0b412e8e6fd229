#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "fedsplit/autograd.hpp"
#include "fedsplit/gradcheck.hpp"
#include "fedsplit/error.hpp"
#include "fedsplit/model.hpp"

using namespace fedsplit;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.vocab_size = 100;
  c.seq_len = 16;
  c.hidden = 32;
  c.heads = 4;
  c.layers = 4;
  c.ff_mult = 4;
  c.num_classes = 2;
  return c;
}

Batch toy_batch(const ModelConfig& c, std::size_t b) {
  Batch batch;
  batch.size = b;
  for (std::size_t i = 0; i < b * c.seq_len; ++i) {
    batch.tokens.push_back(static_cast<std::int32_t>(1 + (i * 7) % (c.vocab_size - 1)));
    batch.mask.push_back(1);
  }
  for (std::size_t i = 0; i < b; ++i) batch.labels.push_back(static_cast<int>(i % c.num_classes));
  return batch;
}

std::set<std::string> names_of(const ParameterSet& p) {
  const auto v = p.names();
  return {v.begin(), v.end()};
}

}  // namespace

TEST_CASE("parameter count matches the analytic formula") {
  const ModelConfig c = small_config();
  const ParameterSet p = Model(c).init_params(1);
  // Independent count: vocab*d + seq*d + L*(4d^2 + 4d + 2d + f*d + f + f*d + d + 2d) + d*C + C.
  const std::size_t d = 32, f = 128, L = 4;
  const std::size_t expect = 100 * d + 16 * d + L * (4 * d * d + 4 * d + 2 * d + d * f + f + f * d + d + 2 * d) + d * 2 + 2;
  CHECK(p.total_numel() == expect);
  CHECK(analytic_param_count(c) == expect);
  CHECK(p.size() == 2 + 16 * L + 2);
}

TEST_CASE("config errors name the field") {
  ModelConfig c = small_config();
  c.hidden = 30;
  c.heads = 4;
  try {
    Model m(c);
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    CHECK(std::string(e.what()).find("model.hidden") != std::string::npos);
  }
  c = small_config();
  c.layers = 0;
  CHECK_THROWS_AS(Model{c}, Error);
}

TEST_CASE("full-scale names enc.00 to enc.11") {
  ModelConfig c;
  c.vocab_size = 8;
  c.seq_len = 2;
  c.hidden = 12;
  c.heads = 12;
  c.layers = 12;
  const auto names = Model(c).param_names();
  CHECK(names.contains("enc.00.attn.wq"));
  CHECK(names.contains("enc.11.ln2.b"));
  CHECK_FALSE(names.contains("enc.12.ln2.b"));
}

TEST_CASE("initialization statistics") {
  const ParameterSet p = Model(small_config()).init_params(3);
  for (double v : p.at("enc.00.attn.bq").data()) CHECK(v == 0.0);
  for (double v : p.at("enc.01.ln1.g").data()) CHECK(v == 1.0);
  const Tensor& w = p.at("emb.tok");
  double s = 0.0, s2 = 0.0;
  for (double v : w.data()) {
    s += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(w.numel());
  CHECK(std::abs(s / n) < 0.002);
  CHECK(std::sqrt(s2 / n) == doctest::Approx(0.02).epsilon(0.05));
  CHECK(p.bit_equal(Model(small_config()).init_params(3)));
  CHECK_FALSE(p.bit_equal(Model(small_config()).init_params(4)));
}

TEST_CASE("forward shape, determinism and id checks") {
  const ModelConfig c = small_config();
  const Model m(c);
  const ParameterSet p = m.init_params(1);
  const Batch b = toy_batch(c, 3);
  const Tensor l1 = m.logits(p, b);
  CHECK(l1.shape() == Shape{3, 2});
  CHECK(l1.bit_equal(m.logits(p, b)));

  Batch pads = toy_batch(c, 1);
  std::fill(pads.tokens.begin(), pads.tokens.end(), kPadToken);
  std::fill(pads.mask.begin(), pads.mask.end(), 0);
  const Tensor lp = m.logits(p, pads);
  CHECK(lp.all_finite());
  CHECK(lp.bit_equal(m.logits(p, pads)));

  Batch bad = toy_batch(c, 1);
  bad.tokens[0] = static_cast<std::int32_t>(c.vocab_size);
  try {
    (void)m.logits(p, bad);
    FAIL("expected an index error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Index);
  }
}

TEST_CASE("regression head yields one score per row") {
  ModelConfig c = small_config();
  c.num_classes = 1;
  const Model m(c);
  Batch b = toy_batch(c, 2);
  b.scores = {1.0, 4.0};
  CHECK(m.logits(m.init_params(2), b).shape() == Shape{2, 1});
}

TEST_CASE("param_depth") {
  CHECK(param_depth("emb.tok", 4) == 0);
  CHECK(param_depth("emb.pos", 4) == 0);
  CHECK(param_depth("enc.03.attn.wq", 4) == 4);
  CHECK(param_depth("enc.00.ffn.b2", 4) == 1);
  CHECK(param_depth("head.fc.w", 4) == 5);
  CHECK_THROWS_AS((void)param_depth("enc.3.attn.wq", 4), Error);
  CHECK_THROWS_AS((void)param_depth("enc.04.attn.wq", 4), Error);
  CHECK_THROWS_AS((void)param_depth("decoder.x", 4), Error);
}

TEST_CASE("split/merge is an exact partition for every c") {
  const ModelConfig c = small_config();
  const Model m(c);
  const ParameterSet w = m.init_params(5);
  const auto all = m.param_names();
  std::size_t prev = 0;
  for (std::size_t crit = 0; crit <= c.layers; ++crit) {
    const SplitParts parts = split_params(w, SplitSpec{c.layers, crit, std::nullopt});
    std::set<std::string> u = names_of(parts.global);
    for (const auto& n : parts.local.names()) CHECK(u.insert(n).second);
    CHECK(u == all);
    CHECK(merge_params(parts.global, parts.local, &all).bit_equal(w));
    CHECK(parts.global.total_numel() >= prev);
    prev = parts.global.total_numel();
  }
  CHECK(prev == w.total_numel());
}

TEST_CASE("split rule at the extremes and in the middle") {
  const ModelConfig c = small_config();
  const ParameterSet w = Model(c).init_params(5);
  CHECK(split_params(w, SplitSpec{4, 0, std::nullopt}).global.empty());
  CHECK(split_params(w, SplitSpec{4, 4, std::nullopt}).local.empty());
  // c = 0 and c = L ignore the head override.
  CHECK(split_params(w, SplitSpec{4, 0, true}).global.empty());
  CHECK(split_params(w, SplitSpec{4, 4, false}).local.empty());

  const SplitParts mid = split_params(w, SplitSpec{4, 2, std::nullopt});
  for (const auto& n : mid.global.names()) {
    const bool ok = n.starts_with("emb.") || n.starts_with("enc.00.") || n.starts_with("enc.01.");
    CHECK_MESSAGE(ok, n);
  }
  for (const auto& n : mid.local.names()) {
    const bool ok = n.starts_with("enc.02.") || n.starts_with("enc.03.") || n.starts_with("head.");
    CHECK_MESSAGE(ok, n);
  }
  const SplitParts head = split_params(w, SplitSpec{4, 2, true});
  CHECK(head.global.contains("head.fc.w"));
  CHECK_FALSE(head.local.contains("head.fc.w"));
  CHECK_THROWS_AS((void)split_params(w, SplitSpec{4, 5, std::nullopt}), Error);
}

TEST_CASE("merge errors") {
  const ModelConfig c = small_config();
  const Model m(c);
  const ParameterSet w = m.init_params(5);
  SplitParts parts = split_params(w, SplitSpec{4, 2, std::nullopt});
  ParameterSet overlapping = parts.local;
  overlapping.insert("emb.tok", w.at("emb.tok"));
  try {
    (void)merge_params(parts.global, overlapping);
    FAIL("expected an overlap error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("emb.tok") != std::string::npos);
  }
  ParameterSet missing = parts.local;
  missing.erase("head.fc.b");
  const auto all = m.param_names();
  try {
    (void)merge_params(parts.global, missing, &all);
    FAIL("expected a missing-name error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("head.fc.b") != std::string::npos);
  }
  CHECK(merge_params(ParameterSet{}, w, &all).bit_equal(w));
}

TEST_CASE("model gradients match finite differences") {
  ModelConfig c;
  c.vocab_size = 30;
  c.seq_len = 5;
  c.hidden = 8;
  c.heads = 2;
  c.layers = 2;
  c.ff_mult = 2;
  c.num_classes = 3;
  const Model m(c);
  Batch b = toy_batch(c, 3);
  b.mask[4] = 0;
  b.tokens[4] = kPadToken;
  PrecisionScope scope(Precision::F64);
  const ParameterSet p = m.init_params(8);
  GradCheckOptions opts;
  opts.probes = 150;
  const auto report =
      finite_diff_check([&](Graph& g, const std::map<std::string, Var>& v) { return m.loss(g, v, b); }, p, opts);
  CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("model gradients in 32-bit mode stay within the looser bound") {
  ModelConfig c;
  c.vocab_size = 30;
  c.seq_len = 5;
  c.hidden = 16;
  c.heads = 2;
  c.layers = 2;
  c.num_classes = 2;
  const Model m(c);
  const Batch b = toy_batch(c, 4);
  PrecisionScope scope(Precision::F32);
  const ParameterSet p = m.init_params(2);
  const auto report =
      finite_diff_check([&](Graph& g, const std::map<std::string, Var>& v) { return m.loss(g, v, b); }, p, {});
  CHECK(report.max_rel_error < 1e-3);
}
