#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "fedsplit/data.hpp"
#include "fedsplit/error.hpp"

using namespace fedsplit;

namespace {

LabeledDataset pool(std::size_t samples, std::size_t classes = 2, double p = 0.8, std::uint64_t seed = 1) {
  ClassificationTaskSpec s;
  s.num_classes = classes;
  s.samples = samples;
  s.keyword_strength = p;
  s.seed = seed;
  return generate_classification_task(s);
}

}  // namespace

TEST_CASE("classification generator") {
  const LabeledDataset ds = pool(1000);
  ds.validate();
  CHECK(ds.size() == 1000);
  CHECK(ds.class_histogram() == std::vector<std::size_t>{500, 500});
  // Keywords only ever come from the sample's own class.
  for (const auto& s : ds.samples) {
    for (auto t : s.tokens) {
      CHECK(t != kPadToken);
      if (t <= 6) CHECK((t - 1) / 3 == s.label);
    }
  }
  SUBCASE("keyword presence rate matches p") {
    std::size_t planted = 0, none = 0;
    for (const auto& s : ds.samples) {
      std::set<std::int32_t> seen;
      for (auto t : s.tokens)
        if (t <= 6) seen.insert(t);
      planted += seen.size();
      none += seen.empty() ? 1 : 0;
    }
    CHECK(static_cast<double>(planted) / 3000.0 == doctest::Approx(0.8).epsilon(0.03));
    CHECK(none < 25);  // expected 8 of 1000
  }
  SUBCASE("Bayes accuracy formula") {
    CHECK(classification_bayes_accuracy(0.8, 2) == doctest::Approx(1.0 - 0.008 / 2.0));
    CHECK(classification_bayes_accuracy(1.0, 5) == 1.0);
  }
  SUBCASE("p = 1 is separable by keyword presence") {
    const LabeledDataset sep = pool(300, 3, 1.0);
    for (const auto& s : sep.samples) {
      const std::int32_t k = static_cast<std::int32_t>(1 + 3 * s.label);
      CHECK(std::count(s.tokens.begin(), s.tokens.end(), k) == 1);
    }
  }
  CHECK(pool(50).samples[7].tokens == pool(50).samples[7].tokens);
  CHECK_THROWS_AS((void)pool(10, 1), Error);
  CHECK_THROWS_AS((void)pool(10, 2, 0.5), Error);
  ClassificationTaskSpec tiny;
  tiny.vocab_size = 10;
  CHECK_THROWS_AS((void)generate_classification_task(tiny), Error);
}

TEST_CASE("regression generator") {
  RegressionTaskSpec s;
  s.samples = 600;
  const LabeledDataset ds = generate_regression_task(s);
  std::set<double> distinct;
  for (const auto& x : ds.samples) {
    CHECK(x.score >= 0.0);
    CHECK(x.score <= 5.0);
    const auto pos = std::count_if(x.tokens.begin(), x.tokens.end(), [](auto t) { return t >= 1 && t <= 4; });
    CHECK(x.score == 5.0 * static_cast<double>(pos) / 10.0);
    distinct.insert(x.score);
  }
  CHECK(distinct.size() >= 10);
  CHECK(distinct.contains(0.0));
  CHECK(distinct.contains(5.0));
}

TEST_CASE("largest remainder") {
  const std::vector<double> f{0.8, 0.2};
  CHECK(largest_remainder(f, 600) == std::vector<std::size_t>{480, 120});
  const std::vector<double> third{1.0 / 3, 1.0 / 3, 1.0 / 3};
  CHECK(largest_remainder(third, 10) == std::vector<std::size_t>{4, 3, 3});
  const std::vector<double> mrpc{0.51, 0.48};
  const LabelDistScheme s({{0.51, 0.48}});
  CHECK(std::abs(s.row(0)[0] + s.row(0)[1] - 1.0) < 1e-12);
  (void)mrpc;
}

TEST_CASE("label-skew partition follows the scheme") {
  SUBCASE("3-client binary rows, divisible sizes") {
    const LabelDistScheme scheme({{0.8, 0.2}, {0.5, 0.5}, {0.2, 0.8}});
    const auto shards = partition_label_skew(pool(1800), scheme, 3, 600);
    REQUIRE(shards.size() == 3);
    CHECK(shards[0].class_histogram() == std::vector<std::size_t>{480, 120});
    CHECK(shards[1].class_histogram() == std::vector<std::size_t>{300, 300});
    CHECK(shards[2].class_histogram() == std::vector<std::size_t>{120, 480});
    std::set<std::size_t> seen;
    for (const auto& sh : shards)
      for (const auto& x : sh.samples) CHECK(seen.insert(x.source).second);
  }
  SUBCASE("uniform rows, indivisible sizes") {
    const LabelDistScheme scheme({{1.0 / 3, 1.0 / 3, 1.0 / 3}, {1.0 / 3, 1.0 / 3, 1.0 / 3}});
    for (const auto& sh : partition_label_skew(pool(900, 3), scheme, 1, 100)) {
      for (auto n : sh.class_histogram()) CHECK((n == 33 || n == 34));
    }
  }
  SUBCASE("MRPC-style rows when counts allow") {
    const LabelDistScheme scheme({{0.95, 0.05}, {0.75, 0.25}, {0.25, 0.75}});
    const auto shards = partition_label_skew(pool(2000), scheme, 1, 400);
    CHECK(shards[0].class_histogram() == std::vector<std::size_t>{380, 20});
    CHECK(shards[1].class_histogram() == std::vector<std::size_t>{300, 100});
    CHECK(shards[2].class_histogram() == std::vector<std::size_t>{100, 300});
  }
  SUBCASE("infeasible demand names the class") {
    const LabelDistScheme scheme({{0.9, 0.1}, {0.9, 0.1}});
    try {
      (void)partition_label_skew(pool(200), scheme, 1, 100);
      FAIL("expected an infeasible-partition error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Infeasible);
      CHECK(std::string(e.what()).find("class 0") != std::string::npos);
    }
  }
  SUBCASE("deterministic") {
    const LabelDistScheme scheme({{0.7, 0.3}, {0.3, 0.7}});
    const auto a = partition_label_skew(pool(400), scheme, 9);
    const auto b = partition_label_skew(pool(400), scheme, 9);
    CHECK(a[1].samples[5].source == b[1].samples[5].source);
  }
}

TEST_CASE("sorted partition") {
  RegressionTaskSpec s;
  s.samples = 300;
  const LabeledDataset ds = generate_regression_task(s);
  const auto shards = partition_sorted(ds, 3);
  std::vector<double> means;
  for (const auto& sh : shards) {
    double m = 0.0;
    for (const auto& x : sh.samples) m += x.score;
    means.push_back(m / static_cast<double>(sh.size()));
    CHECK(sh.size() == 100);
  }
  CHECK(means[0] < means[1]);
  CHECK(means[1] < means[2]);
  CHECK(shards[0].samples.back().score <= shards[1].samples.front().score);
  CHECK(partition_sorted(ds, 1)[0].size() == 300);
  CHECK(partition_sorted(ds, 7).back().size() == 300 - 6 * 42);
}

TEST_CASE("train/test split") {
  const LabelDistScheme scheme({{0.95, 0.05}});
  const auto shard = partition_label_skew(pool(1000), scheme, 1, 400)[0];
  const auto [train, test] = split_train_test(shard, 0.8, 3);
  CHECK(train.size() == 320);
  CHECK(test.size() == 80);
  CHECK(test.class_histogram() == std::vector<std::size_t>{76, 4});
  const auto again = split_train_test(shard, 0.8, 3);
  CHECK(again.second.samples[0].source == test.samples[0].source);

  const auto ten = shard.subset(std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  const auto [tr10, te10] = split_train_test(ten, 0.8, 1);
  CHECK(tr10.size() == 8);
  CHECK(te10.size() == 2);
  CHECK_THROWS_AS((void)split_train_test(shard.subset(std::vector<std::size_t>{0, 1, 2, 3}), 0.8, 1), Error);
}

TEST_CASE("batch packing") {
  const LabeledDataset ds = pool(10);
  const std::vector<std::size_t> idx{3, 1};
  const Batch b = make_batch(ds, idx);
  CHECK(b.size == 2);
  CHECK(b.tokens.size() == 2 * ds.seq_len);
  CHECK(b.labels == std::vector<int>{ds.samples[3].label, ds.samples[1].label});
  CHECK(std::equal(ds.samples[1].tokens.begin(), ds.samples[1].tokens.end(), b.tokens.begin() + 16));
}

TEST_CASE("dataset dump roundtrip") {
  const LabeledDataset ds = pool(20);
  std::stringstream ss;
  write_dataset(ss, ds);
  const std::string text = ss.str();
  CHECK(text.starts_with("fsbd,v1,200,2,16\n"));
  const LabeledDataset back = read_dataset(ss);
  REQUIRE(back.size() == 20);
  CHECK(back.samples[4].tokens == ds.samples[4].tokens);
  CHECK(back.samples[4].label == ds.samples[4].label);

  RegressionTaskSpec rs;
  rs.samples = 5;
  const LabeledDataset reg = generate_regression_task(rs);
  std::stringstream rss;
  write_dataset(rss, reg);
  CHECK(read_dataset(rss).samples[2].score == reg.samples[2].score);

  std::stringstream bad("fsbd,v2,200,2,16\n");
  CHECK_THROWS_AS((void)read_dataset(bad), Error);
}
