// Copyright 2026 The KRNet Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>
#include <set>

#include "doctest.h"
#include "krnet/grouping.hpp"

using namespace krnet;

namespace {

// Independent oracle: explicit A_n v with a_ij read straight off the rule.
std::vector<double> matrix_product(std::size_t n, std::size_t h, const std::vector<double>& v) {
  std::vector<double> out(h, 0.0);
  for (std::size_t j = 0; j < h; ++j) {
    for (std::size_t i = 0; i < h; ++i) {
      const bool one = (static_cast<long>(i) - static_cast<long>(j) == static_cast<long>(n)) ||
                       (static_cast<long>(j) - static_cast<long>(i) == static_cast<long>(h - n));
      if (one) out[j] += v[i];
    }
  }
  return out;
}

}  // namespace

TEST_CASE("build_group_index examples") {
  CHECK(build_group_index({{0, 512}}, 512).num_groups() == 1);
  const auto two = build_group_index({{0, 513}}, 512);
  REQUIRE(two.num_groups() == 2);
  CHECK(two.groups()[0].count == 512);
  CHECK(two.groups()[1].count == 1);
  CHECK(build_group_index({{0, 1300}, {1, 700}}, 512).num_groups() == 5);
  CHECK(count_groups({{0, 1300}, {1, 700}}, 512) == 5);
}

TEST_CASE("build_group_index rejects bad input") {
  CHECK_THROWS_AS(build_group_index({{0, 3}}, 0), ValidationError);
  CHECK_THROWS_AS(build_group_index({}, 4), ValidationError);
  CHECK_THROWS_AS(build_group_index({{0, 0}}, 4), ValidationError);
}

TEST_CASE("groups never mix classes and fill in (class, id) order") {
  std::vector<LabeledSample> samples{{9, 1}, {3, 0}, {7, 1}, {1, 0}, {5, 0}, {2, 1}};
  const auto index = GroupIndex::build(samples, 2);
  REQUIRE(index.num_groups() == 4);
  CHECK(index.sample_at(0, 0) == 1);
  CHECK(index.sample_at(0, 1) == 3);
  CHECK(index.sample_at(1, 0) == 5);
  CHECK(index.groups()[1].count == 1);
  CHECK(index.sample_at(2, 0) == 2);
  CHECK(index.sample_at(2, 1) == 7);
  CHECK(index.sample_at(3, 0) == 9);
  for (const auto& g : index.groups()) {
    for (std::size_t n = 0; n < g.count; ++n) CHECK(index.label_of(index.sample_at(g.id, n)) == g.class_label);
  }
  CHECK(index.classes() == std::vector<ClassLabel>{0, 1});
  CHECK_THROWS_AS(index.slot(4), ValidationError);
  CHECK_THROWS_AS(index.sample_at(1, 1), ValidationError);
}

TEST_CASE("unlabeled grouping fills sequentially") {
  const std::vector<SampleId> ids{10, 11, 12, 13, 14};
  const auto index = GroupIndex::build_unlabeled(ids, 2);
  CHECK(index.num_groups() == 3);
  CHECK(index.groups()[2].class_label == kUnlabeled);
  CHECK(index.slot(14) == SampleSlot{2, 0});
  CHECK(index.slot(11) == SampleSlot{0, 1});
}

TEST_CASE("group index invariants hold on random class-count maps") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<ClassLabel, std::size_t> counts;
    const std::size_t classes = 1 + rng() % 6;
    std::size_t total = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      counts[static_cast<ClassLabel>(c * 3)] = 1 + rng() % 40;
      total += counts[static_cast<ClassLabel>(c * 3)];
    }
    const std::size_t h = 1 + rng() % 9;
    const auto index = build_group_index(counts, h);
    std::size_t expected = 0;
    for (auto [c, n] : counts) expected += (n + h - 1) / h;
    CHECK(index.num_groups() == expected);
    CHECK(index.num_samples() == total);
    std::set<std::pair<std::size_t, std::size_t>> slots;
    for (SampleId id : index.sample_ids()) {
      const auto s = index.slot(id);
      CHECK(s.local < index.groups()[s.group].count);
      slots.insert({s.group, s.local});
    }
    CHECK(slots.size() == total);
    for (std::size_t m = 0; m < index.num_groups(); ++m) CHECK(index.groups()[m].id == m);
    const auto again = build_group_index(counts, h);
    CHECK(again.sample_ids() == index.sample_ids());
  }
}

TEST_CASE("group index JSON round trip and layout") {
  const auto index = build_group_index({{0, 3}, {2, 1}}, 2);
  const auto j = index.to_json();
  CHECK(j.dump() ==
        R"({"H":2,"groups":[{"m":0,"class":0,"count":2},{"m":1,"class":0,"count":1},{"m":2,"class":2,"count":1}],)"
        R"("samples":[[0,0,0],[1,0,1],[2,1,0],[3,2,0]]})");
  const auto back = GroupIndex::from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.sample_ids() == index.sample_ids());
  CHECK(back.slot(3) == SampleSlot{2, 0});
  auto bad = nlohmann::json::parse(j.dump());
  bad["samples"][1][2] = 5;
  CHECK_THROWS_AS(GroupIndex::from_json(bad), ValidationError);
}

TEST_CASE("permutation matrix examples") {
  CHECK(PermutationMatrix(0, 4).is_identity());
  const PermutationMatrix p1(1, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      const bool expected = (i == 0 && j == 1) || (i == 1 && j == 2) || (i == 2 && j == 3) || (i == 3 && j == 0);
      CHECK(p1.at(i, j) == (expected ? 1 : 0));
    }
  }
  CHECK(PermutationMatrix(3, 4).compose(p1).is_identity());
  CHECK_THROWS_AS(PermutationMatrix(4, 4), ValidationError);
}

TEST_CASE("permutation matrices are binary and doubly stochastic for H <= 16") {
  for (std::size_t h = 1; h <= 16; ++h) {
    for (std::size_t n = 0; n < h; ++n) {
      const PermutationMatrix p(n, h);
      for (std::size_t i = 0; i < h; ++i) {
        std::size_t row = 0, col = 0;
        for (std::size_t j = 0; j < h; ++j) {
          row += p.at(i, j);
          col += p.at(j, i);
        }
        CHECK(row == 1);
        CHECK(col == 1);
      }
      CHECK(p.compose(PermutationMatrix((h - n) % h, h)).is_identity());
    }
  }
}

TEST_CASE("index roll equals the explicit matrix product") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(apply_local_permutation<double>(v, 0) == v);
  CHECK(apply_local_permutation<double>(v, 1) == PermutationMatrix(1, 4).apply(v));
  CHECK(apply_local_permutation<double>(v, 1) == std::vector<double>{2, 3, 4, 1});
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  for (std::size_t h : {2, 4, 8, 16}) {
    std::vector<double> x(h);
    for (auto& e : x) e = normal(rng);
    for (std::size_t n = 0; n < h; ++n) {
      const auto rolled = apply_local_permutation<double>(x, n);
      CHECK(rolled == PermutationMatrix(n, h).apply(x));
      CHECK(rolled == matrix_product(n, h, x));
      const auto back = apply_local_permutation<double>(rolled, (h - n) % h);
      CHECK(back == x);
    }
  }
}

TEST_CASE("permuted one-hot vectors are distinct") {
  const std::vector<double> v{5, 0, 0, 0};
  std::set<std::vector<double>> seen;
  for (std::size_t n = 0; n < 4; ++n) seen.insert(apply_local_permutation<double>(v, n));
  CHECK(seen.size() == 4);
  CHECK_THROWS_AS(apply_local_permutation<double>(v, 4), ValidationError);
}

TEST_CASE("permutation adjoint is the transpose") {
  const std::vector<double> g{0.5, -1.0, 2.0, 3.0, 0.25};
  for (std::size_t n = 0; n < 5; ++n) {
    std::vector<double> acc(5, 0.0);
    accumulate_permutation_adjoint<double>(g, n, acc);
    const PermutationMatrix p(n, 5);
    for (std::size_t i = 0; i < 5; ++i) {
      double expected = 0.0;
      for (std::size_t j = 0; j < 5; ++j) expected += p.at(j, i) * g[j];
      CHECK(acc[i] == expected);
    }
  }
}
