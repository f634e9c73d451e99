#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "emt/error.hpp"
#include "emt/mfea_rl.hpp"

using namespace emt;

namespace {

std::vector<Individual> two_task_members(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<Individual> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> g(d);
    for (auto& v : g) v = rng.uniform();
    out.emplace_back(std::move(g), i % 2, 2);
  }
  return out;
}

MfeaRlConfig small_config() {
  MfeaRlConfig c;
  c.population_size = 20;
  c.max_evals = 600;
  c.retrain_interval = 5;
  c.vdsr_depth = 3;
  c.vdsr_hidden = 4;
  c.classifier_blocks = 1;
  c.classifier_channels = 4;
  c.resnet_opts.epochs = 5;
  return c;
}

}  // namespace

TEST(RlMode, ParseAndPrint) {
  EXPECT_EQ(parse_rl_mode("full"), RlMode::Full);
  EXPECT_EQ(parse_rl_mode("vdsr"), RlMode::VdsrOnly);
  EXPECT_EQ(parse_rl_mode("res"), RlMode::ResOnly);
  for (auto m : {RlMode::Full, RlMode::VdsrOnly, RlMode::ResOnly}) EXPECT_EQ(parse_rl_mode(to_string(m)), m);
  EXPECT_THROW(parse_rl_mode("both"), InvalidInputError);
}

TEST(TrainingBatch, SingleMemberTargetRepeatsItself) {
  Rng rng(1);
  std::vector<Individual> one{Individual({0.1, 0.2, 0.3}, 0, 2)};
  const auto pairs = build_residual_pairs(one, rng);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].x, one[0].genome);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(pairs[0].target[r * 3 + c], one[0].genome[c]);
  }
}

TEST(TrainingBatch, TargetRowsComeFromSameSkillGroup) {
  Rng rng(2);
  const auto members = two_task_members(30, 5, rng);
  const auto pairs = build_residual_pairs(members, rng);
  ASSERT_EQ(pairs.size(), members.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (std::size_t r = 0; r < 5; ++r) {
      const std::vector<double> row(pairs[i].target.begin() + static_cast<long>(r * 5),
                                    pairs[i].target.begin() + static_cast<long>(r * 5 + 5));
      const auto it = std::find_if(members.begin(), members.end(), [&](const Individual& m) { return m.genome == row; });
      ASSERT_NE(it, members.end());
      EXPECT_EQ(it->skill_factor, members[i].skill_factor);
    }
  }
}

TEST(TrainingBatch, ReplayOracle) {
  Rng gen(3);
  const auto members = two_task_members(10, 4, gen);
  Rng rng(7), replay(7);
  const auto pairs = build_residual_pairs(members, rng);
  std::vector<std::vector<std::size_t>> groups(2);
  for (std::size_t i = 0; i < members.size(); ++i) groups[members[i].skill_factor].push_back(i);
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto& g = groups[members[i].skill_factor];
    for (std::size_t r = 0; r < 4; ++r) {
      const auto& src = members[g[replay.below(g.size())]].genome;
      for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(pairs[i].target[r * 4 + c], src[c]);
    }
  }
}

TEST(TrainingBatch, SubsetLimit) {
  Rng rng(4);
  const auto members = two_task_members(40, 3, rng);
  EXPECT_EQ(build_residual_pairs(members, rng, 12).size(), 12u);
  EXPECT_THROW(build_residual_pairs(std::span<const Individual>{}, rng), EmptyInputError);
}

TEST(TrainingBatch, ClassifierPairsBalanced) {
  Rng rng(5);
  auto members = two_task_members(30, 4, rng);
  for (std::size_t i = 0; i < 10; ++i) members[2 * i + 1].skill_factor = 0;  // 20 vs 10... then rebalance
  ResidualNet net(4, 2, 2);
  net.init(rng);
  const auto pairs = build_classifier_pairs(members, 2, net, rng);
  std::map<std::size_t, std::size_t> counts;
  for (const auto& p : pairs) {
    ++counts[p.label];
    EXPECT_EQ(p.image.size(), 16u);
  }
  ASSERT_EQ(counts.size(), 2u);
  EXPECT_EQ(counts[0], counts[1]);
  EXPECT_EQ(counts[1], 5u);

  for (auto& m : members) m.skill_factor = 1;
  EXPECT_TRUE(build_classifier_pairs(members, 2, net, rng).empty());
}

TEST(TrainingBatch, ClassifierImagesAreComposedXNew) {
  Rng rng(6);
  const auto members = two_task_members(4, 3, rng);
  ResidualNet net(3, 2, 2);
  net.init(rng);
  const auto pairs = build_classifier_pairs(members, 2, net, rng);
  for (const auto& p : pairs) {
    bool found = false;
    for (const auto& m : members) {
      if (m.skill_factor != p.label) continue;
      const Tensor x = compose_one(net, m.genome);
      found |= std::equal(p.image.begin(), p.image.end(), x.values().begin());
    }
    EXPECT_TRUE(found);
  }
}

TEST(RowMap, ReturnsARowAndIsUniform) {
  Tensor x({5, 3});
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 3; ++c) x.at(r, c) = static_cast<double>(r * 10 + c);
  }
  Rng rng(7);
  std::vector<std::size_t> hits(5, 0);
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) {
    const auto row = random_row_map(x, rng);
    ASSERT_EQ(row.size(), 3u);
    const auto r = static_cast<std::size_t>(row[0] / 10);
    EXPECT_EQ(row[1], row[0] + 1);
    ++hits[r];
  }
  for (auto h : hits) EXPECT_NEAR(static_cast<double>(h) / draws, 0.2, 0.02);
  EXPECT_THROW(random_row_map(Tensor({3}), rng), DimensionError);
}

TEST(ResidualCrossover, UntrainedFallsBackToSbx) {
  ResidualNet net(4, 2, 2);
  Rng init(1);
  net.init(init);
  Individual a({0.1, 0.2, 0.3, 0.4}, 0, 2), b({0.9, 0.8, 0.7, 0.6}, 1, 2);
  Rng rng(8), replay(8);
  const auto res = residual_crossover(a, b, net, 2.0, rng);
  EXPECT_TRUE(res.fallback);
  const auto [s1, s2] = sbx_crossover(a.genome, b.genome, 2.0, replay);
  EXPECT_EQ(res.c1, s1);
  EXPECT_EQ(res.c2, s2);

  net.set_trained(true);
  Rng rng2(8);
  EXPECT_FALSE(residual_crossover(a, b, net, 2.0, rng2, RlMode::ResOnly).fallback);
}

TEST(ResidualCrossover, ZeroHeadReturnsParents) {
  ResidualNet net(4, 3, 3);
  Rng init(2);
  net.init(init);
  net.zero_head();
  net.set_trained(true);
  Individual a({0.1, 0.2, 0.3, 0.4}, 0, 2), b({0.9, 0.8, 0.7, 0.6}, 1, 2);
  Rng rng(9);
  const auto res = residual_crossover(a, b, net, 2.0, rng);
  EXPECT_FALSE(res.fallback);
  EXPECT_EQ(res.c1, a.genome);
  EXPECT_EQ(res.c2, b.genome);
}

TEST(ResidualCrossover, ReplayOracleAndPrecomputedXNew) {
  ResidualNet net(5, 3, 4);
  Rng init(3);
  net.init(init, 1.0);
  net.set_trained(true);
  Individual a({0.1, 0.2, 0.3, 0.4, 0.5}, 0, 2), b({0.9, 0.8, 0.7, 0.6, 0.5}, 1, 2);
  const Tensor xa = compose_one(net, a.genome);
  const Tensor xb = compose_one(net, b.genome);
  Rng rng(10), replay(10), rng_cached(10);
  const auto res = residual_crossover(a, b, net, 2.0, rng);
  const std::size_t r1 = replay.below(5), r2 = replay.below(5);
  for (std::size_t c = 0; c < 5; ++c) {
    EXPECT_EQ(res.c1[c], std::clamp(xa.at(r1, c), 0.0, 1.0));
    EXPECT_EQ(res.c2[c], std::clamp(xb.at(r2, c), 0.0, 1.0));
  }
  const auto cached = residual_crossover(a, b, net, 2.0, rng_cached, RlMode::Full, &xa, &xb);
  EXPECT_EQ(cached.c1, res.c1);
  EXPECT_EQ(cached.c2, res.c2);
}

TEST(SkillAssignment, UntrainedOrVdsrOnlyInheritsFromParent) {
  ResidualNet net(3, 2, 2);
  SkillClassifier cls(3, 2, 1, 2);
  Rng init(4);
  net.init(init);
  cls.init(init);
  Individual a({0.1, 0.1, 0.1}, 0, 2), b({0.9, 0.9, 0.9}, 1, 2);
  Rng rng(11), replay(11);
  std::size_t ones = 0;
  for (int i = 0; i < 4000; ++i) {
    const auto s = assign_skill_factor(a.genome, cls, net, a, b, RlMode::Full, rng);
    EXPECT_EQ(s, replay.uniform() < 0.5 ? 0u : 1u);
    ones += s;
  }
  EXPECT_NEAR(ones / 4000.0, 0.5, 0.03);
  cls.set_trained(true);
  Rng r2(12), r2_replay(12);
  const auto s = assign_skill_factor(a.genome, cls, net, a, b, RlMode::VdsrOnly, r2);
  EXPECT_EQ(s, r2_replay.uniform() < 0.5 ? 0u : 1u);
}

TEST(SkillAssignment, TrainedClassifierUsesArgmaxOfOwnXNew) {
  ResidualNet net(4, 2, 3);
  SkillClassifier cls(4, 3, 1, 3);
  Rng init(5);
  net.init(init);
  cls.init(init);
  cls.set_trained(true);
  Individual a({0.1, 0.2, 0.3, 0.4}, 2, 3), b({0.4, 0.3, 0.2, 0.1}, 2, 3);
  Rng rng(13);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> child(4);
    for (auto& v : child) v = rng.uniform();
    const Tensor x = compose_one(net, child);
    const std::size_t expect = argmax(cls.logits(x));
    Rng unused(0);
    EXPECT_EQ(assign_skill_factor(child, cls, net, a, b, RlMode::Full, unused), expect);
    EXPECT_EQ(assign_skill_factor(child, cls, net, a, b, RlMode::ResOnly, unused, &x), expect);
    // No random draw consumed.
    Rng fresh(0);
    EXPECT_EQ(unused(), fresh());
  }
}

TEST(RunMfeaRl, BudgetRetrainsAndSkills) {
  const auto p = make_cec17_pair("P1", 1, std::vector<std::size_t>{6, 6});
  const auto c = small_config();
  const auto tr = run_mfea_rl(p, c, 1);
  EXPECT_EQ(tr.evaluations, 600u);
  EXPECT_EQ(tr.points.size(), 30u);
  // Generations 1..29, retraining after 1, 6, 11, ..., 26.
  ASSERT_EQ(tr.retrains.size(), 6u);
  for (std::size_t k = 0; k < tr.retrains.size(); ++k) {
    EXPECT_EQ(tr.retrains[k].generation, 1 + 5 * k);
    EXPECT_EQ(tr.retrains[k].evals_before, tr.retrains[k].evals_after);
    EXPECT_EQ(tr.retrains[k].residual_samples, 20u);
  }
  // Fallback only before the first retrain.
  EXPECT_GT(tr.generations.front().fallback_crossovers, 0u);
  for (std::size_t g = 1; g < tr.generations.size(); ++g) EXPECT_EQ(tr.generations[g].fallback_crossovers, 0u);
  for (std::size_t i = 1; i < tr.points.size(); ++i) {
    for (std::size_t t = 0; t < 2; ++t) EXPECT_LE(tr.points[i].best[t], tr.points[i - 1].best[t]);
  }
}

TEST(RunMfeaRl, Deterministic) {
  const auto p = make_cec17_pair("P4", 1, std::vector<std::size_t>{5, 5});
  const auto c = small_config();
  const auto a = run_mfea_rl(p, c, 3);
  const auto b = run_mfea_rl(p, c, 3);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i].best, b.points[i].best);
}

TEST(RunMfeaRl, AblationModes) {
  const auto p = make_cec17_pair("P4", 1, std::vector<std::size_t>{5, 5});
  auto c = small_config();
  c.mode = RlMode::VdsrOnly;
  const auto v = run_mfea_rl(p, c, 2);
  for (const auto& g : v.generations) EXPECT_EQ(g.classifier_assignments, 0u);
  for (const auto& r : v.retrains) EXPECT_FALSE(r.classifier_trained);

  c.mode = RlMode::ResOnly;
  const auto r = run_mfea_rl(p, c, 2);
  for (const auto& g : r.generations) EXPECT_EQ(g.fallback_crossovers, 0u);
  std::size_t assigned = 0;
  for (const auto& g : r.generations) assigned += g.classifier_assignments;
  EXPECT_GT(assigned, 0u);
}

TEST(RunMfeaRl, ConfigValidation) {
  auto c = small_config();
  c.retrain_interval = 0;
  EXPECT_THROW(c.validate(), InvalidInputError);
}
