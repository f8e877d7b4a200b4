// Copyright 2026 The evsel Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "evsel/error.hpp"
#include "evsel/infotheory.hpp"

namespace evsel::info {
namespace {

constexpr double kLn2 = std::numbers::ln2;

// --- Independent oracle: entropies straight from the definition. ----------

// Decodes a joint cell index into (frame values..., answer) by repeated
// division, last variable fastest.
std::vector<std::size_t> decode(std::size_t cell, const DiscreteModel& m) {
  std::vector<std::size_t> radix(m.frame_alphabets().begin(), m.frame_alphabets().end());
  radix.push_back(m.answer_alphabet());
  std::vector<std::size_t> digits(radix.size());
  for (std::size_t i = radix.size(); i-- > 0;) {
    digits[i] = cell % radix[i];
    cell /= radix[i];
  }
  return digits;
}

double entropy_of(const std::map<std::vector<std::size_t>, double>& dist) {
  double h = 0.0;
  for (const auto& [_, p] : dist)
    if (p > 0) h -= p * std::log(p);
  return h;
}

// I(S; O) = H(S) + H(O) - H(S, O) from explicit marginal dictionaries.
double oracle_mi(const DiscreteModel& m, const std::vector<std::size_t>& subset) {
  std::map<std::vector<std::size_t>, double> ps, po, pso;
  const auto joint = m.joint();
  for (std::size_t cell = 0; cell < joint.size(); ++cell) {
    const auto d = decode(cell, m);
    std::vector<std::size_t> s;
    for (std::size_t f : subset) s.push_back(d[f]);
    auto so = s;
    so.push_back(d.back());
    ps[s] += joint[cell];
    po[{d.back()}] += joint[cell];
    pso[so] += joint[cell];
  }
  return entropy_of(ps) + entropy_of(po) - entropy_of(pso);
}

// Second enumerator: all bitmasks, best value, ties to the lexicographically
// smallest sorted index list.
SubsetScore oracle_exhaustive(const DiscreteModel& m, std::size_t budget) {
  SubsetScore best{{}, 0.0};
  const std::size_t n = m.n_frames();
  for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
    std::vector<std::size_t> s;
    for (std::size_t f = 0; f < n; ++f)
      if (mask >> f & 1) s.push_back(f);
    if (s.size() > budget) continue;
    const double v = oracle_mi(m, s);
    if (v > best.value + kTieTolerance ||
        (std::abs(v - best.value) <= kTieTolerance && s < best.subset)) {
      best = {s, v};
    }
  }
  return best;
}

DiscreteModel random_model(std::size_t n, std::uint64_t seed, std::size_t fa = 2,
                           std::size_t aa = 3) {
  Prng rng(seed);
  return random_factorized_model(n, fa, aa, rng);
}

// Two identical copies of an informative frame plus a weaker independent one.
DiscreteModel duplicate_model() {
  const std::vector<double> prior{0.5, 0.5};
  const DenseMatrix strong(2, 2, {0.9, 0.1, 0.1, 0.9});
  const DenseMatrix weak(2, 2, {0.7, 0.3, 0.3, 0.7});
  // Frames 0 and 1 carry the same value: build the joint by hand.
  std::vector<double> joint(2 * 2 * 2 * 2, 0.0);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t o = 0; o < 2; ++o)
        joint[((a * 2 + a) * 2 + c) * 2 + o] = prior[o] * strong(o, a) * weak(o, c);
  return DiscreteModel::from_joint({2, 2, 2}, 2, joint, false);
}

// --- Model construction ---------------------------------------------------

TEST(DiscreteModel, RejectsBadTables) {
  EXPECT_THROW(DiscreteModel::from_joint({2}, 2, {0.5, 0.5, 0.5}, false), Error);
  EXPECT_THROW(DiscreteModel::from_joint({2}, 2, {0.5, 0.5, 0.5, -0.5}, false), Error);
  EXPECT_THROW(DiscreteModel::from_joint({2}, 2, {0.5, 0.5, 0.5, 0.5}, false), Error);
  EXPECT_THROW(DiscreteModel::from_joint({0}, 2, {}, false), Error);
}

TEST(DiscreteModel, FactorizedClaimIsChecked) {
  const auto x = xor_model();
  const std::vector<double> j(x.joint().begin(), x.joint().end());
  EXPECT_THROW(DiscreteModel::from_joint({2, 2}, 2, j, true), Error);
  const auto c = copy_model();
  EXPECT_TRUE(c.factorized());
  EXPECT_NO_THROW(DiscreteModel::from_joint(
      {2, 2}, 2, std::vector<double>(c.joint().begin(), c.joint().end()), true));
}

TEST(DiscreteModel, RandomFactorizedHasUnitMass) {
  const auto m = random_model(5, 3);
  double s = 0.0;
  for (double p : m.joint()) s += p;
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_TRUE(m.factorized());
  EXPECT_EQ(m.frame_configs(), 32u);
}

// --- conditional_mi --------------------------------------------------------

TEST(ConditionalMi, CopyModel) {
  const auto m = copy_model();
  const std::size_t f1[] = {0}, f2[] = {1};
  EXPECT_NEAR(conditional_mi(m, f1), kLn2, 1e-15);
  EXPECT_NEAR(conditional_mi(m, f2), 0.0, 1e-15);
}

TEST(ConditionalMi, EmptySetIsExactlyZero) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    EXPECT_EQ(conditional_mi(random_model(4, s), {}), 0.0);
  }
  EXPECT_EQ(conditional_mi(xor_model(), {}), 0.0);
}

TEST(ConditionalMi, MatchesDefinitionOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = random_model(3, seed, 2 + seed % 3, 2 + seed % 2);
    for (std::size_t mask = 0; mask < 8; ++mask) {
      std::vector<std::size_t> s;
      for (std::size_t f = 0; f < 3; ++f)
        if (mask >> f & 1) s.push_back(f);
      EXPECT_NEAR(conditional_mi(m, s), oracle_mi(m, s), 1e-12) << "seed " << seed;
    }
  }
}

TEST(ConditionalMi, BoundedByEntropies) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = random_model(4, seed);
    for (std::size_t mask = 0; mask < 16; ++mask) {
      std::vector<std::size_t> s;
      for (std::size_t f = 0; f < 4; ++f)
        if (mask >> f & 1) s.push_back(f);
      const double v = conditional_mi(m, s);
      EXPECT_GE(v, -1e-9);
      EXPECT_LE(v, std::min(subset_entropy(m, s), answer_entropy(m)) + 1e-9);
    }
  }
}

TEST(ConditionalMi, InvalidIndexThrows) {
  const std::size_t bad[] = {2};
  EXPECT_THROW(conditional_mi(copy_model(), bad), Error);
  const std::size_t dup[] = {0, 0};
  EXPECT_THROW(conditional_mi(copy_model(), dup), Error);
}

// --- log-likelihood equivalence --------------------------------------------

TEST(LoglikEquivalence, CopyModel) {
  const auto r = verify_loglik_equivalence(copy_model(), 1);
  EXPECT_EQ(r.by_information.subset, (FrameSet{0}));
  EXPECT_EQ(r.by_loglik.subset, (FrameSet{0}));
  EXPECT_TRUE(r.coincide);
  EXPECT_NEAR(r.by_loglik.value, 0.0, 1e-15);  // O is determined by f1
}

TEST(LoglikEquivalence, IndependentFramesAllTie) {
  const std::vector<double> prior{0.3, 0.7};
  const DenseMatrix flat(2, 2, {0.4, 0.6, 0.4, 0.6});
  const std::vector<DenseMatrix> conds{flat, flat, flat};
  const auto m = DiscreteModel::naive_bayes(prior, conds);
  for (std::size_t mask = 0; mask < 8; ++mask) {
    std::vector<std::size_t> s;
    for (std::size_t f = 0; f < 3; ++f)
      if (mask >> f & 1) s.push_back(f);
    EXPECT_NEAR(conditional_mi(m, s), 0.0, 1e-12);
  }
  const auto r = verify_loglik_equivalence(m, 2);
  EXPECT_TRUE(r.coincide);
  EXPECT_NEAR(r.by_information.value, 0.0, 1e-12);
}

TEST(LoglikEquivalence, RandomFactorizedModels) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto m = random_model(5, 100 + seed);
    for (std::size_t budget : {1u, 2u}) {
      const auto r = verify_loglik_equivalence(m, budget);
      EXPECT_TRUE(r.coincide) << "seed " << seed;
      EXPECT_EQ(r.by_information.subset, r.by_loglik.subset);
      // E[log p(O|S)] = F(S) - H(O).
      const double ll = expected_log_likelihood(m, r.by_information.subset);
      EXPECT_NEAR(ll, r.by_information.value - answer_entropy(m), 1e-12);
    }
  }
}

// --- exhaustive / greedy ---------------------------------------------------

TEST(ExhaustiveSelect, CopyModel) {
  const auto r = exhaustive_select(copy_model(), 1);
  EXPECT_EQ(r.subset, (FrameSet{0}));
  EXPECT_NEAR(r.value, kLn2, 1e-15);
}

TEST(ExhaustiveSelect, FullBudgetTakesEveryInformativeFrame) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = random_model(5, seed);
    const auto r = exhaustive_select(m, 5);
    EXPECT_EQ(r.subset, (FrameSet{0, 1, 2, 3, 4}));
    const std::vector<std::size_t> all{0, 1, 2, 3, 4};
    EXPECT_NEAR(r.value, oracle_mi(m, all), 1e-12);
    EXPECT_LE(r.value, answer_entropy(m) + 1e-12);
  }
}

TEST(ExhaustiveSelect, MatchesBruteForceEnumerator) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = random_model(6, 200 + seed);
    const auto got = exhaustive_select(m, 2);
    const auto want = oracle_exhaustive(m, 2);
    EXPECT_EQ(got.subset, want.subset) << "seed " << seed;
    EXPECT_NEAR(got.value, want.value, 1e-12);
  }
}

TEST(ExhaustiveSelect, GuardRefusesLargeModels) {
  // 15 binary frames: the model itself is refused before any enumeration.
  const std::vector<double> prior{0.5, 0.5};
  std::vector<DenseMatrix> conds(15, DenseMatrix(2, 2, {0.5, 0.5, 0.5, 0.5}));
  try {
    DiscreteModel::naive_bayes(prior, conds);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTractabilityGuard);
  }
  conds.pop_back();
  EXPECT_NO_THROW(exhaustive_select(DiscreteModel::naive_bayes(prior, conds), 1));
  EXPECT_THROW(check_submodular(random_model(11, 1)), Error);
}

TEST(GreedySelect, CopyModel) {
  EXPECT_EQ(greedy_select(copy_model(), 1).subset, (FrameSet{0}));
}

TEST(GreedySelect, DuplicateFramesDiversify) {
  const auto m = duplicate_model();
  const auto r = greedy_select(m, 2);
  EXPECT_EQ(r.subset, (FrameSet{0, 2}));
  const std::size_t first[] = {0}, dup[] = {0, 1};
  EXPECT_NEAR(conditional_mi(m, dup) - conditional_mi(m, first), 0.0, 1e-12);
}

TEST(GreedySelect, WithinGuaranteeOfOptimum) {
  const double bound = 1.0 - std::exp(-1.0);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto m = random_model(7, 300 + seed);
    for (std::size_t budget = 1; budget <= 4; ++budget) {
      const auto g = greedy_select(m, budget);
      const auto o = exhaustive_select(m, budget);
      EXPECT_EQ(g.subset.size(), budget);
      EXPECT_GE(g.value, bound * o.value - 1e-12);
      EXPECT_LE(g.value, o.value + 1e-12);
    }
  }
}

// --- modular bound and submodularity ---------------------------------------

TEST(ModularUpperBound, Cases) {
  const auto c = copy_model();
  EXPECT_EQ(modular_upper_bound(c, {}), 0.0);
  const std::size_t both[] = {0, 1};
  EXPECT_NEAR(modular_upper_bound(c, both), kLn2, 1e-15);
  EXPECT_GE(modular_upper_bound(c, both), conditional_mi(c, both) - 1e-12);
  const auto m = random_model(4, 7);
  for (std::size_t f = 0; f < 4; ++f) {
    const std::size_t s[] = {f};
    EXPECT_EQ(modular_upper_bound(m, s), conditional_mi(m, s));
  }
}

TEST(CheckSubmodular, FactorizedModelsHaveNoViolations) {
  for (std::uint64_t seed = 0; seed < 15; ++seed)
    EXPECT_TRUE(check_submodular(random_model(5, 400 + seed, 3, 2)).empty()) << seed;
  EXPECT_TRUE(check_submodular(copy_model()).empty());
}

TEST(CheckSubmodular, XorIsACounterexample) {
  const auto m = xor_model();
  const std::size_t f1[] = {0}, f2[] = {1}, both[] = {0, 1};
  EXPECT_NEAR(conditional_mi(m, f1), 0.0, 1e-15);
  EXPECT_NEAR(conditional_mi(m, f2), 0.0, 1e-15);
  EXPECT_NEAR(conditional_mi(m, both), kLn2, 1e-15);
  const auto v = check_submodular(m);
  ASSERT_FALSE(v.empty());
  for (const auto& x : v) {
    EXPECT_EQ(x.kind, ViolationKind::kSubmodularity);
    EXPECT_LT(x.lhs, x.rhs);
  }
  EXPECT_FALSE(m.factorized());
}

// --- fixtures --------------------------------------------------------------

TEST(ModelFixture, RoundTrip) {
  const auto m = random_model(3, 9);
  const auto fx = parse_model_fixture(format_model_fixture(m, "r3"));
  EXPECT_EQ(fx.name, "r3");
  EXPECT_EQ(fx.model.factorized(), m.factorized());
  ASSERT_EQ(fx.model.joint().size(), m.joint().size());
  for (std::size_t i = 0; i < m.joint().size(); ++i) EXPECT_EQ(fx.model.joint()[i], m.joint()[i]);
}

TEST(ModelFixture, RejectsUnknownKeysAndBadJson) {
  EXPECT_THROW(parse_model_fixture("{"), Error);
  EXPECT_THROW(parse_model_fixture(R"({"frame_alphabet":[2],"answer_alphabet":2,)"
                                   R"("factorized":false,"joint":[0.25,0.25,0.25,0.25],"x":1})"),
               Error);
}

}  // namespace
}  // namespace evsel::info
