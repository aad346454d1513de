#include "irsnoma/noma_env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "irsnoma/random.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace irsnoma;
using irsnoma::test::rel_err;
using irsnoma::test::sinr_oracle;

namespace {

NetworkAction random_projected(const SystemDims& d, double power, Rng& rng) {
  NetworkAction raw{complex_normal(d.antennas, d.users, rng), complex_normal(d.elements, 1, rng).col(0)};
  return project_action(raw, power);
}

// Rate table with every entry `value`.
Matrix flat_rates(int users, double value) { return Matrix::Constant(users, users, value); }

}  // namespace

TEST(Units, DbmConversion) {
  EXPECT_DOUBLE_EQ(dbm_to_watts(-10.0), 1e-4);
  EXPECT_DOUBLE_EQ(dbm_to_watts(30.0), 1.0);
  EXPECT_NEAR(watts_to_dbm(0.1), 20.0, 1e-12);
}

TEST(EnvConfig, Validation) {
  EnvConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.transmit_power = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = EnvConfig{};
  cfg.noise_power = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = EnvConfig{};
  cfg.target_rate = -0.1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(DecodingOrder, TwoUsers) {
  const std::vector<double> gains{2.0, 0.5};
  EXPECT_EQ(order_by_gain(gains), (DecodingOrder{1, 0}));
}

TEST(DecodingOrder, TiesKeepUserIndex) {
  const std::vector<double> gains(5, 1.25);
  EXPECT_EQ(order_by_gain(gains), (DecodingOrder{0, 1, 2, 3, 4}));
}

TEST(DecodingOrder, MatchesExhaustiveSearch) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const ChannelRealization r = test::random_realization({2, 3, 5}, rng);
    const CVector phases = test::random_phases(3, rng);
    std::vector<double> gains(5);
    for (int k = 0; k < 5; ++k) gains[k] = composite_channel(r, phases, k).squaredNorm();
    // Lexicographically first permutation with non-decreasing gains.
    DecodingOrder perm{0, 1, 2, 3, 4};
    DecodingOrder want;
    do {
      bool sorted = true;
      for (int p = 0; p + 1 < 5; ++p) sorted = sorted && gains[perm[p]] <= gains[perm[p + 1]];
      if (sorted) {
        want = perm;
        break;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    EXPECT_EQ(decoding_order(r, phases), want);
  }
}

TEST(DecodingOrder, EquivariantUnderUserRelabelling) {
  Rng rng(32);
  const ChannelRealization r = test::random_realization({2, 4, 4}, rng);
  const CVector phases = test::random_phases(4, rng);
  const std::vector<int> perm{2, 0, 3, 1};  // new user u is old user perm[u]
  ChannelRealization p = r;
  for (int u = 0; u < 4; ++u) {
    p.direct[u] = r.direct[perm[u]];
    p.reflect[u] = r.reflect[perm[u]];
  }
  const DecodingOrder original = decoding_order(r, phases);
  const DecodingOrder relabelled = decoding_order(p, phases);
  for (int pos = 0; pos < 4; ++pos) EXPECT_EQ(perm[relabelled[pos]], original[pos]);
}

TEST(InterferenceSet, Examples) {
  EXPECT_EQ(interference_set({0, 1, 2}, 0), (std::vector<int>{1, 2}));
  EXPECT_TRUE(interference_set({0, 1, 2}, 2).empty());
  EXPECT_EQ(interference_set({2, 0, 1}, 1), (std::vector<int>{1}));
  EXPECT_THROW(interference_set({0, 1}, 2), std::out_of_range);
}

TEST(Sinr, SingleUserIsSnr) {
  Rng rng(40);
  const ChannelRealization r = test::random_realization({2, 3, 1}, rng);
  const NetworkAction a = random_projected({2, 3, 1}, 2.0, rng);
  const double noise = 0.3;
  const double g = std::norm((composite_channel(r, a.phases, 0) * a.beams.col(0)).value());
  EXPECT_LT(rel_err(sinr_observed(0, 0, a, r, {0}, noise), g / noise), 1e-14);
}

TEST(Sinr, OrthogonalInterferersVanish) {
  Rng rng(41);
  const ChannelRealization r = test::random_realization({3, 2, 3}, rng);
  const CVector phases = test::random_phases(2, rng);
  const CRowVector h = composite_channel(r, phases, 2);
  // Beams 1 and 2 lie in the orthogonal complement of h^H.
  Eigen::JacobiSVD<CMatrix> svd(CMatrix(h), Eigen::ComputeFullV);
  NetworkAction a;
  a.beams.resize(3, 3);
  a.beams.col(0) = complex_normal(3, 1, rng).col(0);
  a.beams.col(1) = svd.matrixV().col(1);
  a.beams.col(2) = svd.matrixV().col(2);
  a.phases = phases;
  const DecodingOrder order{0, 1, 2};
  const double noise = 0.05;
  const double want = std::norm((h * a.beams.col(0)).value()) / noise;
  EXPECT_LT(rel_err(sinr_observed(0, 2, a, r, order, noise), want), 1e-10);
}

TEST(Sinr, MatchesIndependentEvaluator) {
  Rng rng(42);
  std::uniform_int_distribution<int> m(1, 3), n(1, 4), k(1, 3);
  for (int trial = 0; trial < 200; ++trial) {
    const SystemDims d{m(rng), n(rng), k(rng)};
    const ChannelRealization r = test::random_realization(d, rng);
    const NetworkAction a = random_projected(d, 1.5, rng);
    const DecodingOrder order = decoding_order(r, a.phases);
    const RateTable table = compute_rates(a, r, order, 0.1);
    for (int p = 0; p < d.users; ++p) {
      for (int q = p; q < d.users; ++q) {
        const int i = order[p];
        const int j = order[q];
        const double want = sinr_oracle(i, j, a.beams, a.phases, r, order, 0.1);
        EXPECT_LT(rel_err(sinr_observed(i, j, a, r, order, 0.1), want), 1e-12);
        EXPECT_LT(rel_err(table.sinr(i, j), want), 1e-12);
      }
    }
  }
}

TEST(Rate, Examples) {
  EXPECT_EQ(rate(0.0), 0.0);
  EXPECT_EQ(rate(1.0), 1.0);
  EXPECT_EQ(rate(3.0), 2.0);
  EXPECT_THROW(rate(-0.5), std::invalid_argument);
}

TEST(Projection, ScalarBeam) {
  NetworkAction raw{CMatrix::Zero(2, 1), CVector::Ones(1)};
  raw.beams(0, 0) = 1.0;
  const NetworkAction p = project_action(raw, 4.0);
  EXPECT_EQ(p.beams(0, 0), Complex(2.0, 0.0));
  EXPECT_EQ(p.beams(1, 0), Complex(0.0, 0.0));
}

TEST(Projection, PhaseNormalisation) {
  NetworkAction raw{CMatrix::Ones(1, 1), CVector::Constant(1, Complex(3.0, 4.0))};
  const NetworkAction p = project_action(raw, 1.0);
  EXPECT_NEAR(p.phases[0].real(), 0.6, 1e-15);
  EXPECT_NEAR(p.phases[0].imag(), 0.8, 1e-15);
}

TEST(Projection, PowerRatioPreserved) {
  NetworkAction raw{CMatrix::Zero(1, 2), CVector::Ones(1)};
  raw.beams(0, 0) = 1.0;
  raw.beams(0, 1) = std::sqrt(3.0);
  const NetworkAction p = project_action(raw, 8.0);
  EXPECT_NEAR(std::norm(p.beams(0, 0)), 2.0, 1e-12);
  EXPECT_NEAR(std::norm(p.beams(0, 1)), 6.0, 1e-12);
}

TEST(Projection, DegenerateInputs) {
  NetworkAction raw{CMatrix::Zero(2, 2), CVector::Ones(3)};
  EXPECT_THROW(project_action(raw, 1.0), ProjectionDegenerate);
  raw.beams(0, 0) = 1.0;
  raw.phases[1] = 0.0;
  EXPECT_THROW(project_action(raw, 1.0), ProjectionDegenerate);
}

TEST(Projection, Properties) {
  Rng rng(50);
  for (int trial = 0; trial < 500; ++trial) {
    const SystemDims d{1 + trial % 4, 1 + trial % 7, 1 + trial % 5};
    NetworkAction raw{complex_normal(d.antennas, d.users, rng), complex_normal(d.elements, 1, rng).col(0)};
    raw.beams *= std::exp(uniform(-5.0, 5.0, rng));
    const double power = std::exp(uniform(-3.0, 3.0, rng));
    const NetworkAction p = project_action(raw, power);
    EXPECT_LT(rel_err(p.beams.squaredNorm(), power), 1e-9);
    for (Eigen::Index n = 0; n < p.phases.size(); ++n) EXPECT_LT(std::abs(std::abs(p.phases[n]) - 1.0), 1e-12);
    for (int k = 0; k < d.users; ++k) {
      const Complex inner = raw.beams.col(k).dot(p.beams.col(k));
      const double cosine = std::abs(inner) / (raw.beams.col(k).norm() * p.beams.col(k).norm());
      if (raw.beams.col(k).norm() > 0.0) EXPECT_NEAR(cosine, 1.0, 1e-12);
    }
    const NetworkAction twice = project_action(p, power);
    EXPECT_LT((twice.beams - p.beams).norm(), 1e-12 * p.beams.norm());
    EXPECT_LT((twice.phases - p.phases).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Sic, ZeroTargetAlwaysFeasible) {
  Rng rng(60);
  const SystemDims d{2, 3, 3};
  const ChannelRealization r = test::random_realization(d, rng);
  EnvConfig cfg;
  cfg.dims = d;
  cfg.target_rate = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const NetworkAction a = random_projected(d, 0.01, rng);
    const SicCheck sic = check_sic_feasibility(a, r, decoding_order(r, a.phases), cfg);
    EXPECT_TRUE(sic.feasible);
    EXPECT_EQ(sic.deficit, 0.0);
  }
}

TEST(Sic, AllRatesAboveTarget) {
  const SicCheck sic = sic_feasibility(flat_rates(2, 1.5), {0, 1}, 1.0);
  EXPECT_TRUE(sic.feasible);
  EXPECT_EQ(sic.deficit, 0.0);
}

TEST(Sic, SingleCrossPairShortfall) {
  // User 0 decodes first; user 1 observes user 0's signal at rate 0.4.
  Matrix rates = flat_rates(2, 2.0);
  rates(0, 1) = 0.4;
  const SicCheck sic = sic_feasibility(rates, {0, 1}, 1.0);
  EXPECT_FALSE(sic.feasible);
  EXPECT_NEAR(sic.deficit, -0.6, 1e-15);
}

TEST(Sic, OwnRateShortfallOfLastUserIsPenalised) {
  Matrix rates = flat_rates(2, 2.0);
  rates(1, 1) = 0.25;
  const SicCheck sic = sic_feasibility(rates, {0, 1}, 1.0);
  EXPECT_FALSE(sic.feasible);
  EXPECT_NEAR(sic.deficit, -0.75, 1e-15);
}

TEST(Sic, MatchesBruteForceOverInstances) {
  Rng rng(61);
  std::uniform_int_distribution<int> m(1, 3), n(1, 4), k(1, 3);
  for (int trial = 0; trial < 200; ++trial) {
    const SystemDims d{m(rng), n(rng), k(rng)};
    const ChannelRealization r = test::random_realization(d, rng);
    const NetworkAction a = random_projected(d, 0.5, rng);
    EnvConfig cfg;
    cfg.dims = d;
    cfg.noise_power = 0.2;
    cfg.target_rate = 0.6;
    const DecodingOrder order = decoding_order(r, a.phases);
    const auto [feasible, deficit] = test::sic_oracle(a, r, order, cfg.noise_power, cfg.target_rate);
    const SicCheck sic = check_sic_feasibility(a, r, order, cfg);
    EXPECT_EQ(sic.feasible, feasible);
    if (deficit != 0.0) {
      EXPECT_LT(rel_err(sic.deficit, deficit), 1e-12);
    } else {
      EXPECT_EQ(sic.deficit, 0.0);
    }
  }
}

TEST(Sic, MoreSevereViolationGivesLowerPenalty) {
  Rng rng(62);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix rates(3, 3);
    for (Eigen::Index i = 0; i < rates.size(); ++i) rates.data()[i] = uniform(0.0, 1.0, rng);
    const SicCheck mild = sic_feasibility(rates, {2, 0, 1}, 1.2);
    const SicCheck severe = sic_feasibility((rates.array() - 0.1).cwiseMax(0.0).matrix() * 0.9, {2, 0, 1}, 1.2);
    ASSERT_FALSE(mild.feasible);
    EXPECT_LT(mild.deficit, 0.0);
    EXPECT_LT(severe.deficit, mild.deficit);
  }
}

TEST(ActionCodec, Layout) {
  NetworkAction a{CMatrix::Constant(1, 1, Complex(1.0, 2.0)), CVector::Constant(1, Complex(0.0, 1.0))};
  const Vector flat = encode_action(a);
  ASSERT_EQ(flat.size(), 4);
  EXPECT_EQ(flat, (Vector(4) << 1.0, 2.0, 0.0, 1.0).finished());
}

TEST(ActionCodec, BeamMajorOrder) {
  NetworkAction a{CMatrix(2, 2), CVector::Zero(1)};
  a.beams << Complex(1, 5), Complex(3, 7), Complex(2, 6), Complex(4, 8);
  // beam 0 = (1+5j, 2+6j), beam 1 = (3+7j, 4+8j)
  const Vector flat = encode_action(a);
  EXPECT_EQ(flat.head(8), (Vector(8) << 1, 2, 3, 4, 5, 6, 7, 8).finished());
}

TEST(ActionCodec, ZeroActionAndRoundTrip) {
  const SystemDims d{3, 5, 2};
  const NetworkAction zero{CMatrix::Zero(3, 2), CVector::Zero(5)};
  EXPECT_TRUE(encode_action(zero).isZero(0.0));
  Rng rng(70);
  for (int trial = 0; trial < 100; ++trial) {
    const NetworkAction a{complex_normal(3, 2, rng), complex_normal(5, 1, rng).col(0)};
    EXPECT_EQ(decode_action(encode_action(a), d), a);
  }
  EXPECT_THROW(decode_action(Vector::Zero(d.action_size() + 1), d), std::invalid_argument);
}

TEST(EnvState, FlattenLayout) {
  const SystemDims d{2, 3, 2};
  EXPECT_EQ(d.state_size(), 2 + 2 * 2 * 2 + 2 * 3 + 2);
  EnvState s = EnvState::zeros(d);
  s.prev_sinr << 1, 2;
  s.prev_beam_power << 7, 8;
  const Vector flat = s.flatten();
  ASSERT_EQ(flat.size(), d.state_size());
  EXPECT_EQ(flat[0], 1);
  EXPECT_EQ(flat[1], 2);
  EXPECT_EQ(flat[flat.size() - 2], 7);
  EXPECT_EQ(flat[flat.size() - 1], 8);
}

class EnvStepTest : public ::testing::Test {
 protected:
  void SetUp() override {
    rng = Rng(80);
    cfg.dims = {2, 4, 3};
    cfg.transmit_power = 2.0;
    cfg.noise_power = 0.1;
    real = test::random_realization(cfg.dims, rng);
  }
  Vector random_raw() { return encode_action({complex_normal(2, 3, rng), complex_normal(4, 1, rng).col(0)}); }

  Rng rng;
  EnvConfig cfg;
  ChannelRealization real;
};

TEST_F(EnvStepTest, FeasibleRewardIsSumRate) {
  cfg.target_rate = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const StepOutcome out = env_step(random_raw(), real, cfg, EnvState::zeros(cfg.dims));
    EXPECT_TRUE(out.feasible);
    EXPECT_EQ(out.reward, out.sum_rate);
    EXPECT_NEAR(out.sum_rate, out.rates.sum(), 1e-15);
    const RateTable table = compute_rates(out.action, real, out.order, cfg.noise_power);
    for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(out.rates[k], std::log2(1.0 + table.sinr(k, k)));
  }
}

TEST_F(EnvStepTest, InfeasibleRewardEqualsDeficit) {
  cfg.target_rate = 3.0;
  int infeasible = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const StepOutcome out = env_step(random_raw(), real, cfg, EnvState::zeros(cfg.dims));
    if (out.feasible) {
      EXPECT_GE(out.reward, 0.0);
      continue;
    }
    ++infeasible;
    const SicCheck sic = check_sic_feasibility(out.action, real, out.order, cfg);
    EXPECT_LT(out.reward, 0.0);
    EXPECT_EQ(out.reward, sic.deficit);
  }
  EXPECT_GT(infeasible, 0);
}

TEST_F(EnvStepTest, NextStateReflectsProjectedAction) {
  const Vector raw = random_raw();
  const StepOutcome out = env_step(raw, real, cfg, EnvState::zeros(cfg.dims));
  EXPECT_EQ(out.next_state.prev_action, encode_action(out.action));
  EXPECT_NEAR(out.next_state.prev_beam_power.sum(), cfg.transmit_power, 1e-12);
  EXPECT_EQ(out.order, decoding_order(real, out.action.phases));
  const RateTable table = compute_rates(out.action, real, out.order, cfg.noise_power);
  EXPECT_EQ(out.next_state.prev_sinr, Vector(table.sinr.diagonal()));
  EXPECT_TRUE((out.next_state.prev_sinr.array() >= 0.0).all());
  EXPECT_EQ(out.next_state.flatten().size(), cfg.dims.state_size());
}

TEST_F(EnvStepTest, DegenerateRawActionPropagates) {
  EXPECT_THROW(env_step(Vector::Zero(cfg.dims.action_size()), real, cfg, EnvState::zeros(cfg.dims)),
               ProjectionDegenerate);
  EXPECT_THROW(env_step(Vector::Ones(3), real, cfg, EnvState::zeros(cfg.dims)), std::invalid_argument);
}

TEST(InitialStep, IdentityBeamsAndUnitPhases) {
  Rng rng(90);
  const NetworkAction a = initial_action({2, 5, 3}, rng);
  EXPECT_EQ(a.beams, CMatrix(CMatrix::Identity(2, 3)));
  for (Eigen::Index n = 0; n < 5; ++n) EXPECT_NEAR(std::abs(a.phases[n]), 1.0, 1e-15);

  EnvConfig cfg;
  cfg.dims = {2, 5, 3};
  const ChannelRealization r = sample_realization(cfg.dims, FadingConfig{}, rng);
  const StepOutcome first = initial_step(r, cfg, rng);
  // Identity beams carry equal power on the first M users only.
  EXPECT_NEAR(first.next_state.prev_beam_power[0], cfg.transmit_power / 2, 1e-12);
  EXPECT_NEAR(first.next_state.prev_beam_power[1], cfg.transmit_power / 2, 1e-12);
  EXPECT_EQ(first.next_state.prev_beam_power[2], 0.0);
}
