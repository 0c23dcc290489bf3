#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "sfdde/error.hpp"
#include "sfdde/paths.hpp"
#include "sfdde/random.hpp"

using namespace sfdde;

namespace {

Eigen::VectorXd v1(double x) { return Eigen::VectorXd::Constant(1, x); }

SegmentBuffer random_piecewise_segment(RandomStream& rng, int dim, double delay, double dt) {
  SegmentBuffer seg = SegmentBuffer::constant(Eigen::VectorXd::Zero(dim), delay, dt);
  Eigen::VectorXd level = Eigen::VectorXd::Zero(dim);
  for (int c = 0; c <= seg.window(); ++c) {
    if (c == 0 || rng.uniform() < 0.05) {
      for (int i = 0; i < dim; ++i) level[i] = 10.0 * (rng.uniform() - 0.5);
    }
    seg.values.col(c) = level;
  }
  return seg;
}

}  // namespace

TEST(TimeGrid, NodesAndAlignment) {
  const TimeGrid grid(1.0, 2.0, 0.25);
  EXPECT_EQ(grid.window(), 4);
  EXPECT_EQ(grid.steps(), 8);
  EXPECT_EQ(grid.node_count(), 13);
  EXPECT_EQ(grid.time(0), -1.0);
  EXPECT_EQ(grid.time(12), 2.0);
  for (int i = 1; i < grid.node_count(); ++i) EXPECT_GT(grid.time(i), grid.time(i - 1));
  EXPECT_EQ(grid.node_of(0.5), 6);
  EXPECT_THROW(TimeGrid(1.0, 2.0, 0.3), Error);
  EXPECT_THROW(grid.node_of(0.3), Error);
}

TEST(TimeGrid, RestartGridSharesNodeTimes) {
  const TimeGrid full(1.0, 2.0, 1e-3);
  const TimeGrid restart(1.0, 2.0, 1e-3, 0.7);
  for (int i = 0; i < restart.node_count(); ++i) {
    EXPECT_EQ(restart.time(i), full.time(i + 700));
  }
}

TEST(SupNorm, Examples) {
  Eigen::VectorXd c(2);
  c << 3.0, -4.0;
  EXPECT_DOUBLE_EQ(sup_norm(SegmentBuffer::constant(c, 1.0, 0.25).view()), 5.0);
  const auto ramp = SegmentBuffer::sample(1, 1.0, 0.25, [](double th) { return v1(th); });
  EXPECT_DOUBLE_EQ(sup_norm(ramp.view()), 1.0);
  auto spike = SegmentBuffer::constant(v1(0.0), 1.0, 0.25);
  spike.values(0, 2) = 7.0;
  EXPECT_DOUBLE_EQ(sup_norm(spike.view()), 7.0);
}

TEST(MpNorm, Examples) {
  const double c = -1.7;
  EXPECT_NEAR(mp_norm({SegmentBuffer::constant(v1(c), 1.0, 0.01).view(), 2.0}), std::abs(c) * std::sqrt(2.0), 1e-12);
  auto present_only = SegmentBuffer::constant(v1(0.0), 1.0, 0.01);
  present_only.values(0, present_only.window()) = 2.5;
  EXPECT_DOUBLE_EQ(mp_norm({present_only.view(), 2.0}), 2.5);
  auto ramp = SegmentBuffer::sample(1, 1.0, std::ldexp(1.0, -10), [](double th) { return v1(th); });
  ramp.values(0, ramp.window()) = 0.0;
  EXPECT_NEAR(mp_norm({ramp.view(), 2.0}), std::sqrt(1.0 / 3.0), 1e-3);
}

TEST(MpNorm, SingleNodeModificationIsSmall) {
  const double dt = 1e-3;
  auto base = SegmentBuffer::constant(v1(1.0), 1.0, dt);
  auto changed = base;
  changed.values(0, 300) += 50.0;
  const double mp_shift = std::abs(mp_norm({changed.view(), 2.0}) - mp_norm({base.view(), 2.0}));
  EXPECT_LE(mp_shift, std::pow(dt, 0.5) * 50.0);
  EXPECT_NEAR(sup_norm(changed.view()) - sup_norm(base.view()), 50.0, 1e-12);
}

TEST(EmbeddingGap, ConstantEquality) {
  const auto [lhs, rhs] = embedding_gap(SegmentBuffer::constant(v1(1.0), 1.0, 0.01).view(), 2.0);
  EXPECT_NEAR(lhs, 2.0, 1e-12);
  EXPECT_NEAR(rhs, 2.0, 1e-12);
}

TEST(EmbeddingGap, SpikeIsFarBelow) {
  const double dt = 1e-3;
  auto spike = SegmentBuffer::constant(v1(0.0), 1.0, dt);
  spike.values(0, 500) = 3.0;
  const auto [lhs, rhs] = embedding_gap(spike.view(), 2.0);
  EXPECT_NEAR(lhs, dt * 9.0, 1e-15);
  EXPECT_NEAR(rhs, 2.0 * 9.0, 1e-12);
}

TEST(EmbeddingGap, HoldsOnRandomSegments) {
  RandomStream rng(3, 0, StreamPurpose::Probe);
  for (int trial = 0; trial < 1000; ++trial) {
    const int dim = 1 + trial % 3;
    const double p = 2.0 + (trial % 4);
    const double delay = 0.5 * (1 + trial % 4);
    const auto seg = random_piecewise_segment(rng, dim, delay, 0.01);
    const auto [lhs, rhs] = embedding_gap(seg.view(), p);
    ASSERT_LE(lhs, rhs * (1 + 1e-12)) << "trial " << trial;
  }
}

TEST(SupNorm, NestedWindowsAreMonotone) {
  const TimeGrid grid(1.0, 3.0, 0.01);
  CadlagPath path(grid, 2);
  RandomStream rng(8, 0, StreamPurpose::Probe);
  for (int i = 0; i < grid.node_count(); ++i) path.value(i) << rng.normal(), rng.normal();
  const double a = sup_norm(path, 0, grid.start_node());
  const double b = sup_norm(path, 0, grid.node_of(1.5));
  const double c = sup_norm(path, 0, grid.node_count() - 1);
  EXPECT_LE(a, b);
  EXPECT_LE(b, c);
}

TEST(ContinuityProfile, ConstantPath) {
  const TimeGrid grid(1.0, 1.0, 0.01);
  CadlagPath path(grid, 1);
  path.values().setConstant(4.0);
  for (const auto& pt : segment_continuity_profile(path, 2.0)) EXPECT_EQ(pt.increment, 0.0);
}

TEST(ContinuityProfile, PureDrift) {
  const double dt = 1e-3, r = 1.0, p = 2.0;
  const TimeGrid grid(r, 1.0, dt);
  CadlagPath path(grid, 1);
  for (int i = 0; i < grid.node_count(); ++i) path.value(i)[0] = grid.time(i);
  for (const auto& pt : segment_continuity_profile(path, p)) {
    EXPECT_NEAR(pt.increment, dt * std::pow(r + 1.0, 1.0 / p), 1e-9);
  }
}

TEST(ContinuityProfile, JumpEntersPresent) {
  for (double dt : {1e-2, 1e-3}) {
    const TimeGrid grid(1.0, 1.0, dt);
    CadlagPath path(grid, 1);
    const int jump_node = grid.node_of(0.5);
    for (int i = jump_node; i < grid.node_count(); ++i) path.value(i)[0] = 1.0;
    const auto profile = segment_continuity_profile(path, 2.0);
    const auto& at = profile[static_cast<std::size_t>(jump_node - 1 - grid.start_node())];
    EXPECT_NEAR(at.t, 0.5 - dt, 1e-12);
    EXPECT_NEAR(at.increment, 1.0, 1e-12);
    // one step later the jump sits inside the L^p window and contributes dt
    const auto& next = profile[static_cast<std::size_t>(jump_node - grid.start_node())];
    EXPECT_NEAR(next.increment, std::sqrt(dt), 1e-12);
  }
}

TEST(PathCsv, HeaderAndJumpFlags) {
  const TimeGrid grid(0.5, 1.0, 0.5);
  CadlagPath path(grid, 2);
  path.jump_log().push_back({1, 0.75, 0, 1.0, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2)});
  std::ostringstream out;
  write_path_csv(out, path);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,x1,x2,is_jump");
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[3].back(), '1');
  EXPECT_EQ(rows[2].back(), '0');
  EXPECT_EQ(rows[0].substr(0, 23), "-5.0000000000000000e-01");
}

TEST(CadlagPath, StepInterpolation) {
  const TimeGrid grid(0.0, 1.0, 0.25);
  CadlagPath path(grid, 1);
  for (int i = 0; i < grid.node_count(); ++i) path.value(i)[0] = i;
  EXPECT_EQ(path.at(0.3)[0], 1.0);
  EXPECT_EQ(path.at(0.5)[0], 2.0);
  EXPECT_EQ(path.at(1.0)[0], 4.0);
}
