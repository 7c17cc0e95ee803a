#include <gtest/gtest.h>

#include "lats/common/errors.hpp"
#include "lats/net/builder.hpp"
#include "lats/obs/encoder.hpp"

using namespace lats;
using namespace lats::net;
using namespace lats::obs;

TEST(Encoder, EmptyLanesActivePhaseRows) {
  NetworkSpec g = build_grid(1, 1);
  sim::Simulator s(g, {}, 1);
  HistoryBuffer h;
  ObservationBundle o = encode_intersection(s, "I_0_0", h);
  const auto& ix = g.intersection_index_data(0);
  std::vector<char> in_p0(36, 0);
  for (std::size_t k : ix.phase_local[0]) in_p0[k] = 1;
  for (std::size_t k = 0; k < 36; ++k) {
    EXPECT_EQ(o.S[k * 5], in_p0[k] ? 1.0 : 0.0);
    for (std::size_t c = 1; c < 5; ++c) EXPECT_EQ(o.S[k * 5 + c], 0.0);
  }
  EXPECT_EQ(o.reward, 0.0);
  EXPECT_EQ(o.n_movements, 36u);
  EXPECT_EQ(o.n_phases, 8u);
}

TEST(Encoder, HandPlacedStoppedVehicles) {
  NetworkSpec g = build_grid(1, 1);
  sim::Simulator s(g, {}, 1);
  const auto& ix = g.intersection_index_data(0);
  const std::size_t k = ix.phase_local[0][0];
  const auto& mi = g.movement_index(ix.movements[k]);
  const double L = g.roads[mi.in_road].length;
  s.place_vehicle(mi.in_lane, L, 0.0, {mi.in_road, mi.out_road});
  s.place_vehicle(mi.in_lane, L - 7.5, 0.0, {mi.in_road, mi.out_road});
  HistoryBuffer h;
  ObservationBundle o = encode_intersection(s, 0, h);
  EXPECT_EQ(o.S[k * 5 + 0], 1.0);
  EXPECT_DOUBLE_EQ(o.S[k * 5 + 1], 2.0 / 6.0);
  EXPECT_EQ(o.S[k * 5 + 2], 0.0);
  EXPECT_EQ(o.reward, -2.0);
}

TEST(Encoder, RewardUsesRawCounts) {
  EXPECT_EQ(compute_reward({}), 0.0);
  EXPECT_EQ(compute_reward({3, 1, 0}), -4.0);
  EXPECT_EQ(compute_reward({9}), -9.0);
}

TEST(Encoder, TwoPhasePaddingMasks) {
  Layout lay;
  lay.nodes = {{"J", {0, 0}, true}, {"a", {-200, 0}, false}, {"b", {200, 0}, false}};
  lay.links = {{"a", "J", 1, 13.89, 0}, {"J", "b", 1, 13.89, 0}};
  NetworkSpec n = expand_layout(lay);
  sim::Simulator s(n, {}, 1);
  ObservationBundle o = encode_intersection(s, 0, HistoryBuffer{});
  ASSERT_EQ(o.n_phases, 2u);
  std::vector<double> expect{1, 1, 0, 0, 0, 0, 0, 0};
  EXPECT_EQ(o.phase_mask, expect);
  for (std::size_t k = o.n_movements; k < 36; ++k) {
    EXPECT_EQ(o.movement_mask[k], 0.0);
    for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(o.S[k * 5 + c], 0.0);
  }
}

TEST(Encoder, GRowsMatchPhaseSets) {
  NetworkSpec g = build_grid(2, 2);
  sim::Simulator s(g, grid_demand(g, "high"), 1);
  for (int t = 0; t < 100; ++t) s.step();
  for (std::size_t i = 0; i < 4; ++i) {
    ObservationBundle o = encode_intersection(s, i, HistoryBuffer{});
    const auto& ix = g.intersection_index_data(i);
    for (std::size_t p = 0; p < 8; ++p) {
      double sum = 0.0;
      for (std::size_t m = 0; m < 36; ++m) {
        sum += o.G[p * 36 + m];
        EXPECT_EQ(o.G[p * 36 + m] * o.movement_mask[m], o.G[p * 36 + m]);
      }
      EXPECT_EQ(sum, static_cast<double>(ix.phase_local[p].size()));
    }
    for (double v : o.S) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_LE(o.reward, 0.0);
    ObservationBundle again = encode_intersection(s, i, HistoryBuffer{});
    EXPECT_EQ(again.S, o.S);
    EXPECT_EQ(again.reward, o.reward);
  }
}

TEST(Encoder, TopologyVector) {
  NetworkSpec g = build_grid(2, 2, 200.0, 3, 13.89);
  auto I = topology_vector(g, 0);
  ASSERT_EQ(I.size(), kTopologyDim);
  EXPECT_EQ(I[1], 1.0);  // 8 phases map to four_phase
  EXPECT_DOUBLE_EQ(I[3], 2.0);
  EXPECT_DOUBLE_EQ(I[4], 13.89 / 20.0);
  EXPECT_DOUBLE_EQ(I[5], 3.0);
  EXPECT_DOUBLE_EQ(I[7], 2.0);
  EXPECT_DOUBLE_EQ(I[9], 3.0);
  EXPECT_EQ(topology_vector(g, 0), topology_vector(g, 3));

  Layout lay;
  lay.nodes = {{"T", {0, 0}, true}, {"a", {-150, 0}, false}, {"b", {150, 0}, false}, {"c", {0, -150}, false}};
  lay.links = {{"a", "T", 1, 13.89, 0}, {"T", "b", 1, 13.89, 0}, {"T", "c", 1, 13.89, 0}};
  NetworkSpec t = expand_layout(lay);
  auto It = topology_vector(t, 0);
  EXPECT_EQ(It[0], 1.0);
  EXPECT_EQ(It[1], 0.0);
}

TEST(Encoder, HistoryIsZeroPaddedOldestFirst) {
  HistoryBuffer h;
  h.push({1, 1});
  h.push({2, 2});
  auto p = h.padded(2);
  ASSERT_EQ(p.size(), 4u);
  EXPECT_EQ(p[0], (std::vector<double>{0, 0}));
  EXPECT_EQ(p[1], (std::vector<double>{0, 0}));
  EXPECT_EQ(p[2], (std::vector<double>{1, 1}));
  EXPECT_EQ(p[3], (std::vector<double>{2, 2}));
  for (int k = 3; k < 8; ++k) h.push({double(k), double(k)});
  EXPECT_EQ(h.size(), 4u);
  EXPECT_EQ(h.padded(2)[0], (std::vector<double>{4, 4}));
}

TEST(Encoder, PhaseInputLayout) {
  NetworkSpec g = build_grid(1, 1);
  sim::Simulator s(g, {}, 1);
  ObservationBundle o = encode_intersection(s, 0, HistoryBuffer{});
  auto x = phase_input(o, 2);
  ASSERT_EQ(x.size(), phase_input_dim());
  EXPECT_EQ(x.size(), 36u * 5 + 36 + 10);
  for (std::size_t m = 0; m < 36; ++m) EXPECT_EQ(x[180 + m], o.G[2 * 36 + m]);
  EXPECT_THROW(encode_intersection(s, 5, HistoryBuffer{}), UnknownIntersection);
  EXPECT_THROW(phase_input(o, 8), ShapeError);
}
