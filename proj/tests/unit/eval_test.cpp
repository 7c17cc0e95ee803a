#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "lats/baselines/baselines.hpp"
#include "lats/common/errors.hpp"
#include "lats/eval/metrics.hpp"
#include "lats/net/builder.hpp"

using namespace lats;
using namespace lats::eval;

namespace {

// Scores every phase from the string-keyed network description and returns
// the first maximum; shares no code with the controllers.
std::size_t brute_force(const net::NetworkSpec& n, std::size_t i, const baselines::Readings& r, bool pressure) {
  const auto& is = n.intersections[i];
  std::vector<long> scores;
  for (const auto& ph : is.phases) {
    long s = 0;
    std::set<std::string> lanes;
    for (const std::string& mid : ph.movement_ids) {
      const auto& mv = n.movements[*n.find_movement(mid)];
      const int in = r.at(*n.find_lane(mv.in_lane)).stopped;
      const int out = r.at(*n.find_lane(mv.out_lane)).stopped;
      if (pressure) {
        s += in - out;
      } else if (lanes.insert(mv.in_lane).second) {
        s += in;
      }
    }
    scores.push_back(s);
  }
  std::size_t best = 0;
  for (std::size_t p = 1; p < scores.size(); ++p)
    if (scores[p] > scores[best]) best = p;
  return best;
}

net::NetworkSpec tee_network() {
  net::Layout lay;
  lay.nodes = {{"T", {0, 0}, true}, {"a", {-150, 0}, false}, {"b", {150, 0}, false}, {"c", {0, -150}, false}};
  lay.links = {{"a", "T", 2, 13.89, 0}, {"T", "b", 2, 13.89, 0}, {"T", "c", 1, 13.89, 0}};
  return net::expand_layout(lay);
}

net::NetworkSpec corridor() {
  net::Layout lay;
  lay.nodes = {{"J", {0, 0}, true}, {"a", {-200, 0}, false}, {"b", {200, 0}, false}};
  lay.links = {{"a", "J", 1, 13.89, 0}, {"J", "b", 1, 13.89, 0}};
  return net::expand_layout(lay);
}

std::size_t phase_serving(const net::NetworkSpec& n, const std::string& in_road) {
  const auto& ix = n.intersection_index_data(0);
  const std::size_t road = *n.find_road(in_road);
  for (std::size_t p = 0; p < ix.phase_local.size(); ++p)
    for (std::size_t k : ix.phase_local[p])
      if (n.movement_index(ix.movements[k]).in_road == road) return p;
  throw std::runtime_error("no serving phase");
}

// Holds `hold` for the first `hold_steps` decisions, then `then`.
class ScriptedController : public Controller {
 public:
  ScriptedController(std::size_t hold, int hold_steps, std::size_t then)
      : hold_(hold), steps_(hold_steps), then_(then) {}
  std::string name() const override { return "scripted"; }
  std::vector<std::size_t> decide(const sim::Simulator&, int step) override {
    return {step < steps_ ? hold_ : then_};
  }

 private:
  std::size_t hold_;
  int steps_;
  std::size_t then_;
};

net::DemandSpec one_vehicle(const std::string& o, const std::string& d) {
  net::DemandSpec dem;
  dem.flows.push_back({o, d, 0.0, 1.0, 3600.0});
  return dem;
}

}  // namespace

TEST(Baselines, FixedTimeCycles) {
  EXPECT_EQ(baselines::fixed_time(2, 0), 0u);
  EXPECT_EQ(baselines::fixed_time(2, 1), 1u);
  EXPECT_EQ(baselines::fixed_time(2, 2), 0u);
  EXPECT_EQ(baselines::fixed_time(2, 3), 1u);
  for (int k = 0; k < 24; ++k) EXPECT_EQ(baselines::fixed_time(8, k), baselines::fixed_time(8, k + 8));
  EXPECT_THROW(baselines::fixed_time(0, 1), ArgumentError);
}

TEST(Baselines, EmptyAndConcentratedQueues) {
  net::NetworkSpec g = net::build_grid(1, 1);
  sim::Simulator s(g, {}, 1);
  auto r = s.read_detectors(0);
  EXPECT_EQ(baselines::greedy(g, 0, r), 0u);
  EXPECT_EQ(baselines::max_pressure(g, 0, r), 0u);

  const auto& ix = g.intersection_index_data(0);
  const auto& mi = g.movement_index(ix.movements[ix.phase_local[2][0]]);
  r[mi.in_lane].stopped = 5;
  EXPECT_EQ(baselines::max_pressure(g, 0, r), brute_force(g, 0, r, true));
  EXPECT_EQ(baselines::greedy(g, 0, r), brute_force(g, 0, r, false));
  // Every phase containing that movement scores 5; the lowest such index wins.
  std::size_t first = 99;
  for (std::size_t p = 0; p < ix.phase_local.size() && first == 99; ++p)
    for (std::size_t k : ix.phase_local[p])
      if (g.movement_index(ix.movements[k]).in_lane == mi.in_lane) first = p;
  EXPECT_EQ(baselines::greedy(g, 0, r), first);

  for (auto& [lane, rd] : r) rd.stopped = 0;
  for (std::size_t l : ix.outgoing_lanes) r[l].stopped = 3;
  const std::size_t mp = baselines::max_pressure(g, 0, r);
  EXPECT_EQ(mp, brute_force(g, 0, r, true));
}

TEST(Baselines, MatchExhaustiveArgmaxOnRandomSnapshots) {
  std::vector<net::NetworkSpec> nets{net::build_grid(1, 1), tee_network()};
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> count(0, 6);
  std::bernoulli_distribution sparse(0.3);
  for (int trial = 0; trial < 1000; ++trial) {
    const net::NetworkSpec& n = nets[trial % 2];
    sim::Simulator s(n, {}, 1);
    auto r = s.read_detectors(0);
    for (auto& [lane, rd] : r) rd.stopped = sparse(rng) ? count(rng) : 0;
    ASSERT_EQ(baselines::greedy(n, 0, r), brute_force(n, 0, r, false)) << trial;
    ASSERT_EQ(baselines::max_pressure(n, 0, r), brute_force(n, 0, r, true)) << trial;
  }
}

TEST(Baselines, FactoryAndMissingReadings) {
  EXPECT_EQ(baselines::make_baseline("greedy")->name(), "greedy");
  EXPECT_THROW(baselines::make_baseline("webster"), ArgumentError);
  net::NetworkSpec g = net::build_grid(1, 1);
  EXPECT_THROW(baselines::greedy(g, 0, {}), ArgumentError);
}

TEST(Eval, ZeroDemandGivesZeroMetrics) {
  net::NetworkSpec g = net::build_grid(1, 1);
  baselines::FixedTimeController c;
  MetricsTrace t = run_episode(c, g, {}, 1);
  ASSERT_EQ(t.steps.size(), 360u);
  EpisodeMetrics m = episode_metrics(t);
  for (int k = 0; k < kMetricCount; ++k) EXPECT_EQ(metric_value(m, k), 0.0) << kMetricNames[k];
  for (const auto& s : t.steps) EXPECT_FALSE(s.speed.has_value());
}

TEST(Eval, FreeFlowVehicleHasNoDelay) {
  net::NetworkSpec n = corridor();
  EvalConfig cfg;
  cfg.sim.all_green = true;
  baselines::FixedTimeController c;
  MetricsTrace t = run_episode(c, n, one_vehicle("a__J", "J__b"), 3, cfg);
  ASSERT_EQ(t.trips.size(), 1u);
  ASSERT_TRUE(t.trips[0].arrive_s.has_value());
  EXPECT_LE(std::abs(trip_delay(t.trips[0])), 1.0);
}

TEST(Eval, HeldRedAddsTheWaitToTripDelay) {
  net::NetworkSpec n = corridor();
  const std::size_t serve = phase_serving(n, "a__J");
  ScriptedController c(1 - serve, 5, serve);
  MetricsTrace t = run_episode(c, n, one_vehicle("a__J", "J__b"), 3);
  ASSERT_TRUE(t.trips[0].arrive_s.has_value());
  // Green returns at 50 s + 3 s yellow; the vehicle reached the stop line at L/v.
  const double expected = 53.0 - 200.0 / 13.89;
  EXPECT_NEAR(trip_delay(t.trips[0]), expected, 1.5);
  // While held, the intersection delay sample equals the running wait.
  EXPECT_NEAR(t.steps[4].intersection_delay, 50.0 - 200.0 / 13.89, 1.5);
  EXPECT_EQ(t.steps[6].intersection_delay, 0.0);
}

TEST(Eval, WaitCounterResetsAfterDischarge) {
  sim::SimConfig cfg;
  net::NetworkSpec n = corridor();
  sim::Simulator s(n, {}, 1, cfg);
  const std::size_t serve = phase_serving(n, "a__J");
  const std::size_t lane = n.road_lanes(*n.find_road("a__J"))[0];
  s.place_vehicle(lane, 200.0, 0.0, {*n.find_road("a__J"), *n.find_road("J__b")});
  s.apply_phase(0, 1 - serve);
  for (int t = 0; t < 10; ++t) s.step();
  EXPECT_NEAR(intersection_delay_sample(s), 10.0, 1e-9);
  s.apply_phase(0, serve);
  for (int t = 0; t < 5; ++t) s.step();
  EXPECT_EQ(intersection_delay_sample(s), 0.0);
}

TEST(Eval, SameSeedSameTrace) {
  net::NetworkSpec g = net::build_grid(2, 2);
  auto dem = net::grid_demand(g, "medium");
  baselines::MaxPressureController c;
  MetricsTrace a = run_episode(c, g, dem, 5), b = run_episode(c, g, dem, 5);
  std::ostringstream sa, sb;
  export_trace_csv(sa, a);
  export_trace_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  EpisodeMetrics m = episode_metrics(a);
  std::size_t inserted = 0;
  for (const auto& trip : a.trips) {
    if (trip.depart_actual_s) ++inserted;
    if (trip.arrive_s) EXPECT_GE(*trip.arrive_s - *trip.depart_actual_s, trip.free_flow_s - 1.0);
  }
  EXPECT_LE(m.completion_rate * a.horizon_s, static_cast<double>(inserted) + 1e-9);
  EXPECT_GT(m.completion_rate, 0.0);
  for (std::size_t k = 1; k < a.steps.size(); ++k) EXPECT_GE(a.steps[k].completed, a.steps[k - 1].completed);
}

TEST(Atd, HandComputedCases) {
  MetricsTrace t;
  t.horizon_s = 100;
  t.trips = {{0.0, 0.0, 20.0, 15.0}, {10.0, 10.0, 40.0, 15.0}};
  EXPECT_DOUBLE_EQ(atd(t), 25.0);  // mean trip time when everyone departs on request

  t.trips = {{10.0, std::nullopt, std::nullopt, 0.0}, {30.0, std::nullopt, std::nullopt, 0.0}};
  EXPECT_DOUBLE_EQ(atd(t), 80.0);

  // finished after 5 s of departure delay; unfinished departed late; never departed.
  t.trips = {{0.0, 5.0, 25.0, 10.0}, {50.0, 60.0, std::nullopt, 10.0}, {90.0, std::nullopt, std::nullopt, 10.0}};
  EXPECT_DOUBLE_EQ(atd(t), ((20.0 + 5.0) + (40.0 + 10.0) + 10.0) / 3.0);
  EXPECT_THROW(trip_delay(t.trips[1]), ArgumentError);
  EXPECT_DOUBLE_EQ(trip_delay(t.trips[0]), 10.0);
}

TEST(Report, SummaryFormatAndCsv) {
  MetricsTrace t;
  t.controller = "x";
  t.horizon_s = 100;
  t.steps = {{0, 2.0, 5.0, 1.0, 1, 20.0, 5.0}};
  t.trips = {{0.0, 0.0, 20.0, 15.0}};
  std::vector<MetricsTrace> ten(10, t);
  for (int i = 0; i < 10; ++i) ten[i].seed = static_cast<std::uint64_t>(i);
  MetricsReport r = summarize(ten);
  EXPECT_EQ(r.method, "x");
  for (int k = 0; k < kMetricCount; ++k) EXPECT_EQ(metric_value(r.std, k), 0.0);
  EXPECT_DOUBLE_EQ(r.mean.queue, 2.0);
  EXPECT_DOUBLE_EQ(r.mean.completion_rate, 0.01);
  EXPECT_EQ(format_mean_std(1.26, 1.04), "1.26 (1.04)");
  EXPECT_EQ(format_mean_std(1.255, 1.0449), "1.25 (1.04)");

  std::ostringstream trace_csv;
  export_trace_csv(trace_csv, t);
  std::string header = trace_csv.str().substr(0, trace_csv.str().find('\n'));
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 6);

  std::ostringstream rep;
  export_report_csv(rep, {r});
  EXPECT_NE(rep.str().find("queue_mean,queue_std"), std::string::npos);
  EXPECT_NE(rep.str().find("reconstructed definition"), std::string::npos);
  EXPECT_NE(rep.str().find("\"0 1 2 3 4 5 6 7 8 9\""), std::string::npos);
}
