#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lats/eval/controller.hpp"

namespace lats::eval {

struct EvalConfig {
  int horizon_s = 3600;
  int decision_s = 10;
  sim::SimConfig sim;
};

/// Network-level samples taken at the end of each decision interval.
struct StepSample {
  int step = 0;
  double queue = 0.0;               // mean over intersections of stopped vehicles on incoming lanes
  std::optional<double> speed;      // mean over active vehicles; absent when the network is empty
  double intersection_delay = 0.0;  // mean continuous wait of vehicles within detector range
  std::size_t completed = 0;        // cumulative
  double trip_time = 0.0;           // mean over trips finished so far
  double trip_delay = 0.0;
};

struct TripRecord {
  double depart_request_s = 0.0;
  std::optional<double> depart_actual_s;
  std::optional<double> arrive_s;
  double free_flow_s = 0.0;
};

struct MetricsTrace {
  std::string controller;
  std::uint64_t seed = 0;
  int horizon_s = 3600;
  std::vector<StepSample> steps;
  std::vector<TripRecord> trips;  // every requested vehicle
};

/// Episodic values of the six metrics plus ATD.
struct EpisodeMetrics {
  double queue = 0.0;
  double speed = 0.0;
  double intersection_delay = 0.0;
  double completion_rate = 0.0;  // completed trips per second of horizon
  double trip_time = 0.0;
  double trip_delay = 0.0;
  double atd = 0.0;
};

inline constexpr int kMetricCount = 7;
extern const char* const kMetricNames[kMetricCount];  // queue, speed, ..., atd

struct MetricsReport {
  std::string method;
  std::vector<std::uint64_t> seeds;
  std::vector<EpisodeMetrics> episodes;
  EpisodeMetrics mean;
  EpisodeMetrics std;  // population standard deviation
  std::string metadata;  // free-form, e.g. the ablation variant
};

/// Runs horizon/decision decisions; the controller is reset with `seed` first.
MetricsTrace run_episode(Controller& controller, const net::NetworkSpec& net, const net::DemandSpec& demand,
                         std::uint64_t seed, const EvalConfig& cfg = {});

/// Trip time minus free-flow time along the route.
double trip_delay(const TripRecord& trip);

/// Average trip duration charging unfinished and never-departed vehicles up to the horizon.
double atd(const MetricsTrace& trace);

/// Mean continuous wait over active vehicles within detector range of an incoming lane.
double intersection_delay_sample(const sim::Simulator& sim);

EpisodeMetrics episode_metrics(const MetricsTrace& trace);
MetricsReport summarize(const std::vector<MetricsTrace>& traces, const std::string& method = "");

double metric_value(const EpisodeMetrics& m, int k);
/// "1.26 (1.04)"
std::string format_mean_std(double mean, double std, int precision = 2);

/// One row per report: method, <metric>_mean, <metric>_std ..., plus a footer
/// noting the reconstructed ATD definition.
void export_report_csv(std::ostream& out, const std::vector<MetricsReport>& reports);
/// step + six per-step metrics.
void export_trace_csv(std::ostream& out, const MetricsTrace& trace);

}  // namespace lats::eval
