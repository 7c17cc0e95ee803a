#include "lats/eval/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>

#include "lats/common/errors.hpp"

namespace lats::eval {

const char* const kMetricNames[kMetricCount] = {"queue", "speed", "intersection_delay", "completion_rate",
                                                "trip_time", "trip_delay", "atd"};

namespace {

bool active(const sim::Vehicle& v) { return v.depart_actual_s.has_value() && !v.arrive_s.has_value(); }

}  // namespace

double intersection_delay_sample(const sim::Simulator& sim) {
  const net::NetworkSpec& net = sim.network();
  double sum = 0.0;
  std::size_t n = 0;
  for (const sim::Vehicle& v : sim.vehicles()) {
    if (!active(v)) continue;
    const std::size_t road = v.route[v.leg];
    if (!net.road_to_intersection(road)) continue;
    if (v.position < net.roads[road].length - sim.config().detector_range) continue;
    sum += v.continuous_wait_s;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

MetricsTrace run_episode(Controller& controller, const net::NetworkSpec& net, const net::DemandSpec& demand,
                         std::uint64_t seed, const EvalConfig& cfg) {
  if (cfg.decision_s <= 0 || cfg.horizon_s % cfg.decision_s != 0) {
    throw ArgumentError("horizon must be a positive multiple of the decision interval");
  }
  sim::Simulator sim(net, demand, seed, cfg.sim);
  controller.reset(seed);
  MetricsTrace trace;
  trace.controller = controller.name();
  trace.seed = seed;
  trace.horizon_s = cfg.horizon_s;
  const int steps = cfg.horizon_s / cfg.decision_s;
  std::size_t completed = 0;
  double trip_time_sum = 0.0, trip_delay_sum = 0.0;
  std::vector<char> counted;
  for (int k = 0; k < steps; ++k) {
    const std::vector<std::size_t> phases = controller.decide(sim, k);
    if (phases.size() != net.intersections.size()) throw ShapeError("controller returned the wrong number of phases");
    for (std::size_t i = 0; i < phases.size(); ++i) sim.apply_phase(i, phases[i]);
    for (int t = 0; t < cfg.decision_s; ++t) sim.step();

    StepSample s;
    s.step = k;
    double q = 0.0;
    for (std::size_t i = 0; i < net.intersections.size(); ++i) {
      for (std::size_t l : net.intersection_index_data(i).incoming_lanes) q += sim.lane_detector(l).stopped;
    }
    s.queue = net.intersections.empty() ? 0.0 : q / static_cast<double>(net.intersections.size());
    double vs = 0.0;
    std::size_t nv = 0;
    const auto& vehicles = sim.vehicles();
    counted.resize(vehicles.size(), 0);
    for (std::size_t id = 0; id < vehicles.size(); ++id) {
      const sim::Vehicle& v = vehicles[id];
      if (active(v)) {
        vs += v.speed;
        ++nv;
      }
      if (v.arrive_s && !counted[id]) {
        counted[id] = 1;
        ++completed;
        const double tt = *v.arrive_s - *v.depart_actual_s;
        trip_time_sum += tt;
        trip_delay_sum += tt - v.free_flow_s;
      }
    }
    if (nv) s.speed = vs / static_cast<double>(nv);
    s.intersection_delay = intersection_delay_sample(sim);
    s.completed = completed;
    if (completed) {
      s.trip_time = trip_time_sum / static_cast<double>(completed);
      s.trip_delay = trip_delay_sum / static_cast<double>(completed);
    }
    trace.steps.push_back(s);
  }
  for (const sim::Vehicle& v : sim.vehicles()) {
    trace.trips.push_back({v.depart_request_s, v.depart_actual_s, v.arrive_s, v.free_flow_s});
  }
  return trace;
}

double trip_delay(const TripRecord& t) {
  if (!t.arrive_s || !t.depart_actual_s) throw ArgumentError("trip_delay: trip has not finished");
  return (*t.arrive_s - *t.depart_actual_s) - t.free_flow_s;
}

double atd(const MetricsTrace& trace) {
  if (trace.trips.empty()) return 0.0;
  const double H = trace.horizon_s;
  double total = 0.0;
  for (const TripRecord& t : trace.trips) {
    if (!t.depart_actual_s) {
      total += H - t.depart_request_s;
      continue;
    }
    const double dep_delay = *t.depart_actual_s - t.depart_request_s;
    if (t.arrive_s) {
      total += (*t.arrive_s - *t.depart_actual_s) + dep_delay;
    } else {
      total += (H - *t.depart_actual_s) + dep_delay;
    }
  }
  return total / static_cast<double>(trace.trips.size());
}

EpisodeMetrics episode_metrics(const MetricsTrace& trace) {
  EpisodeMetrics m;
  if (!trace.steps.empty()) {
    double q = 0.0, d = 0.0, sp = 0.0;
    std::size_t nsp = 0;
    for (const StepSample& s : trace.steps) {
      q += s.queue;
      d += s.intersection_delay;
      if (s.speed) {
        sp += *s.speed;
        ++nsp;
      }
    }
    m.queue = q / static_cast<double>(trace.steps.size());
    m.intersection_delay = d / static_cast<double>(trace.steps.size());
    m.speed = nsp ? sp / static_cast<double>(nsp) : 0.0;
  }
  std::size_t done = 0;
  double tt = 0.0, td = 0.0;
  for (const TripRecord& t : trace.trips) {
    if (!t.arrive_s) continue;
    ++done;
    tt += *t.arrive_s - *t.depart_actual_s;
    td += trip_delay(t);
  }
  m.completion_rate = static_cast<double>(done) / trace.horizon_s;
  if (done) {
    m.trip_time = tt / static_cast<double>(done);
    m.trip_delay = td / static_cast<double>(done);
  }
  m.atd = atd(trace);
  return m;
}

double metric_value(const EpisodeMetrics& m, int k) {
  switch (k) {
    case 0: return m.queue;
    case 1: return m.speed;
    case 2: return m.intersection_delay;
    case 3: return m.completion_rate;
    case 4: return m.trip_time;
    case 5: return m.trip_delay;
    case 6: return m.atd;
  }
  throw ArgumentError("metric index out of range");
}

namespace {

double& metric_ref(EpisodeMetrics& m, int k) {
  double* fields[kMetricCount] = {&m.queue, &m.speed, &m.intersection_delay, &m.completion_rate,
                                  &m.trip_time, &m.trip_delay, &m.atd};
  return *fields[k];
}

}  // namespace

MetricsReport summarize(const std::vector<MetricsTrace>& traces, const std::string& method) {
  MetricsReport r;
  r.method = method.empty() && !traces.empty() ? traces.front().controller : method;
  for (const MetricsTrace& t : traces) {
    r.seeds.push_back(t.seed);
    r.episodes.push_back(episode_metrics(t));
  }
  if (r.episodes.empty()) return r;
  const double n = static_cast<double>(r.episodes.size());
  for (int k = 0; k < kMetricCount; ++k) {
    // Shifted by the first value so identical episodes give an exact mean and zero spread.
    const double x0 = metric_value(r.episodes.front(), k);
    double shift = 0.0;
    for (const auto& e : r.episodes) shift += metric_value(e, k) - x0;
    const double mean = x0 + shift / n;
    double var = 0.0;
    for (const auto& e : r.episodes) var += (metric_value(e, k) - mean) * (metric_value(e, k) - mean);
    metric_ref(r.mean, k) = mean;
    metric_ref(r.std, k) = std::sqrt(var / n);
  }
  return r;
}

std::string format_mean_std(double mean, double std, int precision) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.*f (%.*f)", precision, mean, precision, std);
  return buf;
}

void export_report_csv(std::ostream& out, const std::vector<MetricsReport>& reports) {
  out << "method";
  for (const char* name : kMetricNames) out << ',' << name << "_mean," << name << "_std";
  out << ",episodes,seeds,metadata\n";
  out << std::setprecision(10);
  for (const MetricsReport& r : reports) {
    out << r.method;
    for (int k = 0; k < kMetricCount; ++k) out << ',' << metric_value(r.mean, k) << ',' << metric_value(r.std, k);
    out << ',' << r.episodes.size() << ",\"";
    for (std::size_t i = 0; i < r.seeds.size(); ++i) out << (i ? " " : "") << r.seeds[i];
    out << "\",\"" << r.metadata << "\"\n";
  }
  out << "# atd uses a reconstructed definition: unfinished trips are charged up to the horizon and "
         "never-departed vehicles from their request time\n";
}

void export_trace_csv(std::ostream& out, const MetricsTrace& trace) {
  out << "step,queue,speed,intersection_delay,completion_rate,trip_time,trip_delay\n";
  out << std::setprecision(10);
  for (const StepSample& s : trace.steps) {
    const double elapsed = static_cast<double>(s.step + 1) * trace.horizon_s / static_cast<double>(trace.steps.size());
    out << s.step << ',' << s.queue << ',';
    if (s.speed) out << *s.speed;
    out << ',' << s.intersection_delay << ',' << static_cast<double>(s.completed) / elapsed << ',' << s.trip_time
        << ',' << s.trip_delay << '\n';
  }
}

}  // namespace lats::eval
