#include "ctxsched/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "ctxsched/error.hpp"

namespace ctxsched {

namespace {

constexpr double kEps = 1e-9;

std::int64_t ceil_to(std::int64_t t, std::int64_t step) { return (t + step - 1) / step * step; }

// Splits `capacity` over items in proportion to `weights`, never giving an
// item more than its cap. Items with zero weight or cap get nothing.
std::vector<double> water_fill(double capacity, const std::vector<double>& weights,
                               const std::vector<double>& caps) {
  std::vector<double> rates(weights.size(), 0.0);
  std::vector<std::size_t> order;
  double wsum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0 && caps[i] > 0.0) {
      order.push_back(i);
      wsum += weights[i];
    }
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return caps[a] / weights[a] < caps[b] / weights[b];
  });
  double left = capacity;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto i = order[k];
    const double level = std::max(0.0, left) / wsum;
    if (caps[i] <= level * weights[i]) {
      rates[i] = caps[i];
      left -= caps[i];
      wsum -= weights[i];
    } else {
      for (std::size_t j = k; j < order.size(); ++j) rates[order[j]] = level * weights[order[j]];
      break;
    }
  }
  return rates;
}

struct Phase {
  std::int64_t at = 0;
  std::uint64_t epoch = 0;
  std::vector<double> values;
};

struct Active {
  std::size_t job;
  double remaining;
};

}  // namespace

void SimMachine::validate() const {
  if (processors < 1) throw ValidationError("machine needs at least one processor");
  if (quantum_us <= 0) throw ValidationError("quantum must be > 0");
  if (period_us <= 0 || period_us % quantum_us != 0)
    throw ValidationError("quantum " + std::to_string(quantum_us) + " us must divide period " +
                          std::to_string(period_us) + " us");
}

std::int64_t effective_time(SchedulerMode mode, std::int64_t issued_us, const SimMachine& machine) {
  if (issued_us < 0) throw TimestampError("negative assignment time");
  return ceil_to(issued_us, mode == SchedulerMode::Cfs ? machine.quantum_us : machine.period_us);
}

ScheduleAssignment equal_assignment(std::span<const std::string> modules, SchedulerMode mode,
                                    const SimMachine& machine) {
  std::vector<SchedulingScore> w;
  for (const auto& m : modules) w.push_back({m, 1.0});
  return mode == SchedulerMode::Cfs ? compute_cfs_shares(w, machine.processors)
                                    : compute_rt_slices(w, machine.period_us);
}

SimTrace sim_run(std::span<const SimJob> jobs, std::span<const TimedAssignment> schedule,
                 const SimMachine& machine) {
  machine.validate();
  if (jobs.empty()) return {};
  if (schedule.empty()) throw ValidationError("assignment schedule is empty");

  const auto mode = schedule.front().assignment.mode;
  std::vector<std::string> names;
  for (const auto& e : schedule.front().assignment.entries) names.push_back(e.module);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < names.size(); ++i) index[names[i]] = i;
  const std::size_t nm = names.size();

  std::vector<Phase> phases;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& a = schedule[i].assignment;
    if (a.mode != mode) throw ValidationError("assignment schedule mixes CFS and RT");
    if (a.entries.size() != nm)
      throw ValidationError("assignment " + std::to_string(i) + " covers different modules");
    for (std::size_t m = 0; m < nm; ++m)
      if (a.entries[m].module != names[m])
        throw ValidationError("assignment " + std::to_string(i) + " covers different modules");
    if (i > 0) {
      if (schedule[i].time_us < schedule[i - 1].time_us)
        throw ValidationError("assignment schedule is not sorted by time");
      if (a.epoch <= schedule[i - 1].assignment.epoch)
        throw ValidationError("assignment epochs are not increasing");
    }
    Phase p{effective_time(mode, schedule[i].time_us, machine), a.epoch, {}};
    for (const auto& e : a.entries) p.values.push_back(e.value);
    if (!phases.empty() && phases.back().at == p.at)
      phases.back() = std::move(p);
    else
      phases.push_back(std::move(p));
  }

  std::vector<std::size_t> job_module;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const auto& job = jobs[j];
    auto it = index.find(job.module);
    if (it == index.end())
      throw LookupError("job " + std::to_string(j) + " references unknown module '" + job.module +
                        "'");
    if (job.work_us <= 0) throw ValidationError("job " + std::to_string(j) + " has no work");
    if (job.arrival_us < 0) throw ValidationError("job " + std::to_string(j) + " arrives before 0");
    if (j > 0 && job.arrival_us < jobs[j - 1].arrival_us)
      throw ValidationError("jobs are not sorted by arrival");
    job_module.push_back(it->second);
  }

  SimTrace trace;
  for (const auto& p : phases)
    for (std::size_t m = 0; m < nm; ++m) trace.applied.push_back({p.at, p.epoch, names[m], p.values[m]});
  trace.jobs.resize(jobs.size());
  for (std::size_t j = 0; j < jobs.size(); ++j)
    trace.jobs[j] = {jobs[j].module, jobs[j].arrival_us, jobs[j].work_us, 0, 0.0, 0.0};

  const double q = static_cast<double>(machine.quantum_us);
  const double n_cores = static_cast<double>(machine.processors);
  const std::int64_t big = std::numeric_limits<std::int64_t>::max();

  std::vector<double> current;
  for (const auto& e : equal_assignment(names, mode, machine).entries) current.push_back(e.value);
  std::vector<double> budget(nm, 0.0);
  std::int64_t budget_period = -1;
  std::size_t next_phase = 0;
  std::size_t next_job = 0;
  std::size_t completed = 0;
  std::vector<Active> active;
  std::int64_t t = 0;

  while (completed < jobs.size()) {
    while (next_job < jobs.size() && jobs[next_job].arrival_us <= t) {
      active.push_back({next_job, static_cast<double>(jobs[next_job].work_us)});
      trace.jobs[next_job].start_us = t;
      ++next_job;
    }
    while (next_phase < phases.size() && phases[next_phase].at <= t)
      current = phases[next_phase++].values;
    if (mode == SchedulerMode::Rt && t / machine.period_us != budget_period) {
      budget_period = t / machine.period_us;
      for (std::size_t m = 0; m < nm; ++m) budget[m] = n_cores * current[m];
    }

    std::int64_t next_event = big;
    if (next_job < jobs.size())
      next_event = std::min(next_event, ceil_to(jobs[next_job].arrival_us, machine.quantum_us));
    if (next_phase < phases.size()) next_event = std::min(next_event, phases[next_phase].at);
    if (mode == SchedulerMode::Rt)
      next_event = std::min(next_event, (t / machine.period_us + 1) * machine.period_us);

    if (active.empty()) {
      t = next_event;
      continue;
    }

    std::vector<double> count(nm, 0.0);
    for (const auto& a : active) count[job_module[a.job]] += 1.0;

    std::vector<double> rate(nm, 0.0);
    std::vector<bool> background(nm, false);
    auto fill_rest = [&](const std::vector<bool>& eligible) {
      double used = std::accumulate(rate.begin(), rate.end(), 0.0);
      std::vector<double> w(nm, 0.0);
      for (std::size_t m = 0; m < nm; ++m) w[m] = eligible[m] && count[m] > 0.0 ? 1.0 : 0.0;
      const auto extra = water_fill(n_cores - used, w, count);
      for (std::size_t m = 0; m < nm; ++m)
        if (w[m] > 0.0) rate[m] = extra[m];
    };

    if (mode == SchedulerMode::Cfs) {
      if (machine.strict_cap) {
        for (std::size_t m = 0; m < nm; ++m)
          if (count[m] > 0.0) rate[m] = std::min(current[m], count[m]);
      } else {
        std::vector<double> w(nm, 0.0);
        bool any = false;
        for (std::size_t m = 0; m < nm; ++m) {
          if (count[m] > 0.0 && current[m] > 0.0) {
            w[m] = current[m];
            any = true;
          }
        }
        if (any) {
          rate = water_fill(n_cores, w, count);
          std::vector<bool> zero(nm);
          for (std::size_t m = 0; m < nm; ++m) zero[m] = current[m] <= 0.0;
          fill_rest(zero);
        } else {
          fill_rest(std::vector<bool>(nm, true));
        }
      }
    } else {
      std::vector<double> w(nm, 0.0), cap(nm, 0.0);
      for (std::size_t m = 0; m < nm; ++m) {
        if (count[m] > 0.0 && current[m] > 0.0 && budget[m] > kEps) {
          w[m] = 1.0;
          cap[m] = std::min(count[m], budget[m] / q);
        }
      }
      rate = water_fill(n_cores, w, cap);
      std::vector<bool> zero(nm);
      for (std::size_t m = 0; m < nm; ++m) {
        zero[m] = current[m] <= 0.0 || budget[m] <= kEps;
        background[m] = zero[m];
      }
      fill_rest(zero);
    }

    double total_rate = 0.0;
    for (double r : rate) total_rate += r;

    std::int64_t k = next_event == big ? big : (next_event - t) / machine.quantum_us;
    if (total_rate > 0.0) {
      for (const auto& a : active) {
        const auto m = job_module[a.job];
        const double rj = rate[m] / count[m];
        if (rj <= 0.0) continue;
        const double kc = std::max(0.0, std::ceil(a.remaining / (rj * q) - 1.0 - kEps));
        k = std::min(k, static_cast<std::int64_t>(kc) + 1);
      }
      if (mode == SchedulerMode::Rt) {
        for (std::size_t m = 0; m < nm; ++m) {
          if (background[m] || rate[m] <= 0.0) continue;
          if (budget[m] < count[m] * q) {
            k = 1;
          } else {
            const double kb = std::floor((budget[m] - count[m] * q) / (rate[m] * q) - kEps);
            k = std::min(k, static_cast<std::int64_t>(std::max(0.0, kb)) + 1);
          }
        }
      }
    } else if (k == big) {
      throw Error("simulation stalled at " + std::to_string(t) +
                  " us: runnable jobs can never receive CPU");
    }
    k = std::max<std::int64_t>(k, 1);

    std::vector<double> consumed(nm, 0.0);
    const double bulk = static_cast<double>(k - 1) * q;
    const double tail_start = static_cast<double>(t) + bulk;
    std::vector<Active> still;
    for (auto& a : active) {
      const auto m = job_module[a.job];
      const double rj = rate[m] / count[m];
      auto& rec = trace.jobs[a.job];
      if (rj <= 0.0) {
        still.push_back(a);
        continue;
      }
      a.remaining -= rj * bulk;
      consumed[m] += rj * bulk;
      rec.service_us += bulk;
      const double d = rj * q;
      if (a.remaining <= d + kEps) {
        const double dt = a.remaining / rj;
        rec.completion_us = tail_start + dt;
        rec.service_us += dt;
        consumed[m] += a.remaining;
        trace.makespan_us = std::max(trace.makespan_us, rec.completion_us);
        ++completed;
      } else {
        a.remaining -= d;
        consumed[m] += d;
        rec.service_us += q;
        still.push_back(a);
      }
    }
    active = std::move(still);

    for (std::size_t m = 0; m < nm; ++m) {
      if (count[m] <= 0.0) continue;
      if (mode == SchedulerMode::Rt && !background[m]) budget[m] -= consumed[m];
      trace.rows.push_back({t, k * machine.quantum_us, names[m], current[m], rate[m], consumed[m],
                            background[m]});
    }
    t += k * machine.quantum_us;
  }
  return trace;
}

SimTrace baseline_run(std::span<const SimJob> jobs, std::span<const std::string> modules,
                      const SimMachine& machine) {
  const TimedAssignment constant{0, equal_assignment(modules, SchedulerMode::Cfs, machine)};
  return sim_run(jobs, std::span<const TimedAssignment>(&constant, 1), machine);
}

}  // namespace ctxsched
