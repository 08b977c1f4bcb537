// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/engine.hpp"

#include <algorithm>
#include <functional>
#include <ostream>
#include <queue>

#include <fmt/format.h>

#include "splitsim/error.hpp"

namespace splitsim {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::request_arrival: return "request_arrival";
    case EventKind::iteration_complete: return "iteration_complete";
    case EventKind::transfer_complete: return "transfer_complete";
    case EventKind::pool_maintenance: return "pool_maintenance";
  }
  return "?";
}

namespace {

class Engine {
 public:
  Engine(const ClusterConfig& config, const std::map<MachineType, PerfModel>& models,
         const Trace& trace, const EngineOptions& options)
      : cluster_(config, models), trace_(trace), options_(options) {
    for (std::size_t i = 1; i < trace.size(); ++i)
      if (trace.requests[i].arrival_s < trace.requests[i - 1].arrival_s)
        throw ValidationError("trace arrivals must be sorted");
    result_.records.resize(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) {
      const Request& req = trace.requests[i];
      if (req.prompt_tokens < 1 || req.output_tokens < 1)
        throw ValidationError(fmt::format("request {} has a non-positive token count", i));
      RequestRecord& r = result_.records[i];
      r.id = i;
      r.arrival = from_seconds(req.arrival_s);
      r.prompt_tokens = req.prompt_tokens;
      r.output_tokens = req.output_tokens;
      r.emissions.reserve(static_cast<std::size_t>(req.output_tokens));
    }
    next_seq_ = trace.size();
    horizon_ = from_seconds(trace.duration_s + options.horizon_slack_s);
  }

  SimulationResult run() {
    const ClusterConfig& cfg = cluster_.config();
    if (!trace_.empty() && cfg.repurposing_enabled() && !is_baseline(cfg.design))
      schedule(from_seconds(cfg.repurpose_window_s), EventKind::pool_maintenance, 0);

    SimTime now = 0;
    // Only maintenance can remain once every request has finished.
    while (completed_ < trace_.size()) {
      std::optional<Event> ev = next_event();
      if (!ev) break;
      if (ev->time > horizon_)
        throw SimulationError(fmt::format(
            "simulation horizon {:.3f} s exceeded at {:.3f} s with {} of {} requests complete",
            to_seconds(horizon_), to_seconds(ev->time), completed_, trace_.size()));
      if (ev->time < now) throw InternalError("clock moved backwards");
      now = ev->time;
      ++result_.events;
      touched_.clear();
      payload_.clear();
      dispatch(*ev);
      cluster_.update_pools(now);
      std::sort(touched_.begin(), touched_.end());
      touched_.erase(std::unique(touched_.begin(), touched_.end()), touched_.end());
      drain_transitions();
      for (MachineId id : touched_) start_iteration(id, now);
      if (options_.check_invariants) check(now);
      if (options_.record_event_log)
        result_.event_log.push_back(fmt::format("{:.9f},{},{},{}", to_seconds(ev->time), ev->seq,
                                                to_string(ev->kind), payload_));
    }
    if (completed_ != trace_.size())
      throw InternalError(fmt::format("{} of {} requests never finished", trace_.size() - completed_,
                                      trace_.size()));
    result_.end_time = now;
    for (std::size_t i = 0; i < cluster_.size(); ++i) {
      const Machine& m = cluster_.machine(static_cast<MachineId>(i));
      MachineReport rep;
      rep.id = m.id();
      rep.type = m.type();
      rep.home = m.home_role();
      rep.busy_s = to_seconds(m.stats().busy);
      rep.utilization = now > 0 ? static_cast<double>(m.stats().busy) / static_cast<double>(now) : 0.0;
      rep.iterations = m.stats().iterations;
      rep.batched_tokens = m.stats().batched_tokens;
      result_.machines.push_back(std::move(rep));
    }
    return std::move(result_);
  }

 private:
  void schedule(SimTime time, EventKind kind, std::uint64_t id) {
    heap_.push({time, next_seq_++, kind, id});
  }

  std::optional<Event> next_event() {
    std::optional<Event> arrival;
    if (next_arrival_ < trace_.size())
      arrival = Event{result_.records[next_arrival_].arrival, next_arrival_,
                      EventKind::request_arrival, next_arrival_};
    if (!heap_.empty() && (!arrival || *arrival > heap_.top())) {
      Event e = heap_.top();
      heap_.pop();
      return e;
    }
    if (arrival) ++next_arrival_;
    return arrival;
  }

  void dispatch(const Event& ev) {
    switch (ev.kind) {
      case EventKind::request_arrival: on_arrival(ev); break;
      case EventKind::iteration_complete: on_iteration(ev); break;
      case EventKind::transfer_complete: on_transfer(ev); break;
      case EventKind::pool_maintenance: on_maintenance(ev); break;
    }
  }

  void on_arrival(const Event& ev) {
    Request req = trace_.requests[ev.id];
    req.id = ev.id;
    RoutingDecision d = cluster_.route(req, ev.time);
    RequestRecord& r = result_.records[ev.id];
    r.prompt_machine = d.prompt_machine;
    r.token_machine = d.token_machine;
    result_.routes.push_back(d);
    journal(RouteEntry{ev.time, ev.id, req.prompt_tokens, d.prompt_machine, d.token_machine});
    note(fmt::format("request={} prompt_tokens={} output_tokens={} prompt_machine={} token_machine={}",
                     ev.id, req.prompt_tokens, req.output_tokens, d.prompt_machine, d.token_machine));
    touched_.push_back(d.prompt_machine);
    touched_.push_back(d.token_machine);
  }

  void on_iteration(const Event& ev) {
    auto id = static_cast<MachineId>(ev.id);
    Machine& m = cluster_.machine(id);
    const Batch* running = m.running();
    if (running == nullptr) throw InternalError("iteration completed on an idle machine");
    double prompt_ms = running->prompt_ms;
    note(fmt::format("machine={} batch={} prompts={} prompt_tokens={} tokens={}", id,
                     to_string(running->kind), running->prompt_requests.size(),
                     running->prompt_tokens, running->token_requests.size()));
    std::vector<MachineEvent> events = m.complete_iteration(ev.time);
    std::size_t finished = 0;
    for (const MachineEvent& e : events) {
      RequestRecord& r = result_.records[e.request];
      switch (e.kind) {
        case MachineEvent::Kind::prompt_finished:
          r.emissions.push_back(ev.time);
          journal(PhaseEntry{PhaseEntry::Kind::prompt_done, ev.time, e.request, id});
          if (r.output_tokens > 1 && !e.local) start_transfer(r, m, prompt_ms, ev.time);
          break;
        case MachineEvent::Kind::token_emitted:
          r.emissions.push_back(ev.time);
          break;
        case MachineEvent::Kind::request_finished:
          r.completion = ev.time;
          r.preempt_count = e.preempt_count;
          ++completed_;
          ++finished;
          if (r.output_tokens == 1 && r.token_machine != id)
            cluster_.machine(r.token_machine).cancel_expected(e.request);
          journal(PhaseEntry{PhaseEntry::Kind::request_done, ev.time, e.request, id});
          if (r.emissions.size() != static_cast<std::size_t>(r.output_tokens))
            throw InternalError(fmt::format("request {} emitted {} of {} tokens", e.request,
                                            r.emissions.size(), r.output_tokens));
          break;
      }
    }
    note(fmt::format(" finished={}", finished), false);
    touched_.push_back(id);
  }

  void start_transfer(RequestRecord& r, const Machine& from, double prompt_ms, SimTime now) {
    const TransferConfig& link = cluster_.link(from.id(), r.token_machine);
    std::int64_t kv = kv_cache_bytes(from.model(), r.prompt_tokens);
    TransferPlan plan = plan_transfer(r.prompt_tokens, kv, prompt_ms, link);
    r.transfer_visible_ms = plan.visible_ms;
    ++result_.transfers;
    schedule(now + from_millis(plan.visible_ms), EventKind::transfer_complete, r.id);
  }

  void on_transfer(const Event& ev) {
    RequestRecord& r = result_.records[ev.id];
    cluster_.machine(r.prompt_machine).release_outgoing(ev.id);
    Task task;
    task.request = ev.id;
    task.kind = TaskKind::token_phase;
    task.tokens = r.prompt_tokens + 1;
    task.prompt_tokens = r.prompt_tokens;
    task.output_tokens = r.output_tokens;
    task.emitted = 1;
    cluster_.enqueue(r.token_machine, task, ev.time);
    note(fmt::format("request={} from={} to={} visible_ms={:.6f}", ev.id, r.prompt_machine,
                     r.token_machine, r.transfer_visible_ms));
    touched_.push_back(r.prompt_machine);
    touched_.push_back(r.token_machine);
  }

  void on_maintenance(const Event& ev) {
    std::vector<RoleChange> changes = cluster_.repurpose(ev.time);
    std::string text = "flips=";
    for (const RoleChange& c : changes) {
      journal(PoolEntry{true, c.time, c.machine, c.from, c.to});
      text += fmt::format("{}:{}>{};", c.machine, to_string(c.from), to_string(c.to));
      touched_.push_back(c.machine);
    }
    note(text);
    if (completed_ < trace_.size())
      schedule(ev.time + from_seconds(cluster_.config().repurpose_window_s),
               EventKind::pool_maintenance, 0);
  }

  void drain_transitions() {
    std::vector<PoolTransition> moves = cluster_.take_transitions();
    if (moves.empty()) return;
    std::string text = " pools=";
    for (const PoolTransition& t : moves) {
      journal(PoolEntry{false, t.time, t.machine, t.from, t.to});
      text += fmt::format("{}:{}>{};", t.machine, to_string(t.from), to_string(t.to));
    }
    note(text, false);
  }

  void start_iteration(MachineId id, SimTime now) {
    Machine& m = cluster_.machine(id);
    if (m.busy()) return;
    const Batch* b = m.form_batch(now, cluster_.config().scheduler);
    if (b == nullptr) return;
    schedule(now + b->duration, EventKind::iteration_complete, id);
    if (options_.record_journal) {
      BatchEntry e;
      e.time = now;
      e.machine = id;
      e.pool = m.current_pool();
      e.kind = b->kind;
      e.prompt_requests = b->prompt_requests;
      e.token_requests = b->token_requests;
      e.preempted = b->preempted;
      e.prompt_tokens = b->prompt_tokens;
      e.duration = b->duration;
      e.memory_used = m.memory_used();
      e.memory_capacity = m.memory_capacity();
      e.resident_tokens = m.resident_tokens();
      result_.journal.emplace_back(std::move(e));
    }
  }

  void check(SimTime now) {
    for (MachineId id : touched_) {
      const Machine& m = cluster_.machine(id);
      if (m.memory_used() > m.memory_capacity())
        throw InternalError(fmt::format("machine {} over memory at {}", id, now));
      if (static_cast<std::int64_t>(m.resident_tokens()) > m.model().max_token_batch)
        throw InternalError(fmt::format("machine {} holds too many token tasks", id));
      const Batch* b = m.running();
      if (b && b->prompt_requests.size() > 1 &&
          b->prompt_tokens > cluster_.config().scheduler.prompt_token_cap)
        throw InternalError(fmt::format("machine {} batched prompts past the cap", id));
    }
    cluster_.check_pools();
  }

  void journal(JournalEntry entry) {
    if (options_.record_journal) result_.journal.push_back(std::move(entry));
  }

  void note(std::string text, bool replace = true) {
    if (!options_.record_event_log) return;
    if (replace) payload_ = std::move(text);
    else payload_ += text;
  }

  Cluster cluster_;
  const Trace& trace_;
  EngineOptions options_;
  SimulationResult result_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> heap_;
  std::uint64_t next_seq_ = 0;
  std::size_t next_arrival_ = 0;
  std::size_t completed_ = 0;
  SimTime horizon_ = 0;
  std::vector<MachineId> touched_;
  std::string payload_;
};

}  // namespace

SimulationResult simulate(const ClusterConfig& config,
                          const std::map<MachineType, PerfModel>& models, const Trace& trace,
                          const EngineOptions& options) {
  Engine engine(config, models, trace, options);
  return engine.run();
}

void write_event_log(std::ostream& out, const SimulationResult& result) {
  out << "time_s,seq,kind,payload\n";
  for (const std::string& line : result.event_log) out << line << '\n';
}

RunOutput run(const ClusterConfig& config, const std::map<MachineType, PerfModel>& models,
              const Trace& trace, const PerfModel& reference, const SloTable& slo,
              const MetricsOptions& metrics, const EngineOptions& options) {
  RunOutput out;
  out.sim = simulate(config, models, trace, options);
  out.report = build_report(out.sim.records, out.sim.machines, trace, reference, slo, metrics);
  return out;
}

}  // namespace splitsim
