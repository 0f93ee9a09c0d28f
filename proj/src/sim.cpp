/* Copyright 2026 The adrenaline-sim Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "adrenaline/sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "adrenaline/errors.hpp"
#include "adrenaline/metrics.hpp"

namespace adrenaline {

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::kArrival:
      return "arrival";
    case EventKind::kPrefillDone:
      return "prefill_done";
    case EventKind::kKvTransferDone:
      return "kv_transfer_done";
    case EventKind::kDecodeStepDone:
      return "decode_step_done";
    case EventKind::kPreempt:
      return "preempt";
    case EventKind::kResume:
      return "resume";
    case EventKind::kMetricSample:
      return "metric_sample";
    case EventKind::kTopologyChange:
      return "topology_change";
  }
  return "?";
}

StepResult decode_step_timing(const StepCostModel& cost, const StepInputs& in) {
  if (in.local_batch < 0 || in.offloaded_batch < 0) {
    throw Error("decode step batch sizes must be >= 0");
  }
  StepResult res;
  auto& t = res.timing;
  t.local_attn = attention_step_latency(in.local_kv_bytes, cost.gpu.hbm_bandwidth);
  for (const auto& [bytes, bw] : in.remote) {
    t.remote_attn = std::max(t.remote_attn, attention_step_latency(bytes, bw));
  }
  if (in.offloaded_batch > 0 && !cost.ideal_sync) {
    // Per layer: q, k, v of each offloaded token go out, one attention output
    // per token comes back.
    const double msg = cost.model.bytes_per_element *
                       static_cast<double>(cost.model.hidden_size) *
                       static_cast<double>(cost.model.num_layers) *
                       static_cast<double>(in.offloaded_batch);
    t.qkv_send = 3.0 * msg / cost.gpu.interconnect_bw;
    t.attn_recv = msg / cost.gpu.interconnect_bw;
  }

  std::int64_t padded = in.local_batch + in.offloaded_batch;
  if (cost.grid) {
    const auto& g = *cost.grid;
    const std::int64_t co = cost.offload_axis ? in.offloaded_batch : 0;
    const std::int64_t cd = cost.offload_axis ? in.local_batch
                                              : in.local_batch + in.offloaded_batch;
    if (cd <= g.max_cd() && co <= g.max_co()) {
      res.graphed = true;
      res.graph = select_graph(cd, co, g);
      if (!cost.offload_axis) res.graph.co = 0;
      padded = res.graph.cd + res.graph.co;
    }
  }
  t.nonattn = nonattn_step_latency(cost.model, cost.gpu, padded, cost.b_max);
  const double per_layer_gpu =
      (t.nonattn + t.local_attn) / static_cast<double>(cost.model.num_layers);
  t.launch = launch_overhead(cost.model.num_layers, res.graphed, cost.gpu,
                             per_layer_gpu, cost.replay_cost);
  t.stall = std::max(0.0, t.qkv_send + t.remote_attn + t.attn_recv - t.local_attn);
  return res;
}

namespace {

using nlohmann::json;

// Fraction of a KV budget kept free when admitting, so the running set can
// grow for a few steps before preemption kicks in.
constexpr double kAdmitWatermark = 0.01;
constexpr double kMemSlack = 1e-6;

enum class Phase {
  kWaiting,       // submitted, arrival not yet processed
  kQueued,        // waiting for a prefill slot
  kPrefilling,
  kPendingAdmit,  // prefilled, waiting for decoder or executor memory
  kTransferring,
  kReady,         // admitted, joins the next decode step
  kRunning,
  kPreempted,
  kDone,
};

enum class Where { kNone, kPrefillPool, kExecutor, kDecoder };

struct Holding {
  Where where = Where::kNone;
  std::size_t inst = 0;
  double bytes = 0.0;
};

struct RState {
  Request req;
  RequestRecord rec;
  Phase phase = Phase::kWaiting;
  std::int64_t generated = 0;
  std::size_t prefill = 0;
  std::size_t decoder = 0;
  bool decided = false;
  bool recompute = false;
  bool resumed = false;
  Holding held;
  Holding reserved;
  double promise = 0.0;
  double last_token = 0.0;
  std::uint64_t transfer_seq = 0;
};

struct PrefillInst {
  bool active = true;
  bool busy = false;
  std::deque<std::size_t> queue;
  std::deque<std::size_t> resume_queue;
  std::vector<std::size_t> batch;
  double prefill_kv = 0.0;
  double exec_kv = 0.0;
  double exec_reserved = 0.0;
  double mem_stamp = 0.0;
};

struct DecoderInst {
  std::deque<std::size_t> pending;
  std::deque<std::size_t> resume_wait;
  std::deque<std::size_t> offload_wait;
  std::deque<std::size_t> preempted;
  std::vector<std::size_t> ready;
  std::vector<std::size_t> local;
  std::vector<std::size_t> offloaded;
  std::set<std::size_t> admitted;
  bool in_step = false;
  std::vector<std::size_t> step_members;
  StepRecord step;
  double resident = 0.0;
  double reserved = 0.0;
  double promised = 0.0;
  std::size_t promised_count = 0;
  double mem_stamp = 0.0;
  double last_saturation = -1.0;
  std::int64_t assigned = 0;
};

struct TopologyChange {
  std::size_t instance = 0;
  bool active = true;
};

// Adds `amount` spread uniformly over [t0, t1] into fixed-width bins.
void spread(std::vector<double>& bins, double period, double t0, double t1,
            double amount) {
  if (amount == 0.0) return;
  auto bin_of = [&](double t) { return static_cast<std::size_t>(std::floor(t / period)); };
  auto grow = [&](std::size_t i) {
    if (bins.size() <= i) bins.resize(i + 1, 0.0);
  };
  if (!(t1 > t0)) {
    const auto i = bin_of(t0);
    grow(i);
    bins[i] += amount;
    return;
  }
  const double rate = amount / (t1 - t0);
  std::size_t i = bin_of(t0);
  double t = t0;
  while (t < t1) {
    const double e = std::min(static_cast<double>(i + 1) * period, t1);
    grow(i);
    if (e > t) bins[i] += rate * (e - t);
    t = std::max(t, e);
    ++i;
  }
}

}  // namespace

struct Simulator::Impl {
  SimConfig cfg;
  GlobalScheduler sched;
  StepCostModel cost;
  SmPartition partition;
  double attn_bw = 0.0;
  double dec_budget = 0.0;
  double prefill_pool = 0.0;
  double exec_budget = 0.0;
  double kvpt = 0.0;

  std::priority_queue<Event, std::vector<Event>, EventAfter> events;
  std::uint64_t next_seq = 0;
  std::size_t pending_work_events = 0;
  bool sample_scheduled = false;
  double clock = 0.0;

  std::vector<RState> reqs;
  std::vector<PrefillInst> pf;
  std::vector<DecoderInst> dec;
  std::vector<TopologyChange> topo;
  std::size_t unfinished = 0;

  SimulationReport report;
  std::vector<Event> log;

  static GlobalScheduler make_scheduler(const SimConfig& c, std::int64_t b) {
    SchedulerConfig sc = c.scheduler;
    sc.b_max = b;
    const double budget = c.cluster.gpu_memory_utilization * c.gpu.hbm_capacity -
                          c.model.weight_bytes;
    return GlobalScheduler(sc, c.cluster.num_decoding,
                           DecoderResources{budget, c.gpu.hbm_bandwidth});
  }

  static std::int64_t resolve_b_max(const SimConfig& c) {
    if (c.b_max_override > 0) return c.b_max_override;
    return b_max(c.model, c.gpu, c.b_max_cap).batch;
  }

  explicit Impl(SimConfig config)
      : cfg((config.validate(), std::move(config))),
        sched(make_scheduler(cfg, resolve_b_max(cfg))) {
    const auto bm = resolve_b_max(cfg);
    kvpt = cfg.model.kv_bytes_per_token;
    dec_budget = cfg.cluster.gpu_memory_utilization * cfg.gpu.hbm_capacity -
                 cfg.model.weight_bytes;
    prefill_pool = (1.0 - cfg.cluster.activation_reserve) * cfg.gpu.hbm_capacity -
                   cfg.model.weight_bytes;
    exec_budget = prefill_pool - cfg.cluster.prefill_kv_reserve;

    if (!cfg.offload_enabled()) {
      partition = SmPartition::with_prefill_ratio(1.0);
    } else if (cfg.colocation.ttft_slo) {
      const auto tokens = cfg.colocation.expected_prompt_tokens > 0
                              ? cfg.colocation.expected_prompt_tokens
                              : cfg.cluster.max_prefill_tokens;
      partition = min_sm_ratio_for_slo(*cfg.colocation.ttft_slo, tokens, cfg.model,
                                       cfg.gpu, cfg.curves, cfg.colocation.grid_step);
    } else {
      partition = SmPartition::with_prefill_ratio(cfg.colocation.prefill_sm_ratio);
    }
    attn_bw = attn_bw_fraction(partition.attn_sm_ratio, cfg.curves) *
              cfg.gpu.hbm_bandwidth;

    cost.model = cfg.model;
    cost.gpu = cfg.gpu;
    cost.b_max = bm;
    cost.replay_cost = cfg.graphs.replay_cost;
    cost.ideal_sync = cfg.sim.ideal_sync;
    cost.offload_axis = cfg.offload_enabled();
    if (cfg.graphs.enabled) {
      cost.grid = build_grid(cfg.graphs.max_local,
                             cfg.offload_enabled() ? cfg.graphs.max_offloaded : 1,
                             cfg.graphs.interval, cfg.graphs.budget);
    }

    pf.resize(cfg.cluster.num_prefill);
    dec.resize(cfg.cluster.num_decoding);
    report.sample_period = cfg.sim.sample_period;
    report.partition = partition;
    report.b_max = bm;
    {
      ExperimentConfig ec;
      ec.sim = cfg;
      auto j = to_json(ec);
      j.erase("workload");
      report.config_hash = content_hash(j.dump());
    }
    for (std::size_t i = 0; i < pf.size(); ++i) {
      UtilizationSeries s;
      s.kind = "prefill";
      s.instance = i;
      s.capacity = cfg.gpu.hbm_capacity;
      s.bandwidth = cfg.gpu.hbm_bandwidth;
      report.prefill.push_back(s);
    }
    for (std::size_t i = 0; i < dec.size(); ++i) {
      UtilizationSeries s;
      s.kind = "decoding";
      s.instance = i;
      s.capacity = cfg.gpu.hbm_capacity;
      s.bandwidth = cfg.gpu.hbm_bandwidth;
      report.decoding.push_back(s);
    }
    sched.on_topology_change(executor_resources());
  }

  // --- bookkeeping -------------------------------------------------------

  std::vector<ExecutorResources> executor_resources() const {
    std::vector<ExecutorResources> out;
    if (!cfg.offload_enabled()) return out;
    for (std::size_t i = 0; i < pf.size(); ++i) {
      if (!pf[i].active) continue;
      out.push_back({static_cast<std::int64_t>(i), exec_budget, attn_bw});
    }
    return out;
  }

  bool any_executor() const {
    if (!cfg.offload_enabled()) return false;
    return std::any_of(pf.begin(), pf.end(), [](const PrefillInst& p) { return p.active; });
  }

  void push(double time, EventKind kind, std::int64_t target) {
    Event e{time, next_seq++, kind, target};
    if (kind != EventKind::kMetricSample) ++pending_work_events;
    events.push(e);
  }

  std::uint64_t push_seq(double time, EventKind kind, std::int64_t target) {
    const auto seq = next_seq;
    push(time, kind, target);
    return seq;
  }

  double prefill_usage(const PrefillInst& p) const {
    return cfg.model.weight_bytes + p.prefill_kv + p.exec_kv + p.exec_reserved;
  }

  double decoder_usage(const DecoderInst& d) const {
    return cfg.model.weight_bytes + d.resident + d.reserved;
  }

  void touch_prefill(std::size_t i) {
    auto& p = pf[i];
    spread(report.prefill[i].hbm_byte_seconds, report.sample_period, p.mem_stamp, clock,
           prefill_usage(p) * (clock - p.mem_stamp));
    p.mem_stamp = clock;
  }

  void touch_decoder(std::size_t i) {
    auto& d = dec[i];
    spread(report.decoding[i].hbm_byte_seconds, report.sample_period, d.mem_stamp, clock,
           decoder_usage(d) * (clock - d.mem_stamp));
    d.mem_stamp = clock;
  }

  void touch(Where w, std::size_t inst) {
    if (w == Where::kDecoder) {
      touch_decoder(inst);
    } else if (w != Where::kNone) {
      touch_prefill(inst);
    }
  }

  double& held_pool(Where w, std::size_t inst) {
    switch (w) {
      case Where::kPrefillPool:
        return pf[inst].prefill_kv;
      case Where::kExecutor:
        return pf[inst].exec_kv;
      case Where::kDecoder:
        return dec[inst].resident;
      case Where::kNone:
        break;
    }
    throw SimulationError("no memory pool for an unplaced request");
  }

  double& reserved_pool(Where w, std::size_t inst) {
    if (w == Where::kDecoder) return dec[inst].reserved;
    if (w == Where::kExecutor) return pf[inst].exec_reserved;
    throw SimulationError("only decoders and executors take reservations");
  }

  void alloc(RState& r, Where w, std::size_t inst, double bytes) {
    if (r.held.where == Where::kNone) {
      r.held = {w, inst, 0.0};
    } else if (r.held.where != w || r.held.inst != inst) {
      throw SimulationError("request KV split across pools");
    }
    touch(w, inst);
    held_pool(w, inst) += bytes;
    r.held.bytes += bytes;
    r.rec.kv_allocated += bytes;
  }

  void release(RState& r) {
    if (r.held.where == Where::kNone) return;
    touch(r.held.where, r.held.inst);
    held_pool(r.held.where, r.held.inst) -= r.held.bytes;
    r.rec.kv_freed += r.held.bytes;
    r.held = {};
  }

  void reserve(RState& r, Where w, std::size_t inst, double bytes) {
    touch(w, inst);
    reserved_pool(w, inst) += bytes;
    r.reserved = {w, inst, bytes};
    r.rec.kv_allocated += bytes;
  }

  void cancel_reservation(RState& r) {
    if (r.reserved.where == Where::kNone) return;
    touch(r.reserved.where, r.reserved.inst);
    reserved_pool(r.reserved.where, r.reserved.inst) -= r.reserved.bytes;
    r.rec.kv_freed += r.reserved.bytes;
    r.reserved = {};
  }

  // Source copy is dropped; the reservation becomes the resident copy.
  void land(RState& r) {
    release(r);
    const auto dst = r.reserved;
    touch(dst.where, dst.inst);
    reserved_pool(dst.where, dst.inst) -= dst.bytes;
    held_pool(dst.where, dst.inst) += dst.bytes;
    r.held = dst;
    r.reserved = {};
  }

  double prefill_free(const PrefillInst& p) const {
    return prefill_pool - p.prefill_kv - p.exec_kv - p.exec_reserved;
  }

  double executor_free(const PrefillInst& p) const {
    return std::min(exec_budget - p.exec_kv - p.exec_reserved, prefill_free(p));
  }

  double decoder_free(const DecoderInst& d, double own_promise = 0.0) const {
    return dec_budget - d.resident - d.reserved - (d.promised - own_promise);
  }

  std::size_t local_count(const DecoderInst& d) const {
    std::size_t n = 0;
    for (auto i : d.admitted) n += reqs[i].req.offloaded ? 0 : 1;
    return n;
  }

  void record_saturation(std::size_t di) {
    auto& d = dec[di];
    if (d.last_saturation == clock) return;
    d.last_saturation = clock;
    report.saturation_times.push_back(clock);
  }

  // --- request lifecycle -------------------------------------------------

  void enqueue_prefill(std::size_t idx, bool resume) {
    std::vector<double> loads;
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < pf.size(); ++i) {
      if (!pf[i].active) continue;
      ids.push_back(i);
      loads.push_back(static_cast<double>(pf[i].queue.size() + pf[i].resume_queue.size() +
                                          pf[i].batch.size()));
    }
    if (ids.empty()) throw SimulationError("no active prefill instance");
    const auto p = ids[least_loaded(loads)];
    auto& r = reqs[idx];
    r.prefill = p;
    r.phase = Phase::kQueued;
    (resume ? pf[p].resume_queue : pf[p].queue).push_back(idx);
    try_prefill(p);
  }

  void on_arrival(std::size_t idx) {
    auto& r = reqs[idx];
    std::vector<double> dl;
    for (const auto& d : dec) dl.push_back(static_cast<double>(d.assigned));
    r.decoder = least_loaded(dl);
    r.rec.decoder = r.decoder;
    ++dec[r.decoder].assigned;
    enqueue_prefill(idx, false);
  }

  void try_prefill(std::size_t pi) {
    auto& p = pf[pi];
    if (p.busy || !p.active) return;
    std::int64_t tokens = 0;
    const double free0 = prefill_free(p);
    double free = free0;
    std::vector<std::size_t> batch;
    while (true) {
      const bool resume = !p.resume_queue.empty();
      auto* q = resume ? &p.resume_queue : &p.queue;
      if (q->empty()) break;
      const auto& r = reqs[q->front()];
      const std::int64_t t = r.recompute ? r.req.used_token - 1 : r.req.prompt_tokens;
      if (!batch.empty() && tokens + t > cfg.cluster.max_prefill_tokens) break;
      const double b = kv_bytes(cfg.model, t);
      if (b > free) break;
      // New prompts only use the prefill engine's own share of the pool.
      // Prefilled KV waiting for a decoder thus backs up the prompt queue
      // instead of the pool, and recomputes of preempted requests always
      // find room.
      if (!resume && p.prefill_kv + (free0 - free) + b > cfg.cluster.prefill_kv_reserve &&
          !(batch.empty() && p.prefill_kv == 0.0)) {
        break;
      }
      free -= b;
      tokens += t;
      batch.push_back(q->front());
      q->pop_front();
    }
    if (batch.empty()) return;
    for (auto idx : batch) {
      auto& r = reqs[idx];
      const std::int64_t t = r.recompute ? r.req.used_token - 1 : r.req.prompt_tokens;
      alloc(r, Where::kPrefillPool, pi, kv_bytes(cfg.model, t));
      r.phase = Phase::kPrefilling;
    }
    p.busy = true;
    p.batch = batch;
    const auto kc = prefill_cost(cfg.model, cfg.gpu, tokens, partition.prefill_sm_ratio,
                                 cfg.curves);
    auto& s = report.prefill[pi];
    spread(s.bw_bytes, report.sample_period, clock, clock + kc.gpu_time, kc.bytes_moved);
    spread(s.compute_seconds, report.sample_period, clock, clock + kc.gpu_time,
           kc.flops / cfg.gpu.flops_peak);
    push(clock + kc.gpu_time, EventKind::kPrefillDone, static_cast<std::int64_t>(pi));
  }

  DecodeLoad current_load(const DecoderInst& d) const {
    std::vector<Request> local;
    std::vector<Request> off;
    for (auto i : d.admitted) {
      (reqs[i].req.offloaded ? off : local).push_back(reqs[i].req);
    }
    return summarize_load(local, off);
  }

  void on_prefill_done(std::size_t pi) {
    auto& p = pf[pi];
    p.busy = false;
    auto batch = std::move(p.batch);
    p.batch.clear();
    std::set<std::size_t> touched;
    for (auto idx : batch) {
      auto& r = reqs[idx];
      if (!r.recompute) {
        r.generated = 1;
        r.req.used_token = r.req.prompt_tokens + 1;
      }
      r.resumed = r.recompute;
      r.recompute = false;
      if (r.generated >= r.rec.output_tokens) {
        r.rec.ttft = clock - r.req.arrival_time;
        finish(idx);
        continue;
      }
      auto& d = dec[r.decoder];
      if (!r.decided) {
        const auto dec_out = sched.decide(r.req, r.decoder, current_load(d));
        r.decided = true;
        r.req.offloaded = dec_out.offload;
        r.rec.offloaded = dec_out.offload;
        r.rec.admitted_by_c1 = dec_out.offload && dec_out.c1;
        r.rec.decision_ob = dec_out.ob;
      }
      r.phase = Phase::kPendingAdmit;
      if (r.req.offloaded) {
        if (r.resumed) {
          d.offload_wait.push_front(idx);
        } else {
          d.offload_wait.push_back(idx);
        }
      } else if (r.resumed) {
        d.resume_wait.push_back(idx);
      } else {
        d.pending.push_back(idx);
      }
      touched.insert(r.decoder);
    }
    for (auto di : touched) try_admit(di);
    try_prefill(pi);
    for (auto di : touched) maybe_start_step(di);
  }

  void make_ready(std::size_t idx) {
    auto& r = reqs[idx];
    r.phase = Phase::kReady;
    dec[r.decoder].ready.push_back(idx);
    if (std::isnan(r.rec.ttft)) {
      r.rec.ttft = clock - r.req.arrival_time;
      r.last_token = clock;
    }
  }

  void start_transfer(std::size_t idx, Where w, std::size_t inst) {
    auto& r = reqs[idx];
    reserve(r, w, inst, r.held.bytes);
    r.phase = Phase::kTransferring;
    const double dt = r.held.bytes / cfg.gpu.interconnect_bw;
    r.transfer_seq = push_seq(clock + dt, EventKind::kKvTransferDone,
                              static_cast<std::int64_t>(idx));
  }

  void admit(std::size_t idx) {
    auto& r = reqs[idx];
    auto& d = dec[r.decoder];
    d.admitted.insert(idx);
    sched.mark_running(r.decoder, r.req.id, r.req.offloaded);
  }

  // Least KV resident among executors with room; ties to the lowest index.
  std::optional<std::size_t> pick_executor(const RState& r, double need) const {
    const double wm = kAdmitWatermark * exec_budget;
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < pf.size(); ++i) {
      if (!pf[i].active) continue;
      // KV already in this instance's pool moves without a copy.
      const bool local_copy = r.held.where == Where::kPrefillPool && r.held.inst == i;
      const double room = local_copy ? exec_budget - pf[i].exec_kv - pf[i].exec_reserved
                                     : executor_free(pf[i]);
      if (need + wm > room) continue;
      if (!best || pf[i].exec_kv + pf[i].exec_reserved <
                       pf[*best].exec_kv + pf[*best].exec_reserved) {
        best = i;
      }
    }
    return best;
  }

  void try_admit(std::size_t di) {
    auto& d = dec[di];
    while (!d.offload_wait.empty()) {
      const auto idx = d.offload_wait.front();
      auto& r = reqs[idx];
      if (!any_executor()) {
        d.offload_wait.pop_front();
        r.req.offloaded = false;
        (r.resumed ? d.resume_wait : d.pending).push_front(idx);
        continue;
      }
      const auto e = pick_executor(r, r.held.bytes);
      if (!e) break;
      d.offload_wait.pop_front();
      admit(idx);
      if (r.held.where == Where::kPrefillPool && r.held.inst == *e) {
        touch_prefill(*e);
        pf[*e].prefill_kv -= r.held.bytes;
        pf[*e].exec_kv += r.held.bytes;
        r.held.where = Where::kExecutor;
        make_ready(idx);
      } else {
        start_transfer(idx, Where::kExecutor, *e);
      }
    }
    const double wm = kAdmitWatermark * dec_budget;
    while (true) {
      std::deque<std::size_t>* q = nullptr;
      if (!d.resume_wait.empty()) {
        q = &d.resume_wait;
      } else if (d.preempted.empty() && d.promised_count == 0 && !d.pending.empty()) {
        q = &d.pending;
      } else {
        break;
      }
      const auto idx = q->front();
      auto& r = reqs[idx];
      const double need = r.held.bytes;
      const double headroom =
          wm + kvpt * static_cast<double>(local_count(d) + 1);
      if (need + headroom > decoder_free(d, r.promise)) {
        record_saturation(di);
        break;
      }
      q->pop_front();
      if (r.promise > 0.0) {
        d.promised -= r.promise;
        --d.promised_count;
        r.promise = 0.0;
      }
      admit(idx);
      start_transfer(idx, Where::kDecoder, di);
    }
  }

  void on_transfer_done(const Event& e) {
    const auto idx = static_cast<std::size_t>(e.target);
    auto& r = reqs[idx];
    if (r.phase != Phase::kTransferring || r.transfer_seq != e.seq) return;
    const auto src = r.held;
    land(r);
    make_ready(idx);
    if (src.where == Where::kPrefillPool) try_prefill(src.inst);
    maybe_start_step(r.decoder);
  }

  void finish(std::size_t idx) {
    auto& r = reqs[idx];
    release(r);
    cancel_reservation(r);
    r.phase = Phase::kDone;
    r.rec.completed = true;
    r.rec.completion_time = clock;
    auto& d = dec[r.decoder];
    if (d.admitted.erase(idx)) sched.mark_finished(r.decoder, r.req.id);
    --d.assigned;
    --unfinished;
  }

  void preempt(std::size_t idx, bool executor_side) {
    auto& r = reqs[idx];
    auto& d = dec[r.decoder];
    release(r);
    r.phase = Phase::kPreempted;
    r.recompute = true;
    ++r.rec.preemptions;
    if (executor_side) {
      ++report.executor_preemptions;
    } else {
      ++report.preemptions;
      record_saturation(r.decoder);
    }
    auto& lst = r.req.offloaded ? d.offloaded : d.local;
    lst.erase(std::remove(lst.begin(), lst.end(), idx), lst.end());
    if (d.admitted.erase(idx)) sched.mark_finished(r.decoder, r.req.id);
    d.preempted.push_back(idx);
    push(clock, EventKind::kPreempt, static_cast<std::int64_t>(idx));
  }

  // Sends preempted requests back to prefill once their KV can come back.
  void dispatch_preempted(std::size_t di) {
    auto& d = dec[di];
    const double wm = kAdmitWatermark * dec_budget;
    while (!d.preempted.empty()) {
      const auto idx = d.preempted.front();
      auto& r = reqs[idx];
      const double need = kv_bytes(cfg.model, r.req.used_token - 1);
      if (r.req.offloaded && any_executor()) {
        bool room = false;
        for (const auto& p : pf) {
          room = room || (p.active && need + kAdmitWatermark * exec_budget <= executor_free(p));
        }
        if (!room) break;
      } else {
        r.req.offloaded = false;
        const double headroom = wm + kvpt * static_cast<double>(local_count(d) + 1);
        if (need + headroom > decoder_free(d)) break;
        r.promise = need;
        d.promised += need;
        ++d.promised_count;
      }
      d.preempted.pop_front();
      r.phase = Phase::kQueued;
      push(clock, EventKind::kResume, static_cast<std::int64_t>(idx));
    }
  }

  // --- decode steps ------------------------------------------------------

  double model_step_latency(std::int64_t b, double mean_kv) const {
    const double per_layer = 0.0;
    return launch_overhead(cfg.model.num_layers, cost.grid.has_value(), cfg.gpu, per_layer,
                           cfg.graphs.replay_cost) +
           nonattn_step_latency(cfg.model, cfg.gpu, b, cost.b_max) +
           static_cast<double>(b) * mean_kv / cfg.gpu.hbm_bandwidth;
  }

  void maybe_start_step(std::size_t di) {
    auto& d = dec[di];
    if (d.in_step) return;
    for (auto idx : d.ready) {
      auto& r = reqs[idx];
      r.phase = Phase::kRunning;
      (r.req.offloaded ? d.offloaded : d.local).push_back(idx);
    }
    d.ready.clear();
    if (d.local.empty() && d.offloaded.empty()) return;

    // Each running request writes one more token of KV this step.
    auto local_overflow = [&] {
      return d.resident + d.reserved + kvpt * static_cast<double>(d.local.size()) >
             dec_budget + kMemSlack;
    };
    while (!d.local.empty() && local_overflow()) {
      preempt(latest(d.local), false);
    }
    for (std::size_t e = 0; e < pf.size(); ++e) {
      auto count_on = [&] {
        std::size_t n = 0;
        for (auto idx : d.offloaded) n += reqs[idx].held.inst == e ? 1 : 0;
        return n;
      };
      while (true) {
        const double growth = kvpt * static_cast<double>(count_on());
        if (growth == 0.0 || growth <= executor_free(pf[e]) + kMemSlack) break;
        std::vector<std::size_t> on;
        for (auto idx : d.offloaded) {
          if (reqs[idx].held.inst == e) on.push_back(idx);
        }
        preempt(latest(on), true);
      }
    }
    if (d.local.empty() && d.offloaded.empty()) {
      dispatch_preempted(di);
      return;
    }

    StepInputs in;
    in.local_batch = static_cast<std::int64_t>(d.local.size());
    in.offloaded_batch = static_cast<std::int64_t>(d.offloaded.size());
    for (auto idx : d.local) {
      alloc(reqs[idx], Where::kDecoder, di, kvpt);
      in.local_kv_bytes += reqs[idx].held.bytes;
    }
    std::vector<double> remote(pf.size(), 0.0);
    for (auto idx : d.offloaded) {
      auto& r = reqs[idx];
      alloc(r, Where::kExecutor, r.held.inst, kvpt);
      remote[r.held.inst] += r.held.bytes;
    }
    const double share = attn_bw / static_cast<double>(dec.size());
    for (std::size_t e = 0; e < pf.size(); ++e) {
      if (remote[e] > 0.0) in.remote.emplace_back(remote[e], share);
    }
    const auto res = decode_step_timing(cost, in);

    d.in_step = true;
    d.step_members = d.local;
    d.step_members.insert(d.step_members.end(), d.offloaded.begin(), d.offloaded.end());
    d.step = StepRecord{di,
                        clock,
                        clock + res.timing.total(),
                        res.timing,
                        in.local_batch,
                        in.offloaded_batch,
                        res.graphed,
                        res.graph};

    auto& s = report.decoding[di];
    const double end = d.step.end;
    spread(s.bw_bytes, report.sample_period, clock, end,
           in.local_kv_bytes + cfg.model.bytes_per_decode_step_nonattn);
    const double batch = static_cast<double>(in.local_batch + in.offloaded_batch);
    spread(s.compute_seconds, report.sample_period, clock, end,
           res.timing.nonattn * std::min(1.0, batch / static_cast<double>(cost.b_max)));
    for (std::size_t e = 0; e < pf.size(); ++e) {
      if (remote[e] <= 0.0) continue;
      spread(report.prefill[e].bw_bytes, report.sample_period, clock,
             clock + remote[e] / share, remote[e]);
    }
    push(end, EventKind::kDecodeStepDone, static_cast<std::int64_t>(di));
  }

  std::size_t latest(const std::vector<std::size_t>& idxs) const {
    return *std::max_element(idxs.begin(), idxs.end(), [&](std::size_t a, std::size_t b) {
      const auto& ra = reqs[a].req;
      const auto& rb = reqs[b].req;
      if (ra.arrival_time != rb.arrival_time) return ra.arrival_time < rb.arrival_time;
      return ra.id < rb.id;
    });
  }

  void on_step_done(std::size_t di) {
    auto& d = dec[di];
    d.in_step = false;
    const auto step = d.step;
    report.steps.push_back(step);
    std::vector<std::size_t> done;
    for (auto idx : d.step_members) {
      auto& r = reqs[idx];
      if (r.phase != Phase::kRunning) continue;
      ++r.req.used_token;
      ++r.generated;
      r.rec.tpot_samples.push_back(clock - r.last_token);
      r.last_token = clock;
      r.rec.stall_total += step.timing.stall;
      if (r.generated >= r.rec.output_tokens) done.push_back(idx);
    }
    d.step_members.clear();
    for (auto idx : done) {
      auto& lst = reqs[idx].req.offloaded ? d.offloaded : d.local;
      lst.erase(std::remove(lst.begin(), lst.end(), idx), lst.end());
      finish(idx);
    }

    double kv_sum = 0.0;
    for (auto idx : d.local) kv_sum += reqs[idx].held.bytes;
    const double mean_kv = d.local.empty()
                               ? kv_bytes(cfg.model, std::max<std::int64_t>(
                                                         1, cfg.colocation.expected_prompt_tokens))
                               : kv_sum / static_cast<double>(d.local.size());
    sched.observe_step(di, step.local_batch, step.end - step.start,
                       [&](std::int64_t b) { return model_step_latency(b, mean_kv); });

    dispatch_preempted(di);
    try_admit(di);
    for (std::size_t p = 0; p < pf.size(); ++p) try_prefill(p);
    maybe_start_step(di);
  }

  void on_resume(std::size_t idx) { enqueue_prefill(idx, true); }

  void on_sample() {
    for (std::size_t i = 0; i < dec.size(); ++i) {
      const auto& d = dec[i];
      report.decoding[i].batch_samples.emplace_back(
          clock, static_cast<std::int64_t>(d.local.size() + d.offloaded.size()));
    }
  }

  // --- topology ----------------------------------------------------------

  void relocate(std::size_t idx) {
    auto& r = reqs[idx];
    auto& d = dec[r.decoder];
    const double need = r.held.bytes;
    if (r.phase == Phase::kRunning || r.phase == Phase::kReady) {
      auto& lst = r.phase == Phase::kRunning ? d.offloaded : d.ready;
      lst.erase(std::remove(lst.begin(), lst.end(), idx), lst.end());
    }
    std::optional<std::size_t> target;
    for (std::size_t i = 0; i < pf.size(); ++i) {
      if (!pf[i].active || !cfg.offload_enabled()) continue;
      if (need + kAdmitWatermark * exec_budget > executor_free(pf[i])) continue;
      if (!target || pf[i].exec_kv + pf[i].exec_reserved <
                         pf[*target].exec_kv + pf[*target].exec_reserved) {
        target = i;
      }
    }
    if (target) {
      start_transfer(idx, Where::kExecutor, *target);
      return;
    }
    if (need + kAdmitWatermark * dec_budget + kvpt <= decoder_free(d)) {
      sched.mark_finished(r.decoder, r.req.id);
      r.req.offloaded = false;
      sched.mark_running(r.decoder, r.req.id, false);
      start_transfer(idx, Where::kDecoder, r.decoder);
      return;
    }
    r.phase = Phase::kRunning;
    d.offloaded.push_back(idx);
    preempt(idx, true);
  }

  void on_topology(std::size_t ti) {
    const auto change = topo[ti];
    if (change.instance >= pf.size()) {
      throw SimulationError("topology change names unknown prefill instance " +
                            std::to_string(change.instance));
    }
    auto& p = pf[change.instance];
    if (p.active == change.active) return;
    p.active = change.active;
    if (!change.active) {
      std::deque<std::size_t> moved;
      moved.insert(moved.end(), p.resume_queue.begin(), p.resume_queue.end());
      moved.insert(moved.end(), p.queue.begin(), p.queue.end());
      const std::size_t resumes = p.resume_queue.size();
      p.resume_queue.clear();
      p.queue.clear();
      for (std::size_t i = 0; i < moved.size(); ++i) enqueue_prefill(moved[i], i < resumes);
      std::vector<std::size_t> victims;
      for (std::size_t i = 0; i < reqs.size(); ++i) {
        const auto& r = reqs[i];
        if (r.phase == Phase::kDone) continue;
        const bool held_here = r.held.where == Where::kExecutor && r.held.inst == change.instance;
        const bool bound_here =
            r.reserved.where == Where::kExecutor && r.reserved.inst == change.instance;
        if (held_here || bound_here) victims.push_back(i);
      }
      for (auto idx : victims) {
        auto& r = reqs[idx];
        if (r.phase == Phase::kTransferring) {
          cancel_reservation(r);
          r.phase = Phase::kReady;
        }
        relocate(idx);
      }
    }
    sched.on_topology_change(executor_resources());
    for (std::size_t di = 0; di < dec.size(); ++di) {
      dispatch_preempted(di);
      try_admit(di);
      maybe_start_step(di);
    }
    for (std::size_t i = 0; i < pf.size(); ++i) try_prefill(i);
  }

  // --- driver ------------------------------------------------------------

  void check_invariants() const {
    const double tol = kMemSlack + 1.0;
    for (std::size_t i = 0; i < dec.size(); ++i) {
      const auto& d = dec[i];
      if (d.resident < -tol || d.reserved < -tol) {
        throw SimulationError("decoder " + std::to_string(i) + " has negative KV");
      }
      if (d.resident + d.reserved > dec_budget + tol) {
        throw SimulationError("decoder " + std::to_string(i) + " KV exceeds budget");
      }
    }
    for (std::size_t i = 0; i < pf.size(); ++i) {
      const auto& p = pf[i];
      if (p.exec_kv + p.exec_reserved > exec_budget + tol) {
        throw SimulationError("executor " + std::to_string(i) + " KV exceeds budget");
      }
      if (p.prefill_kv + p.exec_kv + p.exec_reserved > prefill_pool + tol) {
        throw SimulationError("prefill " + std::to_string(i) + " KV exceeds pool");
      }
    }
  }

  void step_event(const Event& e) {
    if (e.time < clock) throw SimulationError("event clock went backwards");
    clock = e.time;
    if (clock > cfg.sim.horizon) {
      throw SimulationError("simulated time passed the horizon of " +
                            std::to_string(cfg.sim.horizon) + " s");
    }
    if (e.kind != EventKind::kMetricSample) --pending_work_events;
    ++report.events_processed;
    if (cfg.sim.check_invariants) log.push_back(e);
    const auto t = static_cast<std::size_t>(e.target);
    switch (e.kind) {
      case EventKind::kArrival:
        on_arrival(t);
        break;
      case EventKind::kPrefillDone:
        on_prefill_done(t);
        break;
      case EventKind::kKvTransferDone:
        on_transfer_done(e);
        break;
      case EventKind::kDecodeStepDone:
        on_step_done(t);
        break;
      case EventKind::kPreempt:
        break;
      case EventKind::kResume:
        on_resume(t);
        break;
      case EventKind::kMetricSample:
        sample_scheduled = false;
        on_sample();
        if (unfinished > 0) schedule_sample();
        break;
      case EventKind::kTopologyChange:
        on_topology(t);
        break;
    }
    if (cfg.sim.check_invariants) check_invariants();
    if (unfinished > 0 && pending_work_events == 0) {
      throw SimulationError("no runnable work left with " + std::to_string(unfinished) +
                            " unfinished requests at t=" + std::to_string(clock));
    }
  }

  void schedule_sample() {
    if (sample_scheduled) return;
    const double period = report.sample_period;
    const double next = (std::floor(clock / period + 1e-9) + 1.0) * period;
    push(next, EventKind::kMetricSample, -1);
    sample_scheduled = true;
  }

  void submit(const Request& in) {
    if (in.arrival_time < clock) {
      throw Error("request " + std::to_string(in.id) + " arrives in the past");
    }
    if (in.prompt_tokens < 1 || in.max_token <= in.prompt_tokens) {
      throw Error("request " + std::to_string(in.id) + " needs >= 1 prompt and output token");
    }
    const double max_kv = kv_bytes(cfg.model, in.max_token);
    const bool fits_decoder = max_kv + kAdmitWatermark * dec_budget + kvpt <= dec_budget;
    const bool fits_executor =
        cfg.offload_enabled() && max_kv + kAdmitWatermark * exec_budget <= exec_budget;
    if (!fits_decoder && !fits_executor) {
      throw Error("request " + std::to_string(in.id) + " KV of " + std::to_string(max_kv) +
                  " bytes never fits a decoder");
    }
    if (kv_bytes(cfg.model, in.prompt_tokens) > prefill_pool) {
      throw Error("request " + std::to_string(in.id) + " prompt exceeds the prefill pool");
    }
    RState r;
    r.req = in;
    r.req.used_token = in.prompt_tokens;
    r.req.offloaded = false;
    r.rec.id = in.id;
    r.rec.arrival = in.arrival_time;
    r.rec.prompt_tokens = in.prompt_tokens;
    r.rec.output_tokens = in.output_tokens();
    reqs.push_back(std::move(r));
    ++unfinished;
    push(in.arrival_time, EventKind::kArrival, static_cast<std::int64_t>(reqs.size() - 1));
    schedule_sample();
  }

  void finalize() {
    for (std::size_t i = 0; i < pf.size(); ++i) touch_prefill(i);
    for (std::size_t i = 0; i < dec.size(); ++i) touch_decoder(i);
    report.end_time = clock;
    report.requests.clear();
    for (const auto& r : reqs) report.requests.push_back(r.rec);
    if (unfinished == 0) {
      for (const auto& r : reqs) {
        if (r.rec.kv_allocated != r.rec.kv_freed) {
          throw SimulationError("request " + std::to_string(r.req.id) +
                                " leaked KV: allocated " + std::to_string(r.rec.kv_allocated) +
                                ", freed " + std::to_string(r.rec.kv_freed));
        }
      }
    }
  }

  void run() {
    while (!events.empty()) {
      const Event e = events.top();
      events.pop();
      step_event(e);
      if (unfinished == 0 && pending_work_events == 0) break;
    }
    while (!events.empty()) events.pop();
    sample_scheduled = false;
    pending_work_events = 0;
    finalize();
  }
};

Simulator::Simulator(SimConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
Simulator::~Simulator() = default;
Simulator::Simulator(Simulator&&) noexcept = default;
Simulator& Simulator::operator=(Simulator&&) noexcept = default;

void Simulator::submit(const Request& req) { impl_->submit(req); }

void Simulator::schedule_topology_change(double time, std::size_t instance, bool active) {
  if (time < impl_->clock) throw Error("topology change scheduled in the past");
  impl_->topo.push_back({instance, active});
  impl_->push(time, EventKind::kTopologyChange,
              static_cast<std::int64_t>(impl_->topo.size() - 1));
}

void Simulator::run() { impl_->run(); }

SimulationReport Simulator::run_to_completion(const Workload& workload) {
  for (const auto& r : workload) submit(r);
  run();
  return impl_->report;
}

double Simulator::now() const { return impl_->clock; }
const SimConfig& Simulator::config() const { return impl_->cfg; }
const GlobalScheduler& Simulator::scheduler() const { return impl_->sched; }
const SimulationReport& Simulator::report() const { return impl_->report; }
const std::vector<Event>& Simulator::event_log() const { return impl_->log; }

namespace {

json timing_json(const StepTiming& t) {
  return {{"launch", t.launch},     {"qkv_send", t.qkv_send}, {"local_attn", t.local_attn},
          {"remote_attn", t.remote_attn}, {"attn_recv", t.attn_recv}, {"nonattn", t.nonattn},
          {"stall", t.stall}};
}

json step_json(const StepRecord& s) {
  return {{"decoder", s.decoder},
          {"start", s.start},
          {"end", s.end},
          {"local_batch", s.local_batch},
          {"offloaded_batch", s.offloaded_batch},
          {"graphed", s.graphed},
          {"graph", {s.graph.cd, s.graph.co}},
          {"timing", timing_json(s.timing)}};
}

json series_json(const UtilizationSeries& s) {
  json batches = json::array();
  for (const auto& [t, b] : s.batch_samples) batches.push_back({t, b});
  return {{"kind", s.kind},
          {"instance", s.instance},
          {"capacity", s.capacity},
          {"bandwidth", s.bandwidth},
          {"hbm_byte_seconds", s.hbm_byte_seconds},
          {"bw_bytes", s.bw_bytes},
          {"compute_seconds", s.compute_seconds},
          {"batch_samples", batches}};
}

}  // namespace

json SimulationReport::to_json() const {
  json reqs = json::array();
  for (const auto& r : requests) {
    double mean = 0.0;
    for (double v : r.tpot_samples) mean += v;
    if (!r.tpot_samples.empty()) mean /= static_cast<double>(r.tpot_samples.size());
    reqs.push_back({{"id", r.id},
                    {"arrival", r.arrival},
                    {"prompt_tokens", r.prompt_tokens},
                    {"output_tokens", r.output_tokens},
                    {"decoder", r.decoder},
                    {"offloaded", r.offloaded},
                    {"admitted_by_c1", r.admitted_by_c1},
                    {"decision_ob", r.decision_ob},
                    {"completed", r.completed},
                    {"ttft", r.ttft},
                    {"completion_time", r.completion_time},
                    {"tpot_count", r.tpot_samples.size()},
                    {"tpot_mean", mean},
                    {"tpot_p99", percentile_nearest_rank(r.tpot_samples, 99.0)},
                    {"preemptions", r.preemptions},
                    {"stall_total", r.stall_total}});
  }
  json pre = json::array();
  for (const auto& s : prefill) pre.push_back(series_json(s));
  json de = json::array();
  for (const auto& s : decoding) de.push_back(series_json(s));
  return {{"config_hash", config_hash},
          {"end_time", end_time},
          {"events_processed", events_processed},
          {"sample_period", sample_period},
          {"b_max", b_max},
          {"partition",
           {{"prefill_sm_ratio", partition.prefill_sm_ratio},
            {"attn_sm_ratio", partition.attn_sm_ratio}}},
          {"preemptions", preemptions},
          {"executor_preemptions", executor_preemptions},
          {"saturation_times", saturation_times},
          {"num_steps", steps.size()},
          {"requests", reqs},
          {"prefill", pre},
          {"decoding", de}};
}

std::string SimulationReport::hash() const {
  std::ostringstream os;
  os.precision(17);
  os << to_json().dump();
  write_step_trace(os, *this);
  for (const auto& r : requests) {
    for (double v : r.tpot_samples) os << v << ',';
  }
  return content_hash(os.str());
}

void write_step_trace(std::ostream& out, const SimulationReport& report) {
  for (const auto& s : report.steps) out << step_json(s).dump() << '\n';
}

void write_decision_trace(std::ostream& out, const GlobalScheduler& sched) {
  for (const auto& j : sched.decision_trace()) out << j.dump() << '\n';
}

}  // namespace adrenaline
