#pragma once

// Schedules verification work across a single-host worker pool at point,
// disjunct and sub-domain granularity, with early stopping inside disjunct
// groups, fluctuation-based prioritization, and sound fixed-phase sharing
// keyed on box containment.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "relucheck/properties.hpp"

namespace relucheck {

struct PointQuery {
    RobustnessSpec spec;
};

struct DisjunctItem {
    EncodedQuery query;
};

// A global property restricted to one sub-box of its domain. The first
// network copy ranges over `box`; the second over box inflated by delta and
// clamped back into the full domain, so violating pairs that straddle a cut
// are never missed.
struct SubDomainItem {
    RobustnessSpec spec; // GlobalConfidence, carries the full domain
    Box box;
};

struct WorkItem {
    std::uint64_t id = 0;
    std::variant<PointQuery, DisjunctItem, SubDomainItem> payload;
    double priority = 0.0;
    std::optional<std::uint64_t> group; // disjuncts of one property share a group
};

enum class ItemState { Done, Cancelled, Failed };

struct ItemResult {
    std::uint64_t id = 0;
    ItemState state = ItemState::Done;
    PropertyVerdict verdict;
    double seconds = 0.0;
    std::string error;
};

struct BatchResult {
    std::vector<ItemResult> items; // ordered by item id
    std::map<std::uint64_t, PropertyVerdict> group_verdicts;
    double wall_seconds = 0.0;
};

// Fixed phases derived by fix_phases on exactly this box (bare network
// encoding, no property constraints), reusable for any contained box.
struct PhaseCacheEntry {
    Box box;
    std::vector<std::pair<std::size_t, PhaseStatus>> fixed;
};

class PhaseCache {
public:
    void insert(PhaseCacheEntry entry) {
        std::lock_guard<std::mutex> lock(mutex_);
        entries_.push_back(std::move(entry));
    }

    // Union of fixed phases from every entry whose box contains the query
    // box; containment implies tighter inputs, so the fixing stays sound.
    // Overlapping-but-not-containing boxes contribute nothing.
    std::vector<std::pair<std::size_t, PhaseStatus>> lookup(const Box& query) const {
        std::lock_guard<std::mutex> lock(mutex_);
        std::vector<std::pair<std::size_t, PhaseStatus>> out;
        std::vector<bool> seen;
        for (const PhaseCacheEntry& e : entries_) {
            if (!e.box.contains(query)) continue;
            for (const auto& [idx, phase] : e.fixed) {
                if (idx >= seen.size()) seen.resize(idx + 1, false);
                if (seen[idx]) continue;
                seen[idx] = true;
                out.emplace_back(idx, phase);
            }
        }
        return out;
    }

    std::size_t size() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return entries_.size();
    }

private:
    mutable std::mutex mutex_;
    std::vector<PhaseCacheEntry> entries_;
};

// Derives a cache entry for `box`: encode the bare network (no property
// constraints) and run fix_phases, so the recorded phases hold for every
// query over any contained box.
inline PhaseCacheEntry derive_phase_fixture(std::shared_ptr<const Network> net,
                                            const Box& box,
                                            const SolveOptions& options = {}) {
    EncodedQuery q;
    encode_network(net, box, 0, q);
    fix_phases(q, options.tighten_rounds, options.simplex.pivot_tol);
    PhaseCacheEntry entry;
    entry.box = box;
    for (std::size_t i = 0; i < q.relus.size(); ++i)
        if (q.relus[i].phase != PhaseStatus::Undetermined)
            entry.fixed.emplace_back(i, q.relus[i].phase);
    return entry;
}

// Splits D into n sub-boxes covering it exactly (overlaps only on faces),
// recursively halving the widest dimension.
inline std::vector<Box> partition_domain(const Box& domain, std::size_t n) {
    if (n < 1) throw InputError("partition count must be at least 1");
    if (n == 1) return {domain};
    std::size_t widest = 0;
    for (std::size_t i = 1; i < domain.dim(); ++i)
        if (domain.width(i) > domain.width(widest)) widest = i;
    const double lo = domain.lower[widest], hi = domain.upper[widest];
    const double mid = 0.5 * (lo + hi);
    if (!(lo < mid && mid < hi))
        throw InputError("domain cannot be subdivided into " + std::to_string(n) +
                         " parts: width exhausted");
    Box left = domain, right = domain;
    left.upper[widest] = mid;
    right.lower[widest] = mid;
    const std::size_t n_left = (n + 1) / 2;
    std::vector<Box> out = partition_domain(left, n_left);
    std::vector<Box> rest = partition_domain(right, n - n_left);
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

namespace detail {

inline std::optional<Box> item_region(const WorkItem& item) {
    if (const auto* p = std::get_if<PointQuery>(&item.payload)) {
        if (p->spec.kind == PropertyKind::GlobalConfidence) return p->spec.domain;
        return Box::ball(p->spec.x0, p->spec.delta);
    }
    if (const auto* s = std::get_if<SubDomainItem>(&item.payload)) return s->box;
    const auto& d = std::get<DisjunctItem>(item.payload);
    if (d.query.input_vars.empty() || d.query.input_vars[0].empty()) return std::nullopt;
    std::vector<double> lo, hi;
    for (VarId v : d.query.input_vars[0]) {
        lo.push_back(d.query.system.lower(v));
        hi.push_back(d.query.system.upper(v));
    }
    for (double v : lo)
        if (!is_finite(v)) return std::nullopt;
    for (double v : hi)
        if (!is_finite(v)) return std::nullopt;
    return Box(std::move(lo), std::move(hi));
}

} // namespace detail

// Estimates per-item output fluctuation as the steepest sampled finite
// difference max_l |C(a,l)-C(b,l)| / |a-b|_inf over `samples` random pairs in
// the item's region, then orders steepest-first. Sampling is seeded from the
// item id, so the ordering is reproducible; ordering never affects verdicts.
inline std::vector<WorkItem> prioritize(std::vector<WorkItem> items, const Network& net,
                                        std::size_t samples = 64) {
    if (samples < 2) throw InputError("prioritize needs at least 2 samples");
    for (WorkItem& item : items) {
        const std::optional<Box> region = detail::item_region(item);
        item.priority = 0.0;
        if (!region || region->dim() != net.input_dim()) continue;
        std::mt19937_64 rng(item.id);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        auto sample_point = [&] {
            std::vector<double> x(region->dim());
            for (std::size_t i = 0; i < x.size(); ++i)
                x[i] = region->lower[i] + unit(rng) * region->width(i);
            return x;
        };
        double steepest = 0.0;
        for (std::size_t s = 0; s < samples; ++s) {
            const std::vector<double> a = sample_point();
            const std::vector<double> b = sample_point();
            double dist = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i)
                dist = std::max(dist, std::fabs(a[i] - b[i]));
            if (dist < 1e-12) continue;
            const std::vector<double> ya = evaluate(net, a);
            const std::vector<double> yb = evaluate(net, b);
            double dc = 0.0;
            for (std::size_t l = 0; l < ya.size(); ++l)
                dc = std::max(dc, std::fabs(ya[l] - yb[l]));
            steepest = std::max(steepest, dc / dist);
        }
        item.priority = steepest;
    }
    std::stable_sort(items.begin(), items.end(),
                     [](const WorkItem& a, const WorkItem& b) { return a.priority > b.priority; });
    return items;
}

// Runs a batch of work items on `workers` threads. Per-item verdicts are
// deterministic regardless of schedule; within a group, the first validated
// violation cancels outstanding siblings (cooperatively, between LP calls)
// and decides the group's aggregate. Worker failures mark the item Failed
// and aggregate like a timeout, never silently dropped.
class BatchRunner {
public:
    BatchRunner(const Budget& budget, const SolveOptions& options, PhaseCache* cache)
        : budget_(budget), options_(options), cache_(cache) {}

    BatchResult run(std::vector<WorkItem> items, std::size_t workers,
                    std::shared_ptr<const Network> net_for_points) {
        if (workers < 1) throw InputError("worker count must be at least 1");
        {
            std::vector<std::uint64_t> ids;
            for (const WorkItem& it : items) ids.push_back(it.id);
            std::sort(ids.begin(), ids.end());
            if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
                throw InputError("work item ids must be unique within a batch");
        }
        net_for_points_ = std::move(net_for_points);
        // Stable priority order: higher priority first, FIFO on ties.
        std::stable_sort(items.begin(), items.end(),
                         [](const WorkItem& a, const WorkItem& b) {
                             return a.priority > b.priority;
                         });
        items_ = std::move(items);
        results_.assign(items_.size(), {});
        next_ = 0;
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<std::thread> pool;
        const std::size_t nthreads = std::min(workers, items_.size() ? items_.size() : 1);
        for (std::size_t w = 0; w + 1 < nthreads; ++w)
            pool.emplace_back([this] { work(); });
        work();
        for (std::thread& t : pool) t.join();

        BatchResult out;
        out.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.items = std::move(results_);
        std::sort(out.items.begin(), out.items.end(),
                  [](const ItemResult& a, const ItemResult& b) { return a.id < b.id; });
        aggregate_groups(out);
        return out;
    }

private:
    std::atomic<bool>& group_flag(std::uint64_t group) {
        std::lock_guard<std::mutex> lock(flags_mutex_);
        auto it = flags_.find(group);
        if (it == flags_.end())
            it = flags_.emplace(group, std::make_unique<std::atomic<bool>>(false)).first;
        return *it->second;
    }

    void work() {
        for (;;) {
            const std::size_t idx = next_.fetch_add(1);
            if (idx >= items_.size()) return;
            const WorkItem& item = items_[idx];
            ItemResult& slot = results_[idx];
            slot.id = item.id;
            std::atomic<bool>* cancel = nullptr;
            if (item.group) cancel = &group_flag(*item.group);
            if (cancel && cancel->load()) {
                slot.state = ItemState::Cancelled;
                continue;
            }
            Budget budget = budget_;
            budget.cancel = cancel;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                slot.verdict = execute(item, budget);
                slot.state = ItemState::Done;
                if (slot.verdict.outcome == PropertyVerdict::Outcome::Timeout && cancel &&
                    cancel->load())
                    slot.state = ItemState::Cancelled; // stopped by a sibling's violation
                if (slot.verdict.outcome == PropertyVerdict::Outcome::Violated && cancel)
                    cancel->store(true);
            } catch (const std::exception& e) {
                slot.state = ItemState::Failed;
                slot.error = e.what();
            }
            slot.seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
    }

    PropertyVerdict execute(const WorkItem& item, const Budget& budget) {
        if (const auto* p = std::get_if<PointQuery>(&item.payload)) {
            return verify(net_for_points_, p->spec, budget, options_);
        }
        if (const auto* s = std::get_if<SubDomainItem>(&item.payload)) {
            const Box second = s->box.inflated(s->spec.delta).clamped_to(s->spec.domain);
            const std::vector<EncodedQuery> disjuncts =
                encode_global_boxes(net_for_points_, s->box, second, s->spec.delta,
                                    s->spec.epsilon, s->spec.norm);
            const DisjunctionVerdict dv = solve_disjunction(disjuncts, budget, options_);
            PropertyVerdict pv;
            pv.stats = dv.stats;
            if (dv.outcome == QueryOutcome::Unsat)
                pv.outcome = PropertyVerdict::Outcome::Robust;
            else if (dv.outcome == QueryOutcome::Timeout)
                pv.outcome = PropertyVerdict::Outcome::Timeout;
            else
                return resolve_sat(disjuncts[dv.sat_index], dv.sat_verdict,
                                   options_.tol.validation);
            return pv;
        }
        const auto& d = std::get<DisjunctItem>(item.payload);
        EncodedQuery q = d.query;
        if (cache_) {
            const std::optional<Box> region = detail::item_region(item);
            if (region && q.input_vars.size() == 1) {
                for (const auto& [idx, phase] : cache_->lookup(*region))
                    if (idx < q.relus.size() &&
                        q.relus[idx].phase == PhaseStatus::Undetermined)
                        set_phase(q, idx, phase);
            }
        }
        const Verdict v = solve(q, budget, options_);
        PropertyVerdict pv;
        pv.stats = v.stats;
        switch (v.outcome) {
        case QueryOutcome::Unsat:
            pv.outcome = PropertyVerdict::Outcome::Robust;
            return pv;
        case QueryOutcome::Timeout:
            pv.outcome = PropertyVerdict::Outcome::Timeout;
            return pv;
        case QueryOutcome::Sat: {
            PropertyVerdict resolved = resolve_sat(q, v, options_.tol.validation);
            resolved.stats = v.stats;
            return resolved;
        }
        }
        return pv;
    }

    void aggregate_groups(BatchResult& out) {
        std::map<std::uint64_t, std::vector<const ItemResult*>> groups;
        std::map<std::uint64_t, std::uint64_t> item_group;
        for (const WorkItem& it : items_)
            if (it.group) item_group[it.id] = *it.group;
        for (const ItemResult& r : out.items) {
            auto g = item_group.find(r.id);
            if (g != item_group.end()) groups[g->second].push_back(&r);
        }
        for (auto& [group, members] : groups) {
            PropertyVerdict agg;
            agg.outcome = PropertyVerdict::Outcome::Robust;
            bool timeout = false, vfail = false;
            const ItemResult* violated = nullptr;
            for (const ItemResult* m : members) {
                if (m->state == ItemState::Failed) {
                    timeout = true;
                    agg.diagnostic += (agg.diagnostic.empty() ? "" : "; ") + m->error;
                    continue;
                }
                if (m->state == ItemState::Cancelled) continue;
                agg.stats += m->verdict.stats;
                switch (m->verdict.outcome) {
                case PropertyVerdict::Outcome::Violated:
                    if (!violated) violated = m;
                    break;
                case PropertyVerdict::Outcome::ValidationFailure:
                    vfail = true;
                    if (agg.diagnostic.empty()) agg.diagnostic = m->verdict.diagnostic;
                    break;
                case PropertyVerdict::Outcome::Timeout:
                    timeout = true;
                    break;
                case PropertyVerdict::Outcome::Robust:
                    break;
                }
            }
            if (violated) {
                agg.outcome = PropertyVerdict::Outcome::Violated;
                agg.violation = violated->verdict.violation;
            } else if (vfail) {
                agg.outcome = PropertyVerdict::Outcome::ValidationFailure;
            } else if (timeout) {
                agg.outcome = PropertyVerdict::Outcome::Timeout;
            }
            out.group_verdicts[group] = std::move(agg);
        }
    }

    Budget budget_;
    SolveOptions options_;
    PhaseCache* cache_;
    std::shared_ptr<const Network> net_for_points_;
    std::vector<WorkItem> items_;
    std::vector<ItemResult> results_;
    std::atomic<std::size_t> next_{0};
    std::mutex flags_mutex_;
    std::map<std::uint64_t, std::unique_ptr<std::atomic<bool>>> flags_;
};

inline BatchResult run_batch(std::vector<WorkItem> items, std::size_t workers,
                             const Budget& budget = {}, const SolveOptions& options = {},
                             PhaseCache* cache = nullptr,
                             std::shared_ptr<const Network> net = nullptr) {
    BatchRunner runner(budget, options, cache);
    return runner.run(std::move(items), workers, std::move(net));
}

// Property check with disjuncts fanned out across workers. Identical
// verdicts to the sequential path; a validated violation stops siblings.
inline PropertyVerdict verify_parallel(std::shared_ptr<const Network> net,
                                       const RobustnessSpec& spec, std::size_t workers,
                                       const Budget& budget = {},
                                       const SolveOptions& options = {},
                                       PhaseCache* cache = nullptr) {
    std::vector<EncodedQuery> disjuncts = encode_property(net, spec, options.tol.margin);
    if (cache && spec.kind != PropertyKind::GlobalConfidence)
        cache->insert(derive_phase_fixture(net, Box::ball(spec.x0, spec.delta), options));
    std::vector<WorkItem> items;
    items.reserve(disjuncts.size());
    for (std::size_t i = 0; i < disjuncts.size(); ++i)
        items.push_back({i, DisjunctItem{std::move(disjuncts[i])}, 0.0, 0});
    const BatchResult batch = run_batch(std::move(items), workers, budget, options, cache, net);
    return batch.group_verdicts.at(0);
}

// Global property decomposed into sub-domain runs; sound for violations by
// construction (the second copy's box is inflated by delta), and a property
// holds on D iff it holds on every sub-run.
inline PropertyVerdict verify_global_partitioned(std::shared_ptr<const Network> net,
                                                 const RobustnessSpec& spec,
                                                 std::size_t subdomains, std::size_t workers,
                                                 const Budget& budget = {},
                                                 const SolveOptions& options = {}) {
    if (spec.kind != PropertyKind::GlobalConfidence)
        throw InputError("sub-domain decomposition applies to global properties");
    const std::vector<Box> boxes = partition_domain(spec.domain, subdomains);
    std::vector<WorkItem> items;
    for (std::size_t i = 0; i < boxes.size(); ++i)
        items.push_back({i, SubDomainItem{spec, boxes[i]}, 0.0, 0});
    const BatchResult batch =
        run_batch(std::move(items), workers, budget, options, nullptr, net);
    return batch.group_verdicts.at(0);
}

} // namespace relucheck
