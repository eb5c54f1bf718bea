#include "hmx/runtime.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <sstream>

namespace hmx {

std::string_view to_string(TaskState s) {
    switch (s) {
    case TaskState::Created:
        return "created";
    case TaskState::Ready:
        return "ready";
    case TaskState::Running:
        return "running";
    case TaskState::Finished:
        return "finished";
    case TaskState::Released:
        return "released";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// infer_edges
// ---------------------------------------------------------------------------

std::vector<Edge> infer_edges(const std::vector<std::vector<Region>> &siblings) {
    std::vector<Edge> edges;
    for (std::size_t j = 0; j < siblings.size(); ++j) {
        for (std::size_t i = 0; i < j; ++i) {
            std::optional<Edge> any, strong;
            for (std::size_t a = 0; a < siblings[i].size() && !strong; ++a) {
                const Region &ra = siblings[i][a];
                for (std::size_t b = 0; b < siblings[j].size(); ++b) {
                    const Region &rb = siblings[j][b];
                    if (!ra.interval.intersects(rb.interval) || (!writes(ra.mode) && !writes(rb.mode)))
                        continue;
                    Edge e{i, j, a, b, true};
                    if (!any)
                        any = e;
                    if (ra.strength == Strength::Strong && rb.strength == Strength::Strong) {
                        e.weak = false;
                        strong = e;
                        break;
                    }
                }
            }
            if (strong)
                edges.push_back(*strong);
            else if (any)
                edges.push_back(*any);
        }
    }
    return edges;
}

// ---------------------------------------------------------------------------
// TaskGraph
// ---------------------------------------------------------------------------

TaskId TaskGraph::add(TaskId parent, std::string label, std::string kind, std::vector<Region> accesses,
                      std::function<void()> kernel, double cost) {
    const TaskId id = tasks_.size();
    if (parent != no_task && parent >= id)
        throw InputError("TaskGraph::add: unknown parent");
    tasks_.push_back(TaskNode{parent, std::move(label), std::move(kind), std::move(accesses), {}, std::move(kernel), cost});
    if (parent == no_task)
        roots_.push_back(id);
    else
        tasks_[parent].children.push_back(id);
    return id;
}

void TaskGraph::infer_all_edges() {
    edges_.clear();
    auto group = [&](const std::vector<TaskId> &ids) {
        std::vector<std::vector<Region>> acc;
        acc.reserve(ids.size());
        for (TaskId t : ids)
            acc.push_back(tasks_[t].accesses);
        for (const Edge &e : infer_edges(acc))
            edges_.push_back(GraphEdge{ids[e.from], ids[e.to], e});
    };
    group(roots_);
    for (const auto &t : tasks_)
        if (!t.children.empty())
            group(t.children);
}

std::optional<TaskId> TaskGraph::find(const std::string &label) const {
    for (TaskId i = 0; i < tasks_.size(); ++i)
        if (tasks_[i].label == label)
            return i;
    return std::nullopt;
}

bool TaskGraph::is_ancestor(TaskId a, TaskId b) const {
    for (TaskId p = tasks_.at(b).parent; p != no_task; p = tasks_[p].parent)
        if (p == a)
            return true;
    return false;
}

std::vector<TaskId> TaskGraph::preorder() const {
    std::vector<TaskId> out;
    out.reserve(tasks_.size());
    std::vector<TaskId> stack(roots_.rbegin(), roots_.rend());
    while (!stack.empty()) {
        TaskId t = stack.back();
        stack.pop_back();
        out.push_back(t);
        const auto &ch = tasks_[t].children;
        stack.insert(stack.end(), ch.rbegin(), ch.rend());
    }
    return out;
}

namespace {

std::string region_text(const std::vector<Region> &acc) {
    std::ostringstream os;
    for (std::size_t i = 0; i < acc.size(); ++i) {
        const Region &r = acc[i];
        if (i)
            os << ' ';
        os << to_string(r.mode) << (r.strength == Strength::Weak ? "(weak)" : "") << '[' << r.interval.lo << ','
           << r.interval.hi << ')';
    }
    return os.str();
}

void dot_task(std::ostream &os, const TaskGraph &g, TaskId id, int indent) {
    const TaskNode &t = g.task(id);
    const std::string pad(static_cast<std::size_t>(indent), ' ');
    if (t.children.empty()) {
        os << pad << "t" << id << " [label=\"" << t.label << "\\n" << t.kind << "\\n" << region_text(t.accesses)
           << "\"];\n";
        return;
    }
    os << pad << "subgraph cluster_" << id << " {\n";
    os << pad << "  label=\"" << t.label << " " << t.kind << "\";\n";
    os << pad << "  t" << id << " [shape=box,label=\"" << t.label << "\\n" << region_text(t.accesses) << "\"];\n";
    for (TaskId c : t.children)
        dot_task(os, g, c, indent + 2);
    os << pad << "}\n";
}

} // namespace

void TaskGraph::write_dot(std::ostream &os) const {
    os << "digraph tasks {\n  compound=true;\n  node [shape=ellipse];\n";
    for (TaskId r : roots_)
        dot_task(os, *this, r, 2);
    for (const auto &e : edges_)
        os << "  t" << e.from << " -> t" << e.to << (e.cause.weak ? " [style=dashed,color=blue]" : "") << ";\n";
    os << "}\n";
}

// ---------------------------------------------------------------------------
// DependencyTracker
// ---------------------------------------------------------------------------

DependencyTracker::DependencyTracker(std::size_t slot_count, bool early_release)
    : slot_count_(slot_count), early_release_(early_release) {
    tasks_.emplace_back(); // implicit root
    tasks_[0].state = TaskState::Running;
}

DependencyTracker::Entry *DependencyTracker::find_entry(Task &t, std::size_t slot) {
    auto it = std::lower_bound(t.entries.begin(), t.entries.end(), slot,
                               [](const Entry &e, std::size_t s) { return e.slot < s; });
    return (it != t.entries.end() && it->slot == slot) ? &*it : nullptr;
}

void DependencyTracker::check_subset(const Task &parent, const std::vector<Region> &accesses) const {
    for (const Region &r : accesses) {
        for (std::size_t s = r.interval.lo; s < r.interval.hi; ++s) {
            auto it = std::lower_bound(parent.entries.begin(), parent.entries.end(), s,
                                       [](const Entry &e, std::size_t x) { return e.slot < x; });
            if (it == parent.entries.end() || it->slot != s) {
                std::ostringstream os;
                os << "subset rule: child access [" << r.interval.lo << ',' << r.interval.hi
                   << ") is not covered by its parent (slot " << s << ")";
                throw SubsetRuleError(os.str());
            }
            if (writes(r.mode) && !it->write) {
                std::ostringstream os;
                os << "subset rule: child writes slot " << s << " which its parent only reads";
                throw SubsetRuleError(os.str());
            }
        }
    }
}

TaskId DependencyTracker::add(TaskId parent, std::vector<Region> accesses) {
    const std::size_t pidx = parent == no_task ? 0 : parent + 1;
    if (pidx >= tasks_.size())
        throw InputError("DependencyTracker::add: unknown parent task");
    if (pidx != 0 && tasks_[pidx].body_done)
        throw InputError("DependencyTracker::add: parent body already returned");
    for (const Region &r : accesses)
        if (r.interval.lo >= r.interval.hi || r.interval.hi > slot_count_)
            throw InputError("region out of skeleton bounds");
    if (pidx != 0)
        check_subset(tasks_[pidx], accesses);

    // One entry per slot: writes dominate reads, strong dominates weak.
    std::map<std::size_t, std::pair<bool, bool>> merged; // slot -> (write, strong)
    for (const Region &r : accesses) {
        for (std::size_t s = r.interval.lo; s < r.interval.hi; ++s) {
            auto &m = merged[s];
            m.first  = m.first || writes(r.mode);
            m.second = m.second || r.strength == Strength::Strong || !early_release_;
        }
    }

    const std::size_t idx = tasks_.size();
    tasks_.emplace_back();
    Task &t  = tasks_[idx];
    Task &p  = tasks_[pidx];
    t.parent = pidx;
    t.seq    = p.next_child_seq++;
    t.entries.reserve(merged.size());
    for (const auto &[slot, wm] : merged) {
        Entry e;
        e.slot  = slot;
        e.write = wm.first;
        e.weak  = !wm.second;
        e.seq   = t.seq;
        t.entries.push_back(std::move(e));
    }
    ++p.open_children;
    ++unfinished_;

    for (std::size_t i = 0; i < tasks_[idx].entries.size(); ++i) {
        Entry &e = tasks_[idx].entries[i];
        if (Entry *pe = find_entry(tasks_[pidx], e.slot)) {
            ++pe->open_children;
            if (e.write)
                ++pe->open_writers;
        }
        if (!e.weak)
            collect_blockers(idx, e);
        tasks_[pidx].domain[e.slot].emplace_back(idx, i);
    }

    if (tasks_[idx].pending == 0) {
        tasks_[idx].state = TaskState::Ready;
        ready_.push_back(idx - 1);
    }
    return idx - 1;
}

void DependencyTracker::collect_blockers(TaskId id, Entry &e) {
    std::size_t cur = id;
    for (;;) {
        const std::size_t pidx = tasks_[cur].parent;
        const std::size_t cseq = tasks_[cur].seq;
        auto it                = tasks_[pidx].domain.find(e.slot);
        if (it != tasks_[pidx].domain.end()) {
            for (const auto &[x, xi] : it->second) {
                if (tasks_[x].seq >= cseq)
                    break;
                const Entry &xe = tasks_[x].entries[xi];
                if (e.write) {
                    if (!xe.full_done)
                        wait_on(id, x, xi, true);
                } else if (xe.write && !xe.write_done) {
                    wait_on(id, x, xi, false);
                }
            }
        }
        if (pidx == 0)
            break;
        Entry *pe = find_entry(tasks_[pidx], e.slot);
        if (!pe || !pe->weak)
            break;
        cur = pidx;
    }
}

void DependencyTracker::wait_on(TaskId waiter, TaskId holder, std::size_t entry, bool full) {
    Entry &he = tasks_[holder].entries[entry];
    (full ? he.wait_full : he.wait_write).push_back(waiter);
    ++tasks_[waiter].pending;
}

void DependencyTracker::release_one(TaskId waiter) {
    Task &w = tasks_[waiter];
    if (--w.pending == 0 && w.state == TaskState::Created) {
        w.state = TaskState::Ready;
        ready_.push_back(waiter - 1);
    }
}

void DependencyTracker::mark_write_done(TaskId id, std::size_t idx) {
    Entry &e = tasks_[id].entries[idx];
    if (e.write_done)
        return;
    e.write_done = true;
    auto waiters = std::move(e.wait_write);
    e.wait_write.clear();
    for (TaskId w : waiters)
        release_one(w);

    const std::size_t pidx = tasks_[id].parent;
    const bool is_write    = tasks_[id].entries[idx].write;
    if (pidx != 0 && is_write) {
        const std::size_t slot = tasks_[id].entries[idx].slot;
        if (Entry *pe = find_entry(tasks_[pidx], slot)) {
            --pe->open_writers;
            maybe_close_entry(pidx, static_cast<std::size_t>(pe - tasks_[pidx].entries.data()));
        }
    }
}

void DependencyTracker::mark_full_done(TaskId id, std::size_t idx) {
    if (tasks_[id].entries[idx].full_done)
        return;
    mark_write_done(id, idx);
    Entry &e    = tasks_[id].entries[idx];
    e.full_done = true;
    auto waiters = std::move(e.wait_full);
    e.wait_full.clear();
    const std::size_t slot = e.slot;
    for (TaskId w : waiters)
        release_one(w);

    const std::size_t pidx = tasks_[id].parent;
    auto &list             = tasks_[pidx].domain[slot];
    list.erase(std::remove_if(list.begin(), list.end(), [&](const auto &p) { return p.first == id; }), list.end());
    if (list.empty())
        tasks_[pidx].domain.erase(slot);
    if (pidx != 0) {
        if (Entry *pe = find_entry(tasks_[pidx], slot)) {
            --pe->open_children;
            maybe_close_entry(pidx, static_cast<std::size_t>(pe - tasks_[pidx].entries.data()));
        }
    }
}

void DependencyTracker::maybe_close_entry(TaskId id, std::size_t idx) {
    if (!early_release_ || !tasks_[id].body_done)
        return;
    const Entry &e = tasks_[id].entries[idx];
    if (e.open_writers == 0)
        mark_write_done(id, idx);
    if (tasks_[id].entries[idx].open_children == 0)
        mark_full_done(id, idx);
}

void DependencyTracker::maybe_complete(TaskId id) {
    Task &t = tasks_[id];
    if (t.complete || !t.body_done || t.open_children > 0)
        return;
    t.complete = true;
    t.state    = TaskState::Released;
    for (std::size_t i = 0; i < tasks_[id].entries.size(); ++i)
        mark_full_done(id, i);
    completed_.push_back(id - 1);
    const std::size_t pidx = tasks_[id].parent;
    --tasks_[pidx].open_children;
    if (pidx != 0)
        maybe_complete(pidx);
}

void DependencyTracker::start(TaskId id) {
    Task &t = tasks_.at(id + 1);
    if (t.state != TaskState::Ready)
        throw std::logic_error("DependencyTracker::start: task is not ready");
    t.state = TaskState::Running;
}

void DependencyTracker::body_finished(TaskId id) {
    const std::size_t idx = id + 1;
    Task &t               = tasks_.at(idx);
    if (t.state != TaskState::Running)
        throw std::logic_error("DependencyTracker::body_finished: task is not running");
    t.body_done = true;
    t.state     = TaskState::Finished;
    --unfinished_;
    if (early_release_)
        for (std::size_t i = 0; i < tasks_[idx].entries.size(); ++i)
            maybe_close_entry(idx, i);
    maybe_complete(idx);
}

std::vector<TaskId> DependencyTracker::take_ready() {
    std::vector<TaskId> out;
    out.swap(ready_);
    return out;
}

std::vector<TaskId> DependencyTracker::take_completed() {
    std::vector<TaskId> out;
    out.swap(completed_);
    return out;
}

TaskState DependencyTracker::state(TaskId id) const { return tasks_.at(id + 1).state; }

TaskId DependencyTracker::parent(TaskId id) const {
    const std::size_t p = tasks_.at(id + 1).parent;
    return p == 0 ? no_task : p - 1;
}

bool DependencyTracker::complete(TaskId id) const { return tasks_.at(id + 1).complete; }

std::string DependencyTracker::blocked_report() const {
    std::ostringstream os;
    std::map<std::size_t, std::vector<std::string>> waits;
    for (std::size_t h = 1; h < tasks_.size(); ++h) {
        for (const Entry &e : tasks_[h].entries) {
            for (TaskId w : e.wait_write)
                waits[w].push_back("write-completion of task " + std::to_string(h - 1) + " slot " + std::to_string(e.slot));
            for (TaskId w : e.wait_full)
                waits[w].push_back("release of task " + std::to_string(h - 1) + " slot " + std::to_string(e.slot));
        }
    }
    for (std::size_t i = 1; i < tasks_.size(); ++i) {
        if (tasks_[i].state != TaskState::Created)
            continue;
        os << "task " << i - 1 << " waits on:";
        for (const auto &s : waits[i])
            os << "\n  " << s;
        os << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Runtime
// ---------------------------------------------------------------------------

namespace {

struct CurrentTask {
    const Runtime *runtime = nullptr;
    TaskId id              = no_task;
    std::size_t worker     = 0;
};

thread_local CurrentTask current_task;

std::uint64_t splitmix(std::uint64_t &x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ull);
    z               = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z               = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace

Runtime::Runtime(SchedulerConfig cfg, std::size_t slot_count)
    : cfg_(cfg), slot_count_(slot_count), tracker_(slot_count, cfg.wd_er), t0_(std::chrono::steady_clock::now()) {
    if (cfg_.workers < 1)
        throw InputError("SchedulerConfig: workers must be at least 1");
    if (cfg_.check_exclusive)
        slot_holders_.assign(slot_count_, {});
    for (std::size_t i = 0; i < cfg_.workers; ++i) {
        auto w = std::make_unique<Worker>();
        w->rng = cfg_.seed * 7919u + i;
        workers_.push_back(std::move(w));
    }
    for (std::size_t i = 0; i < cfg_.workers; ++i)
        workers_[i]->thread = std::thread([this, i] { worker_loop(i); });
}

Runtime::~Runtime() {
    {
        std::lock_guard lk(mutex_);
        stop_ = true;
    }
    work_cv_.notify_all();
    for (auto &w : workers_)
        if (w->thread.joinable())
            w->thread.join();
}

std::int64_t Runtime::now() const {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0_).count();
}

TaskId Runtime::submit(std::vector<Region> accesses, std::function<void()> body, std::string label) {
    std::lock_guard lk(mutex_);
    const bool nested       = current_task.runtime == this;
    const TaskId parent     = nested ? current_task.id : no_task;
    const std::size_t where = nested ? current_task.worker : 0;

    TaskRecord rec;
    rec.parent   = parent;
    rec.label    = std::move(label);
    rec.accesses = accesses;
    const TaskId id = tracker_.add(parent, std::move(accesses));
    rec.id        = id;
    rec.submit_ns = now();
    records_.push_back(std::move(rec));
    bodies_.push_back(std::move(body));
    enqueue_ready(where);
    return id;
}

void Runtime::hold() {
    std::lock_guard lk(mutex_);
    held_ = true;
}

void Runtime::resume() {
    {
        std::lock_guard lk(mutex_);
        held_ = false;
    }
    work_cv_.notify_all();
}

void Runtime::enqueue_ready(std::size_t worker) {
    auto ready = tracker_.take_ready();
    if (ready.empty())
        return;
    const auto t = now();
    for (TaskId id : ready) {
        records_[id].ready_ns = t;
        workers_[worker]->queue.push_back(id);
    }
    work_cv_.notify_all();
}

void Runtime::record_completed() {
    const auto t = now();
    for (TaskId id : tracker_.take_completed())
        records_[id].complete_ns = t;
}

bool Runtime::pop_task(std::size_t index, TaskId &out) {
    auto &own = workers_[index]->queue;
    if (!own.empty()) {
        out = own.front();
        own.pop_front();
        return true;
    }
    const std::size_t n = workers_.size();
    if (n == 1)
        return false;
    const std::size_t first = static_cast<std::size_t>(splitmix(workers_[index]->rng) % n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t v = (first + k) % n;
        if (v == index || workers_[v]->queue.empty())
            continue;
        out = workers_[v]->queue.back();
        workers_[v]->queue.pop_back();
        return true;
    }
    return false;
}

void Runtime::acquire_slots(TaskId id) {
    // A holder that is an ancestor of id is not a conflict: the child works inside it.
    auto ancestor = [&](TaskId a) {
        for (TaskId p = tracker_.parent(id); p != no_task; p = tracker_.parent(p))
            if (p == a)
                return true;
        return false;
    };
    for (const Region &r : records_[id].accesses) {
        if (r.strength == Strength::Weak)
            continue;
        for (std::size_t s = r.interval.lo; s < r.interval.hi; ++s) {
            auto &holders = slot_holders_[s];
            for (const auto &[h, w] : holders)
                if ((w || writes(r.mode)) && h != id && !ancestor(h))
                    ++violations_;
            holders.emplace_back(id, writes(r.mode));
        }
    }
}

void Runtime::release_slots(TaskId id) {
    for (const Region &r : records_[id].accesses) {
        if (r.strength == Strength::Weak)
            continue;
        for (std::size_t s = r.interval.lo; s < r.interval.hi; ++s) {
            auto &holders = slot_holders_[s];
            holders.erase(std::remove_if(holders.begin(), holders.end(), [&](const auto &h) { return h.first == id; }),
                          holders.end());
        }
    }
}

bool Runtime::deadlocked() const {
    if (held_ || running_ > 0 || tracker_.unfinished() == 0)
        return false;
    for (const auto &w : workers_)
        if (!w->queue.empty())
            return false;
    return true;
}

void Runtime::worker_loop(std::size_t index) {
    std::unique_lock lk(mutex_);
    for (;;) {
        TaskId id;
        if (!held_ && pop_task(index, id)) {
            tracker_.start(id);
            TaskRecord &rec = records_[id];
            rec.start_ns    = now();
            rec.worker      = index;
            ++running_;
            if (cfg_.check_exclusive)
                acquire_slots(id);
            auto body = std::move(bodies_[id]);
            bodies_[id] = nullptr;
            lk.unlock();

            const CurrentTask saved = current_task;
            current_task            = CurrentTask{this, id, index};
            std::exception_ptr err;
            try {
                if (body)
                    body();
            } catch (...) {
                err = std::current_exception();
            }
            current_task = saved;

            lk.lock();
            if (err && !error_)
                error_ = err;
            if (cfg_.check_exclusive)
                release_slots(id);
            records_[id].end_ns = now();
            --running_;
            tracker_.body_finished(id);
            enqueue_ready(index);
            record_completed();
            if (tracker_.unfinished() == 0 || deadlocked())
                done_cv_.notify_all();
            continue;
        }
        if (stop_)
            return;
        if (deadlocked())
            done_cv_.notify_all();
        work_cv_.wait(lk);
    }
}

ExecutionTrace Runtime::wait() {
    std::unique_lock lk(mutex_);
    done_cv_.wait(lk, [&] { return tracker_.unfinished() == 0 || deadlocked(); });
    if (tracker_.unfinished() > 0)
        throw DeadlockError("deadlock: no task can become ready\n" + tracker_.blocked_report());
    record_completed();
    if (error_) {
        auto e = error_;
        error_ = nullptr;
        std::rethrow_exception(e);
    }
    if (violations_ > 0)
        throw std::logic_error("exclusive-writer violation: " + std::to_string(violations_) +
                               " conflicting slot acquisitions");
    ExecutionTrace tr;
    tr.tasks   = records_;
    tr.wall_ns = now();
    tr.workers = cfg_.workers;
    tr.exclusive_violations = violations_;
    return tr;
}

ExecutionTrace Runtime::run_graph(const TaskGraph &g, SchedulerConfig cfg, std::size_t slot_count) {
    Runtime rt(cfg, slot_count);
    std::function<void(TaskId)> spawn = [&](TaskId gid) {
        const TaskNode &n = g.task(gid);
        if (n.children.empty()) {
            rt.submit(n.accesses, n.kernel, n.label);
        } else {
            rt.submit(n.accesses, [&, gid] {
                for (TaskId c : g.task(gid).children)
                    spawn(c);
            }, n.label);
        }
    };
    rt.hold();
    for (TaskId r : g.roots())
        spawn(r);
    rt.resume();
    return rt.wait();
}

// ---------------------------------------------------------------------------
// ExecutionTrace
// ---------------------------------------------------------------------------

const TaskRecord *ExecutionTrace::find(const std::string &label) const {
    for (const auto &r : tasks)
        if (r.label == label)
            return &r;
    return nullptr;
}

void ExecutionTrace::write_csv(std::ostream &os) const {
    os << "task,parent,label,submit_ns,ready_ns,start_ns,end_ns,complete_ns,worker\n";
    for (const auto &r : tasks) {
        os << r.id << ',';
        if (r.parent != no_task)
            os << r.parent;
        os << ',' << r.label << ',' << r.submit_ns << ',' << r.ready_ns << ',' << r.start_ns << ',' << r.end_ns << ','
           << r.complete_ns << ',' << r.worker << '\n';
    }
}

} // namespace hmx
