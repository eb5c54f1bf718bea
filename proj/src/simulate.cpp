#include "hmx/runtime.hpp"

#include <deque>
#include <queue>

namespace hmx {

SimulationResult simulate(const TaskGraph &g, std::size_t workers, bool wd_er, std::size_t slot_count) {
    if (workers < 1)
        throw InputError("simulate: workers must be at least 1");

    SimulationResult res;
    res.start.assign(g.size(), -1.0);
    res.end.assign(g.size(), -1.0);
    res.complete.assign(g.size(), -1.0);

    DependencyTracker tr(slot_count, wd_er);
    std::vector<TaskId> to_graph; // tracker id -> graph id
    auto add = [&](TaskId tracker_parent, TaskId gid) {
        const TaskId t = tr.add(tracker_parent, g.task(gid).accesses);
        if (to_graph.size() <= t)
            to_graph.resize(t + 1);
        to_graph[t] = gid;
        return t;
    };

    // (end time, start sequence, tracker id); the earliest end wins, ties in start order.
    using Event = std::tuple<double, std::size_t, TaskId>;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> running;
    std::deque<TaskId> ready;
    std::size_t busy = 0, started = 0;
    double now = 0.0;

    auto drain = [&] {
        for (TaskId t : tr.take_ready())
            ready.push_back(t);
        for (TaskId t : tr.take_completed())
            res.complete[to_graph[t]] = now;
    };

    for (TaskId r : g.roots())
        add(no_task, r);
    drain();

    for (;;) {
        while (!ready.empty()) {
            const TaskId t    = ready.front();
            const TaskNode &n = g.task(to_graph[t]);
            if (n.children.empty() && busy == workers)
                break;
            ready.pop_front();
            tr.start(t);
            res.start[to_graph[t]] = now;
            if (n.children.empty()) {
                ++busy;
                running.emplace(now + n.cost, started++, t);
            } else {
                for (TaskId c : n.children)
                    add(t, c);
                tr.body_finished(t);
                res.end[to_graph[t]] = now;
            }
            drain();
        }
        if (running.empty())
            break;
        auto [time, seq, t] = running.top();
        running.pop();
        (void)seq;
        now = time;
        --busy;
        tr.body_finished(t);
        res.end[to_graph[t]] = now;
        drain();
    }
    if (tr.unfinished() > 0)
        throw DeadlockError("simulate: tasks remain blocked\n" + tr.blocked_report());
    res.makespan = now;
    return res;
}

} // namespace hmx
