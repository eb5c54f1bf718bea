#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <random>
#include <sstream>

using namespace hmx;

namespace {

Region R(std::size_t lo, std::size_t hi, AccessMode m = AccessMode::Read, Strength s = Strength::Strong) {
    return Region{{lo, hi}, m, s};
}

constexpr auto W  = AccessMode::Write;
constexpr auto RW = AccessMode::ReadWrite;
constexpr auto Wk = Strength::Weak;

std::map<std::string, const TaskRecord *> by_label(const ExecutionTrace &tr) {
    std::map<std::string, const TaskRecord *> m;
    for (const auto &r : tr.tasks)
        m[r.label] = &r;
    return m;
}

// Every conflicting pair of leaf tasks ran in program order without overlap.
void check_serializable(const TaskGraph &g, const ExecutionTrace &tr) {
    const auto rec = by_label(tr);
    std::vector<TaskId> leaves;
    for (TaskId id : g.preorder())
        if (g.task(id).children.empty())
            leaves.push_back(id);
    std::vector<std::vector<Region>> acc;
    for (TaskId id : leaves)
        acc.push_back(g.task(id).accesses);
    for (const auto &[a, b] : oracle::pairwise_conflicts(acc)) {
        const TaskRecord *ra = rec.at(g.task(leaves[a]).label);
        const TaskRecord *rb = rec.at(g.task(leaves[b]).label);
        REQUIRE(ra->end_ns <= rb->start_ns);
    }
    for (const auto &e : g.edges()) {
        if (!g.task(e.from).children.empty() || !g.task(e.to).children.empty())
            continue;
        CHECK(rec.at(g.task(e.from).label)->end_ns <= rec.at(g.task(e.to).label)->start_ns);
    }
    for (const auto &r : tr.tasks) {
        CHECK(r.start_ns >= r.ready_ns);
        CHECK(r.end_ns >= r.start_ns);
        CHECK(r.complete_ns >= r.end_ns);
    }
}

} // namespace

TEST_CASE("a task with only weak accesses is ready at once") {
    DependencyTracker t(4, true);
    auto a = t.add(no_task, {R(0, 4, W)});
    auto b = t.add(no_task, {R(0, 4, RW, Wk)});
    CHECK(t.state(a) == TaskState::Ready);
    CHECK(t.state(b) == TaskState::Ready);
    CHECK(t.take_ready() == std::vector<TaskId>{a, b});
}

TEST_CASE("overlapping writers are ordered") {
    DependencyTracker t(2, true);
    auto a = t.add(no_task, {R(0, 1, W)});
    auto b = t.add(no_task, {R(0, 1, W)});
    auto c = t.add(no_task, {R(1, 2, W)});
    CHECK(t.state(b) == TaskState::Created);
    CHECK(t.state(c) == TaskState::Ready);
    CHECK(t.take_ready() == std::vector<TaskId>{a, c});
    t.start(a);
    CHECK(t.state(b) == TaskState::Created);
    t.body_finished(a);
    CHECK(t.complete(a));
    CHECK(t.state(a) == TaskState::Released);
    CHECK(t.take_ready() == std::vector<TaskId>{b});
}

TEST_CASE("readers share, a later writer waits for all of them") {
    DependencyTracker t(1, true);
    auto w  = t.add(no_task, {R(0, 1, W)});
    auto r1 = t.add(no_task, {R(0, 1)});
    auto r2 = t.add(no_task, {R(0, 1)});
    auto w2 = t.add(no_task, {R(0, 1, W)});
    CHECK(t.take_ready() == std::vector<TaskId>{w});
    t.start(w);
    t.body_finished(w);
    CHECK(t.take_ready() == std::vector<TaskId>{r1, r2});
    t.start(r1);
    t.body_finished(r1);
    CHECK(t.take_ready().empty());
    t.start(r2);
    t.body_finished(r2);
    CHECK(t.take_ready() == std::vector<TaskId>{w2});
}

TEST_CASE("subset rule") {
    DependencyTracker t(8, true);
    auto p = t.add(no_task, {R(0, 4, RW, Wk), R(4, 6)});
    t.take_ready();
    t.start(p);
    CHECK_NOTHROW(t.add(p, {R(0, 1, W)}));
    CHECK_NOTHROW(t.add(p, {R(4, 5)}));
    CHECK_THROWS_AS(t.add(p, {R(3, 5, W)}), SubsetRuleError);
    CHECK_THROWS_AS(t.add(p, {R(4, 5, W)}), SubsetRuleError);
    CHECK_THROWS_AS(t.add(p, {R(6, 7)}), SubsetRuleError);
    CHECK_THROWS_AS(t.add(no_task, {R(7, 9)}), InputError);
    CHECK_THROWS_AS(t.add(no_task, {R(3, 3)}), InputError);
}

TEST_CASE("early release lets a child of a later task overtake its parent's sibling") {
    DependencyTracker t(2, true);
    // p1 weakly covers both slots; its child c1 writes slot 0 and c2 writes slot 1.
    auto p1 = t.add(no_task, {R(0, 2, RW, Wk)});
    auto p2 = t.add(no_task, {R(0, 1, RW, Wk)});
    CHECK(t.take_ready() == std::vector<TaskId>{p1, p2});
    t.start(p1);
    auto c1 = t.add(p1, {R(0, 1, RW)});
    auto c2 = t.add(p1, {R(1, 2, RW)});
    t.body_finished(p1);
    t.start(p2);
    auto d1 = t.add(p2, {R(0, 1, RW)});
    t.body_finished(p2);
    CHECK(t.state(d1) == TaskState::Created);
    t.take_ready();
    t.start(c1);
    t.body_finished(c1);
    // c2 still runs on slot 1; d1 only needs slot 0.
    CHECK(t.state(d1) == TaskState::Ready);
    CHECK_FALSE(t.complete(p1));
    t.start(c2);
    t.body_finished(c2);
    CHECK(t.complete(p1));
    CHECK_FALSE(t.complete(p2));
}

TEST_CASE("without early release a weak parent behaves as strong") {
    DependencyTracker t(2, false);
    auto p1 = t.add(no_task, {R(0, 2, RW, Wk)});
    auto p2 = t.add(no_task, {R(0, 1, RW, Wk)});
    CHECK(t.take_ready() == std::vector<TaskId>{p1});
    t.start(p1);
    auto c1 = t.add(p1, {R(0, 1, RW)});
    auto c2 = t.add(p1, {R(1, 2, RW)});
    t.body_finished(p1);
    t.take_ready();
    t.start(c1);
    t.body_finished(c1);
    CHECK(t.state(p2) == TaskState::Created);
    t.start(c2);
    t.body_finished(c2);
    CHECK(t.complete(p1));
    CHECK(t.take_ready() == std::vector<TaskId>{p2});
}

TEST_CASE("blocked report names the waits") {
    DependencyTracker t(1, true);
    t.add(no_task, {R(0, 1, W)});
    t.add(no_task, {R(0, 1, W)});
    const std::string rep = t.blocked_report();
    CHECK(rep.find("task 1 waits on") != std::string::npos);
    CHECK(rep.find("release of task 0 slot 0") != std::string::npos);
}

TEST_CASE("infer_edges examples") {
    auto e = infer_edges({{R(0, 4, W)}, {R(0, 1)}});
    REQUIRE(e.size() == 1);
    CHECK(e[0].from == 0);
    CHECK(e[0].to == 1);
    CHECK_FALSE(e[0].weak);
    CHECK(infer_edges({{R(0, 1)}, {R(1, 2)}}).empty());
    CHECK(infer_edges({{R(0, 2)}, {R(1, 2)}}).empty());
    auto w = infer_edges({{R(0, 4, RW, Wk)}, {R(2, 3, W)}});
    REQUIRE(w.size() == 1);
    CHECK(w[0].weak);
    // A strong pair is preferred over an earlier weak one.
    auto s = infer_edges({{R(0, 4, RW, Wk), R(5, 6, W)}, {R(0, 1, W), R(5, 6)}});
    REQUIRE(s.size() == 1);
    CHECK_FALSE(s[0].weak);
    CHECK(s[0].from_access == 1);
}

TEST_CASE("infer_edges matches the pairwise oracle on random sibling sets") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        auto it = oracle::random_interval_tree(rng, 64);
        const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 200)(rng);
        std::vector<std::vector<Region>> tasks(n);
        for (auto &t : tasks) {
            const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
            for (std::size_t a = 0; a < k; ++a)
                t.push_back({it.nodes[std::uniform_int_distribution<std::size_t>(0, it.nodes.size() - 1)(rng)],
                             oracle::random_mode(rng), std::bernoulli_distribution(0.3)(rng) ? Wk : Strength::Strong});
        }
        std::set<std::pair<std::size_t, std::size_t>> got;
        for (const auto &e : infer_edges(tasks))
            CHECK(got.emplace(e.from, e.to).second);
        CHECK(got == oracle::pairwise_conflicts(tasks));
    }
}

TEST_CASE("runtime basics") {
    SUBCASE("empty") {
        Runtime rt(SchedulerConfig{}, 1);
        auto tr = rt.wait();
        CHECK(tr.tasks.empty());
    }
    SUBCASE("chain runs in order on any worker count") {
        for (std::size_t w : {1u, 2u, 4u}) {
            Runtime rt(SchedulerConfig{w, true, 3}, 1);
            std::vector<char> order;
            std::mutex m;
            for (char c : {'A', 'B', 'C'})
                rt.submit({R(0, 1, W)}, [&, c] {
                    std::lock_guard lk(m);
                    order.push_back(c);
                }, std::string(1, c));
            auto tr = rt.wait();
            CHECK(order == std::vector<char>{'A', 'B', 'C'});
            CHECK(tr.find("A")->end_ns <= tr.find("B")->start_ns);
            CHECK(tr.find("B")->end_ns <= tr.find("C")->start_ns);
        }
    }
    SUBCASE("nested submission from a body") {
        Runtime rt(SchedulerConfig{2, true, 0}, 4);
        std::atomic<int> sum{0};
        rt.submit({R(0, 4, RW, Wk)}, [&] {
            for (std::size_t i = 0; i < 4; ++i)
                rt.submit({R(i, i + 1, W)}, [&, i] { sum += static_cast<int>(i); }, "c" + std::to_string(i));
        }, "p");
        auto tr = rt.wait();
        CHECK(sum == 6);
        CHECK(tr.tasks.size() == 5);
        CHECK(tr.find("c2")->parent == tr.find("p")->id);
        CHECK(tr.find("p")->complete_ns >= tr.find("c3")->end_ns);
    }
    SUBCASE("body exceptions surface from wait") {
        Runtime rt(SchedulerConfig{2, true, 0}, 1);
        rt.submit({R(0, 1, W)}, [] { throw NumericalError("boom"); });
        rt.submit({R(0, 1, W)}, [] {});
        CHECK_THROWS_AS(rt.wait(), NumericalError);
    }
    SUBCASE("subset violation from a body") {
        Runtime rt(SchedulerConfig{1, true, 0}, 2);
        rt.submit({R(0, 1, W)}, [&] { rt.submit({R(1, 2, W)}, [] {}); });
        CHECK_THROWS_AS(rt.wait(), SubsetRuleError);
    }
    CHECK_THROWS_AS(Runtime(SchedulerConfig{0, true, 0}, 1), InputError);
}

TEST_CASE("random nested graphs execute serializably") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 60; ++trial) {
        auto it = oracle::random_interval_tree(rng, 32);
        auto g  = oracle::with_weak_parents(rng, oracle::random_nested_graph(rng, it, 120));
        g.infer_all_edges();
        for (bool wd : {true, false}) {
            SchedulerConfig cfg{3, wd, static_cast<std::uint64_t>(trial)};
            cfg.check_exclusive = true;
            auto tr = Runtime::run_graph(g, cfg, it.slots);
            CHECK(tr.tasks.size() == g.size());
            CHECK(tr.exclusive_violations == 0);
            check_serializable(g, tr);
        }
    }
}

TEST_CASE("edges of a static graph follow the oracle per sibling group") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        auto it = oracle::random_interval_tree(rng, 48);
        auto g  = oracle::with_weak_parents(rng, oracle::random_nested_graph(rng, it, 200));
        g.infer_all_edges();
        std::set<std::pair<TaskId, TaskId>> got;
        for (const auto &e : g.edges())
            got.emplace(e.from, e.to);
        std::set<std::pair<TaskId, TaskId>> want;
        auto group = [&](const std::vector<TaskId> &ids) {
            std::vector<std::vector<Region>> acc;
            for (TaskId id : ids)
                acc.push_back(g.task(id).accesses);
            for (const auto &[a, b] : oracle::pairwise_conflicts(acc))
                want.emplace(ids[a], ids[b]);
        };
        group(g.roots());
        for (const auto &t : g.tasks())
            if (!t.children.empty())
                group(t.children);
        CHECK(got == want);
    }
}

TEST_CASE("single worker traces are deterministic") {
    std::mt19937_64 rng(51);
    auto it = oracle::random_interval_tree(rng, 32);
    auto g  = oracle::with_weak_parents(rng, oracle::random_nested_graph(rng, it, 150));
    auto order = [&] {
        auto tr = Runtime::run_graph(g, SchedulerConfig{1, true, 9}, it.slots);
        std::vector<const TaskRecord *> recs;
        for (const auto &r : tr.tasks)
            recs.push_back(&r);
        std::sort(recs.begin(), recs.end(), [](auto *a, auto *b) { return a->start_ns < b->start_ns; });
        std::vector<std::string> labels;
        for (auto *r : recs)
            labels.push_back(r->label);
        return labels;
    };
    const auto first = order();
    for (int i = 0; i < 5; ++i)
        CHECK(order() == first);
}

TEST_CASE("early release dominance on random graphs") {
    // Exact on one worker and on unbounded workers. Greedy list scheduling on a few workers
    // admits anomalies, so there only the aggregate ordering is asserted.
    std::mt19937_64 rng(61);
    std::size_t strictly_better = 0, anomalies = 0, samples = 0;
    double sum_on = 0.0, sum_off = 0.0;
    for (int trial = 0; trial < 300; ++trial) {
        auto it   = oracle::random_interval_tree(rng, 32);
        auto weak = oracle::with_weak_parents(rng, oracle::random_nested_graph(rng, it, 150));
        CHECK(simulate(weak, 1, true, it.slots).makespan == simulate(weak, 1, false, it.slots).makespan);
        const double inf_on  = simulate(weak, weak.size(), true, it.slots).makespan;
        const double inf_off = simulate(weak, weak.size(), false, it.slots).makespan;
        CHECK(inf_on <= inf_off);
        strictly_better += inf_on < inf_off;
        for (std::size_t w : {2u, 4u}) {
            const double on  = simulate(weak, w, true, it.slots).makespan;
            const double off = simulate(weak, w, false, it.slots).makespan;
            sum_on += on;
            sum_off += off;
            anomalies += on > off;
            ++samples;
        }
    }
    MESSAGE("finite-worker anomalies: " << anomalies << " of " << samples);
    CHECK(strictly_better > 0);
    CHECK(sum_on < sum_off);
}

TEST_CASE("simulation respects the chain") {
    TaskGraph g;
    g.add(no_task, "a", "x", {R(0, 1, W)}, {}, 2.0);
    g.add(no_task, "b", "x", {R(0, 1, W)}, {}, 3.0);
    g.add(no_task, "c", "x", {R(1, 2, W)}, {}, 1.0);
    auto s = simulate(g, 2, true, 2);
    CHECK(s.makespan == 5.0);
    CHECK(s.start[1] == 2.0);
    CHECK(s.start[2] == 0.0);
    CHECK(simulate(g, 1, true, 2).makespan == 6.0);
    CHECK_THROWS_AS(simulate(g, 0, true, 2), InputError);
}

TEST_CASE("dot export marks weak edges dashed") {
    TaskGraph g;
    auto p = g.add(no_task, "P", "hlu", {R(0, 2, RW, Wk)});
    g.add(p, "P.1", "lu", {R(0, 1, RW)});
    g.add(no_task, "Q", "hlu", {R(0, 2, RW, Wk)});
    g.infer_all_edges();
    std::ostringstream os;
    g.write_dot(os);
    const std::string s = os.str();
    CHECK(s.find("digraph") != std::string::npos);
    CHECK(s.find("dashed") != std::string::npos);
    CHECK(s.find("cluster") != std::string::npos);
    CHECK(g.is_ancestor(p, 1));
    CHECK_FALSE(g.is_ancestor(1, p));
    CHECK(g.find("P.1") == TaskId{1});
}
