#pragma once

#include "hmx/geometry.hpp"
#include "hmx/skeleton.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

namespace hmx {

using TaskId                    = std::size_t;
inline constexpr TaskId no_task = std::numeric_limits<TaskId>::max();

enum class TaskState { Created, Ready, Running, Finished, Released };
std::string_view to_string(TaskState s);

/// A child access outside every access of its parent.
class SubsetRuleError : public InputError {
  public:
    using InputError::InputError;
};

class DeadlockError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Dependency inference between siblings
// ---------------------------------------------------------------------------

struct Edge {
    std::size_t from = 0; // index into the sibling list (earlier)
    std::size_t to   = 0; // later
    std::size_t from_access = 0;
    std::size_t to_access   = 0;
    bool weak = false; // no conflicting pair of two strong accesses
};

/// Every ordered pair (earlier, later) of siblings with intersecting accesses and at least
/// one writer gets exactly one edge. Read-read overlaps produce nothing.
std::vector<Edge> infer_edges(const std::vector<std::vector<Region>> &siblings);

// ---------------------------------------------------------------------------
// Static task graphs
// ---------------------------------------------------------------------------

struct TaskNode {
    TaskId parent = no_task;
    std::string label;
    std::string kind;
    std::vector<Region> accesses;
    std::vector<TaskId> children;
    std::function<void()> kernel; // leaf work; parents only spawn their children
    double cost = 1.0;            // used by the simulator
};

struct GraphEdge {
    TaskId from = 0;
    TaskId to   = 0;
    Edge cause;
};

/// A fully expanded nested task tree plus the sibling edges inferred at every level.
class TaskGraph {
  public:
    TaskId add(TaskId parent, std::string label, std::string kind, std::vector<Region> accesses,
               std::function<void()> kernel = {}, double cost = 1.0);

    const std::vector<TaskNode> &tasks() const { return tasks_; }
    const TaskNode &task(TaskId id) const { return tasks_.at(id); }
    const std::vector<TaskId> &roots() const { return roots_; }
    std::size_t size() const { return tasks_.size(); }

    /// Runs infer_edges over every sibling group (and the roots).
    void infer_all_edges();
    const std::vector<GraphEdge> &edges() const { return edges_; }

    std::optional<TaskId> find(const std::string &label) const;
    bool is_ancestor(TaskId a, TaskId b) const; // a strictly above b
    std::vector<TaskId> preorder() const;

    /// Graphviz export: nesting as clusters, strong edges solid, weak edges dashed.
    void write_dot(std::ostream &os) const;

  private:
    std::vector<TaskNode> tasks_;
    std::vector<TaskId> roots_;
    std::vector<GraphEdge> edges_;
};

// ---------------------------------------------------------------------------
// Dependency tracking
// ---------------------------------------------------------------------------

/// Single-threaded state machine behind both the threaded runtime and the simulator.
///
/// Each task keeps one entry per skeleton slot it declares. A strong entry of a new task
/// waits on the conflicting entries of its earlier siblings; when the parent's entry for
/// that slot is weak, the walk continues with the parent's earlier siblings, and so on up
/// the nest. A reader waits until an earlier writer entry is write-complete; a writer waits
/// until earlier entries are fully complete.
///
/// With early release an entry completes per slot as soon as the task body has returned and
/// no child entry on that slot is still open. Without it every entry of a task completes
/// only when the whole subtree has finished, and weak accesses count as strong.
class DependencyTracker {
  public:
    DependencyTracker(std::size_t slot_count, bool early_release);

    /// Registers a task; parent = no_task for top level. Enforces the subset rule.
    TaskId add(TaskId parent, std::vector<Region> accesses);
    void start(TaskId id);
    void body_finished(TaskId id);

    /// Tasks that became ready since the last call, in the order they became ready.
    std::vector<TaskId> take_ready();

    TaskState state(TaskId id) const;
    TaskId parent(TaskId id) const;
    bool complete(TaskId id) const;
    std::size_t task_count() const { return tasks_.size() - 1; }
    std::size_t unfinished() const { return unfinished_; }
    /// Tasks whose whole subtree finished since the last call.
    std::vector<TaskId> take_completed();

    std::string blocked_report() const;

  private:
    struct Entry {
        std::size_t slot   = 0;
        bool write         = false;
        bool weak          = false;
        std::size_t seq    = 0; // position among the parent's children
        int open_children  = 0;
        int open_writers   = 0;
        bool write_done    = false;
        bool full_done     = false;
        std::vector<TaskId> wait_write;
        std::vector<TaskId> wait_full;
    };
    struct Task {
        TaskId parent = no_task;
        std::size_t seq = 0;
        std::vector<Entry> entries; // sorted by slot
        std::unordered_map<std::size_t, std::vector<std::pair<TaskId, std::size_t>>> domain;
        std::size_t next_child_seq = 0;
        int pending                = 0;
        int open_children          = 0;
        bool body_done             = false;
        bool complete              = false;
        TaskState state            = TaskState::Created;
    };

    Entry *find_entry(Task &t, std::size_t slot);
    void check_subset(const Task &parent, const std::vector<Region> &accesses) const;
    void collect_blockers(TaskId id, Entry &e);
    void wait_on(TaskId waiter, TaskId holder, std::size_t entry, bool full);
    void maybe_close_entry(TaskId id, std::size_t idx);
    void mark_write_done(TaskId id, std::size_t idx);
    void mark_full_done(TaskId id, std::size_t idx);
    void maybe_complete(TaskId id);
    void release_one(TaskId waiter);

    std::size_t slot_count_;
    bool early_release_;
    std::vector<Task> tasks_; // index 0 is the implicit root
    std::vector<TaskId> ready_;
    std::vector<TaskId> completed_;
    std::size_t unfinished_ = 0;
};

// ---------------------------------------------------------------------------
// Threaded runtime
// ---------------------------------------------------------------------------

struct SchedulerConfig {
    std::size_t workers  = 1;
    bool wd_er           = true;
    std::uint64_t seed   = 0;
    bool trace           = true;
    bool check_exclusive = false; // per-slot writer tags, a race detector for the region model
};

struct TaskRecord {
    TaskId id     = 0;
    TaskId parent = no_task;
    std::string label;
    std::vector<Region> accesses;
    std::int64_t submit_ns   = -1;
    std::int64_t ready_ns    = -1;
    std::int64_t start_ns    = -1;
    std::int64_t end_ns      = -1; // body returned
    std::int64_t complete_ns = -1; // body and all descendants finished
    std::size_t worker       = 0;
};

struct ExecutionTrace {
    std::vector<TaskRecord> tasks;
    std::int64_t wall_ns = 0;
    std::size_t workers  = 0;
    std::size_t exclusive_violations = 0;

    const TaskRecord *find(const std::string &label) const;
    /// task,parent,label,submit_ns,ready_ns,start_ns,end_ns,complete_ns,worker
    void write_csv(std::ostream &os) const;
};

/// Data-flow task pool. Tasks submitted from inside a running body become children of it.
class Runtime {
  public:
    Runtime(SchedulerConfig cfg, std::size_t slot_count);
    ~Runtime();

    Runtime(const Runtime &) = delete;
    Runtime &operator=(const Runtime &) = delete;

    TaskId submit(std::vector<Region> accesses, std::function<void()> body, std::string label = {});

    /// While held, workers start no new tasks; lets a batch of submissions enter the queues together.
    void hold();
    void resume();

    /// Blocks until every task has finished. Rethrows the first exception raised by a body;
    /// throws DeadlockError when tasks remain but none can ever become ready.
    ExecutionTrace wait();

    const SchedulerConfig &config() const { return cfg_; }

    /// Submits the roots of a static graph; each parent spawns its children when it runs.
    static ExecutionTrace run_graph(const TaskGraph &g, SchedulerConfig cfg, std::size_t slot_count);

  private:
    struct Worker {
        std::deque<TaskId> queue;
        std::thread thread;
        std::uint64_t rng = 0;
    };

    void worker_loop(std::size_t index);
    bool pop_task(std::size_t index, TaskId &out);
    void enqueue_ready(std::size_t worker);
    void record_completed();
    void acquire_slots(TaskId id);
    void release_slots(TaskId id);
    bool deadlocked() const;
    std::int64_t now() const;

    SchedulerConfig cfg_;
    std::size_t slot_count_;
    DependencyTracker tracker_;
    std::vector<std::function<void()>> bodies_;
    std::vector<TaskRecord> records_;
    std::vector<std::unique_ptr<Worker>> workers_;
    std::vector<std::vector<std::pair<TaskId, bool>>> slot_holders_; // (task, writes) per slot

    mutable std::mutex mutex_;
    std::condition_variable work_cv_;
    std::condition_variable done_cv_;
    std::size_t running_ = 0;
    bool stop_           = false;
    bool held_           = false;
    std::exception_ptr error_;
    std::size_t violations_ = 0;
    std::chrono::steady_clock::time_point t0_;
};

// ---------------------------------------------------------------------------
// Discrete-event simulation
// ---------------------------------------------------------------------------

struct SimulationResult {
    double makespan = 0.0;
    std::vector<double> start; // per graph task
    std::vector<double> end;
    std::vector<double> complete;
};

/// Greedy list scheduling of a static graph on `workers` identical workers: leaves take
/// TaskNode::cost, parents take zero time. Ready tasks are served FIFO.
SimulationResult simulate(const TaskGraph &g, std::size_t workers, bool wd_er, std::size_t slot_count);

} // namespace hmx
