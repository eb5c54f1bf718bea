#include "hmx/bench.hpp"
#include "hmx/serialize.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>

using namespace hmx;

namespace {

enum Exit { ok = 0, validation = 2, numerical = 3, deadlock = 4 };

// Flags mirror BenchConfig. Values given on the command line win over a --config file.
struct ConfigFlags {
    BenchConfig cfg;
    std::string kind = "dense2x2", mode = "seq", format = "csv", config_path;
    bool dump_config = false;
    std::vector<std::pair<CLI::Option *, std::function<void(BenchConfig &)>>> setters;

    void attach(CLI::App *app) {
        auto bind = [&](CLI::Option *o, std::function<void(BenchConfig &)> f) { setters.emplace_back(o, std::move(f)); };
        bind(app->add_option("--case", kind, "dense2x2 or bem")->check(CLI::IsMember({"dense2x2", "bem"})),
             [this](BenchConfig &c) { c.kind = parse_case_kind(kind); });
        bind(app->add_option("-n,--n", cfg.n, "matrix size"), [this](BenchConfig &c) { c.n = cfg.n; });
        bind(app->add_option("-r,--r", cfg.r, "dense2x2 recursion depth"), [this](BenchConfig &c) { c.r = cfg.r; });
        bind(app->add_option("-d,--d", cfg.dim, "bem dimension (1, 2, 3)"), [this](BenchConfig &c) { c.dim = cfg.dim; });
        bind(app->add_option("--eta", cfg.eta, "admissibility parameter"), [this](BenchConfig &c) { c.eta = cfg.eta; });
        bind(app->add_option("--leafsize", cfg.leafsize, "maximum leaf cluster size"),
             [this](BenchConfig &c) { c.leafsize = cfg.leafsize; });
        bind(app->add_option("-m,--m", cfg.m, "Chebyshev nodes per axis (0: default)"),
             [this](BenchConfig &c) { c.m = cfg.m; });
        bind(app->add_option("--eps", cfg.eps, "relative truncation tolerance"),
             [this](BenchConfig &c) { c.eps = cfg.eps; });
        bind(app->add_option("--mode", mode, "seq or par")->check(CLI::IsMember({"seq", "par"})),
             [this](BenchConfig &c) { c.parallel = mode == "par"; });
        bind(app->add_option("-w,--workers", cfg.workers, "worker threads (par mode)"),
             [this](BenchConfig &c) { c.workers = cfg.workers; });
        bind(app->add_option("--wd-er", cfg.wd_er, "weak dependencies and early release (par mode)"),
             [this](BenchConfig &c) { c.wd_er = cfg.wd_er; });
        bind(app->add_option("--repetitions", cfg.repetitions, "timed factorizations"),
             [this](BenchConfig &c) { c.repetitions = cfg.repetitions; });
        bind(app->add_option("--seed", cfg.seed, "seed for entries, probes and stealing"),
             [this](BenchConfig &c) { c.seed = cfg.seed; });
        bind(app->add_option("--probes", cfg.probes, "random matvec probes for the residual"),
             [this](BenchConfig &c) { c.probes = cfg.probes; });
        bind(app->add_option("--format", format, "csv, json or text")->check(CLI::IsMember({"csv", "json", "text"})),
             [this](BenchConfig &c) { c.format = parse_table_format(format); });
        bind(app->add_option("-o,--output", cfg.output, "output path (default stdout)"),
             [this](BenchConfig &c) { c.output = cfg.output; });
        app->add_option("--config", config_path, "JSON config file");
        app->add_flag("--dump-config", dump_config, "print the resolved config as JSON and exit");
    }

    BenchConfig resolve() const {
        BenchConfig out;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in)
                throw InputError("cannot open config " + config_path);
            nlohmann::json j;
            try {
                in >> j;
            } catch (const nlohmann::json::exception &e) {
                throw InputError(std::string("malformed config: ") + e.what());
            }
            out = j.get<BenchConfig>();
        }
        for (const auto &[opt, set] : setters)
            if (opt->count() > 0 || config_path.empty())
                set(out);
        if (const char *w = std::getenv("HLU_WORKERS"); w && *w) {
            try {
                const long v = std::stol(w);
                if (v < 1)
                    throw InputError("");
                out.workers = static_cast<std::size_t>(v);
            } catch (const std::exception &) {
                throw InputError("HLU_WORKERS must be a positive integer");
            }
        }
        out.validate();
        return out;
    }
};

class Sink {
  public:
    explicit Sink(const std::string &path) {
        if (!path.empty()) {
            file_.open(path);
            if (!file_)
                throw InputError("cannot write " + path);
        }
    }
    std::ostream &stream() { return file_.is_open() ? static_cast<std::ostream &>(file_) : std::cout; }

  private:
    std::ofstream file_;
};

int cmd_bench(const BenchConfig &cfg, bool compare) {
    std::vector<BenchResult> results;
    if (compare) {
        BenchConfig seq = cfg;
        seq.parallel    = false;
        results.push_back(run_bench(seq));
        for (bool wd : {false, true}) {
            BenchConfig par = cfg;
            par.parallel    = true;
            par.wd_er       = wd;
            results.push_back(run_bench(par, results.front().time_median));
        }
    } else {
        results.push_back(run_bench(cfg));
    }
    Sink out(cfg.output);
    emit_table(out.stream(), results, cfg.format);
    return ok;
}

int cmd_verify(const BenchConfig &cfg, double tol) {
    BenchCase c = make_case(cfg);
    auto work   = c.matrix->clone();
    Skeleton sk(*work);
    const auto before = sk.hash();
    HLUPlan plan{*work, sk, mode_of(cfg), TruncationControl(cfg.eps)};
    hlu_factorize(plan);
    const double res = probe_residual(*c.matrix, *work, cfg.probes, cfg.seed);
    const bool skeleton_ok = Skeleton(*work).hash() == before;

    bool bitwise = true;
    if (cfg.parallel) {
        auto ref = c.matrix->clone();
        Skeleton rsk(*ref);
        hlu_factorize(HLUPlan{*ref, rsk, Sequential{}, TruncationControl(cfg.eps)});
        bitwise = bitwise_equal(*ref, *work);
    }
    if (tol <= 0.0)
        tol = cfg.kind == CaseKind::Dense2x2 ? 1e-11 : 1e-3;
    const bool pass = std::isfinite(res) && res <= tol && skeleton_ok;
    Sink out(cfg.output);
    out.stream() << "case " << cfg.case_name() << " n " << cfg.n << " residual " << res << " tol " << tol
                 << " skeleton " << (skeleton_ok ? "unchanged" : "CHANGED");
    if (cfg.parallel)
        out.stream() << " matches-sequential " << (bitwise ? "bitwise" : "no");
    out.stream() << " -> " << (pass ? "ok" : "FAIL") << '\n';
    return pass ? ok : numerical;
}

int cmd_assemble(const BenchConfig &cfg, const std::string &leaves, const std::string &save) {
    BenchCase c     = make_case(cfg);
    const HMatrix &h = *c.matrix;
    std::size_t dense = 0, rk = 0;
    for_each_leaf(h, [&](const HMatrix &l) { (l.is_dense() ? dense : rk) += 1; });
    Sink out(cfg.output);
    auto &os = out.stream();
    os << "case " << cfg.case_name() << " n " << cfg.n << "\nleaves " << h.leaf_count() << " dense " << dense << " lowrank "
       << rk << "\nmax_rank " << h.max_rank() << "\nstorage " << h.storage() << " ratio "
       << static_cast<double>(h.storage()) / (static_cast<double>(cfg.n) * static_cast<double>(cfg.n)) << '\n';
    if (c.problem && cfg.n <= flatten_limit) {
        const DenseBlock G = c.problem->dense_matrix();
        os << "assembly_error " << (flatten(h) - G).norm() / G.norm() << '\n';
    }
    if (!leaves.empty()) {
        std::ofstream f(leaves);
        if (!f)
            throw InputError("cannot write " + leaves);
        dump_leaves(f, h);
    }
    if (!save.empty()) {
        std::ofstream f(save, std::ios::binary);
        if (!f)
            throw InputError("cannot write " + save);
        save_hmatrix(f, h);
    }
    return ok;
}

int cmd_graph(const BenchConfig &cfg, const std::string &sample, const std::string &trace_path) {
    BenchCase c;
    if (sample == "fig1" || sample == "fig3")
        c = make_sample_case(cfg.n, sample == "fig3", cfg.seed);
    else if (!sample.empty())
        throw InputError("--sample must be fig1 or fig3");
    else
        c = make_case(cfg);
    Skeleton sk(*c.matrix);
    TaskParallel p;
    p.workers = cfg.workers;
    p.wd_er   = cfg.wd_er;
    p.seed    = cfg.seed;
    HLUPlan plan{*c.matrix, sk, p, TruncationControl(cfg.eps)};
    const TaskGraph g = emit_task_graph(plan);
    Sink out(cfg.output);
    g.write_dot(out.stream());
    if (!trace_path.empty()) {
        std::ofstream f(trace_path);
        if (!f)
            throw InputError("cannot write " + trace_path);
        hlu_factorize(plan).trace->write_csv(f);
    }
    return ok;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"H-matrix LU factorization driver"};
    app.require_subcommand(1);

    ConfigFlags bench_flags, verify_flags, assemble_flags, graph_flags;
    bool compare = false;
    double tol   = 0.0;
    std::string leaves, save, sample, trace;

    auto *bench = app.add_subcommand("bench", "factorize a case and report time, GFLOPS, speedup and residual");
    bench_flags.attach(bench);
    bench->add_flag("--compare", compare, "run seq, par without and par with WD+ER against one baseline");

    auto *verify = app.add_subcommand("verify", "factorize once and check the residual");
    verify_flags.attach(verify);
    verify->add_option("--tol", tol, "residual bound (default 1e-11 dense, 1e-3 bem)");

    auto *assemble = app.add_subcommand("assemble", "build a case and report its H-matrix structure");
    assemble_flags.attach(assemble);
    assemble->add_option("--leaves", leaves, "write the leaf list to this path");
    assemble->add_option("--save", save, "write the binary H-matrix to this path");

    auto *graph = app.add_subcommand("graph-export", "write the H-LU task graph as Graphviz DOT");
    graph_flags.attach(graph);
    graph->add_option("--sample", sample, "fig1 or fig3 sample structure instead of --case");
    graph->add_option("--trace", trace, "also run it and write the execution trace CSV here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? ok : validation;
    }

    try {
        ConfigFlags *flags = bench->parsed()      ? &bench_flags
                             : verify->parsed()   ? &verify_flags
                             : assemble->parsed() ? &assemble_flags
                                                  : &graph_flags;
        const BenchConfig cfg = flags->resolve();
        if (flags->dump_config) {
            std::cout << nlohmann::json(cfg).dump(2) << '\n';
            return ok;
        }
        if (bench->parsed())
            return cmd_bench(cfg, compare);
        if (verify->parsed())
            return cmd_verify(cfg, tol);
        if (assemble->parsed())
            return cmd_assemble(cfg, leaves, save);
        return cmd_graph(cfg, sample, trace);
    } catch (const DeadlockError &e) {
        std::cerr << "deadlock: " << e.what() << '\n';
        return deadlock;
    } catch (const InputError &e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return validation;
    } catch (const NumericalError &e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return numerical;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return numerical;
    }
}
