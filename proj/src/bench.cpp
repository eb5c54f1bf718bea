#include "hmx/bench.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

namespace hmx {

std::string_view to_string(CaseKind k) { return k == CaseKind::Dense2x2 ? "dense2x2" : "bem"; }

std::string_view to_string(TableFormat f) {
    switch (f) {
    case TableFormat::Csv:
        return "csv";
    case TableFormat::Json:
        return "json";
    case TableFormat::Text:
        return "text";
    }
    return "?";
}

CaseKind parse_case_kind(std::string_view s) {
    if (s == "dense2x2")
        return CaseKind::Dense2x2;
    if (s == "bem")
        return CaseKind::Bem;
    throw InputError("unknown case '" + std::string(s) + "' (expected dense2x2 or bem)");
}

TableFormat parse_table_format(std::string_view s) {
    if (s == "csv")
        return TableFormat::Csv;
    if (s == "json")
        return TableFormat::Json;
    if (s == "text")
        return TableFormat::Text;
    throw InputError("unknown format '" + std::string(s) + "' (expected csv, json or text)");
}

void BenchConfig::validate() const {
    if (n < 1)
        throw InputError("n must be positive");
    if (repetitions < 1)
        throw InputError("repetitions must be at least 1");
    if (workers < 1)
        throw InputError("workers must be at least 1");
    if (probes < 1)
        throw InputError("probes must be at least 1");
    if (!(eps >= 0.0))
        throw InputError("eps must be nonnegative");
    if (kind == CaseKind::Dense2x2) {
        if (r >= 63 || (std::size_t{1} << r) > n)
            throw InputError("dense2x2 needs 2^r <= n");
    } else {
        if (dim < 1 || dim > 3)
            throw InputError("bem dimension must be 1, 2 or 3");
        if (!(eta > 0.0))
            throw InputError("eta must be positive");
        if (leafsize < 1)
            throw InputError("leafsize must be positive");
    }
}

std::string BenchConfig::case_name() const {
    if (kind == CaseKind::Dense2x2)
        return "dense2x2";
    return "bem-d" + std::to_string(dim);
}

void to_json(nlohmann::json &j, const BenchConfig &c) {
    j = nlohmann::json{{"case", std::string(to_string(c.kind))},
                       {"n", c.n},
                       {"r", c.r},
                       {"d", c.dim},
                       {"eta", c.eta},
                       {"leafsize", c.leafsize},
                       {"m", c.m},
                       {"eps", c.eps},
                       {"mode", c.parallel ? "par" : "seq"},
                       {"workers", c.workers},
                       {"wd_er", c.wd_er},
                       {"repetitions", c.repetitions},
                       {"seed", c.seed},
                       {"probes", c.probes},
                       {"format", std::string(to_string(c.format))},
                       {"output", c.output}};
}

void from_json(const nlohmann::json &j, BenchConfig &c) {
    BenchConfig d;
    c.kind        = parse_case_kind(j.value("case", std::string(to_string(d.kind))));
    c.n           = j.value("n", d.n);
    c.r           = j.value("r", d.r);
    c.dim         = j.value("d", d.dim);
    c.eta         = j.value("eta", d.eta);
    c.leafsize    = j.value("leafsize", d.leafsize);
    c.m           = j.value("m", d.m);
    c.eps         = j.value("eps", d.eps);
    const auto mode = j.value("mode", std::string("seq"));
    if (mode != "seq" && mode != "par")
        throw InputError("mode must be seq or par");
    c.parallel    = mode == "par";
    c.workers     = j.value("workers", d.workers);
    c.wd_er       = j.value("wd_er", d.wd_er);
    c.repetitions = j.value("repetitions", d.repetitions);
    c.seed        = j.value("seed", d.seed);
    c.probes      = j.value("probes", d.probes);
    c.format      = parse_table_format(j.value("format", std::string(to_string(d.format))));
    c.output      = j.value("output", d.output);
}

// ---------------------------------------------------------------------------
// Cases
// ---------------------------------------------------------------------------

double dense2x2_entry(std::size_t n, std::uint64_t seed, std::size_t i, std::size_t j) {
    std::uint64_t z = seed * 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(i) * n + j + 1;
    z               = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z               = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z ^= z >> 31;
    const double u = static_cast<double>(z >> 11) * 0x1.0p-53;
    return 2.0 * u - 1.0 + (i == j ? static_cast<double>(n) : 0.0);
}

namespace {

BenchCase with_dense2x2_entries(BlockTree tree, std::size_t n, std::uint64_t seed) {
    BenchCase c;
    c.blocks = std::make_shared<const BlockTree>(std::move(tree));
    ContentPolicy policy;
    policy.dense = [n, seed](const BlockNode &b) {
        DenseBlock D(static_cast<Eigen::Index>(b.rows()), static_cast<Eigen::Index>(b.cols()));
        for (std::size_t jj = 0; jj < b.cols(); ++jj)
            for (std::size_t ii = 0; ii < b.rows(); ++ii)
                D(static_cast<Eigen::Index>(ii), static_cast<Eigen::Index>(jj)) =
                    dense2x2_entry(n, seed, b.row->offset + ii, b.col->offset + jj);
        return D;
    };
    policy.rk = [](const BlockNode &b) { return RkBlock(b.rows(), b.cols()); };
    c.matrix  = build_hmatrix(c.blocks, policy);
    return c;
}

} // namespace

BenchCase make_dense2x2_case(std::size_t n, std::size_t r, std::uint64_t seed) {
    return with_dense2x2_entries(build_diagonal_2x2_tree(n, r), n, seed);
}

BenchCase make_sample_case(std::size_t n, bool split_upper_right, std::uint64_t seed) {
    return with_dense2x2_entries(build_sample_tree(n, split_upper_right), n, seed);
}

BenchCase make_bem_case(std::size_t d, std::size_t n, double eta, std::size_t leafsize, std::size_t m, double eps) {
    BenchCase c;
    KernelSpec spec(d, m == 0 ? KernelSpec::default_order(d) : m, TruncationControl(eps));
    c.problem = std::make_unique<KernelProblem>(make_bem_problem(d, n, leafsize, spec));
    auto tree = c.problem->tree_ptr();
    c.blocks  = std::make_shared<const BlockTree>(build_block_tree(tree, tree, AdmissibilityParam(eta)));
    c.matrix  = c.problem->assemble(c.blocks);
    return c;
}

BenchCase make_case(const BenchConfig &cfg) {
    cfg.validate();
    if (cfg.kind == CaseKind::Dense2x2)
        return make_dense2x2_case(cfg.n, cfg.r, cfg.seed);
    return make_bem_case(cfg.dim, cfg.n, cfg.eta, cfg.leafsize, cfg.m, cfg.eps);
}

ExecutionMode mode_of(const BenchConfig &cfg) {
    if (!cfg.parallel)
        return Sequential{};
    TaskParallel p;
    p.workers = cfg.workers;
    p.wd_er   = cfg.wd_er;
    p.seed    = cfg.seed;
    return p;
}

double probe_residual(const HMatrix &original, const HMatrix &factored, std::size_t probes, std::uint64_t seed) {
    std::mt19937_64 rng(seed + 12345);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    for (std::size_t p = 0; p < probes; ++p) {
        Vector x(static_cast<Eigen::Index>(original.cols()));
        for (Eigen::Index i = 0; i < x.size(); ++i)
            x(i) = normal(rng);
        const Vector ax  = hmatvec(original, x);
        const Vector lux = lu_matvec(factored, x);
        worst            = std::max(worst, (ax - lux).norm() / ax.norm());
    }
    return worst;
}

double median(std::vector<double> v) {
    if (v.empty())
        return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

namespace {

struct Timed {
    std::vector<double> times;
    double flops = 0.0;
    std::size_t tasks = 0;
    std::unique_ptr<HMatrix> last;
    std::uint64_t hash = 0;
};

Timed factorize_repeatedly(const HMatrix &original, const BenchConfig &cfg, ExecutionMode mode, std::size_t reps) {
    Timed t;
    for (std::size_t rep = 0; rep < reps; ++rep) {
        auto work = original.clone();
        Skeleton sk(*work);
        HLUPlan plan{*work, sk, mode, TruncationControl(cfg.eps)};
        HLUReport r = hlu_factorize(plan);
        t.times.push_back(r.seconds);
        t.flops = r.flops;
        t.tasks = r.tasks;
        t.hash  = sk.hash();
        t.last  = std::move(work);
    }
    return t;
}

} // namespace

BenchResult run_bench(const BenchConfig &cfg, double baseline_seconds) {
    cfg.validate();
    BenchCase c = make_case(cfg);

    BenchResult res;
    res.config = cfg;
    Timed run  = factorize_repeatedly(*c.matrix, cfg, mode_of(cfg), cfg.repetitions);
    res.times  = run.times;
    res.time_min    = *std::min_element(run.times.begin(), run.times.end());
    res.time_median = median(run.times);
    res.tasks       = run.tasks;
    res.skeleton_hash = run.hash;
    res.peak_rank   = run.last->max_rank();

    const double nn = static_cast<double>(cfg.n);
    res.flops       = cfg.kind == CaseKind::Dense2x2 ? 2.0 * nn * nn * nn / 3.0 : run.flops;
    res.gflops      = res.time_median > 0.0 ? res.flops / res.time_median * 1e-9 : 0.0;

    if (!cfg.parallel) {
        res.seq_time = res.time_median;
    } else if (baseline_seconds > 0.0) {
        res.seq_time = baseline_seconds;
    } else {
        res.seq_time = median(factorize_repeatedly(*c.matrix, cfg, Sequential{}, cfg.repetitions).times);
    }
    res.speedup  = cfg.parallel ? res.seq_time / res.time_median : 1.0;
    res.residual = probe_residual(*c.matrix, *run.last, cfg.probes, cfg.seed);
    if (!std::isfinite(res.residual))
        throw NumericalError("residual is not finite");
    return res;
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string> &columns() {
    static const std::vector<std::string> c{"case", "n",     "eta_r",  "mode",    "workers",
                                            "wd_er", "time", "gflops", "speedup", "residual"};
    return c;
}

std::string fmt(double v, int prec, bool sci = false) {
    std::ostringstream os;
    if (sci)
        os << std::scientific;
    else
        os << std::fixed;
    os << std::setprecision(prec) << v;
    return os.str();
}

std::vector<std::string> row(const BenchResult &r) {
    const auto &c = r.config;
    return {c.case_name(),
            std::to_string(c.n),
            c.kind == CaseKind::Dense2x2 ? std::to_string(c.r) : fmt(c.eta, 2),
            c.parallel ? "par" : "seq",
            std::to_string(c.parallel ? c.workers : 1),
            c.parallel ? (c.wd_er ? "1" : "0") : "-",
            fmt(r.time_median, 6),
            fmt(r.gflops, 3),
            fmt(r.speedup, 3),
            fmt(r.residual, 3, true)};
}

} // namespace

void emit_table(std::ostream &os, const std::vector<BenchResult> &results, TableFormat format) {
    if (results.empty())
        throw InputError("emit_table: no results");
    const auto &cols = columns();
    std::vector<std::vector<std::string>> rows;
    for (const auto &r : results)
        rows.push_back(row(r));

    switch (format) {
    case TableFormat::Csv:
        for (std::size_t i = 0; i < cols.size(); ++i)
            os << (i ? "," : "") << cols[i];
        os << '\n';
        for (const auto &rw : rows) {
            for (std::size_t i = 0; i < rw.size(); ++i)
                os << (i ? "," : "") << rw[i];
            os << '\n';
        }
        break;
    case TableFormat::Json: {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto &r : results) {
            nlohmann::json o;
            const auto &c = r.config;
            o["case"]     = c.case_name();
            o["n"]        = c.n;
            if (c.kind == CaseKind::Dense2x2)
                o["eta_r"] = c.r;
            else
                o["eta_r"] = c.eta;
            o["mode"]      = c.parallel ? "par" : "seq";
            o["workers"]   = c.parallel ? c.workers : 1;
            o["wd_er"]     = c.parallel && c.wd_er;
            o["time"]      = r.time_median;
            o["gflops"]    = r.gflops;
            o["speedup"]   = r.speedup;
            o["residual"]  = r.residual;
            o["time_min"]  = r.time_min;
            o["times"]     = r.times;
            o["flops"]     = r.flops;
            o["peak_rank"] = r.peak_rank;
            o["tasks"]     = r.tasks;
            arr.push_back(std::move(o));
        }
        os << arr.dump(2) << '\n';
        break;
    }
    case TableFormat::Text: {
        std::vector<std::size_t> w(cols.size());
        for (std::size_t i = 0; i < cols.size(); ++i) {
            w[i] = cols[i].size();
            for (const auto &rw : rows)
                w[i] = std::max(w[i], rw[i].size());
        }
        auto line = [&](const std::vector<std::string> &cells) {
            for (std::size_t i = 0; i < cells.size(); ++i)
                os << (i ? "  " : "") << std::setw(static_cast<int>(w[i])) << cells[i];
            os << '\n';
        };
        line(cols);
        for (const auto &rw : rows)
            line(rw);
        break;
    }
    }
}

} // namespace hmx
