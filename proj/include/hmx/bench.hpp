#pragma once

#include "hmx/hlu.hpp"
#include "hmx/kernel.hpp"

#include <json.hpp>

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace hmx {

enum class CaseKind { Dense2x2, Bem };
enum class TableFormat { Csv, Json, Text };

struct BenchConfig {
    CaseKind kind          = CaseKind::Dense2x2;
    std::size_t n          = 512;
    std::size_t r          = 3;   // dense2x2 recursion depth
    std::size_t dim        = 1;   // bem
    double eta             = 0.5; // bem
    std::size_t leafsize   = 32;
    std::size_t m          = 0; // interpolation order, 0 picks the per-dimension default
    double eps             = 1e-6;
    bool parallel          = false;
    std::size_t workers    = 1;
    bool wd_er             = true;
    std::size_t repetitions = 1;
    std::uint64_t seed     = 0;
    std::size_t probes     = 10;
    TableFormat format     = TableFormat::Csv;
    std::string output; // empty writes to stdout

    /// Throws InputError on an inconsistent configuration.
    void validate() const;
    std::string case_name() const;
};

void to_json(nlohmann::json &j, const BenchConfig &c);
void from_json(const nlohmann::json &j, BenchConfig &c);

std::string_view to_string(CaseKind k);
std::string_view to_string(TableFormat f);
CaseKind parse_case_kind(std::string_view s);
TableFormat parse_table_format(std::string_view s);

/// An assembled test matrix together with everything that keeps it alive.
struct BenchCase {
    std::shared_ptr<const BlockTree> blocks;
    std::unique_ptr<HMatrix> matrix;
    std::unique_ptr<KernelProblem> problem; // bem cases only
};

/// Deterministic pseudo-random entry in [-1, 1] plus n on the diagonal; unpivoted LU is stable.
double dense2x2_entry(std::size_t n, std::uint64_t seed, std::size_t i, std::size_t j);
BenchCase make_dense2x2_case(std::size_t n, std::size_t r, std::uint64_t seed);
/// The two-level sample structures with dense2x2 entries (see build_sample_tree).
BenchCase make_sample_case(std::size_t n, bool split_upper_right, std::uint64_t seed);
BenchCase make_bem_case(std::size_t d, std::size_t n, double eta, std::size_t leafsize, std::size_t m, double eps);
BenchCase make_case(const BenchConfig &cfg);

ExecutionMode mode_of(const BenchConfig &cfg);

/// Largest relative residual |A x - L (U x)| / |A x| over random probes.
double probe_residual(const HMatrix &original, const HMatrix &factored, std::size_t probes, std::uint64_t seed);

struct BenchResult {
    BenchConfig config;
    std::vector<double> times; // seconds per repetition
    double time_min    = 0.0;
    double time_median = 0.0;
    double flops       = 0.0;
    double gflops      = 0.0;
    double seq_time    = 0.0;
    double speedup     = 1.0;
    double residual    = 0.0;
    std::size_t peak_rank = 0;
    std::size_t tasks     = 0;
    std::uint64_t skeleton_hash = 0;
};

/// Builds the case, factorizes it `repetitions` times in the configured mode and probes the
/// residual of the last run. Parallel runs are timed against a sequential baseline measured
/// in the same call unless `baseline_seconds` is positive.
BenchResult run_bench(const BenchConfig &cfg, double baseline_seconds = 0.0);

/// Column order: case, n, eta_r, mode, workers, wd_er, time, gflops, speedup, residual.
void emit_table(std::ostream &os, const std::vector<BenchResult> &results, TableFormat format);

double median(std::vector<double> v);

} // namespace hmx
