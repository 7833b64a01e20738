#pragma once

#include "facret/descriptor_store.hpp"
#include "facret/factorization.hpp"

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace facret {

enum class Pipeline { pca_corr, pca_angle, nmf_corr, nmf_angle, combined };

inline constexpr std::array<Pipeline, 5> kAllPipelines = {
    Pipeline::pca_corr, Pipeline::pca_angle, Pipeline::nmf_corr, Pipeline::nmf_angle, Pipeline::combined};

std::string to_string(Pipeline p);
Pipeline parse_pipeline(const std::string& name);

/// Estimated model order, or a fixed number of loading columns.
struct RankMode {
    std::optional<int> fixed;

    std::string label() const;
    bool operator==(const RankMode&) const = default;
};

/// A descriptor corpus plus a human-readable description of where it came
/// from (the synthetic spec or the directory path).
struct EvalCorpus {
    std::string source;
    std::vector<DescriptorMatrix> images;
};

/// "synthetic:<spec>" generates a corpus; anything else is a directory for
/// load_corpus_dir.
EvalCorpus load_eval_corpus(const std::string& source);

struct EvalSettings {
    int eta = 20;
    int top = 20;          // accuracy is reported for top_n = 1..top (top <= eta)
    int query_view = 0;    // 0-based position of the query view within each object
    std::optional<int> k_max;
    NmfOptions nmf;
    unsigned threads = 0;  // 0: one per hardware thread
};

struct EvalGrid {
    std::vector<Pipeline> pipelines{kAllPipelines.begin(), kAllPipelines.end()};
    std::vector<RankMode> rank_modes{RankMode{}};
    std::vector<int> bits{5};    // 0: unquantized loadings on both sides
    std::vector<int> alphas{2};  // only used by the combined pipeline
};

struct EvalRecord {
    Pipeline pipeline = Pipeline::combined;
    RankMode rank;
    int bits = 0;
    std::optional<int> alpha;       // set for the combined pipeline only
    std::vector<double> accuracy;   // accuracy[n - 1] is the top-n accuracy
    int queries = 0;
    double mean_order = 0.0;        // mean k over query images under this rank mode

    double top(int n) const { return accuracy.at(static_cast<std::size_t>(n - 1)); }
};

struct EvalReport {
    std::string command;
    std::string corpus;
    EvalSettings settings;
    std::size_t query_count = 0;
    std::size_t database_count = 0;
    std::vector<EvalRecord> records;
    std::vector<std::string> violations;  // broken invariants; empty on success
    double seconds = 0.0;

    /// Throws InvalidArgument when the configuration was not evaluated.
    const EvalRecord& find(Pipeline p, const RankMode& rank, int bits,
                           std::optional<int> alpha = std::nullopt) const;
};

/// Leave-one-view-out evaluation: for every object the view at
/// settings.query_view queries an index built from all other views, and a
/// query counts as correct at n when its object is among the top n results.
/// Every combination in the grid yields one record. Queries whose loadings
/// are degenerate count as misses.
EvalReport evaluate(std::span<const DescriptorMatrix> corpus, const EvalSettings& settings,
                    const EvalGrid& grid = {});

/// Combined pipeline for every alpha, plus the PCA correlation and NMF angle
/// rows. Also checks that alpha = eta reproduces the primary hypothesis.
EvalReport sweep_alpha(std::span<const DescriptorMatrix> corpus, const EvalSettings& settings,
                       std::vector<int> alphas, int bits = 5);

/// Every pipeline at every bit depth; an unquantized row (bits = 0) is
/// always included.
EvalReport sweep_bits(std::span<const DescriptorMatrix> corpus, const EvalSettings& settings,
                      std::vector<int> bit_grid, int alpha = 2);

/// Every pipeline with the estimated order and with each fixed order.
EvalReport sweep_rank(std::span<const DescriptorMatrix> corpus, const EvalSettings& settings,
                      std::vector<int> fixed_ranks, int bits = 5, int alpha = 2);

/// Line-delimited JSON: one header line, one line per (configuration, top_n),
/// one trailing summary line.
void write_jsonl(std::ostream& out, const EvalReport& report);

/// Fixed-width table of top-1/2/3/top accuracy per configuration.
void write_summary(std::ostream& out, const EvalReport& report);

} // namespace facret
