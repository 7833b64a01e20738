// Command-line front end: corpus generation, index building, the retrieval
// server and client, and the evaluation sweeps.

#include "facret/descriptor_store.hpp"
#include "facret/errors.hpp"
#include "facret/evaluation.hpp"
#include "facret/index_builder.hpp"
#include "facret/service.hpp"

#include "CLI11.hpp"

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

namespace fs = std::filesystem;
using namespace facret;

namespace {

constexpr int kExitError = 1;
constexpr int kExitInvariant = 2;

struct EvalFlags {
    std::string corpus;
    int eta = 20;
    int top = 20;
    int query_view = 1;
    unsigned threads = 0;
    std::optional<int> k_max;
    std::string out;
};

void add_eval_flags(CLI::App* cmd, EvalFlags& f) {
    cmd->add_option("--corpus", f.corpus, "Descriptor directory or synthetic:<spec>")->required();
    cmd->add_option("--eta", f.eta, "List length")->capture_default_str()->check(CLI::Range(1, 65535));
    cmd->add_option("--top", f.top, "Report top-n accuracy for n = 1..top")->capture_default_str();
    cmd->add_option("--query-view", f.query_view, "1-based view used as the query for every object")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--threads", f.threads, "Worker threads (0: all cores)")->capture_default_str();
    cmd->add_option("--k-max", f.k_max, "Largest model order considered by the estimator");
    cmd->add_option("--out", f.out, "Write JSON lines to this file");
}

EvalSettings settings_from(const EvalFlags& f) {
    EvalSettings s;
    s.eta = f.eta;
    s.top = std::min(f.top, f.eta);
    s.query_view = f.query_view - 1;
    s.threads = f.threads;
    s.k_max = f.k_max;
    return s;
}

int finish(EvalReport report, const EvalFlags& f) {
    report.corpus = f.corpus;
    if (!f.out.empty()) {
        std::ofstream out(f.out);
        if (!out) {
            throw Error("cannot write " + f.out);
        }
        write_jsonl(out, report);
    }
    write_summary(std::cout, report);
    return report.violations.empty() ? 0 : kExitInvariant;
}

int run_generate(const std::string& spec_text, const std::string& out_dir, bool csv) {
    const auto corpus = generate_corpus(parse_synth_spec(spec_text));
    fs::create_directories(out_dir);
    for (const auto& m : corpus) {
        write_descriptor_file(fs::path(out_dir) / (m.image_id() + (csv ? ".csv" : ".dmt")), m);
    }
    std::cout << "wrote " << corpus.size() << " descriptor files to " << out_dir << '\n';
    return 0;
}

int run_build_index(const std::string& source, const std::string& out, int bits, const ExtractionOptions& opts) {
    const auto corpus = load_eval_corpus(source);
    const auto records = prepare_records(corpus.images, opts, bits);
    write_index_file(out, records);
    std::size_t payload = 0;
    for (const auto& r : records) {
        payload += encode(r.loadings.pca).size() + encode(r.loadings.nmf).size();
    }
    std::cout << "indexed " << records.size() << " images; mean stored pair "
              << static_cast<double>(payload) / static_cast<double>(records.size()) << " bytes\n";
    return 0;
}

int run_serve(const std::string& index_path, const std::string& listen, std::uint32_t max_frame) {
    auto index = std::make_shared<const ObjectIndex>(index_from_records(read_index_file(index_path)));

    // Block the stop signals before any thread exists so that only sigwait
    // below sees them.
    sigset_t stop_signals;
    sigemptyset(&stop_signals);
    sigaddset(&stop_signals, SIGINT);
    sigaddset(&stop_signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

    ServerOptions opts;
    opts.max_frame = max_frame;
    auto server = serve(index, parse_endpoint(listen), opts);
    std::cout << "serving " << index->image_count() << " images of " << index->object_count()
              << " objects on port " << server->port() << std::endl;
    int sig = 0;
    sigwait(&stop_signals, &sig);
    server->stop();
    return 0;
}

int run_query(const std::string& server, const std::string& descriptors, const QueryOptions& opts) {
    const auto m = read_descriptor_file(descriptors);
    const auto list = query_remote(parse_endpoint(server), m, opts);
    for (std::size_t i = 0; i < list.size(); ++i) {
        std::cout << (i + 1) << '\t' << list.entries[i].object_id << '\t' << list.entries[i].score << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compact-descriptor image retrieval: indexing, serving and evaluation"};
    app.require_subcommand(1);

    std::string spec_text;
    std::string out_dir;
    bool csv = false;
    auto* gen = app.add_subcommand("generate", "Write a synthetic descriptor corpus to a directory");
    gen->add_option("--spec", spec_text, "e.g. objects=50,views=5,T=32,N=400,r=4,sigma=0.05,seed=1")->required();
    gen->add_option("--out", out_dir, "Output directory")->required();
    gen->add_flag("--csv", csv, "Write CSV instead of binary files");

    std::string corpus_source;
    std::string index_out;
    int index_bits = 5;
    ExtractionOptions extraction;
    auto* build = app.add_subcommand("build-index", "Factorize a corpus and write a quantized index file");
    build->add_option("--corpus", corpus_source, "Descriptor directory or synthetic:<spec>")->required();
    build->add_option("--out", index_out, "Index file")->required();
    build->add_option("--bits", index_bits, "Bits per loading entry")->capture_default_str()->check(CLI::Range(1, 16));
    build->add_option("--k-max", extraction.k_max, "Largest model order considered by the estimator");
    build->add_option("--fixed-k", extraction.fixed_k, "Use this order instead of estimating it");

    std::string index_path;
    std::string listen = "127.0.0.1:7700";
    std::uint32_t max_frame = kDefaultMaxFrame;
    auto* srv = app.add_subcommand("serve", "Answer queries against an index file until interrupted");
    srv->add_option("--index", index_path, "Index file from build-index")->required();
    srv->add_option("--listen", listen, "host:port (port 0 picks a free one)")->capture_default_str();
    srv->add_option("--max-frame", max_frame, "Largest accepted frame in bytes")->capture_default_str();

    std::string server_addr;
    std::string descriptors;
    QueryOptions query;
    int timeout_ms = 30000;
    auto* qry = app.add_subcommand("query", "Send one image's loadings to a server and print the ranking");
    qry->add_option("--server", server_addr, "host:port")->required();
    qry->add_option("--descriptors", descriptors, "Descriptor file (.dmt or .csv)")->required();
    qry->add_option("--eta", query.eta, "List length")->capture_default_str();
    qry->add_option("--alpha", query.alpha, "Fusion weight, 0..eta")->capture_default_str();
    qry->add_option("--bits", query.bits, "Bits per loading entry")->capture_default_str()->check(CLI::Range(1, 16));
    qry->add_option("--timeout-ms", timeout_ms, "Socket timeout")->capture_default_str();
    qry->add_option("--k-max", query.extraction.k_max, "Largest model order considered by the estimator");
    qry->add_option("--fixed-k", query.extraction.fixed_k, "Use this order instead of estimating it");

    EvalFlags eval_flags;
    int eval_alpha = 2;
    int eval_bits = 5;
    std::vector<int> eval_fixed;
    auto* ev = app.add_subcommand("evaluate", "Leave-one-view-out accuracy of every pipeline");
    add_eval_flags(ev, eval_flags);
    ev->add_option("--alpha", eval_alpha, "Fusion weight for the combined pipeline")->capture_default_str();
    ev->add_option("--bits", eval_bits, "Bits per loading entry (0: unquantized)")->capture_default_str();
    ev->add_option("--fixed-k", eval_fixed, "Also evaluate these fixed orders")->delimiter(',');

    EvalFlags alpha_flags;
    std::vector<int> alphas;
    int alpha_bits = 5;
    auto* sa = app.add_subcommand("sweep-alpha", "Combined accuracy for each fusion weight");
    add_eval_flags(sa, alpha_flags);
    sa->add_option("--alphas", alphas, "Comma-separated weights (default 0..eta)")->delimiter(',');
    sa->add_option("--bits", alpha_bits, "Bits per loading entry (0: unquantized)")->capture_default_str();

    EvalFlags bits_flags;
    std::vector<int> bit_grid{1, 2, 3, 4, 5, 6, 7, 8};
    int bits_alpha = 2;
    auto* sb = app.add_subcommand("sweep-bits", "Accuracy against quantization depth");
    add_eval_flags(sb, bits_flags);
    sb->add_option("--grid", bit_grid, "Comma-separated bit depths")->delimiter(',')->capture_default_str();
    sb->add_option("--alpha", bits_alpha, "Fusion weight for the combined pipeline")->capture_default_str();

    EvalFlags rank_flags;
    std::vector<int> ranks{1, 2, 4, 8, 16};
    int rank_bits = 5;
    int rank_alpha = 2;
    auto* sr = app.add_subcommand("sweep-rank", "Estimated model order against fixed orders");
    add_eval_flags(sr, rank_flags);
    sr->add_option("--ranks", ranks, "Comma-separated fixed orders")->delimiter(',')->capture_default_str();
    sr->add_option("--bits", rank_bits, "Bits per loading entry (0: unquantized)")->capture_default_str();
    sr->add_option("--alpha", rank_alpha, "Fusion weight for the combined pipeline")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            return run_generate(spec_text, out_dir, csv);
        }
        if (*build) {
            return run_build_index(corpus_source, index_out, index_bits, extraction);
        }
        if (*srv) {
            return run_serve(index_path, listen, max_frame);
        }
        if (*qry) {
            query.timeout = std::chrono::milliseconds(timeout_ms);
            return run_query(server_addr, descriptors, query);
        }
        if (*ev) {
            const auto corpus = load_eval_corpus(eval_flags.corpus);
            EvalGrid grid;
            grid.bits = {eval_bits};
            grid.alphas = {eval_alpha};
            for (int k : eval_fixed) {
                grid.rank_modes.push_back(RankMode{k});
            }
            return finish(evaluate(corpus.images, settings_from(eval_flags), grid), eval_flags);
        }
        if (*sa) {
            const auto corpus = load_eval_corpus(alpha_flags.corpus);
            if (alphas.empty()) {
                alphas.resize(static_cast<std::size_t>(alpha_flags.eta) + 1);
                std::iota(alphas.begin(), alphas.end(), 0);
            }
            return finish(sweep_alpha(corpus.images, settings_from(alpha_flags), alphas, alpha_bits), alpha_flags);
        }
        if (*sb) {
            const auto corpus = load_eval_corpus(bits_flags.corpus);
            return finish(sweep_bits(corpus.images, settings_from(bits_flags), bit_grid, bits_alpha), bits_flags);
        }
        if (*sr) {
            const auto corpus = load_eval_corpus(rank_flags.corpus);
            return finish(sweep_rank(corpus.images, settings_from(rank_flags), ranks, rank_bits, rank_alpha),
                          rank_flags);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return 0;
}
