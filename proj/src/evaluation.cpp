#include "facret/evaluation.hpp"

#include "facret/codec.hpp"
#include "facret/errors.hpp"
#include "facret/fusion.hpp"
#include "facret/index_builder.hpp"
#include "facret/matcher.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

namespace facret {

namespace {

constexpr std::string_view kSyntheticPrefix = "synthetic:";

template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& body) {
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

struct Split {
    std::vector<std::size_t> queries;
    std::vector<std::size_t> database;
};

Split split_views(std::span<const DescriptorMatrix> corpus, int query_view) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::size_t>> views;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        auto [it, inserted] = views.try_emplace(corpus[i].object_id());
        if (inserted) {
            order.push_back(corpus[i].object_id());
        }
        it->second.push_back(i);
    }
    Split split;
    for (const auto& object : order) {
        const auto& v = views.at(object);
        if (v.size() < 2) {
            throw InvalidArgument("object " + object + " has a single view; leave-one-view-out needs two");
        }
        if (static_cast<std::size_t>(query_view) >= v.size()) {
            throw InvalidArgument("object " + object + " has no view " + std::to_string(query_view + 1));
        }
        for (std::size_t j = 0; j < v.size(); ++j) {
            (static_cast<int>(j) == query_view ? split.queries : split.database).push_back(v[j]);
        }
    }
    return split;
}

FactorLoadings at_bits(const FactorLoadings& f, int bits) {
    return bits == 0 ? f : dequantize(quantize(f, bits));
}

int rank_or_miss(const FactorLoadings& query, const ObjectIndex& index, Metric metric, int eta,
                 const std::string& object) {
    try {
        return rank_database(query, index, metric, eta).rank_of(object);
    } catch (const DegenerateLoadings&) {
        return 0;
    }
}

void validate(const EvalSettings& s, const EvalGrid& grid) {
    if (s.eta < 1) {
        throw InvalidArgument("eta must be at least 1");
    }
    if (s.top < 1 || s.top > s.eta) {
        throw InvalidArgument("top must lie in 1..eta");
    }
    if (s.query_view < 0) {
        throw InvalidArgument("query view must be non-negative");
    }
    if (grid.pipelines.empty() || grid.rank_modes.empty() || grid.bits.empty()) {
        throw InvalidArgument("empty evaluation grid");
    }
    for (int b : grid.bits) {
        if (b < 0 || b > 16) {
            throw InvalidArgument("bits must lie in 0..16");
        }
    }
    for (const auto& r : grid.rank_modes) {
        if (r.fixed && *r.fixed < 1) {
            throw InvalidArgument("fixed ranks must be positive");
        }
    }
    const bool combined = std::find(grid.pipelines.begin(), grid.pipelines.end(), Pipeline::combined) !=
                          grid.pipelines.end();
    if (combined && grid.alphas.empty()) {
        throw InvalidArgument("the combined pipeline needs at least one alpha");
    }
    for (int a : grid.alphas) {
        if (a < 0 || a > s.eta) {
            throw InvalidArgument("alpha must lie in 0..eta");
        }
    }
}

std::vector<double> accuracy_curve(const std::vector<int>& ranks, int top) {
    std::vector<double> acc(static_cast<std::size_t>(top), 0.0);
    if (ranks.empty()) {
        return acc;
    }
    for (int n = 1; n <= top; ++n) {
        const auto hits = std::count_if(ranks.begin(), ranks.end(), [n](int r) { return r >= 1 && r <= n; });
        acc[static_cast<std::size_t>(n - 1)] = static_cast<double>(hits) / static_cast<double>(ranks.size());
    }
    return acc;
}

std::string config_label(const EvalRecord& r) {
    std::string s = to_string(r.pipeline) + " " + r.rank.label() + " bits=" + std::to_string(r.bits);
    if (r.alpha) {
        s += " alpha=" + std::to_string(*r.alpha);
    }
    return s;
}

} // namespace

std::string to_string(Pipeline p) {
    switch (p) {
    case Pipeline::pca_corr: return "pca_corr";
    case Pipeline::pca_angle: return "pca_angle";
    case Pipeline::nmf_corr: return "nmf_corr";
    case Pipeline::nmf_angle: return "nmf_angle";
    case Pipeline::combined: return "combined";
    }
    return "unknown";
}

Pipeline parse_pipeline(const std::string& name) {
    for (auto p : kAllPipelines) {
        if (to_string(p) == name) {
            return p;
        }
    }
    throw InvalidArgument("unknown pipeline: " + name);
}

std::string RankMode::label() const {
    return fixed ? "fixed(" + std::to_string(*fixed) + ")" : "estimated";
}

EvalCorpus load_eval_corpus(const std::string& source) {
    EvalCorpus c;
    c.source = source;
    if (source.rfind(kSyntheticPrefix, 0) == 0) {
        c.images = generate_corpus(parse_synth_spec(source.substr(kSyntheticPrefix.size())));
    } else {
        c.images = load_corpus_dir(source);
    }
    if (c.images.empty()) {
        throw InvalidArgument("corpus " + source + " is empty");
    }
    return c;
}

const EvalRecord& EvalReport::find(Pipeline p, const RankMode& rank, int bits, std::optional<int> alpha) const {
    for (const auto& r : records) {
        if (r.pipeline == p && r.rank == rank && r.bits == bits && r.alpha == alpha) {
            return r;
        }
    }
    throw InvalidArgument("configuration not in report");
}

EvalReport evaluate(std::span<const DescriptorMatrix> corpus, const EvalSettings& settings, const EvalGrid& grid) {
    validate(settings, grid);
    const auto started = std::chrono::steady_clock::now();
    const Split split = split_views(corpus, settings.query_view);
    const int eta = settings.eta;

    EvalReport report;
    report.command = "evaluate";
    report.settings = settings;
    report.query_count = split.queries.size();
    report.database_count = split.database.size();
    std::mutex violation_mutex;

    auto wants = [&](Pipeline p) {
        return std::find(grid.pipelines.begin(), grid.pipelines.end(), p) != grid.pipelines.end();
    };

    for (const auto& rank : grid.rank_modes) {
        ExtractionOptions extraction;
        extraction.k_max = settings.k_max;
        extraction.fixed_k = rank.fixed;
        extraction.nmf = settings.nmf;
        std::vector<ImageFactors> factors(corpus.size());
        parallel_for(corpus.size(), settings.threads,
                     [&](std::size_t i) { factors[i] = extract_factors(corpus[i], extraction); });

        double order_sum = 0.0;
        for (auto q : split.queries) {
            order_sum += factors[q].k_star;
        }
        const double mean_order = order_sum / static_cast<double>(split.queries.size());

        for (int bits : grid.bits) {
            ObjectIndex index;
            for (auto d : split.database) {
                add_to_index(index, factors[d], bits);
            }

            // One slot per single-metric pipeline plus one per alpha.
            std::vector<std::pair<Pipeline, std::optional<int>>> slots;
            for (auto p : grid.pipelines) {
                if (p != Pipeline::combined) {
                    slots.emplace_back(p, std::nullopt);
                }
            }
            const std::size_t first_alpha = slots.size();
            if (wants(Pipeline::combined)) {
                for (int a : grid.alphas) {
                    slots.emplace_back(Pipeline::combined, a);
                }
            }
            std::vector<std::vector<int>> ranks(slots.size(), std::vector<int>(split.queries.size(), 0));

            parallel_for(split.queries.size(), settings.threads, [&](std::size_t qi) {
                const ImageFactors& f = factors[split.queries[qi]];
                const FactorLoadings qpca = at_bits(f.pca, bits);
                const FactorLoadings qnmf = at_bits(f.nmf, bits);
                for (std::size_t s = 0; s < first_alpha; ++s) {
                    const bool pca = slots[s].first == Pipeline::pca_corr || slots[s].first == Pipeline::pca_angle;
                    const bool corr = slots[s].first == Pipeline::pca_corr || slots[s].first == Pipeline::nmf_corr;
                    ranks[s][qi] = rank_or_miss(pca ? qpca : qnmf, index,
                                                corr ? Metric::correlation : Metric::angle, eta, f.object_id);
                }
                if (first_alpha == slots.size()) {
                    return;
                }
                std::optional<CombinedResult> detail;
                try {
                    detail = retrieve_combined_detail(qpca, qnmf, index, eta, *slots[first_alpha].second);
                } catch (const DegenerateLoadings&) {
                    return;  // misses across the board
                }
                for (std::size_t s = first_alpha; s < slots.size(); ++s) {
                    const int alpha = *slots[s].second;
                    const RankedList fused = fuse(detail->primary, detail->secondary, FusionParams{alpha, eta});
                    ranks[s][qi] = fused.rank_of(f.object_id);
                    if (alpha == eta && fused.object_ids() != detail->primary.object_ids()) {
                        std::lock_guard lock(violation_mutex);
                        report.violations.push_back("alpha = eta changed the primary list for query " +
                                                    f.image_id);
                    }
                }
            });

            for (std::size_t s = 0; s < slots.size(); ++s) {
                EvalRecord r;
                r.pipeline = slots[s].first;
                r.rank = rank;
                r.bits = bits;
                r.alpha = slots[s].second;
                r.accuracy = accuracy_curve(ranks[s], settings.top);
                r.queries = static_cast<int>(split.queries.size());
                r.mean_order = mean_order;
                if (!std::is_sorted(r.accuracy.begin(), r.accuracy.end())) {
                    report.violations.push_back("accuracy decreases in top_n for " + config_label(r));
                }
                report.records.push_back(std::move(r));
            }
        }
    }

    const std::size_t single = static_cast<std::size_t>(
        std::count_if(grid.pipelines.begin(), grid.pipelines.end(), [](Pipeline p) { return p != Pipeline::combined; }));
    const std::size_t expected = grid.rank_modes.size() * grid.bits.size() *
                                 (single + (wants(Pipeline::combined) ? grid.alphas.size() : 0));
    if (report.records.size() != expected) {
        report.violations.push_back("report is missing configurations");
    }
    std::sort(report.violations.begin(), report.violations.end());
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

EvalReport sweep_alpha(std::span<const DescriptorMatrix> corpus, const EvalSettings& settings,
                       std::vector<int> alphas, int bits) {
    EvalGrid grid;
    grid.pipelines = {Pipeline::pca_corr, Pipeline::nmf_angle, Pipeline::combined};
    grid.bits = {bits};
    grid.alphas = std::move(alphas);
    auto report = evaluate(corpus, settings, grid);
    report.command = "sweep-alpha";
    return report;
}

EvalReport sweep_bits(std::span<const DescriptorMatrix> corpus, const EvalSettings& settings,
                      std::vector<int> bit_grid, int alpha) {
    EvalGrid grid;
    if (std::find(bit_grid.begin(), bit_grid.end(), 0) == bit_grid.end()) {
        bit_grid.push_back(0);
    }
    grid.bits = std::move(bit_grid);
    grid.alphas = {alpha};
    auto report = evaluate(corpus, settings, grid);
    report.command = "sweep-bits";
    return report;
}

EvalReport sweep_rank(std::span<const DescriptorMatrix> corpus, const EvalSettings& settings,
                      std::vector<int> fixed_ranks, int bits, int alpha) {
    EvalGrid grid;
    grid.rank_modes = {RankMode{}};
    for (int k : fixed_ranks) {
        grid.rank_modes.push_back(RankMode{k});
    }
    grid.bits = {bits};
    grid.alphas = {alpha};
    auto report = evaluate(corpus, settings, grid);
    report.command = "sweep-rank";
    return report;
}

void write_jsonl(std::ostream& out, const EvalReport& report) {
    using json = nlohmann::ordered_json;
    out << json{{"record", "header"},
                {"format", "facret-eval/1"},
                {"command", report.command},
                {"corpus", report.corpus},
                {"eta", report.settings.eta},
                {"top", report.settings.top},
                {"query_view", report.settings.query_view + 1},
                {"queries", report.query_count},
                {"database_images", report.database_count}}
                .dump()
        << '\n';
    for (const auto& r : report.records) {
        for (int n = 1; n <= static_cast<int>(r.accuracy.size()); ++n) {
            json line{{"record", "result"},
                      {"pipeline", to_string(r.pipeline)},
                      {"rank_mode", r.rank.label()},
                      {"bits", r.bits},
                      {"alpha", r.alpha ? json(*r.alpha) : json(nullptr)},
                      {"top_n", n},
                      {"accuracy", r.top(n)},
                      {"queries", r.queries},
                      {"mean_order", r.mean_order}};
            out << line.dump() << '\n';
        }
    }
    out << json{{"record", "summary"},
                {"configurations", report.records.size()},
                {"seconds", report.seconds},
                {"violations", report.violations}}
                .dump()
        << '\n';
}

void write_summary(std::ostream& out, const EvalReport& report) {
    char line[160];
    const int top = report.settings.top;
    std::snprintf(line, sizeof line, "%-10s %-10s %4s %5s %7s %7s %7s %7s %7s\n", "pipeline", "rank", "bits", "alpha",
                  "top1", "top2", "top3", ("top" + std::to_string(top)).c_str(), "mean_k");
    out << line;
    for (const auto& r : report.records) {
        auto at = [&](int n) { return n <= top ? 100.0 * r.top(n) : 100.0 * r.top(top); };
        const std::string alpha = r.alpha ? std::to_string(*r.alpha) : "-";
        const std::string bits = r.bits == 0 ? "full" : std::to_string(r.bits);
        std::snprintf(line, sizeof line, "%-10s %-10s %4s %5s %7.2f %7.2f %7.2f %7.2f %7.2f\n",
                      to_string(r.pipeline).c_str(), r.rank.label().c_str(), bits.c_str(), alpha.c_str(), at(1),
                      at(2), at(3), at(top), r.mean_order);
        out << line;
    }
    std::snprintf(line, sizeof line, "%zu queries against %zu database images, %.2f s\n", report.query_count,
                  report.database_count, report.seconds);
    out << line;
    for (const auto& v : report.violations) {
        out << "INVARIANT VIOLATED: " << v << '\n';
    }
}

} // namespace facret
