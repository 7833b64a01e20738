// Acceptance suite: one PASS/FAIL/SKIP line per headline criterion. Exits
// non-zero when any criterion fails.

#include "facret/codec.hpp"
#include "facret/errors.hpp"
#include "facret/evaluation.hpp"
#include "facret/factorization.hpp"
#include "facret/fusion.hpp"
#include "facret/index_builder.hpp"
#include "facret/matcher.hpp"
#include "facret/model_order.hpp"
#include "facret/protocol.hpp"
#include "facret/rng.hpp"
#include "facret/service.hpp"
#include "unit/fusion_reference.hpp"
#include "unit/oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <future>
#include <string>

using namespace facret;

namespace {

using Clock = std::chrono::steady_clock;

enum class Outcome { pass, fail, skip };

struct Verdict {
    Outcome outcome;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

Verdict metric_equivalence() {
    const auto t0 = Clock::now();
    Rng rng(101);
    const int pairs = 2000;
    double worst = 0.0;
    for (int p = 0; p < pairs; ++p) {
        const int t = 2 + static_cast<int>(rng.below(31));
        const int ka = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(8, t))));
        const int kb = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(8, t))));
        const bool nonneg = p % 2 == 0;
        const FactorLoadings a{"", LoadingKind::nmf, oracle::random_unit_columns(t, ka, rng, nonneg)};
        const FactorLoadings b{"", LoadingKind::nmf, oracle::random_unit_columns(t, kb, rng, nonneg)};
        const double mine = subspace_angle(a, b);
        const double ref = static_cast<double>(oracle::projection_angle(a.columns, b.columns));
        worst = std::max(worst, std::abs(mine - ref));
    }
    const double secs = seconds_since(t0);
    const bool ok = worst <= 1e-8 && secs < 10.0;
    return {ok ? Outcome::pass : Outcome::fail,
            fmt("max |angle - projection formula| = %.2e over %d pairs (T <= 32, k <= 8), %.2f s", worst, pairs, secs)};
}

Verdict model_order_recovery() {
    const auto t0 = Clock::now();
    int hits = 0;
    int trials = 0;
    for (int r = 2; r <= 8; ++r) {
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            SynthCorpusSpec spec{1, 1, 32, 400, r, 0.02, 1000 * static_cast<std::uint64_t>(r) + seed};
            const auto m = generate_corpus(spec)[0];
            hits += estimate_order(m).k_star == r ? 1 : 0;
            ++trials;
        }
    }
    const double secs = seconds_since(t0);
    const double rate = static_cast<double>(hits) / trials;
    const bool ok = rate >= 0.9 && secs < 60.0;
    return {ok ? Outcome::pass : Outcome::fail,
            fmt("k* = r in %d/%d trials (%.1f%%; T=32, N=400, r=2..8, sigma=0.02), %.2f s", hits, trials,
                100.0 * rate, secs)};
}

Verdict nmf_monotonicity() {
    Rng rng(303);
    int violations = 0;
    long steps = 0;
    for (int run = 0; run < 100; ++run) {
        const int k = 2 + run % 9;
        const int t = 8 + static_cast<int>(rng.below(57));
        const int n = k + 10 + static_cast<int>(rng.below(300));
        const DescriptorMatrix m(oracle::random_nonneg(t, n, rng), "", "");
        NmfOptions opts;
        opts.seed = static_cast<std::uint64_t>(run);
        opts.tol = 1e-12;  // effectively run every iteration
        const auto res = nmf_loadings(m, k, opts);
        for (std::size_t i = 1; i < res.objective_trace.size(); ++i) {
            ++steps;
            violations += res.objective_trace[i] > res.objective_trace[i - 1] ? 1 : 0;
        }
    }
    return {violations == 0 ? Outcome::pass : Outcome::fail,
            fmt("%d increases over %ld iterations in 100 runs (k = 2..10)", violations, steps)};
}

Verdict fusion_identities() {
    Rng rng(404);
    int failures = 0;
    const int pairs = 10000;
    for (int p = 0; p < pairs; ++p) {
        const int eta = 1 + static_cast<int>(rng.below(20));
        const auto [pri, sec] = oracle::random_pair(rng, eta);
        const int alpha = static_cast<int>(rng.below(static_cast<std::uint64_t>(eta) + 1));
        failures += fuse(pri, pri, {alpha, eta}) == pri ? 0 : 1;
        failures += fuse(pri, sec, {eta, eta}) == pri ? 0 : 1;
        failures += fuse(pri, sec, {alpha, eta}).object_ids() ==
                            oracle::reference_fuse(pri.object_ids(), sec.object_ids(), alpha, eta)
                        ? 0
                        : 1;
    }
    const auto trace = fuse(oracle::make_list({"A", "B", "C", "D"}, 4), oracle::make_list({"B", "C", "D", "A"}, 4),
                            {1, 4})
                           .object_ids();
    const bool trace_ok = trace == std::vector<std::string>{"B", "A", "C", "D"};
    return {failures == 0 && trace_ok ? Outcome::pass : Outcome::fail,
            fmt("%d failures over %d random pairs (eta <= 20); [A,B,C,D]/[B,C,D,A], alpha=1 -> [%s,%s,%s,%s]",
                failures, pairs, trace[0].c_str(), trace[1].c_str(), trace[2].c_str(), trace[3].c_str())};
}

Verdict quantization() {
    Rng rng(505);
    long samples = 0;
    double worst_ratio = 0.0;
    for (int bits = 1; bits <= 8; ++bits) {
        for (auto kind : {LoadingKind::pca, LoadingKind::nmf}) {
            const double lo = kind == LoadingKind::pca ? -1.0 : 0.0;
            FactorLoadings f{"", kind, Eigen::MatrixXd(250, 250)};
            for (Eigen::Index i = 0; i < f.columns.size(); ++i) {
                f.columns.data()[i] = rng.uniform(lo, 1.0);
            }
            const auto q = quantize(f, bits);
            const auto back = dequantize(q, Renormalize::no);
            worst_ratio = std::max(worst_ratio, (back.columns - f.columns).cwiseAbs().maxCoeff() / (q.step() / 2.0));
            samples += f.columns.size();
        }
    }
    // Two 128x24 matrices at 5 bits, as transmitted for one image.
    Rng lrng(506);
    const FactorLoadings pca{"q", LoadingKind::pca, oracle::random_unit_columns(128, 24, lrng)};
    const FactorLoadings nmf{"q", LoadingKind::nmf, oracle::random_unit_columns(128, 24, lrng, true)};
    const std::size_t body = packed_size(128, 24, 5) * 2;
    const std::size_t total = encode(quantize(pca, 5)).size() + encode(quantize(nmf, 5)).size();
    const std::size_t headers = 2 * blob_header_size("q");
    const bool ok = worst_ratio <= 1.0 + 1e-12 && samples >= 1000000 && body == 3840 && total == body + headers;
    return {ok ? Outcome::pass : Outcome::fail,
            fmt("max error %.6f of half a step over %ld samples; pair payload %zu = %zu level bytes + %zu header bytes",
                worst_ratio, samples, total, body, headers)};
}

const std::string kCorpus = "synthetic:objects=50,views=5,T=32,N=400,r=4,sigma=0.05,seed=1";
const std::string kNoiseless = "synthetic:objects=50,views=5,T=32,N=400,r=4,sigma=0,identical=1,seed=1";

Verdict end_to_end(EvalReport& base_out) {
    const auto t0 = Clock::now();
    const auto corpus = load_eval_corpus(kCorpus).images;
    EvalGrid grid;
    grid.bits = {5, 8};
    base_out = evaluate(corpus, EvalSettings{}, grid);
    const RankMode est;
    const double combined = base_out.find(Pipeline::combined, est, 5, 2).top(1);
    double best_single = 0.0;
    for (auto p : {Pipeline::pca_corr, Pipeline::pca_angle, Pipeline::nmf_corr, Pipeline::nmf_angle}) {
        best_single = std::max(best_single, base_out.find(p, est, 5).top(1));
    }
    const auto control = evaluate(load_eval_corpus(kNoiseless).images, EvalSettings{}, EvalGrid{});
    double control_worst = 1.0;
    for (const auto& r : control.records) {
        control_worst = std::min(control_worst, r.top(1));
    }
    const double secs = seconds_since(t0);
    const bool ok = combined >= best_single && combined >= 0.9 && control_worst == 1.0 &&
                    base_out.violations.empty() && control.violations.empty() && secs < 300.0;
    return {ok ? Outcome::pass : Outcome::fail,
            fmt("combined top-1 %.3f, best single pipeline %.3f, noiseless control min top-1 %.3f, %.1f s", combined,
                best_single, control_worst, secs)};
}

Verdict quantization_saturation(const EvalReport& base) {
    const RankMode est;
    double worst = 0.0;
    for (auto p : kAllPipelines) {
        const auto alpha = p == Pipeline::combined ? std::optional<int>(2) : std::nullopt;
        worst = std::max(worst, std::abs(base.find(p, est, 5, alpha).top(1) - base.find(p, est, 8, alpha).top(1)));
    }
    const double c5 = base.find(Pipeline::combined, est, 5, 2).top(1);
    const double c8 = base.find(Pipeline::combined, est, 8, 2).top(1);
    return {worst <= 0.01 ? Outcome::pass : Outcome::fail,
            fmt("combined top-1 %.3f at 5 bits vs %.3f at 8 bits; largest gap over pipelines %.1f points", c5, c8,
                100.0 * worst)};
}

Verdict service_transparency() {
    const auto corpus = load_eval_corpus(kCorpus).images;
    std::vector<DescriptorMatrix> database;
    for (const auto& m : corpus) {
        if (!m.image_id().ends_with("_v0")) {
            database.push_back(m);
        }
    }
    auto index = std::make_shared<const ObjectIndex>(build_index(database));

    Rng rng(808);
    std::vector<std::vector<std::uint8_t>> payloads;
    std::vector<std::vector<std::uint8_t>> expected;
    for (int q = 0; q < 100; ++q) {
        QueryOptions opts;
        opts.eta = 1 + static_cast<int>(rng.below(20));
        opts.alpha = static_cast<int>(rng.below(static_cast<std::uint64_t>(opts.eta) + 1));
        opts.bits = 3 + static_cast<int>(rng.below(6));
        const auto& m = corpus[rng.below(corpus.size())];
        payloads.push_back(encode_query(make_query(m, opts)));
        expected.push_back(encode_response(answer_query(*index, payloads.back())));
    }

    auto server = serve(index, {"127.0.0.1", 0});
    const Endpoint ep{"127.0.0.1", server->port()};
    const int connections = 16;
    std::vector<std::future<int>> workers;
    for (int c = 0; c < connections; ++c) {
        workers.push_back(std::async(std::launch::async, [&, c] {
            RetrievalClient client(ep);
            int mismatches = 0;
            for (std::size_t q = static_cast<std::size_t>(c); q < payloads.size(); q += connections) {
                mismatches += client.round_trip(payloads[q]) == expected[q] ? 0 : 1;
            }
            return mismatches;
        }));
    }
    int mismatches = 0;
    for (auto& w : workers) {
        mismatches += w.get();
    }
    server->stop();
    return {mismatches == 0 ? Outcome::pass : Outcome::fail,
            fmt("%d of 100 remote responses differ from the local bytes (%d concurrent connections)", mismatches,
                connections)};
}

Verdict scaling() {
    const int t = 128;
    const int k = 25;
    const std::vector<int> sizes{100, 200, 400, 800};
    Rng rng(909);
    ObjectIndex index;
    for (int i = 0; i < sizes.back(); ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "img%04d", i);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(oracle::random_unit_columns(t, k, rng));
        Eigen::MatrixXd pca = qr.householderQ() * Eigen::MatrixXd::Identity(t, k);
        index.add(id, std::string(id) + "_obj", {id, LoadingKind::pca, pca},
                  {id, LoadingKind::nmf, oracle::random_unit_columns(t, k, rng, true)});
    }
    const FactorLoadings qpca{"q", LoadingKind::pca, index.images()[0].pca.columns};
    const FactorLoadings qnmf{"q", LoadingKind::nmf, oracle::random_unit_columns(t, k, rng, true)};

    std::string detail;
    bool ok = true;
    for (auto [metric, name] : {std::pair{Metric::angle, "angle/NMF"}, std::pair{Metric::correlation, "corr/PCA"}}) {
        const auto& query = metric == Metric::angle ? qnmf : qpca;
        std::vector<double> per_image;
        for (int size : sizes) {
            std::set<std::string> subset;
            for (int i = 0; i < size; ++i) {
                subset.insert(index.images()[static_cast<std::size_t>(i)].image_id);
            }
            double best = 1e300;
            for (int rep = 0; rep < 7; ++rep) {
                const auto t0 = Clock::now();
                const auto list = rank_database(query, index, metric, 20, &subset);
                best = std::min(best, seconds_since(t0));
                if (list.size() != 20) {
                    ok = false;
                }
            }
            per_image.push_back(best / size);
        }
        detail += std::string(detail.empty() ? "" : "; ") + name + " per-image us:";
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            const double ratio = per_image[i] / per_image[0];
            ok = ok && ratio <= 1.3;
            detail += fmt(" K=%d %.2f (x%.2f)", sizes[i], 1e6 * per_image[i], ratio);
        }
    }
    return {ok ? Outcome::pass : Outcome::fail, detail};
}

Verdict zubud() {
    const char* dir = std::getenv("FACRET_ZUBUD_DIR");
    if (dir == nullptr || *dir == '\0') {
        return {Outcome::skip, "set FACRET_ZUBUD_DIR to a descriptor dump (201 objects x 5 views, T=128)"};
    }
    const auto corpus = load_eval_corpus(dir).images;
    EvalGrid grid;
    grid.pipelines = {Pipeline::combined};
    const auto r = evaluate(corpus, EvalSettings{}, grid);
    const auto& rec = r.find(Pipeline::combined, RankMode{}, 5, 2);
    const double reference[3] = {0.8905, 0.9154, 0.9254};
    bool ok = std::abs(rec.mean_order - 24.598) <= 3.0;
    for (int n = 1; n <= 3; ++n) {
        ok = ok && std::abs(rec.top(n) - reference[n - 1]) <= 0.03;
    }
    return {ok ? Outcome::pass : Outcome::fail,
            fmt("combined top-1/2/3 %.2f/%.2f/%.2f%%, mean order %.3f over %zu queries", 100 * rec.top(1),
                100 * rec.top(2), 100 * rec.top(3), rec.mean_order, r.query_count)};
}

} // namespace

int main() {
    int failures = 0;
    auto report = [&](const char* name, const std::function<Verdict()>& check) {
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {Outcome::fail, std::string("threw: ") + e.what()};
        }
        const char* tag = v.outcome == Outcome::pass ? "PASS" : v.outcome == Outcome::fail ? "FAIL" : "SKIP";
        failures += v.outcome == Outcome::fail ? 1 : 0;
        std::printf("%s  %-26s %s\n", tag, name, v.detail.c_str());
        std::fflush(stdout);
    };

    EvalReport base;
    report("metric_equivalence", metric_equivalence);
    report("model_order_recovery", model_order_recovery);
    report("nmf_monotonicity", nmf_monotonicity);
    report("fusion_identities", fusion_identities);
    report("quantization", quantization);
    report("end_to_end_retrieval", [&] { return end_to_end(base); });
    report("quantization_saturation", [&] {
        return base.records.empty() ? Verdict{Outcome::fail, "end-to-end evaluation did not run"}
                                    : quantization_saturation(base);
    });
    report("service_transparency", service_transparency);
    report("scaling", scaling);
    report("zubud_reference", zubud);
    return failures == 0 ? 0 : 1;
}
