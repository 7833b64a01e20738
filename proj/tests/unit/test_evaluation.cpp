#include <doctest.h>

#include "facret/errors.hpp"
#include "facret/evaluation.hpp"

#include "json.hpp"

#include <map>
#include <sstream>

using namespace facret;

namespace {

// The retrieval configuration used throughout: 50 objects x 5 views.
const std::string kBase = "synthetic:objects=50,views=5,T=32,N=400,r=4,sigma=0.05,seed=1";
// Same sizes, but two centroids are common to every object and views differ
// in which centroids dominate, so rank-1 summaries stop being distinctive.
const std::string kDemanding = kBase + ",shared=2,skew=1";

const std::vector<DescriptorMatrix>& corpus(const std::string& source) {
    static std::map<std::string, std::vector<DescriptorMatrix>> cache;
    auto it = cache.find(source);
    if (it == cache.end()) {
        it = cache.emplace(source, load_eval_corpus(source).images).first;
    }
    return it->second;
}

EvalSettings serial() {
    EvalSettings s;
    s.threads = 1;
    return s;
}

void check_monotone(const EvalReport& r) {
    for (const auto& rec : r.records) {
        CHECK(std::is_sorted(rec.accuracy.begin(), rec.accuracy.end()));
        CHECK(rec.accuracy.size() == 20);
    }
}

} // namespace

TEST_CASE("identical views give perfect top-1 for every pipeline") {
    const auto images = load_eval_corpus("synthetic:objects=20,views=3,T=32,N=200,r=4,sigma=0,identical=1,seed=4").images;
    EvalGrid grid;
    grid.bits = {5, 0};
    const auto r = evaluate(images, serial(), grid);
    CHECK(r.violations.empty());
    REQUIRE(r.records.size() == 10);
    for (const auto& rec : r.records) {
        INFO(to_string(rec.pipeline), " bits=", rec.bits);
        CHECK(rec.top(1) == 1.0);
    }
}

TEST_CASE("seeded accuracy on the base corpus") {
    const auto r = evaluate(corpus(kBase), serial());
    CHECK(r.violations.empty());
    CHECK(r.query_count == 50);
    CHECK(r.database_count == 200);
    check_monotone(r);
    const RankMode est;
    // Pinned from a reference run of this seed.
    for (auto p : kAllPipelines) {
        const auto alpha = p == Pipeline::combined ? std::optional<int>(2) : std::nullopt;
        CHECK(r.find(p, est, 5, alpha).top(1) == 1.0);
    }
    const double combined = r.find(Pipeline::combined, est, 5, 2).top(1);
    CHECK(combined >= r.find(Pipeline::nmf_angle, est, 5).top(1));
    CHECK(r.find(Pipeline::nmf_angle, est, 5).mean_order == doctest::Approx(4.0));
}

TEST_CASE("seeded accuracy on the demanding corpus") {
    EvalGrid grid;
    grid.rank_modes = {RankMode{}, RankMode{1}};
    grid.bits = {1, 5};
    const auto r = evaluate(corpus(kDemanding), serial(), grid);
    CHECK(r.violations.empty());
    check_monotone(r);
    const RankMode est;
    const RankMode one{1};
    // Pinned from a reference run of this seed.
    CHECK(r.find(Pipeline::pca_corr, est, 5).top(1) == doctest::Approx(1.00));
    CHECK(r.find(Pipeline::nmf_angle, est, 5).top(1) == doctest::Approx(1.00));
    CHECK(r.find(Pipeline::combined, est, 5, 2).top(1) == doctest::Approx(1.00));
    CHECK(r.find(Pipeline::pca_corr, one, 5).top(1) == doctest::Approx(0.82));
    CHECK(r.find(Pipeline::nmf_angle, one, 5).top(1) == doctest::Approx(0.88));
    CHECK(r.find(Pipeline::combined, one, 5, 2).top(1) == doctest::Approx(0.90));

    // One bit per entry is too coarse: NMF loadings collapse to zero
    // columns, and those queries count as misses rather than errors.
    for (auto p : kAllPipelines) {
        const auto alpha = p == Pipeline::combined ? std::optional<int>(2) : std::nullopt;
        CHECK(r.find(p, est, 1, alpha).top(1) < r.find(p, est, 5, alpha).top(1));
    }
    CHECK(r.find(Pipeline::nmf_angle, est, 1).top(20) == 0.0);
}

TEST_CASE("rank sweep reports the estimated order beside every fixed order") {
    const auto r = sweep_rank(corpus(kDemanding), serial(), {1, 2, 4, 8});
    CHECK(r.command == "sweep-rank");
    CHECK(r.violations.empty());
    CHECK(r.records.size() == 5 * 5);
    const RankMode est;
    double best_fixed = 0.0;
    for (int k : {1, 2, 4, 8}) {
        best_fixed = std::max(best_fixed, r.find(Pipeline::combined, RankMode{k}, 5, 2).top(1));
    }
    const double estimated = r.find(Pipeline::combined, est, 5, 2).top(1);
    CHECK(estimated >= best_fixed - 0.02);
    CHECK(r.find(Pipeline::combined, RankMode{1}, 5, 2).top(1) < estimated);
}

TEST_CASE("bit sweep saturates and keeps an unquantized row") {
    const auto r = sweep_bits(corpus(kBase), serial(), {1, 2, 3, 4, 5, 6, 8});
    CHECK(r.violations.empty());
    CHECK(r.records.size() == 8 * 5);
    const RankMode est;
    for (auto p : kAllPipelines) {
        const auto alpha = p == Pipeline::combined ? std::optional<int>(2) : std::nullopt;
        CHECK_NOTHROW(r.find(p, est, 0, alpha));
        CHECK(std::abs(r.find(p, est, 5, alpha).top(1) - r.find(p, est, 8, alpha).top(1)) <= 0.01);
    }
}

TEST_CASE("alpha sweep: alpha = eta reproduces the NMF ranking") {
    std::vector<int> alphas;
    for (int a = 0; a <= 20; ++a) {
        alphas.push_back(a);
    }
    const auto r = sweep_alpha(corpus(kDemanding), serial(), alphas);
    CHECK(r.violations.empty());  // per query: fused list == primary list at alpha = eta
    CHECK(r.records.size() == 2 + 21);
    const RankMode est;
    // PCA recall within the top 20 is complete on this corpus, so the
    // candidate restriction is invisible and the rows coincide.
    CHECK(r.find(Pipeline::pca_corr, est, 5).top(20) == 1.0);
    CHECK(r.find(Pipeline::combined, est, 5, 20).accuracy == r.find(Pipeline::nmf_angle, est, 5).accuracy);
}

TEST_CASE("reports are deterministic and independent of the thread count") {
    EvalGrid grid;
    grid.bits = {4};
    grid.alphas = {0, 2};
    const auto a = evaluate(corpus(kDemanding), serial(), grid);
    auto threaded = serial();
    threaded.threads = 4;
    const auto b = evaluate(corpus(kDemanding), threaded, grid);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].accuracy == b.records[i].accuracy);
        CHECK(a.records[i].mean_order == b.records[i].mean_order);
    }
}

TEST_CASE("query view selection") {
    auto s = serial();
    s.query_view = 4;
    EvalGrid grid;
    grid.pipelines = {Pipeline::nmf_angle};
    const auto r = evaluate(corpus(kBase), s, grid);
    CHECK(r.query_count == 50);
    CHECK(r.records.size() == 1);
    s.query_view = 5;
    CHECK_THROWS_AS(evaluate(corpus(kBase), s, grid), InvalidArgument);
}

TEST_CASE("invalid corpora and settings") {
    const auto single = load_eval_corpus("synthetic:objects=3,views=1,T=16,N=50,r=2,seed=1").images;
    CHECK_THROWS_AS(evaluate(single, serial()), InvalidArgument);

    const auto small = load_eval_corpus("synthetic:objects=3,views=2,T=16,N=50,r=2,seed=1").images;
    auto s = serial();
    s.top = 21;
    CHECK_THROWS_AS(evaluate(small, s), InvalidArgument);
    s = serial();
    s.eta = 0;
    CHECK_THROWS_AS(evaluate(small, s), InvalidArgument);
    EvalGrid grid;
    grid.alphas = {21};
    CHECK_THROWS_AS(evaluate(small, serial(), grid), InvalidArgument);
    grid = {};
    grid.bits = {17};
    CHECK_THROWS_AS(evaluate(small, serial(), grid), InvalidArgument);
    grid = {};
    grid.rank_modes = {RankMode{0}};
    CHECK_THROWS_AS(evaluate(small, serial(), grid), InvalidArgument);

    CHECK_THROWS_AS(parse_pipeline("nmf_cosine"), InvalidArgument);
    CHECK(parse_pipeline("pca_angle") == Pipeline::pca_angle);
    CHECK(RankMode{3}.label() == "fixed(3)");
    CHECK(RankMode{}.label() == "estimated");
}

TEST_CASE("JSON lines layout") {
    const auto small = load_eval_corpus("synthetic:objects=4,views=2,T=16,N=50,r=2,seed=2").images;
    EvalGrid grid;
    grid.alphas = {1, 2};
    auto r = evaluate(small, serial(), grid);
    r.corpus = "small";
    std::stringstream out;
    write_jsonl(out, r);

    std::vector<nlohmann::json> lines;
    for (std::string line; std::getline(out, line);) {
        lines.push_back(nlohmann::json::parse(line));
    }
    REQUIRE(lines.size() == 1 + 6 * 20 + 1);
    CHECK(lines.front()["record"] == "header");
    CHECK(lines.front()["corpus"] == "small");
    CHECK(lines.front()["query_view"] == 1);
    CHECK(lines.back()["record"] == "summary");
    CHECK(lines.back()["violations"].empty());
    CHECK(lines[1]["record"] == "result");
    CHECK(lines[1]["pipeline"] == "pca_corr");
    CHECK(lines[1]["alpha"].is_null());
    CHECK(lines[1]["top_n"] == 1);
    CHECK(lines[120]["pipeline"] == "combined");
    CHECK(lines[120]["alpha"] == 2);
    CHECK(lines[120]["top_n"] == 20);

    std::stringstream table;
    write_summary(table, r);
    CHECK(table.str().find("combined") != std::string::npos);
}
