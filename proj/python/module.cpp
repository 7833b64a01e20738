// Python bindings for the core library.

#include "facret/codec.hpp"
#include "facret/descriptor_store.hpp"
#include "facret/errors.hpp"
#include "facret/evaluation.hpp"
#include "facret/factorization.hpp"
#include "facret/fusion.hpp"
#include "facret/index_builder.hpp"
#include "facret/matcher.hpp"
#include "facret/model_order.hpp"
#include "facret/service.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace facret;

namespace {

LoadingKind kind_from(const std::string& name) {
    if (name == "pca") return LoadingKind::pca;
    if (name == "nmf") return LoadingKind::nmf;
    throw InvalidArgument("kind must be 'pca' or 'nmf', got '" + name + "'");
}

FactorLoadings loadings_from(const Eigen::MatrixXd& columns, const std::string& kind) {
    return FactorLoadings{{}, kind_from(kind), columns};
}

RankedList list_from_ids(const std::vector<std::string>& ids) {
    RankedList list;
    list.eta = static_cast<int>(ids.size());
    for (const auto& id : ids) list.entries.push_back({id, id, 0.0});
    return list;
}

py::list to_python(const RankedList& list) {
    py::list out;
    for (const auto& e : list.entries) out.append(py::make_tuple(e.object_id, e.score));
    return out;
}

QueryOptions query_options(int eta, int alpha, int bits, std::optional<int> fixed_k, double timeout_s) {
    QueryOptions o;
    o.eta = eta;
    o.alpha = alpha;
    o.bits = bits;
    o.extraction.fixed_k = fixed_k;
    o.timeout = std::chrono::milliseconds(static_cast<long>(timeout_s * 1000.0));
    return o;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Compact factor-loading descriptors for image retrieval";

    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<FormatError>(m, "FormatError", error.ptr());
    py::register_exception<InvalidArgument>(m, "InvalidArgument", error.ptr());
    py::register_exception<DegenerateLoadings>(m, "DegenerateLoadings", error.ptr());
    py::register_exception<NetworkError>(m, "NetworkError", error.ptr());

    py::class_<DescriptorMatrix>(m, "DescriptorMatrix")
        .def(py::init<Eigen::MatrixXf, std::string, std::string>(), py::arg("values"), py::arg("image_id") = "",
             py::arg("object_id") = "")
        .def_property_readonly("values", &DescriptorMatrix::values)
        .def_property_readonly("image_id", &DescriptorMatrix::image_id)
        .def_property_readonly("object_id", &DescriptorMatrix::object_id)
        .def_property_readonly("dim", &DescriptorMatrix::dim)
        .def_property_readonly("count", &DescriptorMatrix::count)
        .def("__eq__", [](const DescriptorMatrix& a, const DescriptorMatrix& b) { return a == b; })
        .def("__repr__", [](const DescriptorMatrix& d) {
            return "DescriptorMatrix(" + d.image_id() + ", " + std::to_string(d.dim()) + "x" +
                   std::to_string(d.count()) + ")";
        });

    m.def("read_descriptor_file", &read_descriptor_file, py::arg("path"));
    m.def("write_descriptor_file", &write_descriptor_file, py::arg("path"), py::arg("matrix"));
    m.def(
        "generate_corpus", [](const std::string& spec) { return generate_corpus(parse_synth_spec(spec)); },
        py::arg("spec"), "Synthetic corpus from e.g. 'objects=50,views=5,T=32,N=400,r=4,sigma=0.05,seed=1'");
    m.def(
        "load_corpus", [](const std::string& source) { return load_eval_corpus(source).images; },
        py::arg("source"), "A descriptor directory or 'synthetic:<spec>'");

    m.def(
        "estimate_order",
        [](const DescriptorMatrix& d, std::optional<int> k_max) {
            const auto p = estimate_order(d, k_max);
            py::dict out;
            out["k_star"] = p.k_star;
            out["k_max"] = p.k_max;
            out["residual"] = p.residual;
            out["information"] = p.information;
            return out;
        },
        py::arg("matrix"), py::arg("k_max") = std::nullopt);
    m.def("default_k_max", &default_k_max, py::arg("dim"), py::arg("count"));
    m.def(
        "pca_loadings", [](const DescriptorMatrix& d, int k) { return pca_loadings(d, k).loadings.columns; },
        py::arg("matrix"), py::arg("k"));
    m.def(
        "nmf_loadings",
        [](const DescriptorMatrix& d, int k, int max_iters, double tol, std::uint64_t seed) {
            const auto r = nmf_loadings(d, k, NmfOptions{max_iters, tol, seed});
            return py::make_tuple(r.loadings.columns, r.assignment.cluster_of, r.objective_trace);
        },
        py::arg("matrix"), py::arg("k"), py::arg("max_iters") = 100, py::arg("tol") = 1e-6, py::arg("seed") = 0,
        "Returns (loadings, cluster index per descriptor, objective per iteration)");

    m.def(
        "subspace_angle",
        [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
            return subspace_angle(loadings_from(a, "pca"), loadings_from(b, "pca"));
        },
        py::arg("a"), py::arg("b"));
    m.def(
        "correlation_score",
        [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
            return correlation_score(loadings_from(a, "pca"), loadings_from(b, "pca"));
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "quantize_roundtrip",
        [](const Eigen::MatrixXd& columns, const std::string& kind, int bits, bool renormalize) {
            return dequantize(quantize(loadings_from(columns, kind), bits),
                              renormalize ? Renormalize::yes : Renormalize::no)
                .columns;
        },
        py::arg("columns"), py::arg("kind"), py::arg("bits"), py::arg("renormalize") = true);
    m.def(
        "encode_loadings",
        [](const Eigen::MatrixXd& columns, const std::string& kind, int bits, const std::string& image_id) {
            auto f = loadings_from(columns, kind);
            f.image_id = image_id;
            const auto bytes = encode(quantize(f, bits));
            return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
        },
        py::arg("columns"), py::arg("kind"), py::arg("bits"), py::arg("image_id") = "");
    m.def(
        "decode_loadings",
        [](const py::bytes& blob) {
            const std::string s = blob;
            const auto q = decode(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
            return py::make_tuple(q.image_id(), to_string(q.kind()), q.bits(), dequantize(q).columns);
        },
        py::arg("blob"), "Returns (image_id, kind, bits, renormalized loadings)");
    m.def("packed_size", &packed_size, py::arg("dim"), py::arg("order"), py::arg("bits"));

    m.def(
        "fuse",
        [](const std::vector<std::string>& primary, const std::vector<std::string>& secondary, int alpha,
           std::optional<int> eta) {
            const int e = eta.value_or(static_cast<int>(std::max(primary.size(), secondary.size())));
            return fuse(list_from_ids(primary), list_from_ids(secondary), FusionParams{alpha, e}).object_ids();
        },
        py::arg("primary"), py::arg("secondary"), py::arg("alpha"), py::arg("eta") = std::nullopt);

    py::class_<ObjectIndex, std::shared_ptr<ObjectIndex>>(m, "Index")
        .def(py::init([](const std::vector<DescriptorMatrix>& corpus, int bits, std::optional<int> fixed_k) {
                 BuildOptions o;
                 o.bits = bits;
                 o.extraction.fixed_k = fixed_k;
                 return std::make_shared<ObjectIndex>(build_index(corpus, o));
             }),
             py::arg("corpus"), py::arg("bits") = 5, py::arg("fixed_k") = std::nullopt)
        .def_static(
            "load",
            [](const std::filesystem::path& path) {
                return std::make_shared<ObjectIndex>(index_from_records(read_index_file(path)));
            },
            py::arg("path"))
        .def_property_readonly("image_count", &ObjectIndex::image_count)
        .def_property_readonly("object_count", &ObjectIndex::object_count)
        .def_property_readonly("dim", &ObjectIndex::dim)
        .def(
            "query",
            [](const ObjectIndex& index, const DescriptorMatrix& d, int eta, int alpha, int bits,
               std::optional<int> fixed_k) {
                return to_python(query_local(index, d, query_options(eta, alpha, bits, fixed_k, 30.0)));
            },
            py::arg("matrix"), py::arg("eta") = 20, py::arg("alpha") = 2, py::arg("bits") = 5,
            py::arg("fixed_k") = std::nullopt, "Ranked (object_id, score) pairs");

    m.def(
        "build_index_file",
        [](const std::vector<DescriptorMatrix>& corpus, const std::filesystem::path& path, int bits) {
            write_index_file(path, prepare_records(corpus, ExtractionOptions{}, bits));
        },
        py::arg("corpus"), py::arg("path"), py::arg("bits") = 5);

    py::class_<RetrievalServer>(m, "Server")
        .def(py::init([](std::shared_ptr<ObjectIndex> index, const std::string& listen) {
                 auto s = std::make_unique<RetrievalServer>(std::move(index), ServerOptions{});
                 s->start(parse_endpoint(listen));
                 return s;
             }),
             py::arg("index"), py::arg("listen") = "127.0.0.1:0")
        .def_property_readonly("port", &RetrievalServer::port)
        .def_property_readonly("running", &RetrievalServer::running)
        .def("stop", &RetrievalServer::stop, py::call_guard<py::gil_scoped_release>())
        .def("__enter__", [](RetrievalServer& s) -> RetrievalServer& { return s; }, py::return_value_policy::reference)
        .def("__exit__", [](RetrievalServer& s, py::args) { s.stop(); });

    m.def(
        "query_remote",
        [](const std::string& server, const DescriptorMatrix& d, int eta, int alpha, int bits,
           std::optional<int> fixed_k, double timeout_s) {
            const auto opts = query_options(eta, alpha, bits, fixed_k, timeout_s);
            RankedList list;
            {
                py::gil_scoped_release release;
                list = query_remote(parse_endpoint(server), d, opts);
            }
            return to_python(list);
        },
        py::arg("server"), py::arg("matrix"), py::arg("eta") = 20, py::arg("alpha") = 2, py::arg("bits") = 5,
        py::arg("fixed_k") = std::nullopt, py::arg("timeout") = 30.0);

    m.def(
        "evaluate",
        [](const std::string& source, int bits, int alpha, int eta, unsigned threads) {
            const auto corpus = load_eval_corpus(source);
            EvalSettings s;
            s.eta = eta;
            s.top = eta;
            s.threads = threads;
            EvalGrid grid;
            grid.bits = {bits};
            grid.alphas = {alpha};
            EvalReport r;
            {
                py::gil_scoped_release release;
                r = evaluate(corpus.images, s, grid);
            }
            r.corpus = source;
            std::ostringstream out;
            write_jsonl(out, r);
            return out.str();
        },
        py::arg("source"), py::arg("bits") = 5, py::arg("alpha") = 2, py::arg("eta") = 20, py::arg("threads") = 0,
        "Leave-one-view-out evaluation of every pipeline, as JSON lines");
}
