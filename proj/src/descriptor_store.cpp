#include "facret/descriptor_store.hpp"

#include "facret/byte_io.hpp"
#include "facret/errors.hpp"
#include "facret/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

namespace facret {

namespace {

constexpr std::string_view kDescriptorMagic = "DMT1";

void check_id(const std::string& id, const char* what) {
    if (id.find_first_of(";\n") != std::string::npos) {
        throw InvalidArgument(std::string(what) + " must not contain ';' or newline");
    }
}

std::string format_float(float v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, end);
}

DescriptorMatrix load_binary(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    in.expect_magic(kDescriptorMagic);
    if (in.remaining() < 8) {
        throw FormatError("malformed header: missing dimensions");
    }
    const std::uint32_t dim = in.u32();
    const std::uint32_t count = in.u32();
    if (dim == 0 || count == 0) {
        throw FormatError("malformed header: zero dimension");
    }
    const std::uint64_t payload = std::uint64_t{dim} * count * 4;
    if (in.remaining() < payload) {
        throw FormatError("dimension mismatch: header declares " + std::to_string(dim) + "x" +
                          std::to_string(count) + " values, payload holds " +
                          std::to_string(in.remaining() / 4));
    }
    Eigen::MatrixXf values(dim, count);
    for (std::uint32_t c = 0; c < count; ++c) {
        for (std::uint32_t r = 0; r < dim; ++r) {
            values(r, c) = in.f32();
        }
    }

    std::string image_id;
    std::string object_id;
    if (in.remaining() > 0) {
        const std::string trailer = in.text(in.remaining());
        const std::string prefix = "\nID:";
        const auto sep = trailer.find(";OBJ:");
        if (!trailer.starts_with(prefix)) {
            throw FormatError("dimension mismatch: trailing bytes after " + std::to_string(dim) +
                              "x" + std::to_string(count) + " values");
        }
        if (!trailer.ends_with("\n") || sep == std::string::npos) {
            throw FormatError("malformed trailer");
        }
        image_id = trailer.substr(prefix.size(), sep - prefix.size());
        object_id = trailer.substr(sep + 5, trailer.size() - sep - 6);
        if (object_id.find_first_of(";\n") != std::string::npos ||
            image_id.find('\n') != std::string::npos) {
            throw FormatError("malformed trailer");
        }
    }
    return DescriptorMatrix(std::move(values), std::move(image_id), std::move(object_id));
}

DescriptorMatrix load_csv(std::span<const std::uint8_t> bytes) {
    const std::string text(bytes.begin(), bytes.end());
    std::vector<std::vector<float>> rows;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string::npos) {
            end = text.size();
        }
        std::string_view line(text.data() + start, end - start);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        start = end + 1;
        if (line.empty()) {
            continue;
        }
        std::vector<float> row;
        std::size_t pos = 0;
        while (true) {
            auto comma = line.find(',', pos);
            std::string_view field =
                line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
            while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
            while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
            float v = 0.0f;
            auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
            if (ec != std::errc{} || ptr != field.data() + field.size()) {
                throw FormatError("malformed csv field \"" + std::string(field) + "\"");
            }
            row.push_back(v);
            if (comma == std::string_view::npos) {
                break;
            }
            pos = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw FormatError("dimension mismatch: ragged csv rows");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw FormatError("malformed header: empty csv");
    }
    Eigen::MatrixXf values(static_cast<Eigen::Index>(rows.size()),
                           static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return DescriptorMatrix(std::move(values));
}

} // namespace

DescriptorMatrix::DescriptorMatrix(Eigen::MatrixXf values, std::string image_id, std::string object_id)
    : values_(std::move(values)), image_id_(std::move(image_id)), object_id_(std::move(object_id)) {
    if (values_.rows() < 2) {
        throw InvalidArgument("descriptor dimension T must be at least 2");
    }
    if (values_.cols() < 1) {
        throw InvalidArgument("descriptor matrix must hold at least one descriptor");
    }
    for (Eigen::Index c = 0; c < values_.cols(); ++c) {
        bool any_nonzero = false;
        for (Eigen::Index r = 0; r < values_.rows(); ++r) {
            const float v = values_(r, c);
            if (!std::isfinite(v)) {
                throw InvalidArgument("non-finite descriptor entry at column " + std::to_string(c));
            }
            if (v < 0.0f) {
                throw InvalidArgument("negative descriptor entry at column " + std::to_string(c));
            }
            any_nonzero = any_nonzero || v > 0.0f;
        }
        if (!any_nonzero) {
            throw InvalidArgument("all-zero descriptor column " + std::to_string(c));
        }
    }
    check_id(image_id_, "image id");
    check_id(object_id_, "object id");
}

DescriptorMatrix load_descriptors(std::span<const std::uint8_t> bytes, DescriptorFormat format) {
    try {
        return format == DescriptorFormat::binary ? load_binary(bytes) : load_csv(bytes);
    } catch (const InvalidArgument& e) {
        throw FormatError(e.what());
    }
}

std::vector<std::uint8_t> save_descriptors(const DescriptorMatrix& m, DescriptorFormat format) {
    const auto& v = m.values();
    if (format == DescriptorFormat::binary) {
        ByteWriter out;
        out.text(kDescriptorMagic);
        out.u32(static_cast<std::uint32_t>(v.rows()));
        out.u32(static_cast<std::uint32_t>(v.cols()));
        for (Eigen::Index c = 0; c < v.cols(); ++c) {
            for (Eigen::Index r = 0; r < v.rows(); ++r) {
                out.f32(v(r, c));
            }
        }
        if (!m.image_id().empty() || !m.object_id().empty()) {
            out.text("\nID:" + m.image_id() + ";OBJ:" + m.object_id() + "\n");
        }
        return out.take();
    }
    std::string text;
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        for (Eigen::Index c = 0; c < v.cols(); ++c) {
            if (c > 0) {
                text += ',';
            }
            text += format_float(v(r, c));
        }
        text += '\n';
    }
    return {text.begin(), text.end()};
}

DescriptorMatrix read_descriptor_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto format = path.extension() == ".csv" ? DescriptorFormat::csv : DescriptorFormat::binary;
    auto m = load_descriptors(bytes, format);
    if (m.image_id().empty()) {
        const std::string stem = path.stem().string();
        const auto us = stem.find('_');
        return DescriptorMatrix(m.values(), stem, us == std::string::npos ? stem : stem.substr(0, us));
    }
    return m;
}

void write_descriptor_file(const std::filesystem::path& path, const DescriptorMatrix& m) {
    const auto format = path.extension() == ".csv" ? DescriptorFormat::csv : DescriptorFormat::binary;
    const auto bytes = save_descriptors(m, format);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<DescriptorMatrix> load_corpus_dir(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto ext = entry.path().extension();
        if (entry.is_regular_file() && (ext == ".dmt" || ext == ".csv")) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<DescriptorMatrix> corpus;
    corpus.reserve(files.size());
    for (const auto& f : files) {
        corpus.push_back(read_descriptor_file(f));
    }
    return corpus;
}

SynthCorpusSpec parse_synth_spec(const std::string& text) {
    SynthCorpusSpec spec;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) {
            continue;
        }
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw InvalidArgument("synthetic spec item without '=': " + item);
        }
        const std::string key = item.substr(0, eq);
        const std::string value = item.substr(eq + 1);
        try {
            if (key == "objects") spec.num_objects = std::stoi(value);
            else if (key == "views") spec.views_per_object = std::stoi(value);
            else if (key == "T") spec.dim = std::stoi(value);
            else if (key == "N") spec.descriptors_per_view = std::stoi(value);
            else if (key == "r") spec.planted_rank = std::stoi(value);
            else if (key == "sigma") spec.view_noise_sigma = std::stod(value);
            else if (key == "seed") spec.seed = std::stoull(value);
            else if (key == "identical") spec.identical_views = std::stoi(value) != 0;
            else if (key == "skew") spec.view_skew = std::stod(value);
            else if (key == "shared") spec.shared_centroids = std::stoi(value);
            else throw InvalidArgument("unknown synthetic spec key: " + key);
        } catch (const std::logic_error&) {
            throw InvalidArgument("bad value for synthetic spec key " + key + ": " + value);
        }
    }
    return spec;
}

std::vector<DescriptorMatrix> generate_corpus(const SynthCorpusSpec& spec) {
    if (spec.num_objects < 1 || spec.views_per_object < 1 || spec.dim < 2 ||
        spec.descriptors_per_view < 1 || spec.planted_rank < 1) {
        throw InvalidArgument("synthetic corpus sizes must be positive (T >= 2)");
    }
    if (spec.planted_rank >= std::min(spec.dim, spec.descriptors_per_view)) {
        throw InvalidArgument("planted rank must be below min(T, N)");
    }
    if (!(spec.view_noise_sigma >= 0.0)) {
        throw InvalidArgument("noise sigma must be non-negative");
    }
    if (spec.shared_centroids < 0 || spec.shared_centroids >= spec.planted_rank) {
        throw InvalidArgument("shared centroids must lie in [0, planted rank)");
    }
    if (!(spec.view_skew >= 0.0)) {
        throw InvalidArgument("view skew must be non-negative");
    }

    const int dim = spec.dim;
    const int rank = spec.planted_rank;
    Rng rng(spec.seed);
    std::vector<DescriptorMatrix> corpus;
    corpus.reserve(static_cast<std::size_t>(spec.num_objects) * spec.views_per_object);

    char name[64];
    auto draw_centroid = [&](Eigen::Ref<Eigen::VectorXd> c) {
        for (int t = 0; t < dim; ++t) {
            c(t) = std::abs(rng.normal());
        }
        c.normalize();
    };
    Eigen::MatrixXd common(dim, spec.shared_centroids);
    for (int c = 0; c < spec.shared_centroids; ++c) {
        draw_centroid(common.col(c));
    }

    for (int obj = 0; obj < spec.num_objects; ++obj) {
        Eigen::MatrixXd centroids(dim, rank);
        for (int c = 0; c < rank; ++c) {
            if (c < spec.shared_centroids) {
                centroids.col(c) = common.col(c);
            } else {
                draw_centroid(centroids.col(c));
            }
        }
        std::snprintf(name, sizeof(name), "o%04d", obj);
        const std::string object_id = name;

        for (int view = 0; view < spec.views_per_object; ++view) {
            if (spec.identical_views && view > 0) {
                std::snprintf(name, sizeof(name), "o%04d_v%d", obj, view);
                corpus.emplace_back(corpus.back().values(), name, object_id);
                continue;
            }
            Eigen::MatrixXf values(dim, spec.descriptors_per_view);
            Eigen::VectorXd weights(rank);
            // How often each centroid dominates in this view: uniform, or a
            // per-view softmax of Gaussian draws when skewed.
            std::vector<double> cumulative;
            if (spec.view_skew > 0.0) {
                double total = 0.0;
                for (int c = 0; c < rank; ++c) {
                    total += std::exp(spec.view_skew * rng.normal());
                    cumulative.push_back(total);
                }
                for (auto& v : cumulative) {
                    v /= total;
                }
            }
            for (int j = 0; j < spec.descriptors_per_view; ++j) {
                // One dominant centroid, small contributions from the rest.
                int dominant = 0;
                if (cumulative.empty()) {
                    dominant = static_cast<int>(rng.below(static_cast<std::uint64_t>(rank)));
                } else {
                    const double u = rng.uniform();
                    dominant = static_cast<int>(std::upper_bound(cumulative.begin(), cumulative.end() - 1, u) -
                                                cumulative.begin());
                }
                for (int c = 0; c < rank; ++c) {
                    weights(c) = c == dominant ? 1.0 : rng.uniform(0.0, 0.25);
                }
                weights /= weights.sum();
                const double scale = rng.uniform(0.5, 1.5);
                Eigen::VectorXd d = scale * (centroids * weights);
                for (int t = 0; t < dim; ++t) {
                    double v = d(t);
                    if (spec.view_noise_sigma > 0.0) {
                        v = std::max(0.0, v + spec.view_noise_sigma * rng.normal());
                    }
                    values(t, j) = static_cast<float>(v);
                }
                if (values.col(j).maxCoeff() <= 0.0f) {
                    // Keep the all-zero-column invariant under extreme noise.
                    values(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(dim))), j) =
                        static_cast<float>(spec.view_noise_sigma > 0.0 ? spec.view_noise_sigma : 1.0);
                }
            }
            std::snprintf(name, sizeof(name), "o%04d_v%d", obj, view);
            corpus.emplace_back(std::move(values), name, object_id);
        }
    }
    return corpus;
}

} // namespace facret
