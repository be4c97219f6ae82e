#include "csft/evaluator.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "csft/data.hpp"
#include "csft/error.hpp"

namespace csft {

namespace {

constexpr std::size_t kEvalChunk = 1024;

void append_number(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

double parse_double(std::string_view s, const std::string& where) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw FormatError(where + ": not a number '" + std::string(s) + "'");
    }
    return v;
}

template <typename Int>
Int parse_int(std::string_view s, const std::string& where) {
    Int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw FormatError(where + ": not an integer '" + std::string(s) + "'");
    }
    return v;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) {
            return out;
        }
        start = comma + 1;
    }
}

Tensor2 slice_rows(const Tensor2& t, std::size_t begin, std::size_t end) {
    Tensor2 out(end - begin, t.cols());
    std::copy(t.data() + begin * t.cols(), t.data() + end * t.cols(), out.data());
    return out;
}

// Runs `fn` over row chunks and stacks the results.
template <typename Fn>
Tensor2 chunked(const Tensor2& rows, Fn fn) {
    Tensor2 out;
    for (std::size_t begin = 0; begin < rows.rows(); begin += kEvalChunk) {
        const std::size_t end = std::min(rows.rows(), begin + kEvalChunk);
        Tensor2 part = fn(slice_rows(rows, begin, end));
        if (begin == 0) {
            out = Tensor2(rows.rows(), part.cols());
        }
        std::copy(part.data(), part.data() + part.size(), out.data() + begin * part.cols());
    }
    return out;
}

} // namespace

double error_from_logits(const Tensor2& logits, std::span<const int> labels) {
    if (logits.rows() != labels.size()) {
        throw DimensionError("error_rate: " + std::to_string(logits.rows()) + " logit rows vs " +
                             std::to_string(labels.size()) + " labels");
    }
    if (labels.empty()) {
        throw ContractError("error_rate: empty test split");
    }
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto row = logits.row(i);
        const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
        wrong += best != labels[i] ? 1 : 0;
    }
    return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

double error_rate(ComponentBundle& bundle, const Tensor2& rows, std::span<const int> labels) {
    if (rows.cols() != bundle.cls_dim()) {
        throw DimensionError("error_rate: rows are " + std::to_string(rows.cols()) + " wide, model expects " +
                             std::to_string(bundle.cls_dim()));
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) {
            throw ContractError("error_rate: test row " + std::to_string(i) + " is unlabeled");
        }
    }
    const Tensor2 logits = chunked(rows, [&](const Tensor2& part) { return bundle.content_logits(part); });
    return error_from_logits(logits, labels);
}

double error_rate(ComponentBundle& bundle, const EmbeddingDataset& test) {
    const std::vector<int> labels(test.labels.begin(), test.labels.end());
    return error_rate(bundle, test.all_rows(), labels);
}

// ----------------------------------------------------------------- sweep

std::string SweepResult::to_csv() const {
    std::string out = "budget,method,seed,best_error,steps\n";
    for (const auto& r : rows) {
        out += std::to_string(r.budget) + "," + method_name(r.method) + "," + std::to_string(r.seed) + ",";
        append_number(out, r.best_error);
        out += "," + std::to_string(r.steps) + "\n";
    }
    return out;
}

SweepResult SweepResult::from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "budget,method,seed,best_error,steps") {
        throw FormatError("sweep CSV: missing header");
    }
    SweepResult out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const auto f = split_commas(line);
        const std::string where = "sweep CSV line " + std::to_string(line_no);
        if (f.size() != 5) {
            throw FormatError(where + ": expected 5 fields, got " + std::to_string(f.size()));
        }
        SweepRow r;
        r.budget = parse_int<std::size_t>(f[0], where);
        r.method = parse_method(std::string(f[1]));
        r.seed = parse_int<std::uint64_t>(f[2], where);
        r.best_error = parse_double(f[3], where);
        r.steps = parse_int<std::uint64_t>(f[4], where);
        out.rows.push_back(r);
    }
    return out;
}

double SweepResult::mean_error(std::size_t budget, Method method) const {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows) {
        if (r.budget == budget && r.method == method) {
            total += r.best_error;
            ++n;
        }
    }
    if (n == 0) {
        throw ContractError("sweep has no rows for budget " + std::to_string(budget) + " / " + method_name(method));
    }
    return total / static_cast<double>(n);
}

std::vector<SweepCell> sweep_cells(std::span<const std::size_t> ladder, std::span<const Method> methods,
                                   std::span<const std::uint64_t> seeds) {
    std::vector<SweepCell> cells;
    for (std::size_t budget : ladder) {
        for (Method m : methods) {
            for (std::uint64_t seed : seeds) {
                cells.push_back({budget, m, seed});
            }
        }
    }
    return cells;
}

SweepResult run_sweep(const EmbeddingDataset& train, const EmbeddingDataset& test,
                      std::span<const std::size_t> ladder, std::span<const Method> methods,
                      std::span<const std::uint64_t> seeds, const TrainConfig& config, std::size_t jobs) {
    if (ladder.empty() || methods.empty() || seeds.empty()) {
        throw ParameterError("sweep: ladder, methods and seeds must all be non-empty");
    }
    config.validate();
    const std::vector<SweepCell> cells = sweep_cells(ladder, methods, seeds);
    // Validate every budget up front so a bad ladder fails before any training.
    for (const auto& c : cells) {
        select_labeled(train, c.budget, c.seed);
    }
    SweepResult result;
    result.rows.resize(cells.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) {
                return;
            }
            {
                std::lock_guard lock(failure_mutex);
                if (failure) {
                    return;
                }
            }
            try {
                TrainConfig cfg = config;
                cfg.seed = cells[i].seed;
                cfg.method = cells[i].method;
                const FitResult fr = fit(train, test, cells[i].budget, cfg);
                result.rows[i] = {cells[i].budget, cells[i].method, cells[i].seed, fr.report.best_error,
                                  fr.report.steps_run};
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(jobs, 1, cells.size());
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    return result;
}

// ------------------------------------------------------------------- PCA

ProjectedFeatures pca_project(const Tensor2& features, std::size_t k) {
    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    if (k == 0 || k > d) {
        throw ParameterError("pca: k=" + std::to_string(k) + " must be in [1, " + std::to_string(d) + "]");
    }
    if (n < k || n < 2) {
        throw ParameterError("pca: " + std::to_string(n) + " rows cannot support " + std::to_string(k) +
                             " components");
    }
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::Map<const RowMat> x(features.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const RowMat centered = x.rowwise() - mean;
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    const double trace = cov.trace();
    if (!(trace > 0.0)) {
        throw DegenerateInputError("pca: features have zero variance");
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) {
        throw NumericError("pca: eigendecomposition failed");
    }
    ProjectedFeatures out;
    out.loadings = Tensor2(d, k);
    out.mean.assign(mean.data(), mean.data() + d);
    for (std::size_t c = 0; c < k; ++c) {
        // Eigenvalues come out ascending.
        const Eigen::Index src = static_cast<Eigen::Index>(d - 1 - c);
        Eigen::VectorXd v = eig.eigenvectors().col(src);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) {
            v = -v;
        }
        for (std::size_t r = 0; r < d; ++r) {
            out.loadings(r, c) = v(static_cast<Eigen::Index>(r));
        }
        out.explained_variance_ratio.push_back(std::max(0.0, eig.eigenvalues()(src)) / trace);
    }
    const Eigen::Map<const RowMat> w(out.loadings.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k));
    const RowMat scores = centered * w;
    out.scores = Tensor2(n, k);
    std::copy(scores.data(), scores.data() + scores.size(), out.scores.data());
    return out;
}

Tensor2 pca_reconstruct(const ProjectedFeatures& p) {
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const auto n = static_cast<Eigen::Index>(p.scores.rows());
    const auto k = static_cast<Eigen::Index>(p.scores.cols());
    const auto d = static_cast<Eigen::Index>(p.loadings.rows());
    const Eigen::Map<const RowMat> s(p.scores.data(), n, k);
    const Eigen::Map<const RowMat> w(p.loadings.data(), d, k);
    const Eigen::Map<const Eigen::RowVectorXd> mean(p.mean.data(), d);
    const RowMat rec = (s * w.transpose()).rowwise() + mean;
    Tensor2 out(static_cast<std::size_t>(n), static_cast<std::size_t>(d));
    std::copy(rec.data(), rec.data() + rec.size(), out.data());
    return out;
}

// ---------------------------------------------------------- feature CSV

ProjectedFeatures export_features(ComponentBundle& bundle, const EmbeddingDataset& dataset,
                                  const std::filesystem::path& path, std::size_t components) {
    if (dataset.cls_dim != bundle.cls_dim()) {
        throw DimensionError("export: dataset cls_dim " + std::to_string(dataset.cls_dim) +
                             " does not match model cls_dim " + std::to_string(bundle.cls_dim()));
    }
    const Tensor2 features =
        chunked(dataset.all_rows(), [&](const Tensor2& part) { return bundle.content_features(part); });
    ProjectedFeatures proj = pca_project(features, components);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    std::string line = "label";
    for (std::size_t j = 0; j < features.cols(); ++j) {
        line += ",f" + std::to_string(j);
    }
    for (std::size_t j = 0; j < components; ++j) {
        line += ",p" + std::to_string(j);
    }
    out << line << '\n';
    for (std::size_t i = 0; i < features.rows(); ++i) {
        line = std::to_string(dataset.labels[i]);
        for (double v : features.row(i)) {
            line += ',';
            append_number(line, v);
        }
        for (double v : proj.scores.row(i)) {
            line += ',';
            append_number(line, v);
        }
        out << line << '\n';
    }
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
    return proj;
}

FeatureTable read_features_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError("feature CSV " + path.string() + " is empty");
    }
    FeatureTable t;
    std::size_t f_cols = 0;
    std::size_t p_cols = 0;
    for (auto h : split_commas(line)) {
        t.header.emplace_back(h);
        if (!h.empty() && h[0] == 'f') {
            ++f_cols;
        } else if (!h.empty() && h[0] == 'p') {
            ++p_cols;
        }
    }
    if (t.header.empty() || t.header[0] != "label") {
        throw FormatError("feature CSV " + path.string() + ": first column must be 'label'");
    }
    std::vector<double> feats;
    std::vector<double> projs;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const auto f = split_commas(line);
        const std::string where = path.string() + " line " + std::to_string(line_no);
        if (f.size() != 1 + f_cols + p_cols) {
            throw FormatError(where + ": expected " + std::to_string(1 + f_cols + p_cols) + " fields, got " +
                              std::to_string(f.size()));
        }
        t.labels.push_back(parse_int<int>(f[0], where));
        for (std::size_t j = 0; j < f_cols; ++j) {
            feats.push_back(parse_double(f[1 + j], where));
        }
        for (std::size_t j = 0; j < p_cols; ++j) {
            projs.push_back(parse_double(f[1 + f_cols + j], where));
        }
    }
    t.features = Tensor2(t.labels.size(), f_cols);
    std::copy(feats.begin(), feats.end(), t.features.data());
    t.projections = Tensor2(t.labels.size(), p_cols);
    std::copy(projs.begin(), projs.end(), t.projections.data());
    return t;
}

} // namespace csft
