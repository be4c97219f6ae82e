#include "csft/embx.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "csft/error.hpp"

namespace csft {

static_assert(std::endian::native == std::endian::little, "EMBX I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', 'X'};
constexpr std::size_t kFixedHeader = 4 + 4 + 4 + 4 + 8 + 4;

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

    template <typename T>
    T get(const char* what) {
        need(sizeof(T), what);
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) {
            throw LengthError(std::string("EMBX truncated while reading ") + what + " at offset " +
                              std::to_string(pos_) + " (need " + std::to_string(n) + " bytes, " +
                              std::to_string(bytes_.size() - pos_) + " left)");
        }
    }

    std::size_t pos() const noexcept { return pos_; }
    const unsigned char* here() const noexcept { return bytes_.data() + pos_; }
    void skip(std::size_t n) noexcept { pos_ += n; }

private:
    std::span<const unsigned char> bytes_;
    std::size_t pos_ = 0;
};

EmbxHeader parse_header(Reader& r, std::uint64_t total_size) {
    r.need(4, "magic");
    if (std::memcmp(r.here(), kMagic, 4) != 0) {
        throw FormatError("EMBX bad magic at offset 0");
    }
    r.skip(4);
    EmbxHeader h;
    h.file_size = total_size;
    h.version = r.get<std::uint32_t>("version");
    if (h.version != kEmbxVersion) {
        throw FormatError("EMBX unsupported version " + std::to_string(h.version) + " at offset 4");
    }
    h.cls_dim = r.get<std::uint32_t>("cls_dim");
    h.num_classes = r.get<std::uint32_t>("num_classes");
    h.rows = r.get<std::uint64_t>("row count");
    if (h.cls_dim == 0) {
        throw FormatError("EMBX cls_dim is zero at offset 8");
    }
    if (h.rows == 0) {
        throw FormatError("EMBX row count is zero at offset 16");
    }
    const auto meta_len = r.get<std::uint32_t>("metadata length");
    r.need(meta_len, "metadata");
    h.metadata.assign(reinterpret_cast<const char*>(r.here()), meta_len);
    r.skip(meta_len);
    const std::uint64_t record = 4 + 4ULL * h.cls_dim;
    if (h.rows > (~std::uint64_t{0} - kFixedHeader - meta_len - 4) / record) {
        throw LengthError("EMBX row count " + std::to_string(h.rows) + " at offset 16 overflows any file size");
    }
    const std::uint64_t expected = kFixedHeader + meta_len + record * h.rows + 4;
    if (total_size < expected) {
        throw LengthError("EMBX truncated: header promises " + std::to_string(expected) + " bytes, file has " +
                          std::to_string(total_size));
    }
    if (total_size > expected) {
        throw FormatError("EMBX has " + std::to_string(total_size - expected) + " trailing bytes at offset " +
                          std::to_string(expected));
    }
    return h;
}

} // namespace

void EmbeddingDataset::validate() const {
    if (cls_dim == 0) {
        throw ContractError("dataset cls_dim must be positive");
    }
    if (labels.empty()) {
        throw ContractError("dataset must hold at least one row");
    }
    if (embeddings.size() != labels.size() * cls_dim) {
        throw ContractError("dataset has " + std::to_string(embeddings.size()) + " values for " +
                            std::to_string(labels.size()) + " rows of width " + std::to_string(cls_dim));
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != kUnlabeled && (labels[i] < 0 || static_cast<std::uint32_t>(labels[i]) >= num_classes)) {
            throw ContractError("row " + std::to_string(i) + " has label " + std::to_string(labels[i]) +
                                " outside [0," + std::to_string(num_classes) + ")");
        }
    }
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        if (!std::isfinite(embeddings[i])) {
            throw ContractError("row " + std::to_string(i / cls_dim) + " holds a non-finite embedding value");
        }
    }
}

std::map<std::string, std::string> EmbeddingDataset::metadata_map() const {
    std::map<std::string, std::string> out;
    std::istringstream in(metadata);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) {
            out[line.substr(0, eq)] = line.substr(eq + 1);
        }
    }
    return out;
}

std::string EmbeddingDataset::metadata_value(const std::string& key, const std::string& fallback) const {
    const auto m = metadata_map();
    const auto it = m.find(key);
    return it == m.end() ? fallback : it->second;
}

void EmbeddingDataset::set_metadata(const std::string& key, const std::string& value) {
    auto m = metadata_map();
    m[key] = value;
    metadata.clear();
    for (const auto& [k, v] : m) {
        metadata += k + "=" + v + "\n";
    }
}

Tensor2 EmbeddingDataset::gather(std::span<const std::size_t> indices) const {
    Tensor2 out(indices.size(), cls_dim);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= size()) {
            throw DimensionError("gather: row " + std::to_string(indices[i]) + " out of range for " +
                                 std::to_string(size()) + " rows");
        }
        const auto src = row(indices[i]);
        auto dst = out.row(i);
        for (std::size_t j = 0; j < cls_dim; ++j) {
            dst[j] = static_cast<double>(src[j]);
        }
    }
    return out;
}

std::vector<int> EmbeddingDataset::gather_labels(std::span<const std::size_t> indices) const {
    std::vector<int> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        out[i] = labels.at(indices[i]);
    }
    return out;
}

Tensor2 EmbeddingDataset::all_rows() const {
    std::vector<std::size_t> idx(size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        idx[i] = i;
    }
    return gather(idx);
}

std::uint32_t crc32(std::span<const unsigned char> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1U << 30));
        crc = ::crc32(crc, bytes.data() + pos, chunk);
        pos += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

std::string encode_embx(const EmbeddingDataset& d) {
    d.validate();
    std::string out;
    out.reserve(kFixedHeader + d.metadata.size() + d.size() * (4 + 4 * d.cls_dim) + 4);
    out.append(kMagic, 4);
    put<std::uint32_t>(out, kEmbxVersion);
    put<std::uint32_t>(out, d.cls_dim);
    put<std::uint32_t>(out, d.num_classes);
    put<std::uint64_t>(out, d.size());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(d.metadata.size()));
    out += d.metadata;
    for (std::size_t i = 0; i < d.size(); ++i) {
        put<std::int32_t>(out, d.labels[i]);
        out.append(reinterpret_cast<const char*>(d.row(i).data()), 4 * d.cls_dim);
    }
    put<std::uint32_t>(out, crc32({reinterpret_cast<const unsigned char*>(out.data()), out.size()}));
    return out;
}

EmbeddingDataset decode_embx(std::span<const unsigned char> bytes) {
    if (bytes.size() < kFixedHeader + 4) {
        throw LengthError("EMBX truncated: " + std::to_string(bytes.size()) + " bytes is shorter than the " +
                          std::to_string(kFixedHeader + 4) + "-byte minimum");
    }
    const std::size_t body_end = bytes.size() - 4;
    std::uint32_t stored;
    std::memcpy(&stored, bytes.data() + body_end, 4);
    const std::uint32_t computed = crc32(bytes.first(body_end));
    const std::string crc_note = stored == computed ? std::string()
                                                    : "; CRC mismatch at offset " + std::to_string(body_end) +
                                                          " (stored " + std::to_string(stored) + ", computed " +
                                                          std::to_string(computed) + ")";
    Reader r(bytes);
    EmbxHeader h;
    try {
        h = parse_header(r, bytes.size());
    } catch (const LengthError& e) {
        throw LengthError(e.what() + crc_note);
    } catch (const FormatError& e) {
        throw FormatError(e.what() + crc_note);
    }
    if (!crc_note.empty()) {
        throw FormatError("EMBX" + crc_note.substr(1));
    }
    EmbeddingDataset d;
    d.cls_dim = h.cls_dim;
    d.num_classes = h.num_classes;
    d.metadata = h.metadata;
    d.labels.resize(h.rows);
    d.embeddings.resize(h.rows * h.cls_dim);
    for (std::size_t i = 0; i < h.rows; ++i) {
        const std::size_t at = r.pos();
        d.labels[i] = r.get<std::int32_t>("label");
        if (d.labels[i] != kUnlabeled && (d.labels[i] < 0 || static_cast<std::uint32_t>(d.labels[i]) >= h.num_classes)) {
            throw FormatError("EMBX label " + std::to_string(d.labels[i]) + " out of range at offset " +
                              std::to_string(at));
        }
        std::memcpy(d.embeddings.data() + i * h.cls_dim, r.here(), 4ULL * h.cls_dim);
        r.skip(4ULL * h.cls_dim);
    }
    for (std::size_t i = 0; i < d.embeddings.size(); ++i) {
        if (!std::isfinite(d.embeddings[i])) {
            const std::size_t row = i / h.cls_dim;
            throw FormatError("EMBX non-finite embedding in row " + std::to_string(row));
        }
    }
    return d;
}

void write_embx(const std::filesystem::path& path, const EmbeddingDataset& dataset) {
    const std::string bytes = encode_embx(dataset);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

EmbeddingDataset read_embx(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_embx(bytes);
}

EmbxHeader read_embx_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    const auto total = std::filesystem::file_size(path);
    std::vector<unsigned char> head(kFixedHeader);
    in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
    head.resize(static_cast<std::size_t>(in.gcount()));
    if (head.size() == kFixedHeader) {
        std::uint32_t meta_len;
        std::memcpy(&meta_len, head.data() + kFixedHeader - 4, 4);
        const std::size_t want = std::min<std::uint64_t>(meta_len, total - kFixedHeader);
        head.resize(kFixedHeader + want);
        in.read(reinterpret_cast<char*>(head.data() + kFixedHeader), static_cast<std::streamsize>(want));
    }
    Reader r(head);
    return parse_header(r, total);
}

} // namespace csft
