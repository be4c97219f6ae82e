#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "csft/tensor.hpp"

namespace csft {

inline constexpr std::int32_t kUnlabeled = -1;

// Rows of foundation-model [CLS] embeddings with optional class labels.
// Embeddings are stored as float32 and widened to double on gather().
struct EmbeddingDataset {
    std::uint32_t cls_dim = 0;
    std::uint32_t num_classes = 0;
    // Free-form "key=value" lines. Recommended keys: source-model,
    // dataset-name, image-size, augmentation, split.
    std::string metadata;
    std::vector<std::int32_t> labels;
    std::vector<float> embeddings;

    std::size_t size() const noexcept { return labels.size(); }
    std::span<const float> row(std::size_t i) const { return {embeddings.data() + i * cls_dim, cls_dim}; }

    // Throws ContractError when the invariants do not hold.
    void validate() const;

    std::map<std::string, std::string> metadata_map() const;
    std::string metadata_value(const std::string& key, const std::string& fallback = "") const;
    void set_metadata(const std::string& key, const std::string& value);

    Tensor2 gather(std::span<const std::size_t> indices) const;
    std::vector<int> gather_labels(std::span<const std::size_t> indices) const;
    Tensor2 all_rows() const;
};

struct EmbxHeader {
    std::uint32_t version = 0;
    std::uint32_t cls_dim = 0;
    std::uint32_t num_classes = 0;
    std::uint64_t rows = 0;
    std::string metadata;
    std::uint64_t file_size = 0;
};

inline constexpr std::uint32_t kEmbxVersion = 1;

// Layout (all little-endian):
//   "EMBX" | u32 version | u32 cls_dim | u32 K | u64 N | u32 meta_len | meta
//   N x (i32 label | cls_dim x f32) | u32 CRC32 of every preceding byte
std::string encode_embx(const EmbeddingDataset& dataset);
EmbeddingDataset decode_embx(std::span<const unsigned char> bytes);
void write_embx(const std::filesystem::path& path, const EmbeddingDataset& dataset);
EmbeddingDataset read_embx(const std::filesystem::path& path);
// Validates magic, version, dimensions and total length without reading the
// payload or checking the CRC.
EmbxHeader read_embx_header(const std::filesystem::path& path);

std::uint32_t crc32(std::span<const unsigned char> bytes);

} // namespace csft
