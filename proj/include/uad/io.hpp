#pragma once

// On-disk formats: datasets (CSV / "UADD") and logit matrices (CSV / "UADL").
// Binary formats are little-endian; the reader picks the format by magic.

#include <filesystem>
#include <optional>

#include "uad/matrix.hpp"
#include "uad/trainer.hpp"

namespace uad {

/// CSV with header f0..f{d-1},label.
void write_dataset_csv(const LabeledDataset& data, const std::filesystem::path& path);
/// Class count is max label + 1 unless given.
LabeledDataset read_dataset_csv(const std::filesystem::path& path, std::optional<std::size_t> classes = std::nullopt);

/// "UADD", u32 n, u32 d, u32 K, f64 features row-major, u32 labels.
void write_dataset_bin(const LabeledDataset& data, const std::filesystem::path& path);
LabeledDataset read_dataset_bin(const std::filesystem::path& path);

/// Binary if the file starts with "UADD", CSV otherwise.
LabeledDataset read_dataset(const std::filesystem::path& path);

/// "UADL", u16 version = 1, u32 n, u32 K, f64 row-major.
void write_logits_bin(const LogitMatrix& logits, const std::filesystem::path& path);
LogitMatrix read_logits_bin(const std::filesystem::path& path);

/// CSV with header logit_0..logit_{K-1}.
void write_logits_csv(const LogitMatrix& logits, const std::filesystem::path& path);
LogitMatrix read_logits_csv(const std::filesystem::path& path);

LogitMatrix read_logits(const std::filesystem::path& path);

}  // namespace uad
