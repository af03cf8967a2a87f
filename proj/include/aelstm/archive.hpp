#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "aelstm/config.hpp"
#include "aelstm/data.hpp"
#include "aelstm/trainer.hpp"

namespace aelstm {

inline constexpr char kArchiveMagic[8] = {'A', 'E', 'L', 'S', 'T', 'M', 'A', 'R'};
inline constexpr std::uint32_t kArchiveVersion = 1;
// Every double is stored as its raw IEEE-754 binary64 bit pattern, little endian.
inline constexpr std::string_view kArchiveFloatEncoding = "ieee754-binary64-le";

struct ModelArchive {
  RunConfig config;
  NormStats stats;
  EnsembleModel model;  // logs carry only the initial/final objectives
};

std::string encode_archive(const ModelArchive& archive);
ModelArchive decode_archive(const std::string& bytes);

void save_model(const std::filesystem::path& path, const ModelArchive& archive);
ModelArchive load_model(const std::filesystem::path& path);

}  // namespace aelstm
