#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>

#include "autoscale/core.hpp"
#include "autoscale/losses.hpp"

namespace autoscale::io {

// CRMP raster container, little-endian:
//   "CRMP" | version u8 = 1 | dtype u8 | width u32 | height u32 | payload
// dtype 0: f32 plane, 1: u8 plane, 2: probability stack where a u8 class
// count follows the height and n_classes f32 planes follow.
enum class DType : std::uint8_t { F32 = 0, U8 = 1, ProbStack = 2 };

using CrmpContent = std::variant<Raster<float>, Raster<std::uint8_t>, ProbabilityVolume>;

void write_crmp(const std::filesystem::path& path, const Raster<float>& raster);
void write_crmp(const std::filesystem::path& path, const Raster<std::uint8_t>& raster);
void write_crmp(const std::filesystem::path& path, const ProbabilityVolume& volume);

CrmpContent read_crmp(const std::filesystem::path& path);
Raster<float> read_f32(const std::filesystem::path& path);
Raster<std::uint8_t> read_u8(const std::filesystem::path& path);

/// Binary PGM (P5); gray = label * floor(255 / (n_classes - 1)).
void write_label_pgm(const std::filesystem::path& path, const LabelRaster& labels,
                     std::uint8_t n_classes);

/// Point CSV: optional "# width=W height=H" first line, then "x,y" per line.
/// Frame dims fall back to the given values when the header is absent.
PointSet read_points(const std::filesystem::path& path,
                     std::optional<std::uint32_t> width = std::nullopt,
                     std::optional<std::uint32_t> height = std::nullopt);
void write_points(const std::filesystem::path& path, const PointSet& points,
                  const std::string& extra_header = {});

/// One value per line (blank lines and '#' comments ignored). A single
/// leading non-numeric line is treated as a column header.
std::vector<double> read_values(const std::filesystem::path& path);

/// Writes through a sibling temporary file and renames it into place, so an
/// exception before commit leaves no partial output behind.
void write_atomically(const std::filesystem::path& path, const std::string& bytes);

std::string format_double(double v);

}  // namespace autoscale::io
