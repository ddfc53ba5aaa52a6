#ifndef SPCA_IO_HPP
#define SPCA_IO_HPP

#include "spca/datagen.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace spca {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Matrix checkpoint layout, little-endian:
//   8 bytes  magic "SPCAMAT1"
//   uint64   rows
//   uint64   cols
//   float64  rows * cols values, row-major
void write_matrix(const std::filesystem::path& path, const Mat& M);
Mat read_matrix(const std::filesystem::path& path);

// RFC 4180 CSV with a header row. Numbers use the shortest text that reads
// back to the same double.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header, const Mat& values);

struct CsvTable {
    std::vector<std::string> header;
    Mat values;
};

// Numeric table with a header row; quoted fields are accepted.
CsvTable read_csv(const std::filesystem::path& path);

std::string format_double(double v);

// 8-bit raster, row-major with interleaved channels (1 = gray, 3 = RGB).
struct Raster {
    Index height = 0;
    Index width = 0;
    Index channels = 1;
    std::vector<std::uint8_t> pixels;
};

void write_png(const std::filesystem::path& path, const Raster& raster);
Raster read_png(const std::filesystem::path& path);

// Binary or ASCII PGM/PPM (P2, P3, P5, P6), maxval up to 65535.
Image read_pnm(const std::filesystem::path& path);

// PNG or PNM by extension, values scaled to [0, 1].
Image read_image(const std::filesystem::path& path);

// Every .png/.pgm/.ppm/.pnm file in `dir`, in sorted filename order.
std::vector<Image> read_image_folder(const std::filesystem::path& dir);

struct GridOptions {
    Index columns = 0;  // 0: ceil(sqrt(k))
    Index gap = 1;      // pixels between tiles
    Index scale = 4;    // each filter pixel becomes scale x scale
    std::uint8_t background = 0;
};

// One tile per column of W (patch x patch x channels, same interleaving as
// extract_patches), each min-max normalised on its own for display.
Raster filter_grid(const Mat& W, Index patch, Index channels, const GridOptions& options = {});

}  // namespace spca

#endif
