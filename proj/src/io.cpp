#include "spca/io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace spca {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'S', 'P', 'C', 'A', 'M', 'A', 'T', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out)
{
    std::ofstream out(path, mode);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in)
{
    std::ifstream in(path, mode);
    if (!in)
        throw IoError("cannot open " + path.string());
    return in;
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + "\"";
}

// Splits one logical record; quoted fields may span lines.
bool read_record(std::istream& in, std::vector<std::string>& fields)
{
    fields.clear();
    std::string field;
    bool quoted = false, any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            break;
        } else if (c != '\r') {
            field += c;
        }
    }
    if (!any)
        return false;
    fields.push_back(std::move(field));
    return true;
}

double parse_double(const std::string& s, const std::string& where)
{
    const char* b = s.data();
    const char* e = b + s.size();
    while (b < e && *b == ' ')
        ++b;
    while (e > b && e[-1] == ' ')
        --e;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e)
        throw IoError(where + ": '" + s + "' is not a number");
    return v;
}

struct PngWriteGuard {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriteGuard() { png_destroy_write_struct(&png, &info); }
};

struct PngReadGuard {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReadGuard() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};

using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw IoError(std::string("png: ") + msg); }
void png_warn(png_structp, png_const_charp) {}

// Next whitespace-separated token of a PNM header, skipping comments.
std::string pnm_token(std::istream& in)
{
    std::string tok;
    char c;
    while (in.get(c)) {
        if (c == '#') {
            std::string rest;
            std::getline(in, rest);
            if (!tok.empty())
                break;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!tok.empty())
                break;
            continue;
        }
        tok += c;
    }
    return tok;
}

Index pnm_int(std::istream& in, const fs::path& path)
{
    const std::string t = pnm_token(in);
    Index v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || v < 0)
        throw IoError(path.string() + ": malformed PNM header");
    return v;
}

std::string lower_ext(const fs::path& p)
{
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    return e;
}

}  // namespace

void write_matrix(const fs::path& path, const Mat& M)
{
    std::ofstream out = open_out(path, std::ios::binary);
    const std::uint64_t dims[2] = {std::uint64_t(M.rows()), std::uint64_t(M.cols())};
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(dims), sizeof dims);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R = M;
    out.write(reinterpret_cast<const char*>(R.data()), std::streamsize(R.size() * sizeof(double)));
    if (!out)
        throw IoError("failed writing " + path.string());
}

Mat read_matrix(const fs::path& path)
{
    std::ifstream in = open_in(path, std::ios::binary);
    char magic[8];
    std::uint64_t dims[2];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw IoError(path.string() + ": not a matrix checkpoint");
    if (!in.read(reinterpret_cast<char*>(dims), sizeof dims))
        throw IoError(path.string() + ": truncated header");
    const std::uint64_t limit = std::uint64_t(1) << 40;
    if (dims[0] > limit || dims[1] > limit || (dims[0] && dims[1] > limit / dims[0]))
        throw IoError(path.string() + ": implausible shape");
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R(static_cast<Index>(dims[0]), static_cast<Index>(dims[1]));
    if (!in.read(reinterpret_cast<char*>(R.data()), std::streamsize(R.size() * sizeof(double))))
        throw IoError(path.string() + ": truncated payload");
    if (in.peek() != std::char_traits<char>::eof())
        throw IoError(path.string() + ": trailing bytes after payload");
    return R;
}

std::string format_double(double v)
{
    std::array<char, 32> buf;
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc())
        throw IoError("format_double: conversion failed");
    return std::string(buf.data(), ptr);
}

void write_csv(const fs::path& path, const std::vector<std::string>& header, const Mat& values)
{
    require(header.empty() || Index(header.size()) == values.cols(), "write_csv: header has " +
                                                                        std::to_string(header.size()) + " names for " +
                                                                        std::to_string(values.cols()) + " columns");
    std::ofstream out = open_out(path, std::ios::binary);
    for (std::size_t j = 0; j < header.size(); ++j)
        out << (j ? "," : "") << csv_field(header[j]);
    if (!header.empty())
        out << "\r\n";
    for (Index i = 0; i < values.rows(); ++i) {
        for (Index j = 0; j < values.cols(); ++j)
            out << (j ? "," : "") << format_double(values(i, j));
        out << "\r\n";
    }
    if (!out)
        throw IoError("failed writing " + path.string());
}

CsvTable read_csv(const fs::path& path)
{
    std::ifstream in = open_in(path, std::ios::binary);
    CsvTable t;
    std::vector<std::string> fields;
    if (!read_record(in, t.header))
        throw IoError(path.string() + ": empty file");
    std::vector<std::vector<double>> rows;
    std::size_t line = 1;
    while (read_record(in, fields)) {
        ++line;
        if (fields.size() == 1 && fields[0].empty())
            continue;
        if (fields.size() != t.header.size())
            throw IoError(path.string() + ":" + std::to_string(line) + ": expected " +
                          std::to_string(t.header.size()) + " fields, found " + std::to_string(fields.size()));
        std::vector<double> row;
        for (const std::string& f : fields)
            row.push_back(parse_double(f, path.string() + ":" + std::to_string(line)));
        rows.push_back(std::move(row));
    }
    t.values.resize(Index(rows.size()), Index(t.header.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            t.values(Index(i), Index(j)) = rows[i][j];
    return t;
}

void write_png(const fs::path& path, const Raster& r)
{
    require(r.channels == 1 || r.channels == 3, "write_png: channels must be 1 or 3");
    require(r.height >= 1 && r.width >= 1, "write_png: empty raster");
    require(r.pixels.size() == std::size_t(r.height * r.width * r.channels), "write_png: buffer size mismatch");
    FilePtr f(std::fopen(path.string().c_str(), "wb"));
    if (!f)
        throw IoError("cannot open " + path.string() + " for writing");
    PngWriteGuard g;
    g.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    if (!g.png)
        throw IoError("png: cannot create writer");
    g.info = png_create_info_struct(g.png);
    if (!g.info)
        throw IoError("png: cannot create info");
    png_init_io(g.png, f.get());
    png_set_IHDR(g.png, g.info, png_uint_32(r.width), png_uint_32(r.height), 8,
                 r.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(g.png, g.info);
    for (Index y = 0; y < r.height; ++y)
        png_write_row(g.png, r.pixels.data() + std::size_t(y * r.width * r.channels));
    png_write_end(g.png, nullptr);
}

Raster read_png(const fs::path& path)
{
    FilePtr f(std::fopen(path.string().c_str(), "rb"));
    if (!f)
        throw IoError("cannot open " + path.string());
    PngReadGuard g;
    g.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    if (!g.png)
        throw IoError("png: cannot create reader");
    g.info = png_create_info_struct(g.png);
    if (!g.info)
        throw IoError("png: cannot create info");
    png_init_io(g.png, f.get());
    png_read_info(g.png, g.info);
    // Normalise to 8-bit gray or RGB without alpha.
    png_set_expand(g.png);
    png_set_strip_16(g.png);
    png_set_strip_alpha(g.png);
    png_set_packing(g.png);
    png_read_update_info(g.png, g.info);
    Raster r;
    r.width = Index(png_get_image_width(g.png, g.info));
    r.height = Index(png_get_image_height(g.png, g.info));
    r.channels = Index(png_get_channels(g.png, g.info));
    if (r.channels != 1 && r.channels != 3)
        throw IoError(path.string() + ": unsupported PNG layout");
    r.pixels.resize(std::size_t(r.width * r.height * r.channels));
    std::vector<png_bytep> rows(std::size_t(r.height));
    for (Index y = 0; y < r.height; ++y)
        rows[std::size_t(y)] = r.pixels.data() + std::size_t(y * r.width * r.channels);
    png_read_image(g.png, rows.data());
    png_read_end(g.png, nullptr);
    return r;
}

Image read_pnm(const fs::path& path)
{
    std::ifstream in = open_in(path, std::ios::binary);
    const std::string magic = pnm_token(in);
    if (magic != "P2" && magic != "P3" && magic != "P5" && magic != "P6")
        throw IoError(path.string() + ": unsupported PNM type '" + magic + "'");
    Image im;
    im.channels = (magic == "P3" || magic == "P6") ? 3 : 1;
    im.width = pnm_int(in, path);
    im.height = pnm_int(in, path);
    const Index maxval = pnm_int(in, path);
    if (im.width < 1 || im.height < 1 || maxval < 1 || maxval > 65535)
        throw IoError(path.string() + ": invalid PNM dimensions or maxval");
    const std::size_t count = std::size_t(im.width * im.height * im.channels);
    im.pixels.resize(count);
    const double scale = 1.0 / double(maxval);
    if (magic == "P2" || magic == "P3") {
        for (std::size_t i = 0; i < count; ++i) {
            const Index v = pnm_int(in, path);
            if (v > maxval)
                throw IoError(path.string() + ": sample exceeds maxval");
            im.pixels[i] = double(v) * scale;
        }
        return im;
    }
    const std::size_t bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(count * bytes);
    if (!in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size())))
        throw IoError(path.string() + ": truncated PNM payload");
    for (std::size_t i = 0; i < count; ++i) {
        // 16-bit samples are big-endian.
        const unsigned v = bytes == 2 ? (unsigned(raw[2 * i]) << 8) | raw[2 * i + 1] : raw[i];
        im.pixels[i] = double(v) * scale;
    }
    return im;
}

Image read_image(const fs::path& path)
{
    const std::string ext = lower_ext(path);
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm")
        return read_pnm(path);
    if (ext != ".png")
        throw IoError(path.string() + ": unsupported image extension '" + ext + "'");
    const Raster r = read_png(path);
    Image im;
    im.height = r.height;
    im.width = r.width;
    im.channels = r.channels;
    im.pixels.resize(r.pixels.size());
    for (std::size_t i = 0; i < r.pixels.size(); ++i)
        im.pixels[i] = double(r.pixels[i]) / 255.0;
    return im;
}

std::vector<Image> read_image_folder(const fs::path& dir)
{
    if (!fs::is_directory(dir))
        throw IoError(dir.string() + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string ext = lower_ext(entry.path());
        if (entry.is_regular_file() && (ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm"))
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw IoError(dir.string() + ": no images found");
    std::vector<Image> out;
    out.reserve(files.size());
    for (const fs::path& f : files)
        out.push_back(read_image(f));
    return out;
}

Raster filter_grid(const Mat& W, Index patch, Index channels, const GridOptions& o)
{
    require(patch >= 1 && (channels == 1 || channels == 3), "filter_grid: need patch >= 1 and 1 or 3 channels");
    require(W.rows() == patch * patch * channels, "filter_grid: W has " + std::to_string(W.rows()) +
                                                      " rows, expected " + std::to_string(patch * patch * channels));
    require(W.cols() >= 1, "filter_grid: no filters");
    require(o.gap >= 0 && o.scale >= 1, "filter_grid: need gap >= 0 and scale >= 1");
    const Index k = W.cols();
    const Index cols = o.columns > 0 ? o.columns : Index(std::ceil(std::sqrt(double(k))));
    const Index rows = (k + cols - 1) / cols;
    const Index tile = patch * o.scale;
    Raster r;
    r.channels = channels;
    r.width = cols * tile + (cols + 1) * o.gap;
    r.height = rows * tile + (rows + 1) * o.gap;
    r.pixels.assign(std::size_t(r.width * r.height * channels), o.background);
    for (Index f = 0; f < k; ++f) {
        const double lo = W.col(f).minCoeff(), hi = W.col(f).maxCoeff();
        const double span = hi - lo;
        const Index x0 = o.gap + (f % cols) * (tile + o.gap);
        const Index y0 = o.gap + (f / cols) * (tile + o.gap);
        for (Index py = 0; py < patch; ++py) {
            for (Index px = 0; px < patch; ++px) {
                for (Index ch = 0; ch < channels; ++ch) {
                    const double v = W((py * patch + px) * channels + ch, f);
                    const double u = span > 0.0 ? (v - lo) / span : 0.5;
                    const auto byte = std::uint8_t(std::lround(255.0 * u));
                    for (Index sy = 0; sy < o.scale; ++sy)
                        for (Index sx = 0; sx < o.scale; ++sx) {
                            const Index y = y0 + py * o.scale + sy, x = x0 + px * o.scale + sx;
                            r.pixels[std::size_t((y * r.width + x) * channels + ch)] = byte;
                        }
                }
            }
        }
    }
    return r;
}

}  // namespace spca
