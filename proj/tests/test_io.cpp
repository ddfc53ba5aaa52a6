#include "spca/io.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <fstream>

namespace spca {
namespace {

namespace fs = std::filesystem;

class TempDir {
public:
    explicit TempDir(const std::string& name)
        : path_(fs::temp_directory_path() / ("spca_test_" + name + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed())))
    {
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

void write_bytes(const fs::path& p, const std::string& bytes)
{
    std::ofstream out(p, std::ios::binary);
    out << bytes;
}

TEST(MatrixFile, RoundTripIsBitExact)
{
    TempDir dir("matrix");
    Mat M = test::random_matrix(7, 3, 1, 1e3);
    M(0, 0) = -0.0;
    M(1, 1) = std::numeric_limits<double>::denorm_min();
    write_matrix(dir.path() / "m.bin", M);
    const Mat back = read_matrix(dir.path() / "m.bin");
    ASSERT_EQ(back.rows(), 7);
    ASSERT_EQ(back.cols(), 3);
    EXPECT_TRUE(back == M);
    EXPECT_TRUE(std::signbit(back(0, 0)));
}

TEST(MatrixFile, BadMagicAndTruncationAreRejected)
{
    TempDir dir("matrix_bad");
    write_bytes(dir.path() / "bad.bin", "NOTAMATRIX-------------");
    EXPECT_THROW(read_matrix(dir.path() / "bad.bin"), IoError);
    write_matrix(dir.path() / "ok.bin", Mat::Ones(4, 4));
    fs::resize_file(dir.path() / "ok.bin", fs::file_size(dir.path() / "ok.bin") - 8);
    EXPECT_THROW(read_matrix(dir.path() / "ok.bin"), IoError);
    EXPECT_THROW(read_matrix(dir.path() / "missing.bin"), IoError);
}

TEST(Csv, FormattedDoublesRoundTripExactly)
{
    for (double v : {0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0, 123456789.0})
        EXPECT_EQ(std::stod(format_double(v)), v) << format_double(v);
}

TEST(Csv, TableRoundTripWithAQuotedHeader)
{
    TempDir dir("csv");
    const Mat M = test::random_matrix(5, 3, 2);
    const std::vector<std::string> header = {"a", "b,c", "say \"hi\""};
    write_csv(dir.path() / "t.csv", header, M);
    const CsvTable t = read_csv(dir.path() / "t.csv");
    EXPECT_EQ(t.header, header);
    EXPECT_TRUE(t.values == M);
}

TEST(Csv, RaggedRowsAreRejected)
{
    TempDir dir("csv_bad");
    write_bytes(dir.path() / "r.csv", "x,y\n1,2\n3\n");
    EXPECT_THROW(read_csv(dir.path() / "r.csv"), IoError);
}

Raster pattern(Index h, Index w, Index c)
{
    Raster r;
    r.height = h;
    r.width = w;
    r.channels = c;
    r.pixels.resize(std::size_t(h * w * c));
    for (std::size_t i = 0; i < r.pixels.size(); ++i)
        r.pixels[i] = std::uint8_t((i * 37 + 11) % 256);
    return r;
}

TEST(Png, GrayAndRgbRoundTrip)
{
    TempDir dir("png");
    for (Index c : {1, 3}) {
        const Raster r = pattern(9, 13, c);
        const fs::path p = dir.path() / ("img" + std::to_string(c) + ".png");
        write_png(p, r);
        const Raster back = read_png(p);
        EXPECT_EQ(back.height, 9);
        EXPECT_EQ(back.width, 13);
        EXPECT_EQ(back.channels, c);
        EXPECT_EQ(back.pixels, r.pixels);
        const Image im = read_image(p);
        EXPECT_DOUBLE_EQ(im.at(0, 0, 0), double(r.pixels[0]) / 255.0);
    }
}

TEST(Pnm, AsciiAndBinaryVariants)
{
    TempDir dir("pnm");
    write_bytes(dir.path() / "a.pgm", "P2\n# comment\n3 2\n4\n0 1 2\n3 4 0\n");
    const Image a = read_image(dir.path() / "a.pgm");
    EXPECT_EQ(a.width, 3);
    EXPECT_EQ(a.height, 2);
    EXPECT_EQ(a.channels, 1);
    EXPECT_DOUBLE_EQ(a.at(1, 1, 0), 1.0);
    EXPECT_DOUBLE_EQ(a.at(0, 2, 0), 0.5);

    write_bytes(dir.path() / "b.pgm", std::string("P5 2 1 255\n") + char(0) + char(255));
    const Image b = read_pnm(dir.path() / "b.pgm");
    EXPECT_DOUBLE_EQ(b.at(0, 0, 0), 0.0);
    EXPECT_DOUBLE_EQ(b.at(0, 1, 0), 1.0);

    std::string rgb = "P6\n1 1\n255\n";
    rgb += char(255);
    rgb += char(0);
    rgb += char(51);
    write_bytes(dir.path() / "c.ppm", rgb);
    const Image c = read_image(dir.path() / "c.ppm");
    EXPECT_EQ(c.channels, 3);
    EXPECT_DOUBLE_EQ(c.at(0, 0, 2), 0.2);

    write_bytes(dir.path() / "d.pgm", "P5 2 2 255\n\x01");
    EXPECT_THROW(read_pnm(dir.path() / "d.pgm"), IoError);
    write_bytes(dir.path() / "e.pgm", "P4 2 2\n");
    EXPECT_THROW(read_pnm(dir.path() / "e.pgm"), IoError);
}

TEST(ImageFolder, FilesAreReadInSortedOrderAndOthersSkipped)
{
    TempDir dir("folder");
    write_bytes(dir.path() / "b.pgm", "P2 1 1 1 1\n");
    write_bytes(dir.path() / "a.pgm", "P2 2 1 1 0 0\n");
    write_bytes(dir.path() / "notes.txt", "ignore me");
    const std::vector<Image> ims = read_image_folder(dir.path());
    ASSERT_EQ(ims.size(), 2u);
    EXPECT_EQ(ims[0].width, 2);
    EXPECT_EQ(ims[1].width, 1);

    TempDir empty("folder_empty");
    EXPECT_THROW(read_image_folder(empty.path()), IoError);
}

TEST(FilterGrid, LayoutAndPerTileNormalisation)
{
    const Index patch = 3, k = 5;
    Mat W = test::random_matrix(patch * patch, k, 3);
    W.col(4).setConstant(2.0);
    GridOptions o;
    o.scale = 2;
    o.gap = 1;
    o.background = 7;
    const Raster r = filter_grid(W, patch, 1, o);
    // ceil(sqrt(5)) = 3 columns, 2 rows of 6-pixel tiles.
    EXPECT_EQ(r.width, 3 * 6 + 4);
    EXPECT_EQ(r.height, 2 * 6 + 3);
    auto tile = [&](Index f) {
        const Index x0 = 1 + (f % 3) * 7, y0 = 1 + (f / 3) * 7;
        std::vector<int> v;
        for (Index y = y0; y < y0 + 6; ++y)
            for (Index x = x0; x < x0 + 6; ++x)
                v.push_back(r.pixels[std::size_t(y * r.width + x)]);
        return v;
    };
    for (Index f = 0; f < 4; ++f) {
        const std::vector<int> t = tile(f);
        EXPECT_EQ(*std::min_element(t.begin(), t.end()), 0) << f;
        EXPECT_EQ(*std::max_element(t.begin(), t.end()), 255) << f;
    }
    for (int v : tile(4))
        EXPECT_EQ(v, 128);
    // The unused sixth slot and the gaps keep the background.
    for (int v : tile(5))
        EXPECT_EQ(v, 7);
    EXPECT_EQ(r.pixels[0], 7);

    const Raster rgb = filter_grid(test::random_matrix(4 * 4 * 3, 2, 4), 4, 3, GridOptions{});
    EXPECT_EQ(rgb.channels, 3);
    EXPECT_EQ(rgb.width, 2 * 16 + 3);
    EXPECT_THROW(filter_grid(W, 4, 1), std::exception);
}

}  // namespace
}  // namespace spca
