#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "iik/image_io.hpp"
#include "iik/rng.hpp"
#include "testutil.hpp"

using namespace iik;
namespace fs = std::filesystem;

namespace {

std::string tmp_path(const char* name) {
    const fs::path dir = fs::temp_directory_path() / "iik_io_tests";
    fs::create_directories(dir);
    return (dir / name).string();
}

}  // namespace

TEST_CASE("float tensor files round-trip bit-exactly") {
    Tensor32 t({4, 7, 5});
    Rng rng(10, 1);
    for (float& v : t.data) v = static_cast<float>(rng.uniform(-3.0, 3.0));
    t.data[0] = 0.0f;
    t.data[1] = -0.0f;
    t.data[2] = 1e-38f;
    const std::string path = tmp_path("a.iikf");
    io::write_iikf(path, t);
    const Tensor32 back = io::read_iikf32(path);
    REQUIRE(back.same_shape(t));
    CHECK(std::memcmp(back.ptr(), t.ptr(), t.size() * sizeof(float)) == 0);
}

TEST_CASE("double tensor files round-trip bit-exactly") {
    Tensor t({2, 3, 3});
    Rng rng(11, 1);
    testutil::fill_uniform(t, rng, -1.0, 1.0);
    t.data[0] = 1e-300;
    t.data[1] = 3.14159265358979323846;
    t.data[2] = -0.0;
    const std::string path = tmp_path("b.iikd");
    io::write_iikd(path, t);
    const Tensor back = io::read_iikd(path);
    REQUIRE(back.same_shape(t));
    CHECK(std::memcmp(back.ptr(), t.ptr(), t.size() * sizeof(double)) == 0);
}

TEST_CASE("png 8-bit round trip is exact on the quantization grid") {
    Tensor img({3, 9, 13});
    Rng rng(12, 1);
    for (double& v : img.data) v = static_cast<double>(rng.uniform_int(256)) / 255.0;
    const std::string path = tmp_path("c.png");
    io::write_png(path, img, 8);
    const Tensor back = io::read_png(path);
    REQUIRE(back.same_shape(img));
    CHECK(testutil::max_abs_diff(img, back) == 0.0);
}

TEST_CASE("png 16-bit round trip is exact on the quantization grid") {
    Tensor img({3, 6, 4});
    Rng rng(13, 1);
    for (double& v : img.data) v = static_cast<double>(rng.uniform_int(65536)) / 65535.0;
    const std::string path = tmp_path("d.png");
    io::write_png(path, img, 16);
    const Tensor back = io::read_png(path);
    CHECK(testutil::max_abs_diff(img, back) < 1e-12);
}

TEST_CASE("grayscale png reads back replicated to three channels") {
    Tensor gray({1, 5, 5});
    for (size_t i = 0; i < gray.size(); ++i) gray.data[i] = static_cast<double>(i % 256) / 255.0;
    const std::string path = tmp_path("e.png");
    io::write_png(path, gray, 8);
    const Tensor back = io::read_png(path);
    REQUIRE(back.shape == std::vector<int>{3, 5, 5});
    const size_t plane = 25;
    for (size_t p = 0; p < plane; ++p) {
        CHECK(back.data[p] == doctest::Approx(gray.data[p]));
        CHECK(back.data[p] == back.data[plane + p]);
        CHECK(back.data[p] == back.data[2 * plane + p]);
    }
}

TEST_CASE("write_png clamps out-of-range values") {
    Tensor img({3, 1, 2});
    img.data = {-0.5, 1.5, 0.25, 0.75, 2.0, -1.0};
    const std::string path = tmp_path("f.png");
    io::write_png(path, img, 8);
    const Tensor back = io::read_png(path);
    CHECK(back.data[0] == 0.0);
    CHECK(back.data[1] == 1.0);
}

TEST_CASE("read_field dispatches on magic bytes") {
    Tensor t({1, 2, 2});
    t.data = {0.25, 0.5, 0.75, 1.0};
    const std::string f = tmp_path("g.iikf");
    const std::string d = tmp_path("h.iikd");
    const std::string p = tmp_path("i.png");
    io::write_iikf(f, t);
    io::write_iikd(d, t);
    io::write_png(p, t, 16);
    CHECK(testutil::max_abs_diff(io::read_field(f), t) < 1e-6);
    CHECK(testutil::max_abs_diff(io::read_field(d), t) == 0.0);
    CHECK(io::read_field(p).shape == std::vector<int>{3, 2, 2});
}

TEST_CASE("io errors surface as IoError") {
    CHECK_THROWS_AS(io::read_iikf("/nonexistent/path.iikf"), IoError);
    const std::string junk = tmp_path("junk.iikf");
    std::ofstream(junk) << "not a tensor";
    CHECK_THROWS_AS(io::read_iikf(junk), IoError);
    CHECK_THROWS_AS(io::read_field(junk), IoError);
}
