#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "jigsaw/dataset.hpp"
#include "jigsaw/error.hpp"
#include "jigsaw/perception.hpp"
#include "jigsaw/raster.hpp"

using namespace jigsaw;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("jigsaw_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Raster gradient_image(int w, int h) {
  Raster r(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      r.at(x, y, 0) = static_cast<std::uint8_t>(x * 7 + y);
      r.at(x, y, 1) = static_cast<std::uint8_t>(y * 5);
      r.at(x, y, 2) = static_cast<std::uint8_t>((x ^ y) & 0xff);
    }
  return r;
}

PuzzleInstance small_instance() { return make_instance(synthetic_image(40, 40, 3), "syn", {3, 3}, 12, 2, 77); }

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("fnv1a64 reference vectors") {
  CHECK(fnv1a64({}) == 0xcbf29ce484222325ULL);
  const std::uint8_t a[] = {'a'};
  CHECK(fnv1a64(a) == 0xaf63dc4c8601ec8cULL);
  const std::uint8_t foobar[] = {'f', 'o', 'o', 'b', 'a', 'r'};
  CHECK(fnv1a64(foobar) == 0x85944171f73967e8ULL);
}

TEST_CASE("534 px, 5x5, 12 px gaps gives 97 px fragments and a 1 px crop") {
  CHECK(fit_fragment_px(534, 5, 12) == 97);
  CHECK(required_extent(5, 97, 12) == 533);
  const Raster img = gradient_image(534, 534);
  const auto inst = make_instance(img, "x", {5, 5}, 0, 12, 1);
  CHECK(inst.spec.fragment_px() == 97);
  CHECK(inst.spec.gap_px() == 12);
  // leftover pixel goes to the right and bottom, so fragment 0 starts at (0, 0)
  CHECK(inst.spec.fragment(0) == crop(img, 0, 0, 97, 97));
  CHECK(inst.spec.fragment(24) == crop(img, 4 * 109, 4 * 109, 97, 97));
}

TEST_CASE("MIT-style 7x10 board with 64 px fragments and 4 px gaps") {
  CHECK(required_extent(10, 64, 4) == 676);
  CHECK(required_extent(7, 64, 4) == 472);
  const auto inst = make_instance(gradient_image(500, 400), "m", {7, 10}, 64, 4, 1);
  CHECK(inst.spec.fragments().size() == 70);
  CHECK(inst.spec.fragment(69).width == 64);
  const auto r = render_assembly(inst.spec, Permutation::identity(70).placement());
  CHECK(r.width == 676);
  CHECK(r.height == 472);
}

TEST_CASE("slicing with no gap is lossless") {
  const Raster img = gradient_image(48, 36);
  const auto spec = slice(img, {3, 4}, 12, 0);
  CHECK(render_assembly(spec, Permutation::identity(12).placement()) == img);
  CHECK_THROWS_AS(slice(img, {4, 4}, 12, 0), ValidationError);
  CHECK_THROWS_AS(slice(img, {1, 4}, 4, 0), ValidationError);
}

TEST_CASE("small images are scaled up before cropping") {
  const Raster img = gradient_image(20, 30);
  const Raster f = fit_image(img, 60, 40);
  CHECK(f.width == 60);
  CHECK(f.height == 40);
  CHECK(fit_image(gradient_image(100, 100), 50, 60) == center_crop(gradient_image(100, 100), 50, 60));
}

TEST_CASE("2x2 shuffles are uniform over the 23 non-identity placements") {
  const auto spec = PuzzleSpec::blank({2, 2});
  std::map<std::vector<int>, int> counts;
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const auto p = shuffle(spec, hash_combine(s, 0xabc));
    CHECK_FALSE(p.is_identity());
    ++counts[p.values()];
  }
  CHECK(counts.size() == 23);
  for (const auto& [p, c] : counts) CHECK(std::abs(c / 10000.0 - 1.0 / 23) <= 0.015);
  CHECK(shuffle(spec, 5) == shuffle(spec, 5));
}

TEST_CASE("instance round trip through disk") {
  const auto dir = scratch("roundtrip");
  const auto inst = small_instance();
  const auto m = save_instance(dir / "a", inst, "syn-3", 77);
  const auto loaded = load_instance(dir / "a");
  CHECK(loaded.manifest == m);
  CHECK(loaded.instance.spec == inst.spec);
  CHECK(loaded.instance.initial == inst.initial);
  CHECK(loaded.instance.id == "a");
  CHECK(m.image_id == "syn-3");
  CHECK(m.shuffle_seed == 77);
  CHECK(PuzzleManifest::from_json(m.to_json()) == m);
}

TEST_CASE("corrupted or incomplete instances are rejected") {
  const auto dir = scratch("corrupt");
  const auto inst = small_instance();
  save_instance(dir / "a", inst, "syn", 1);

  SUBCASE("changed fragment bytes") {
    {
      std::fstream f(dir / "a" / "fragments" / fragment_file_name(4), std::ios::in | std::ios::out | std::ios::binary);
      f.seekp(-1, std::ios::end);
      f.put('\x01');
    }
    CHECK_THROWS_AS(load_instance(dir / "a"), ChecksumError);
  }
  SUBCASE("missing fragment") {
    fs::remove(dir / "a" / "fragments" / fragment_file_name(8));
    CHECK_THROWS_AS(load_instance(dir / "a"), MissingFragmentError);
  }
  SUBCASE("missing manifest") {
    fs::remove(dir / "a" / "manifest.json");
    CHECK_THROWS_AS(load_instance(dir / "a"), ManifestError);
  }
  SUBCASE("manifest schema violations") {
    auto j = PuzzleManifest(load_instance(dir / "a").manifest).to_json();
    auto bad = j;
    bad["initial_placement"] = {0, 1, 2};
    CHECK_THROWS_AS(PuzzleManifest::from_json(bad), ManifestError);
    bad = j;
    bad["initial_placement"] = {0, 0, 1, 2, 3, 4, 5, 6, 7};
    CHECK_THROWS_AS(PuzzleManifest::from_json(bad), ManifestError);
    bad = j;
    bad["checksum"] = "0000000000000000";
    CHECK_THROWS_AS(PuzzleManifest::from_json(bad), ManifestError);
    bad = j;
    bad.erase("rows");
    CHECK_THROWS_AS(PuzzleManifest::from_json(bad), ManifestError);
    bad = j;
    bad["format"] = "other";
    CHECK_THROWS_AS(PuzzleManifest::from_json(bad), ManifestError);
    std::ofstream(dir / "a" / "manifest.json") << "{not json";
    CHECK_THROWS_AS(load_instance(dir / "a"), ManifestError);
  }
}

TEST_CASE("image files round trip") {
  const auto dir = scratch("images");
  const Raster img = gradient_image(17, 9);
  write_image(dir / "a.ppm", img);
  write_image(dir / "a.PNG", img);
  CHECK(read_image(dir / "a.ppm") == img);
  CHECK(read_image(dir / "a.PNG") == img);
  CHECK(is_supported_image("x.Png"));
  CHECK_FALSE(is_supported_image("x.jpg"));
  std::ofstream(dir / "bad.png") << "nope";
  CHECK_THROWS_AS(read_image(dir / "bad.png"), DataError);
  CHECK_THROWS_AS(read_image(dir / "none.ppm"), DataError);
}

TEST_CASE("synthetic images are deterministic") {
  CHECK(synthetic_image(32, 24, 5) == synthetic_image(32, 24, 5));
  CHECK_FALSE(synthetic_image(32, 24, 5) == synthetic_image(32, 24, 6));
}

}
