#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <filesystem>
#include <fstream>

#include "fsdd/synthgen.hpp"

using namespace fsdd;
namespace fs = std::filesystem;

namespace {

Corpus tiny_corpus(uint64_t seed = 7) {
    return generate_corpus(default_class_specs(), {6, 6, 6, 6, 4, 4}, 128, 128, seed);
}

std::array<uint64_t, 256> histogram(const GrayImage& img) {
    std::array<uint64_t, 256> h{};
    for (uint8_t p : img.pixels) h[p]++;
    return h;
}

}  // namespace

TEST_CASE("generate_corpus produces requested counts with x4 augmentation") {
    auto corpus = tiny_corpus();
    REQUIRE(corpus.counts.size() == 6);
    CHECK(corpus.counts[0].originals == 6);
    CHECK(corpus.counts[0].total == 24);
    CHECK(corpus.counts[4].originals == 4);
    CHECK(corpus.counts[4].total == 16);
    size_t expect = 0;
    for (const auto& c : corpus.counts) expect += c.total;
    CHECK(corpus.images.size() == expect);
}

TEST_CASE("rare classes reach 64 images from 16 originals at desk defaults") {
    // only the two rare classes to keep this fast
    std::vector<DefectClassSpec> specs = {default_class_specs()[4], default_class_specs()[5]};
    specs[0].class_id = 0;
    specs[1].class_id = 1;
    auto corpus = generate_corpus(specs, {16, 16}, 128, 128, 7);
    CHECK(corpus.counts[0].total == 64);
    CHECK(corpus.counts[1].total == 64);
}

TEST_CASE("generation is deterministic: identical corpora from identical seeds") {
    auto a = tiny_corpus(11);
    auto b = tiny_corpus(11);
    REQUIRE(a.images.size() == b.images.size());
    for (size_t i = 0; i < a.images.size(); ++i) {
        CHECK(a.images[i].id == b.images[i].id);
        CHECK(a.images[i].pixels == b.images[i].pixels);
        CHECK(a.images[i].annotations == b.images[i].annotations);
    }
    auto c = tiny_corpus(12);
    bool any_diff = false;
    for (size_t i = 0; i < a.images.size() && !any_diff; ++i)
        any_diff = !(a.images[i].pixels == c.images[i].pixels);
    CHECK(any_diff);
}

TEST_CASE("zero count for any class is rejected") {
    CHECK_THROWS_AS(generate_corpus(default_class_specs(), {6, 6, 0, 6, 4, 4}, 128, 128, 1),
                    std::invalid_argument);
}

TEST_CASE("box invariants hold over a large generated sample") {
    auto corpus = generate_corpus(default_class_specs(), {45, 45, 45, 45, 40, 40}, 128, 128, 99);
    size_t boxes = 0;
    REQUIRE(corpus.images.size() >= 1000);
    for (const auto& img : corpus.images) {
        CHECK(!img.annotations.empty());
        for (const auto& a : img.annotations) {
            ++boxes;
            CHECK(a.class_id == img.class_id);  // single-defect rule
            CHECK(a.box.x1 >= 0);
            CHECK(a.box.y1 >= 0);
            CHECK(a.box.x1 < a.box.x2);
            CHECK(a.box.y1 < a.box.y2);
            CHECK(a.box.x2 <= img.pixels.width);
            CHECK(a.box.y2 <= img.pixels.height);
            if (corpus.class_specs[img.class_id].archetype == Archetype::micro_spot)
                CHECK(a.box.area() <= 100);
        }
    }
    CHECK(boxes >= 1000);
}

TEST_CASE("annotation boxes cover rendered defect pixels") {
    // The annotated region must differ from a defect-free render of the
    // same background; checks boxes actually overlap rendered defects.
    auto corpus = generate_corpus(default_class_specs(), {8, 8, 8, 8, 8, 8}, 128, 128, 5);
    for (size_t i = 0; i < corpus.images.size(); i += 4) {  // originals only
        const auto& img = corpus.images[i];
        for (const auto& a : img.annotations) {
            // interior contrast: box must contain at least one pixel deviating
            // from the local background median by a visible margin
            int deviating = 0;
            for (int y = a.box.y1; y < a.box.y2; ++y)
                for (int x = a.box.x1; x < a.box.x2; ++x) {
                    const int v = img.pixels.at(x, y);
                    int left = a.box.x1 - 3, right = a.box.x2 + 2;
                    if (left < 0) left = std::min(img.pixels.width - 1, right);
                    if (right >= img.pixels.width) right = std::max(0, left);
                    const int bg = (img.pixels.at(left, y) + img.pixels.at(right, y)) / 2;
                    if (std::abs(v - bg) > 18) ++deviating;
                }
            CHECK(deviating > 0);
        }
    }
}

TEST_CASE("augment transforms boxes by the mirror formulas") {
    DefectImage img;
    img.id = "t";
    img.source_id = "t";
    img.class_id = 0;
    img.pixels = GrayImage(100, 80, 50);
    img.annotations.push_back({0, BoxI{10, 20, 30, 40}});

    auto h = augment(img, Provenance::hmirror);
    CHECK(h.annotations[0].box == BoxI{70, 20, 90, 40});
    auto v = augment(img, Provenance::vmirror);
    CHECK(v.annotations[0].box == BoxI{10, 40, 30, 60});
    auto r = augment(img, Provenance::rot180);
    CHECK(r.annotations[0].box == BoxI{70, 40, 90, 60});
}

TEST_CASE("each augmentation is an involution on pixels and boxes") {
    auto corpus = tiny_corpus(3);
    const auto& img = corpus.images[0];
    for (auto t : {Provenance::hmirror, Provenance::vmirror, Provenance::rot180}) {
        auto once = augment(img, t);
        auto twice = augment(once, t);
        CHECK(twice.pixels == img.pixels);
        REQUIRE(twice.annotations.size() == img.annotations.size());
        for (size_t i = 0; i < img.annotations.size(); ++i)
            CHECK(twice.annotations[i].box == img.annotations[i].box);
    }
}

TEST_CASE("rot180 equals hmirror composed with vmirror") {
    auto corpus = tiny_corpus(4);
    const auto& img = corpus.images[0];
    auto r = augment(img, Provenance::rot180);
    auto hv = augment(augment(img, Provenance::hmirror), Provenance::vmirror);
    CHECK(r.pixels == hv.pixels);
    REQUIRE(r.annotations.size() == hv.annotations.size());
    for (size_t i = 0; i < r.annotations.size(); ++i)
        CHECK(r.annotations[i].box == hv.annotations[i].box);
}

TEST_CASE("augmentation preserves the pixel histogram") {
    auto corpus = tiny_corpus(6);
    const auto& img = corpus.images[4];
    for (auto t : {Provenance::hmirror, Provenance::vmirror, Provenance::rot180})
        CHECK(histogram(augment(img, t).pixels) == histogram(img.pixels));
}

TEST_CASE("split keeps groups together and excludes rares from the base set") {
    auto corpus = generate_corpus(default_class_specs(), {40, 40, 40, 40, 16, 16}, 128, 128, 21);
    SplitPolicy policy;
    policy.common_classes = {0, 1, 2, 3};
    policy.rare_classes = {4, 5};
    policy.eval_fraction = 0.25;
    policy.seed = 77;
    auto split = split_corpus(corpus, policy);

    // disjoint
    std::vector<char> in_eval(corpus.images.size(), 0);
    for (int i : split.eval) in_eval[i] = 1;
    for (int i : split.full_train) CHECK(!in_eval[i]);

    // no rare classes in base; base == full minus rare
    for (int i : split.base_train)
        CHECK(corpus.class_specs[corpus.images[i].class_id].rarity == Rarity::common);
    size_t rare_train = 0;
    for (int i : split.full_train)
        if (corpus.class_specs[corpus.images[i].class_id].rarity == Rarity::rare) ++rare_train;
    CHECK(split.base_train.size() + rare_train == split.full_train.size());

    // group integrity: an image and its source always share a side
    std::unordered_map<std::string, int> side;  // 0 train, 1 eval
    for (int i : split.full_train) {
        auto it = side.find(corpus.images[i].source_id);
        if (it != side.end()) CHECK(it->second == 0);
        side[corpus.images[i].source_id] = 0;
    }
    for (int i : split.eval) {
        auto it = side.find(corpus.images[i].source_id);
        if (it != side.end()) CHECK(it->second == 1);
        side[corpus.images[i].source_id] = 1;
    }

    // floor rule: 40 groups, fraction 0.25 -> 10 eval groups -> 40 eval images/class
    int eval_c0 = 0;
    for (int i : split.eval)
        if (corpus.images[i].class_id == 0) ++eval_c0;
    CHECK(eval_c0 == 40);

    // rare classes appear in full_train and eval
    CHECK(rare_train > 0);
    bool rare_eval = false;
    for (int i : split.eval)
        if (corpus.class_specs[corpus.images[i].class_id].rarity == Rarity::rare) rare_eval = true;
    CHECK(rare_eval);
}

TEST_CASE("split errors name the class with too few images") {
    auto corpus = generate_corpus(default_class_specs(), {6, 6, 6, 6, 1, 4}, 128, 128, 2);
    SplitPolicy policy;
    policy.common_classes = {0, 1, 2, 3};
    policy.rare_classes = {4, 5};
    policy.eval_fraction = 0.5;
    policy.seed = 1;
    policy.min_train_per_class = 7;
    try {
        split_corpus(corpus, policy);
        FAIL("expected split_corpus to throw");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("bright_blob") != std::string::npos);
    }
}

TEST_CASE("corpus round-trips through the on-disk layout bit-exactly") {
    auto corpus = tiny_corpus(31);
    SplitPolicy policy;
    policy.common_classes = {0, 1, 2, 3};
    policy.rare_classes = {4, 5};
    policy.eval_fraction = 0.25;
    policy.seed = 5;
    policy.min_train_per_class = 3;
    auto split = split_corpus(corpus, policy);

    const auto dir = fs::temp_directory_path() / "fsdd_corpus_test";
    fs::remove_all(dir);
    write_corpus(corpus, split, dir.string());

    CorpusSplit split2;
    auto loaded = load_corpus(dir.string(), &split2);
    REQUIRE(loaded.images.size() == corpus.images.size());
    for (size_t i = 0; i < corpus.images.size(); ++i) {
        CHECK(loaded.images[i].id == corpus.images[i].id);
        CHECK(loaded.images[i].pixels == corpus.images[i].pixels);
        CHECK(loaded.images[i].annotations == corpus.images[i].annotations);
        CHECK(loaded.images[i].source_id == corpus.images[i].source_id);
    }
    CHECK(split2.base_train == split.base_train);
    CHECK(split2.full_train == split.full_train);
    CHECK(split2.eval == split.eval);

    // manifest bytes reproduce exactly on regeneration
    auto corpus2 = tiny_corpus(31);
    auto split_b = split_corpus(corpus2, policy);
    CHECK(manifest_json(corpus2, split_b) == manifest_json(corpus, split));
    fs::remove_all(dir);
}
