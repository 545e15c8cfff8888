#pragma once

// Deterministic synthetic surface-defect corpus: textured backgrounds with
// 1-3 rendered defect instances per image, one class per image, imbalanced
// class counts (abundant common classes, scarce rare ones), and the three
// mirror/rotation augmentations.

#include <cstdint>
#include <string>
#include <vector>

#include "fsdd/image.hpp"
#include "fsdd/rng.hpp"

namespace fsdd {

enum class Archetype {
    blob_dark,      // broad dark blob
    pit_cluster,    // cluster of small dark pits
    micro_spot,     // single tiny spot, box area <= 100 px^2
    texture_patch,  // mottled texture patch
    bright_blob,    // broad bright blob
    scratch_streak  // elongated thin streak
};

const char* archetype_name(Archetype a);
Archetype archetype_from_name(const std::string& name);

enum class Rarity { common, rare };

struct DefectClassSpec {
    int class_id = 0;
    std::string name;
    Archetype archetype = Archetype::blob_dark;
    int size_min = 8, size_max = 32;          // instance extent, pixels
    double contrast_min = 0.2, contrast_max = 0.5;  // fraction of full scale
    Rarity rarity = Rarity::common;
};

struct BBoxAnnotation {
    int class_id = 0;
    BoxI box;
    bool operator==(const BBoxAnnotation&) const = default;
};

enum class Provenance { original, hmirror, vmirror, rot180 };

const char* provenance_name(Provenance p);

struct DefectImage {
    std::string id;
    GrayImage pixels;
    int class_id = 0;
    std::vector<BBoxAnnotation> annotations;  // all share class_id
    Provenance provenance = Provenance::original;
    std::string source_id;  // equals id for originals
};

struct ClassCount {
    int class_id = 0;
    int originals = 0;
    int total = 0;  // originals * 4 after augmentation
};

struct Corpus {
    uint64_t seed = 0;
    int generator_version = 1;
    int image_h = 0, image_w = 0;
    std::vector<DefectClassSpec> class_specs;
    std::vector<DefectImage> images;
    std::vector<ClassCount> counts;
};

// Desk-scale roster: four common and two rare classes.
std::vector<DefectClassSpec> default_class_specs();

// counts[i] = number of ORIGINAL images for class i; each original yields
// itself plus hmirror/vmirror/rot180, so totals are 4x.
Corpus generate_corpus(const std::vector<DefectClassSpec>& specs, const std::vector<int>& counts,
                       int image_h, int image_w, uint64_t seed);

DefectImage augment(const DefectImage& img, Provenance transform);

struct SplitPolicy {
    std::vector<int> common_classes;
    std::vector<int> rare_classes;
    double eval_fraction = 0.25;
    uint64_t seed = 0;
    int min_train_per_class = 7;  // s + q
};

struct CorpusSplit {
    std::vector<int> base_train;  // indices into corpus.images, common classes only
    std::vector<int> full_train;  // all classes
    std::vector<int> eval;        // held out, all classes
};

// Groups an original with its augmented copies so they never straddle the
// train/eval boundary; eval takes floor(groups * eval_fraction) per class.
CorpusSplit split_corpus(const Corpus& corpus, const SplitPolicy& policy);

// Directory layout: manifest.json, images/<id>.pgm, annotations.jsonl.
void write_corpus(const Corpus& corpus, const CorpusSplit& split, const std::string& dir);
Corpus load_corpus(const std::string& dir, CorpusSplit* split_out = nullptr);

std::string manifest_json(const Corpus& corpus, const CorpusSplit& split);

}  // namespace fsdd
