#include "fsdd/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "fsdd/check.hpp"

namespace fsdd {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

const char* archetype_name(Archetype a) {
    switch (a) {
        case Archetype::blob_dark: return "blob_dark";
        case Archetype::pit_cluster: return "pit_cluster";
        case Archetype::micro_spot: return "micro_spot";
        case Archetype::texture_patch: return "texture_patch";
        case Archetype::bright_blob: return "bright_blob";
        case Archetype::scratch_streak: return "scratch_streak";
    }
    throw std::invalid_argument("unknown archetype");
}

Archetype archetype_from_name(const std::string& name) {
    for (Archetype a : {Archetype::blob_dark, Archetype::pit_cluster, Archetype::micro_spot,
                        Archetype::texture_patch, Archetype::bright_blob, Archetype::scratch_streak})
        if (name == archetype_name(a)) return a;
    throw std::invalid_argument("unknown archetype: " + name);
}

const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::original: return "original";
        case Provenance::hmirror: return "hmirror";
        case Provenance::vmirror: return "vmirror";
        case Provenance::rot180: return "rot180";
    }
    throw std::invalid_argument("unknown provenance");
}

static Provenance provenance_from_name(const std::string& s) {
    for (Provenance p : {Provenance::original, Provenance::hmirror, Provenance::vmirror,
                         Provenance::rot180})
        if (s == provenance_name(p)) return p;
    throw std::invalid_argument("unknown provenance: " + s);
}

std::vector<DefectClassSpec> default_class_specs() {
    return {
        {0, "blob_dark", Archetype::blob_dark, 16, 40, 0.20, 0.50, Rarity::common},
        {1, "pit_cluster", Archetype::pit_cluster, 18, 40, 0.25, 0.55, Rarity::common},
        {2, "micro_spot", Archetype::micro_spot, 4, 9, 0.35, 0.70, Rarity::common},
        {3, "texture_patch", Archetype::texture_patch, 28, 60, 0.16, 0.36, Rarity::common},
        {4, "bright_blob", Archetype::bright_blob, 14, 32, 0.25, 0.55, Rarity::rare},
        {5, "scratch_streak", Archetype::scratch_streak, 24, 56, 0.30, 0.60, Rarity::rare},
    };
}

namespace {

// Float canvas; defect renderers add signed deltas and report the tight
// bounds of pixels they changed by at least one gray level.
struct Canvas {
    int w, h;
    std::vector<float> px;
    Canvas(int width, int height) : w(width), h(height), px(static_cast<size_t>(w) * h, 0.f) {}
    float& at(int x, int y) { return px[static_cast<size_t>(y) * w + x]; }
};

struct TouchBounds {
    int x1 = 1 << 30, y1 = 1 << 30, x2 = -1, y2 = -1;
    void add(int x, int y) {
        x1 = std::min(x1, x);
        y1 = std::min(y1, y);
        x2 = std::max(x2, x + 1);
        y2 = std::max(y2, y + 1);
    }
    bool empty() const { return x2 < 0; }
};

constexpr float kTouchThreshold = 1.0f;

void apply_delta(Canvas& c, int x, int y, float delta, TouchBounds& tb) {
    if (x < 0 || y < 0 || x >= c.w || y >= c.h) return;
    c.at(x, y) += delta;
    if (std::abs(delta) >= kTouchThreshold) tb.add(x, y);
}

void render_background(Canvas& c, Rng& rng) {
    const float base = 112.0f + static_cast<float>(rng.uniform(-10.0, 10.0));
    // band-structured row profile: white noise smoothed along y
    std::vector<float> rows(c.h);
    for (auto& r : rows) r = static_cast<float>(rng.uniform(-1.0, 1.0));
    std::vector<float> smooth(c.h, 0.f);
    const int rad = 4;
    for (int y = 0; y < c.h; ++y) {
        float acc = 0.f;
        int n = 0;
        for (int k = -rad; k <= rad; ++k) {
            const int yy = y + k;
            if (yy < 0 || yy >= c.h) continue;
            acc += rows[yy];
            ++n;
        }
        smooth[y] = acc / static_cast<float>(n);
    }
    const float band_amp = 16.0f;
    for (int y = 0; y < c.h; ++y) {
        const float row_level = base + band_amp * smooth[y];
        for (int x = 0; x < c.w; ++x)
            c.at(x, y) = row_level + static_cast<float>(rng.normal()) * 2.2f;
    }
}

void render_blob(Canvas& c, Rng& rng, const DefectClassSpec& spec, float sign, TouchBounds& tb) {
    const double size = rng.uniform(spec.size_min, spec.size_max);
    const double a = 0.5 * size * rng.uniform(0.75, 1.0);
    const double b = 0.5 * size * rng.uniform(0.45, 0.9);
    const double theta = rng.uniform(0.0, 3.141592653589793);
    const double ct = std::cos(theta), st = std::sin(theta);
    const int margin = static_cast<int>(size / 2) + 2;
    const int cx = margin + static_cast<int>(rng.below(static_cast<uint32_t>(std::max(1, c.w - 2 * margin))));
    const int cy = margin + static_cast<int>(rng.below(static_cast<uint32_t>(std::max(1, c.h - 2 * margin))));
    const float contrast =
        static_cast<float>(rng.uniform(spec.contrast_min, spec.contrast_max)) * 255.0f;
    const double wobble_phase = rng.uniform(0.0, 6.283);
    const int r = static_cast<int>(std::ceil(std::max(a, b))) + 1;
    for (int y = cy - r; y <= cy + r; ++y)
        for (int x = cx - r; x <= cx + r; ++x) {
            const double dx = x - cx, dy = y - cy;
            const double u = dx * ct + dy * st, v = -dx * st + dy * ct;
            const double phi = std::atan2(v, u);
            const double wob = 1.0 + 0.18 * std::sin(3.0 * phi + wobble_phase);
            const double q = (u * u) / (a * a * wob) + (v * v) / (b * b * wob);
            if (q >= 1.0) continue;
            const float fall = static_cast<float>(std::pow(1.0 - q, 0.8));
            apply_delta(c, x, y, sign * contrast * fall, tb);
        }
}

void render_pit_cluster(Canvas& c, Rng& rng, const DefectClassSpec& spec, TouchBounds& tb) {
    const int extent = spec.size_min +
                       static_cast<int>(rng.below(static_cast<uint32_t>(spec.size_max - spec.size_min + 1)));
    const int margin = extent / 2 + 3;
    const int cx = margin + static_cast<int>(rng.below(static_cast<uint32_t>(std::max(1, c.w - 2 * margin))));
    const int cy = margin + static_cast<int>(rng.below(static_cast<uint32_t>(std::max(1, c.h - 2 * margin))));
    const int pits = 3 + static_cast<int>(rng.below(5));
    const float contrast =
        static_cast<float>(rng.uniform(spec.contrast_min, spec.contrast_max)) * 255.0f;
    for (int p = 0; p < pits; ++p) {
        const int px = cx + static_cast<int>(rng.uniform(-0.5, 0.5) * extent);
        const int py = cy + static_cast<int>(rng.uniform(-0.5, 0.5) * extent);
        const double r = rng.uniform(1.2, 3.2);
        const int ri = static_cast<int>(std::ceil(r));
        for (int y = py - ri; y <= py + ri; ++y)
            for (int x = px - ri; x <= px + ri; ++x) {
                const double d2 = (x - px) * (x - px) + (y - py) * (y - py);
                if (d2 >= r * r) continue;
                const float fall = static_cast<float>(1.0 - d2 / (r * r));
                apply_delta(c, x, y, -contrast * fall, tb);
            }
    }
}

void render_micro_spot(Canvas& c, Rng& rng, const DefectClassSpec& spec, TouchBounds& tb) {
    // box area must stay <= 100 px^2, so the write window is capped at
    // radius 4.5 (diameter 9 -> at most a 10x10 box after rounding)
    const double dia = rng.uniform(spec.size_min, std::min(spec.size_max, 9));
    const double r = std::min(4.5, dia / 2.0);
    const int margin = 7;
    const int cx = margin + static_cast<int>(rng.below(static_cast<uint32_t>(c.w - 2 * margin)));
    const int cy = margin + static_cast<int>(rng.below(static_cast<uint32_t>(c.h - 2 * margin)));
    const float contrast =
        static_cast<float>(rng.uniform(spec.contrast_min, spec.contrast_max)) * 255.0f;
    const int ri = static_cast<int>(std::floor(r));
    for (int y = cy - ri; y <= cy + ri; ++y)
        for (int x = cx - ri; x <= cx + ri; ++x) {
            const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            if (d2 > r * r) continue;
            const float fall = static_cast<float>(std::exp(-2.2 * d2 / (r * r)));
            apply_delta(c, x, y, -contrast * fall, tb);
        }
}

void render_texture_patch(Canvas& c, Rng& rng, const DefectClassSpec& spec, TouchBounds& tb) {
    const int pw = static_cast<int>(rng.uniform(spec.size_min, spec.size_max));
    const int ph = static_cast<int>(rng.uniform(spec.size_min, spec.size_max));
    const int x0 = 2 + static_cast<int>(rng.below(static_cast<uint32_t>(std::max(1, c.w - pw - 4))));
    const int y0 = 2 + static_cast<int>(rng.below(static_cast<uint32_t>(std::max(1, c.h - ph - 4))));
    const float contrast =
        static_cast<float>(rng.uniform(spec.contrast_min, spec.contrast_max)) * 255.0f;
    // mottle: white noise smoothed once with a 3x3 box
    std::vector<float> noise(static_cast<size_t>(pw) * ph);
    for (auto& v : noise) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x) {
            float acc = 0.f;
            int n = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int xx = x + dx, yy = y + dy;
                    if (xx < 0 || yy < 0 || xx >= pw || yy >= ph) continue;
                    acc += noise[static_cast<size_t>(yy) * pw + xx];
                    ++n;
                }
            const float m = acc / static_cast<float>(n);
            // taper near the patch border
            const int border = std::min({x, y, pw - 1 - x, ph - 1 - y});
            const float taper = std::min(1.0f, 0.34f * (border + 1));
            // offset so the patch reads as a raised, bumpy region
            const float d = contrast * taper * (0.55f + 1.1f * m);
            apply_delta(c, x0 + x, y0 + y, d, tb);
        }
}

void render_scratch(Canvas& c, Rng& rng, const DefectClassSpec& spec, TouchBounds& tb) {
    const double len = rng.uniform(spec.size_min, spec.size_max);
    const double theta = rng.uniform(0.0, 3.141592653589793);
    const double hw = rng.uniform(1.0, 2.2);  // half width
    const int margin = static_cast<int>(len / 2) + 3;
    const int cx = margin + static_cast<int>(rng.below(static_cast<uint32_t>(std::max(1, c.w - 2 * margin))));
    const int cy = margin + static_cast<int>(rng.below(static_cast<uint32_t>(std::max(1, c.h - 2 * margin))));
    const double ct = std::cos(theta), st = std::sin(theta);
    const float contrast =
        static_cast<float>(rng.uniform(spec.contrast_min, spec.contrast_max)) * 255.0f;
    const double ripple = rng.uniform(0.0, 6.283);
    const int r = static_cast<int>(len / 2 + hw) + 2;
    for (int y = cy - r; y <= cy + r; ++y)
        for (int x = cx - r; x <= cx + r; ++x) {
            const double dx = x - cx, dy = y - cy;
            const double along = dx * ct + dy * st;
            const double across = -dx * st + dy * ct;
            if (std::abs(along) > len / 2 || std::abs(across) > hw + 1.0) continue;
            const double amp = 0.75 + 0.25 * std::sin(0.55 * along + ripple);
            const double fall = std::max(0.0, 1.0 - (across * across) / ((hw + 1.0) * (hw + 1.0)));
            const double tip = std::min(1.0, 2.5 * (1.0 - std::abs(along) / (len / 2 + 1e-9)));
            apply_delta(c, x, y, static_cast<float>(-contrast * amp * fall * tip), tb);
        }
}

BoxI clamp_box(TouchBounds tb, int w, int h) {
    BoxI b{std::max(0, tb.x1), std::max(0, tb.y1), std::min(w, tb.x2), std::min(h, tb.y2)};
    return b;
}

DefectImage render_original(const DefectClassSpec& spec, int image_h, int image_w, uint64_t seed,
                            const std::string& id) {
    Rng rng(seed);
    Canvas canvas(image_w, image_h);
    render_background(canvas, rng);

    DefectImage img;
    img.id = id;
    img.source_id = id;
    img.class_id = spec.class_id;
    img.provenance = Provenance::original;

    const int instances = 1 + static_cast<int>(rng.below(3));
    for (int i = 0; i < instances; ++i) {
        TouchBounds tb;
        switch (spec.archetype) {
            case Archetype::blob_dark: render_blob(canvas, rng, spec, -1.f, tb); break;
            case Archetype::bright_blob: render_blob(canvas, rng, spec, +1.f, tb); break;
            case Archetype::pit_cluster: render_pit_cluster(canvas, rng, spec, tb); break;
            case Archetype::micro_spot: render_micro_spot(canvas, rng, spec, tb); break;
            case Archetype::texture_patch: render_texture_patch(canvas, rng, spec, tb); break;
            case Archetype::scratch_streak: render_scratch(canvas, rng, spec, tb); break;
        }
        if (tb.empty()) throw std::runtime_error("defect instance rendered no pixels");
        img.annotations.push_back({spec.class_id, clamp_box(tb, image_w, image_h)});
    }

    img.pixels = GrayImage(image_w, image_h);
    for (int y = 0; y < image_h; ++y)
        for (int x = 0; x < image_w; ++x) {
            const float v = std::round(canvas.at(x, y));
            img.pixels.at(x, y) = static_cast<uint8_t>(std::clamp(v, 0.f, 255.f));
        }
    return img;
}

}  // namespace

DefectImage augment(const DefectImage& img, Provenance transform) {
    DefectImage out;
    out.class_id = img.class_id;
    out.provenance = transform;
    out.source_id = img.source_id;
    const int w = img.pixels.width, h = img.pixels.height;
    switch (transform) {
        case Provenance::original:
            out = img;
            return out;
        case Provenance::hmirror:
            out.pixels = hmirror_pixels(img.pixels);
            out.id = img.id + "_h";
            for (const auto& a : img.annotations)
                out.annotations.push_back(
                    {a.class_id, BoxI{w - a.box.x2, a.box.y1, w - a.box.x1, a.box.y2}});
            break;
        case Provenance::vmirror:
            out.pixels = vmirror_pixels(img.pixels);
            out.id = img.id + "_v";
            for (const auto& a : img.annotations)
                out.annotations.push_back(
                    {a.class_id, BoxI{a.box.x1, h - a.box.y2, a.box.x2, h - a.box.y1}});
            break;
        case Provenance::rot180:
            out.pixels = rot180_pixels(img.pixels);
            out.id = img.id + "_r";
            for (const auto& a : img.annotations)
                out.annotations.push_back(
                    {a.class_id, BoxI{w - a.box.x2, h - a.box.y2, w - a.box.x1, h - a.box.y1}});
            break;
    }
    return out;
}

Corpus generate_corpus(const std::vector<DefectClassSpec>& specs, const std::vector<int>& counts,
                       int image_h, int image_w, uint64_t seed) {
    check(specs.size() == counts.size(), "generate_corpus: one count per class required");
    check(image_h >= 64 && image_w >= 64, "generate_corpus: image size must be at least 64x64");
    for (size_t i = 0; i < specs.size(); ++i) {
        check(specs[i].class_id == static_cast<int>(i), "class_ids must be contiguous from 0");
        check(counts[i] >= 1, "generate_corpus: count for class " + specs[i].name +
                                  " must be at least 1");
    }

    Corpus corpus;
    corpus.seed = seed;
    corpus.image_h = image_h;
    corpus.image_w = image_w;
    corpus.class_specs = specs;

    uint64_t global_index = 0;
    for (size_t ci = 0; ci < specs.size(); ++ci) {
        ClassCount cc;
        cc.class_id = specs[ci].class_id;
        for (int j = 0; j < counts[ci]; ++j) {
            char idbuf[32];
            std::snprintf(idbuf, sizeof(idbuf), "c%d_%05d", specs[ci].class_id, j);
            const uint64_t img_seed = seed ^ global_index;
            DefectImage orig = render_original(specs[ci], image_h, image_w, img_seed, idbuf);
            corpus.images.push_back(orig);
            corpus.images.push_back(augment(orig, Provenance::hmirror));
            corpus.images.push_back(augment(orig, Provenance::vmirror));
            corpus.images.push_back(augment(orig, Provenance::rot180));
            ++global_index;
            cc.originals += 1;
            cc.total += 4;
        }
        corpus.counts.push_back(cc);
    }
    return corpus;
}

CorpusSplit split_corpus(const Corpus& corpus, const SplitPolicy& policy) {
    check(policy.eval_fraction > 0.0 && policy.eval_fraction < 1.0,
          "split_corpus: eval_fraction must be in (0,1)");
    std::vector<bool> is_rare(corpus.class_specs.size(), false);
    for (int c : policy.rare_classes) is_rare.at(c) = true;

    // group images by source original, per class, in corpus order
    struct Group {
        std::vector<int> members;
    };
    std::vector<std::vector<Group>> by_class(corpus.class_specs.size());
    std::vector<std::vector<std::string>> group_src(corpus.class_specs.size());
    for (int i = 0; i < static_cast<int>(corpus.images.size()); ++i) {
        const auto& img = corpus.images[i];
        auto& srcs = group_src[img.class_id];
        auto& groups = by_class[img.class_id];
        if (srcs.empty() || srcs.back() != img.source_id) {
            srcs.push_back(img.source_id);
            groups.emplace_back();
        }
        groups.back().members.push_back(i);
    }

    Rng rng(policy.seed);
    CorpusSplit split;
    for (size_t ci = 0; ci < by_class.size(); ++ci) {
        auto& groups = by_class[ci];
        std::vector<int> order(groups.size());
        for (size_t g = 0; g < groups.size(); ++g) order[g] = static_cast<int>(g);
        shuffle(order, rng);
        const int eval_n = static_cast<int>(std::floor(groups.size() * policy.eval_fraction));
        int train_imgs = 0;
        for (size_t gi = 0; gi < order.size(); ++gi) {
            const bool to_eval = gi < static_cast<size_t>(eval_n);
            for (int idx : groups[order[gi]].members) {
                if (to_eval) {
                    split.eval.push_back(idx);
                } else {
                    split.full_train.push_back(idx);
                    if (!is_rare[ci]) split.base_train.push_back(idx);
                    ++train_imgs;
                }
            }
        }
        if (train_imgs < policy.min_train_per_class)
            throw std::runtime_error("split_corpus: class " + corpus.class_specs[ci].name +
                                     " has only " + std::to_string(train_imgs) +
                                     " train images, need " +
                                     std::to_string(policy.min_train_per_class));
    }
    std::sort(split.base_train.begin(), split.base_train.end());
    std::sort(split.full_train.begin(), split.full_train.end());
    std::sort(split.eval.begin(), split.eval.end());
    return split;
}

std::string manifest_json(const Corpus& corpus, const CorpusSplit& split) {
    ordered_json m;
    m["seed"] = corpus.seed;
    m["generator_version"] = corpus.generator_version;
    m["image_size"] = {corpus.image_h, corpus.image_w};
    m["classes"] = ordered_json::array();
    for (const auto& s : corpus.class_specs) {
        ordered_json c;
        c["id"] = s.class_id;
        c["name"] = s.name;
        c["archetype"] = archetype_name(s.archetype);
        c["rarity"] = s.rarity == Rarity::rare ? "rare" : "common";
        c["size_range"] = {s.size_min, s.size_max};
        c["contrast_range"] = {s.contrast_min, s.contrast_max};
        m["classes"].push_back(c);
    }
    m["counts"] = ordered_json::array();
    for (const auto& cc : corpus.counts) {
        ordered_json c;
        c["class_id"] = cc.class_id;
        c["originals"] = cc.originals;
        c["total"] = cc.total;
        m["counts"].push_back(c);
    }
    auto ids_of = [&](const std::vector<int>& idxs) {
        ordered_json arr = ordered_json::array();
        for (int i : idxs) arr.push_back(corpus.images[i].id);
        return arr;
    };
    m["split"] = ordered_json::object();
    m["split"]["train"] = ids_of(split.full_train);
    m["split"]["eval"] = ids_of(split.eval);
    return m.dump(2) + "\n";
}

void write_corpus(const Corpus& corpus, const CorpusSplit& split, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "images");
    {
        std::ofstream mf(fs::path(dir) / "manifest.json", std::ios::binary);
        if (!mf) throw std::runtime_error("cannot write manifest in " + dir);
        mf << manifest_json(corpus, split);
    }
    std::ofstream ann(fs::path(dir) / "annotations.jsonl", std::ios::binary);
    if (!ann) throw std::runtime_error("cannot write annotations in " + dir);
    for (const auto& img : corpus.images) {
        write_pgm((fs::path(dir) / "images" / (img.id + ".pgm")).string(), img.pixels);
        ordered_json line;
        line["id"] = img.id;
        line["file"] = "images/" + img.id + ".pgm";
        line["class_id"] = img.class_id;
        line["boxes"] = ordered_json::array();
        for (const auto& a : img.annotations)
            line["boxes"].push_back({a.box.x1, a.box.y1, a.box.x2, a.box.y2});
        line["provenance"] = ordered_json::object();
        line["provenance"]["kind"] = provenance_name(img.provenance);
        line["provenance"]["source"] = img.source_id;
        ann << line.dump() << "\n";
    }
}

Corpus load_corpus(const std::string& dir, CorpusSplit* split_out) {
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw std::runtime_error("cannot open manifest in " + dir);
    ordered_json m = ordered_json::parse(mf);

    Corpus corpus;
    corpus.seed = m.at("seed").get<uint64_t>();
    corpus.generator_version = m.at("generator_version").get<int>();
    corpus.image_h = m.at("image_size")[0].get<int>();
    corpus.image_w = m.at("image_size")[1].get<int>();
    for (const auto& c : m.at("classes")) {
        DefectClassSpec s;
        s.class_id = c.at("id").get<int>();
        s.name = c.at("name").get<std::string>();
        s.archetype = archetype_from_name(c.at("archetype").get<std::string>());
        s.rarity = c.at("rarity").get<std::string>() == "rare" ? Rarity::rare : Rarity::common;
        s.size_min = c.at("size_range")[0].get<int>();
        s.size_max = c.at("size_range")[1].get<int>();
        s.contrast_min = c.at("contrast_range")[0].get<double>();
        s.contrast_max = c.at("contrast_range")[1].get<double>();
        corpus.class_specs.push_back(s);
    }
    for (const auto& c : m.at("counts"))
        corpus.counts.push_back({c.at("class_id").get<int>(), c.at("originals").get<int>(),
                                 c.at("total").get<int>()});

    std::ifstream ann(fs::path(dir) / "annotations.jsonl");
    if (!ann) throw std::runtime_error("cannot open annotations in " + dir);
    std::string line;
    std::vector<int> actual_total(corpus.class_specs.size(), 0);
    while (std::getline(ann, line)) {
        if (line.empty()) continue;
        ordered_json j = ordered_json::parse(line);
        DefectImage img;
        img.id = j.at("id").get<std::string>();
        img.class_id = j.at("class_id").get<int>();
        for (const auto& b : j.at("boxes"))
            img.annotations.push_back({img.class_id, BoxI{b[0].get<int>(), b[1].get<int>(),
                                                          b[2].get<int>(), b[3].get<int>()}});
        img.provenance = provenance_from_name(j.at("provenance").at("kind").get<std::string>());
        img.source_id = j.at("provenance").at("source").get<std::string>();
        img.pixels = read_pgm((fs::path(dir) / j.at("file").get<std::string>()).string());
        actual_total.at(img.class_id)++;
        corpus.images.push_back(std::move(img));
    }
    for (const auto& cc : corpus.counts)
        if (actual_total.at(cc.class_id) != cc.total)
            throw std::runtime_error("manifest count mismatch for class " +
                                     std::to_string(cc.class_id));

    if (split_out) {
        std::unordered_map<std::string, int> id_to_idx;
        for (int i = 0; i < static_cast<int>(corpus.images.size()); ++i)
            id_to_idx[corpus.images[i].id] = i;
        std::vector<bool> is_rare(corpus.class_specs.size(), false);
        for (const auto& s : corpus.class_specs)
            if (s.rarity == Rarity::rare) is_rare[s.class_id] = true;
        split_out->base_train.clear();
        split_out->full_train.clear();
        split_out->eval.clear();
        for (const auto& id : m.at("split").at("train")) {
            const int idx = id_to_idx.at(id.get<std::string>());
            split_out->full_train.push_back(idx);
            if (!is_rare[corpus.images[idx].class_id]) split_out->base_train.push_back(idx);
        }
        for (const auto& id : m.at("split").at("eval"))
            split_out->eval.push_back(id_to_idx.at(id.get<std::string>()));
    }
    return corpus;
}

}  // namespace fsdd
