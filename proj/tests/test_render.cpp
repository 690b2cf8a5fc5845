#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cctype>
#include <cstdlib>
#include <fstream>

#include "kginstruct/errors.hpp"
#include "kginstruct/render.hpp"
#include "kginstruct/sampler.hpp"
#include "kginstruct/taskgen.hpp"
#include "testutil.hpp"

using namespace kgi;
using test::TmpDir;

namespace {

size_t count_occurrences(const std::string& hay, const std::string& needle) {
    size_t n = 0;
    for (size_t pos = hay.find(needle); pos != std::string::npos;
         pos = hay.find(needle, pos + needle.size()))
        ++n;
    return n;
}

// Node lines all start "  n<i> [", edges contain " -> ".
size_t dot_node_count(const std::string& dot) {
    size_t n = 0;
    std::istringstream in(dot);
    std::string line;
    while (std::getline(in, line))
        if (line.rfind("  n", 0) == 0 && line.size() > 3 && std::isdigit((unsigned char)line[3]) &&
            line.find(" -> ") == std::string::npos)
            ++n;
    return n;
}
size_t dot_edge_count(const std::string& dot) { return count_occurrences(dot, " -> "); }

// Width/height from a PNG IHDR (big-endian at offsets 16 and 20).
std::pair<int, int> png_dims(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    REQUIRE(bytes.size() > 24);
    auto be32 = [&](size_t off) {
        return (static_cast<unsigned char>(bytes[off]) << 24) |
               (static_cast<unsigned char>(bytes[off + 1]) << 16) |
               (static_cast<unsigned char>(bytes[off + 2]) << 8) |
               static_cast<unsigned char>(bytes[off + 3]);
    };
    return {be32(16), be32(20)};
}

// Toy interchange with real decodable images plus a satellite component that
// supplies out-of-subgraph labels and relations for the choice tasks. The walk
// is pinned to "a", so the sampled subgraph is always the familiar a..e
// component: 5 entities, 5 triples, images on a, b, d.
struct Scene {
    TmpDir tmp;
    MultiModalKG g;
    Subgraph sub;

    Scene() {
        auto entities = test::toy_entities();
        test::write_interchange(tmp.path / "kg", entities, test::toy_triples(),
                                /*create_image_files=*/false);
        for (const auto& e : entities)
            for (const auto& img : e.image_paths) test::write_tiny_png(tmp.path / "kg" / img);
        KGBuilder b("toy");
        b.set_root_dir(tmp.path / "kg");
        for (auto& e : entities) b.add_entity(e);
        b.add_entity({"s1", "Eta", "", {}});
        b.add_entity({"s2", "Theta", "", {}});
        b.add_entity({"s3", "Iota", "", {}});
        b.add_entity({"s4", "Kappa", "", {}});
        for (auto& t : test::toy_triples()) b.add_triple(t);
        b.add_triple({"s1", "orbits", "s2"});
        b.add_triple({"s2", "feeds_on", "s3"});
        b.add_triple({"s3", "mirrors", "s4"});
        b.add_triple({"s4", "predates", "s1"});
        g = std::move(b).finalize();

        WalkConfig cfg;
        cfg.seed = 3;
        sub = sample_subgraph_from(g, *g.entity_index("a"), cfg);
        REQUIRE(sub.whole_component);
        assign_images(g, sub, 3);
    }

    RenderConfig render_cfg(const std::filesystem::path& work) const {
        RenderConfig cfg;
        cfg.renderer_executable = test::tool_path("NULL_RENDERER");
        cfg.work_dir = work;
        return cfg;
    }
};

}  // namespace

TEST_CASE("dot output mirrors the processed subgraph structurally") {
    Scene sc;
    auto inst = make_counting(sc.sub, TaskId::EC);
    auto work = sc.tmp.path / "out";
    std::filesystem::create_directories(work);
    auto doc = to_dot(inst, sc.render_cfg(work));

    CHECK(dot_node_count(doc.text) == inst.processed.entities.size());
    CHECK(dot_edge_count(doc.text) == inst.processed.triples.size());
    // a, b, d carry images in the toy component.
    CHECK(count_occurrences(doc.text, "<IMG SRC=") == 3);
    CHECK(doc.referenced_assets.size() == 3);
    for (const auto& ref : doc.referenced_assets) {
        CHECK(ref.rfind("thumbs/", 0) == 0);
        CHECK(std::filesystem::exists(work / ref));
    }
    CHECK(count_occurrences(doc.text, "label=\"linked_to\"") == 3);
    CHECK(count_occurrences(doc.text, "label=\"part_of\"") == 2);
}

TEST_CASE("dot bytes are deterministic and location-independent") {
    Scene sc;
    auto inst = make_counting(sc.sub, TaskId::TC);
    auto w1 = sc.tmp.path / "run1";
    auto w2 = sc.tmp.path / "run2";
    std::filesystem::create_directories(w1);
    std::filesystem::create_directories(w2);

    auto d1 = to_dot(inst, sc.render_cfg(w1));
    auto d1again = to_dot(inst, sc.render_cfg(w1));
    auto d2 = to_dot(inst, sc.render_cfg(w2));
    CHECK(d1.text == d1again.text);
    CHECK(d1.text == d2.text);  // relative refs keep bytes equal across trees
}

TEST_CASE("IC instances drop image cells; masked tasks show one [MASK]") {
    Scene sc;
    auto work = sc.tmp.path / "o";
    std::filesystem::create_directories(work);
    auto cfg = sc.render_cfg(work);

    SUBCASE("image counting") {
        auto inst = make_image_counting(sc.sub, 5);
        auto doc = to_dot(inst, cfg);
        long gold = std::get<CountGold>(inst.gold).value;
        CHECK(count_occurrences(doc.text, "<IMG SRC=") == static_cast<size_t>(gold));
    }
    SUBCASE("entity reasoning") {
        auto inst = make_masked_choice(sc.sub, sc.g, TaskId::ER, 5);
        auto doc = to_dot(inst, cfg);
        CHECK(count_occurrences(doc.text, "label=\"[MASK]\"") == 1);
        CHECK(count_occurrences(doc.text, "shape=box") == 1);
        CHECK(dot_node_count(doc.text) == inst.processed.entities.size());
    }
    SUBCASE("relation reasoning") {
        auto inst = make_masked_choice(sc.sub, sc.g, TaskId::RR, 5);
        auto doc = to_dot(inst, cfg);
        // The masked edge renders its label literally.
        CHECK(count_occurrences(doc.text, "[label=\"[MASK]\"]") == 1);
        CHECK(dot_edge_count(doc.text) == inst.processed.triples.size());
    }
}

TEST_CASE("labels and relations are escaped for HTML and quoted contexts") {
    TmpDir tmp;
    KGBuilder b("esc");
    b.add_entity({"a", "Fish & <Chips>", "tastes \"great\" & cheap", {}});
    b.add_entity({"b", "B", "", {}});
    b.add_triple({"a", "says \"hi\"", "b"});
    auto g = std::move(b).finalize();
    Subgraph sub;
    sub.parent = &g;
    sub.entity_ids = {"a", "b"};
    sub.triples = {{"a", "says \"hi\"", "b"}};

    RenderConfig cfg;
    cfg.work_dir = tmp.path;
    auto doc = to_dot(make_counting(sub, TaskId::EC), cfg);
    CHECK(doc.text.find("Fish &amp; &lt;Chips&gt;") != std::string::npos);
    CHECK(doc.text.find("tastes &quot;great&quot; &amp; cheap") != std::string::npos);
    CHECK(doc.text.find("label=\"says \\\"hi\\\"\"") != std::string::npos);
    CHECK(doc.text.find("Fish & <") == std::string::npos);
}

TEST_CASE("descriptions are truncated at a code-point boundary") {
    TmpDir tmp;
    std::string long_ascii(200, 'x');
    std::string multibyte;
    for (int i = 0; i < 150; ++i) multibyte += "é";  // 2-byte é

    KGBuilder b("tr");
    b.add_entity({"a", "A", long_ascii, {}});
    b.add_entity({"b", "B", multibyte, {}});
    b.add_triple({"a", "r", "b"});
    auto g = std::move(b).finalize();
    Subgraph sub;
    sub.parent = &g;
    sub.entity_ids = {"a", "b"};
    sub.triples = {{"a", "r", "b"}};

    RenderConfig cfg;
    cfg.work_dir = tmp.path;
    auto doc = to_dot(make_counting(sub, TaskId::EC), cfg);
    CHECK(doc.text.find(std::string(140, 'x') + "…") != std::string::npos);
    CHECK(doc.text.find(std::string(141, 'x')) == std::string::npos);
    std::string expect_b;
    for (int i = 0; i < 140; ++i) expect_b += "é";
    expect_b += "…";
    CHECK(doc.text.find(expect_b) != std::string::npos);
}

TEST_CASE("asset problems are reported precisely") {
    Scene sc;
    auto work = sc.tmp.path / "w";
    std::filesystem::create_directories(work);
    auto cfg = sc.render_cfg(work);

    SUBCASE("missing file") {
        Subgraph broken = sc.sub;
        broken.image_assignment["a"] = "images/ghost.png";
        try {
            to_dot(make_counting(broken, TaskId::EC), cfg);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.code() == Err::MissingAsset);
        }
    }
    SUBCASE("undecodable file") {
        test::write_file(sc.tmp.path / "kg/images/junk.png", "not an image at all");
        Subgraph broken = sc.sub;
        broken.image_assignment["a"] = "images/junk.png";
        try {
            to_dot(make_counting(broken, TaskId::EC), cfg);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.code() == Err::BadAsset);
        }
    }
}

TEST_CASE("thumbnails downscale to the configured edge and cache by content") {
    TmpDir tmp;
    test::write_ppm(tmp.path / "big.ppm", 256, 100);
    test::write_tiny_png(tmp.path / "small.png");

    RenderConfig cfg;
    cfg.work_dir = tmp.path;

    auto thumb = ensure_thumbnail(tmp.path / "big.ppm", cfg);
    CHECK(thumb.parent_path() == tmp.path / "thumbs");
    auto [w, h] = png_dims(thumb);
    CHECK(w == 128);
    CHECK(h == 50);

    // Cache hit: same path, no new files.
    auto again = ensure_thumbnail(tmp.path / "big.ppm", cfg);
    CHECK(again == thumb);
    size_t files = std::distance(std::filesystem::directory_iterator(tmp.path / "thumbs"),
                                 std::filesystem::directory_iterator{});
    CHECK(files == 1);

    // Identical bytes elsewhere map to the same cache entry.
    std::filesystem::copy_file(tmp.path / "big.ppm", tmp.path / "copy.ppm");
    CHECK(ensure_thumbnail(tmp.path / "copy.ppm", cfg) == thumb);

    // Downscale-only: a 1x1 input stays 1x1.
    auto tiny = ensure_thumbnail(tmp.path / "small.png", cfg);
    auto [tw, th] = png_dims(tiny);
    CHECK(tw == 1);
    CHECK(th == 1);
}

TEST_CASE("rasterize drives the external renderer") {
    Scene sc;
    auto work = sc.tmp.path / "w";
    std::filesystem::create_directories(work);
    auto cfg = sc.render_cfg(work);
    REQUIRE_MESSAGE(!cfg.renderer_executable.empty(), "NULL_RENDERER env var not set");
    auto doc = to_dot(make_counting(sc.sub, TaskId::EC), cfg);

    SUBCASE("png output with digest") {
        auto ref = rasterize(doc, cfg, work / "images/ec_0.png");
        CHECK(std::filesystem::exists(ref.path));
        CHECK(ref.format == "png");
        std::ifstream in(ref.path, std::ios::binary);
        unsigned char magic[4] = {};
        in.read(reinterpret_cast<char*>(magic), 4);
        CHECK(magic[0] == 0x89);
        CHECK(magic[1] == 'P');
        CHECK(ref.digest.rfind("fnv64:", 0) == 0);
    }
    SUBCASE("svg output") {
        cfg.output_format = RenderConfig::Format::svg;
        auto ref = rasterize(doc, cfg, work / "images/ec_0.svg");
        CHECK(ref.format == "svg");
        std::string bytes = test::read_file(ref.path);
        CHECK(bytes.rfind("<svg", 0) == 0);
    }
    SUBCASE("nonzero exit becomes RendererFailure with diagnostics") {
        ::setenv("NULL_RENDERER_FAIL", "1", 1);
        try {
            rasterize(doc, cfg, work / "x.png");
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.code() == Err::RendererFailure);
            CHECK(std::string(e.what()).find("forced failure") != std::string::npos);
        }
        ::unsetenv("NULL_RENDERER_FAIL");
        CHECK_FALSE(std::filesystem::exists(work / "x.png"));
    }
    SUBCASE("missing renderer binary") {
        cfg.renderer_executable = "/no/such/renderer";
        try {
            rasterize(doc, cfg, work / "x.png");
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.code() == Err::RendererFailure);
        }
    }
    SUBCASE("slow renderer times out") {
        ::setenv("NULL_RENDERER_SLEEP_MS", "2500", 1);
        cfg.timeout_seconds = 1;
        try {
            rasterize(doc, cfg, work / "x.png");
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.code() == Err::RendererTimeout);
        }
        ::unsetenv("NULL_RENDERER_SLEEP_MS");
    }
    SUBCASE("garbage input rejected by the renderer") {
        DotDocument bad;
        bad.text = "this is not dot";
        try {
            rasterize(bad, cfg, work / "x.png");
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.code() == Err::RendererFailure);
        }
    }
}
