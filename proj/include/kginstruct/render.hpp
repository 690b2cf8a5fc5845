#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kginstruct/taskgen.hpp"

namespace kgi {

struct RenderConfig {
    enum class Format { png, svg };

    std::filesystem::path renderer_executable = "dot";
    Format output_format = Format::png;
    int dpi = 96;
    int thumbnail_px = 128;                  // longest side of embedded entity images
    int description_truncation_chars = 140;  // code points kept before the ellipsis
    int timeout_seconds = 30;                // wall limit per renderer invocation
    std::filesystem::path work_dir;          // renderer cwd; asset refs are relative to it
    std::filesystem::path thumb_cache_dir;   // empty -> work_dir/thumbs

    std::filesystem::path resolved_thumb_dir() const {
        return thumb_cache_dir.empty() ? work_dir / "thumbs" : thumb_cache_dir;
    }
};

const char* format_name(RenderConfig::Format f);  // "png" / "svg"

struct DotDocument {
    std::string text;  // complete digraph source, UTF-8
    std::vector<std::string> referenced_assets;  // image refs exactly as they appear in text
};

struct ImageRef {
    std::filesystem::path path;
    std::string format;
    std::string digest;  // "fnv64:<16 hex>" over the file bytes
};

// Scaled-down copy of source_image in the thumbnail cache, created on first
// use (atomic rename, concurrent-safe) and keyed by content digest so
// identical files share one thumbnail. Throws MissingAsset / BadAsset.
std::filesystem::path ensure_thumbnail(const std::filesystem::path& source_image,
                                       const RenderConfig& cfg);

// Deterministic DOT for a task instance: nodes in entity-id order named
// n0, n1, …; one relation-labelled edge per triple in triple order; masked
// elements appear as the bare literal "[MASK]". Entity images are resolved
// through the thumbnail cache and referenced relative to cfg.work_dir, so the
// emitted bytes do not depend on where the output tree lives.
DotDocument to_dot(const TaskInstance& inst, const RenderConfig& cfg);

// Feeds doc to the external renderer (`<exe> -T<format> -Gdpi=<dpi>`, DOT on
// stdin, image on stdout) and writes the image to out_path. Throws
// RendererFailure (nonzero exit or empty output, stderr attached) and
// RendererTimeout.
ImageRef rasterize(const DotDocument& doc, const RenderConfig& cfg,
                   const std::filesystem::path& out_path);

}  // namespace kgi
