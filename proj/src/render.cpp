#include "kginstruct/render.hpp"

#include <fstream>

#include "kginstruct/digest.hpp"
#include "kginstruct/errors.hpp"
#include "kginstruct/subprocess.hpp"

namespace kgi {
namespace {

namespace fs = std::filesystem;

std::string html_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string quote_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '\\' || c == '"') out += '\\';
        out += c;
    }
    return out;
}

// Cuts after `limit` code points and appends an ellipsis, never splitting a
// UTF-8 sequence.
std::string truncate_utf8(std::string_view s, int limit) {
    if (limit <= 0) return {};
    size_t i = 0;
    int points = 0;
    while (i < s.size() && points < limit) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xe ? 3 : 4;
        i += len;
        ++points;
    }
    if (i >= s.size()) return std::string(s);
    return std::string(s.substr(0, i)) + "…";
}

// Asset reference as written into the DOT text: relative to the renderer's
// working directory whenever the cache lives under it, absolute otherwise.
std::string asset_ref(const fs::path& thumb, const RenderConfig& cfg) {
    fs::path base = cfg.work_dir.empty() ? fs::path(".") : cfg.work_dir;
    fs::path rel = thumb.lexically_relative(base);
    if (rel.empty() || *rel.begin() == "..") return thumb.generic_string();
    return rel.generic_string();
}

}  // namespace

const char* format_name(RenderConfig::Format f) {
    return f == RenderConfig::Format::png ? "png" : "svg";
}

DotDocument to_dot(const TaskInstance& inst, const RenderConfig& cfg) {
    const auto& p = inst.processed;
    DotDocument doc;
    doc.text = "digraph G {\n  node [shape=plain];\n";

    // Entities are already sorted by id; nodes take positional names so the
    // bytes neither leak masked identities nor vary with id spelling.
    for (size_t i = 0; i < p.entities.size(); ++i) {
        const ProcEntity& e = p.entities[i];
        doc.text += "  n" + std::to_string(i);
        if (e.masked) {
            doc.text += " [shape=box, label=\"[MASK]\"];\n";
            continue;
        }
        std::string cells;
        if (e.image) {
            fs::path thumb = ensure_thumbnail(p.asset_root / *e.image, cfg);
            std::string ref = asset_ref(thumb, cfg);
            cells += "<TR><TD><IMG SRC=\"" + ref + "\"/></TD></TR>";
            doc.referenced_assets.push_back(std::move(ref));
        }
        cells += "<TR><TD>" + html_escape(e.label) + "</TD></TR>";
        if (!e.description.empty())
            cells += "<TR><TD>" +
                     html_escape(truncate_utf8(e.description, cfg.description_truncation_chars)) +
                     "</TD></TR>";
        doc.text += " [label=<<TABLE BORDER=\"0\" CELLBORDER=\"1\" CELLSPACING=\"0\">" + cells +
                    "</TABLE>>];\n";
    }

    auto node_name = [&](const EntityId& id) {
        auto it = std::lower_bound(p.entities.begin(), p.entities.end(), id,
                                   [](const ProcEntity& e, const EntityId& v) { return e.id < v; });
        if (it == p.entities.end() || it->id != id)
            throw std::invalid_argument("triple endpoint \"" + id + "\" missing from entities");
        return "n" + std::to_string(it - p.entities.begin());
    };
    for (const ProcTriple& t : p.triples)
        doc.text += "  " + node_name(t.head) + " -> " + node_name(t.tail) + " [label=\"" +
                    quote_escape(t.relation) + "\"];\n";

    doc.text += "}\n";
    return doc;
}

ImageRef rasterize(const DotDocument& doc, const RenderConfig& cfg, const fs::path& out_path) {
    std::vector<std::string> argv = {
        cfg.renderer_executable.string(),
        std::string("-T") + format_name(cfg.output_format),
        "-Gdpi=" + std::to_string(cfg.dpi),
    };
    ProcessResult res =
        run_process(argv, doc.text, cfg.timeout_seconds * 1000, cfg.work_dir);
    if (res.timed_out)
        throw Error(Err::RendererTimeout, "renderer exceeded " +
                                              std::to_string(cfg.timeout_seconds) + "s: " +
                                              argv[0]);
    if (res.exit_code != 0)
        throw Error(Err::RendererFailure, "renderer exited " + std::to_string(res.exit_code) +
                                              ": " + res.err);
    if (res.out.empty())
        throw Error(Err::RendererFailure, "renderer produced no output: " + res.err);

    if (!out_path.parent_path().empty()) fs::create_directories(out_path.parent_path());
    fs::path tmp = out_path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Err::MissingFile, "cannot write " + tmp.string());
        out.write(res.out.data(), static_cast<std::streamsize>(res.out.size()));
    }
    fs::rename(tmp, out_path);

    return ImageRef{out_path, format_name(cfg.output_format), digest_string(res.out)};
}

}  // namespace kgi
