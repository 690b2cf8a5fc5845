// Minimal DOT-renderer stand-in: speaks the same command-line contract as
// GraphViz (`-T<format> -Gdpi=<n>`, DOT on stdin, image bytes on stdout) but
// emits a fixed 1x1 image instead of laying the graph out. Lets the pipeline
// and its tests run on machines without GraphViz; swap in the real `dot`
// binary for production images.
//
// Environment knobs for failure-path testing:
//   NULL_RENDERER_FAIL=1       exit nonzero after reading stdin
//   NULL_RENDERER_SLEEP_MS=N   stall before writing output
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>
#include <thread>

namespace {

const unsigned char kOnePixelPng[] = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48,
    0x44, 0x52, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x02, 0x00, 0x00,
    0x00, 0x90, 0x77, 0x53, 0xde, 0x00, 0x00, 0x00, 0x0c, 0x49, 0x44, 0x41, 0x54, 0x08,
    0x1d, 0x63, 0x68, 0x68, 0x68, 0x00, 0x00, 0x03, 0x04, 0x01, 0x81, 0xd9, 0xf6, 0xb9,
    0xbb, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

const char kOnePixelSvg[] =
    "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1\" height=\"1\"/>\n";

}  // namespace

int main(int argc, char** argv) {
    std::string format;
    for (int i = 1; i < argc; ++i) {
        if (std::strncmp(argv[i], "-T", 2) == 0) format = argv[i] + 2;
        // -Gdpi=<n> and other graph attributes are accepted and ignored.
    }
    if (format != "png" && format != "svg") {
        std::fputs("null-renderer: unsupported or missing -T format\n", stderr);
        return 2;
    }

    std::string dot((std::istreambuf_iterator<char>(std::cin)),
                    std::istreambuf_iterator<char>());
    size_t start = dot.find_first_not_of(" \t\r\n");
    if (start == std::string::npos || dot.compare(start, 7, "digraph") != 0) {
        std::fputs("null-renderer: input is not a digraph\n", stderr);
        return 1;
    }

    if (const char* ms = std::getenv("NULL_RENDERER_SLEEP_MS"))
        std::this_thread::sleep_for(std::chrono::milliseconds(std::atol(ms)));
    if (const char* fail = std::getenv("NULL_RENDERER_FAIL"); fail && *fail == '1') {
        std::fputs("null-renderer: forced failure\n", stderr);
        return 3;
    }

    if (format == "png")
        std::fwrite(kOnePixelPng, 1, sizeof kOnePixelPng, stdout);
    else
        std::fputs(kOnePixelSvg, stdout);
    return 0;
}
