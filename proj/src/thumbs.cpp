// The only translation unit that touches OpenCV; everything else handles
// image files as opaque bytes.
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <atomic>
#include <cmath>

#include <unistd.h>

#include "kginstruct/digest.hpp"
#include "kginstruct/errors.hpp"
#include "kginstruct/render.hpp"

namespace kgi {

namespace fs = std::filesystem;

std::filesystem::path ensure_thumbnail(const std::filesystem::path& source_image,
                                       const RenderConfig& cfg) {
    if (!fs::exists(source_image))
        throw Error(Err::MissingAsset, "image does not exist: " + source_image.string());

    // Key on the source bytes: identical files share one cache entry and the
    // name stays stable across runs and machines.
    const std::string digest = digest_file(source_image);
    const fs::path dir = cfg.resolved_thumb_dir();
    const fs::path target =
        dir / (digest.substr(digest.find(':') + 1) + "_" + std::to_string(cfg.thumbnail_px) +
               ".png");
    if (fs::exists(target)) return target;

    cv::Mat img;
    try {
        img = cv::imread(source_image.string(), cv::IMREAD_COLOR);
    } catch (const cv::Exception& e) {
        throw Error(Err::BadAsset, source_image.string() + ": " + e.what());
    }
    if (img.empty())
        throw Error(Err::BadAsset, "cannot decode image: " + source_image.string());

    // Downscale-only: small images pass through at native size.
    const int longest = std::max(img.cols, img.rows);
    if (longest > cfg.thumbnail_px) {
        const double scale = static_cast<double>(cfg.thumbnail_px) / longest;
        cv::Mat shrunk;
        cv::resize(img, shrunk,
                   cv::Size(std::max(1, static_cast<int>(std::lround(img.cols * scale))),
                            std::max(1, static_cast<int>(std::lround(img.rows * scale)))),
                   0, 0, cv::INTER_AREA);
        img = shrunk;
    }

    // Unique temp name per writer, then atomic rename; concurrent builders of
    // the same thumbnail converge on identical content.
    static std::atomic<unsigned> counter{0};
    fs::create_directories(dir);
    fs::path tmp = target;
    tmp += ".w" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)) + ".png";
    try {
        if (!cv::imwrite(tmp.string(), img))
            throw Error(Err::BadAsset, "cannot encode thumbnail for " + source_image.string());
    } catch (const cv::Exception& e) {
        throw Error(Err::BadAsset, source_image.string() + ": " + e.what());
    }
    fs::rename(tmp, target);
    return target;
}

}  // namespace kgi
