#include "edgestereo/sample_io.hpp"

#include "edgestereo/dataio.hpp"
#include "edgestereo/error.hpp"

#include <algorithm>

namespace edgestereo::io {

namespace fs = std::filesystem;

namespace {

std::string lower_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

fs::path image_path(const fs::path& dir, const std::string& stem) {
    for (const char* ext : {".pgm", ".ppm", ".png"}) {
        const fs::path p = dir / (stem + ext);
        if (fs::exists(p)) return p;
    }
    throw IoError("no " + stem + " image in " + dir.string());
}

} // namespace

void write_sample_dir(const fs::path& dir, const StereoSample& sample) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    const std::string ext = sample.left.channels() == 1 ? ".pgm" : ".ppm";
    write_file(dir / ("left" + ext), write_pnm(sample.left, 65535));
    write_file(dir / ("right" + ext), write_pnm(sample.right, 65535));
    write_file(dir / "disparity.png", write_kitti_disparity_png(sample.gt_disparity));
    if (sample.gt_edges) write_file(dir / "edges.pgm", write_pnm(sample.gt_edges->probabilities, 255));
}

StereoSample read_sample_dir(const fs::path& dir) {
    StereoSample s;
    s.left = load_image(image_path(dir, "left"));
    s.right = load_image(image_path(dir, "right"));
    if (!s.left.same_shape(s.right)) throw ShapeError("left and right images differ in shape in " + dir.string());
    s.gt_disparity = load_disparity(dir / "disparity.png");
    if (!s.gt_disparity.values.same_resolution(s.left)) {
        throw ShapeError("disparity resolution differs from the images in " + dir.string());
    }
    if (fs::exists(dir / "edges.pgm")) {
        Grid e = to_gray(load_image(dir / "edges.pgm"));
        for (double& v : e.data()) v = v >= 0.5 ? 1.0 : 0.0;
        s.gt_edges = EdgeMap(std::move(e));
    }
    return s;
}

std::vector<StereoSample> read_dataset(const fs::path& root) {
    if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && fs::exists(entry.path() / "disparity.png")) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw IoError("no sample directories under " + root.string());
    std::vector<StereoSample> out;
    for (const auto& d : dirs) out.push_back(read_sample_dir(d));
    return out;
}

DisparityMap load_disparity(const fs::path& path) {
    const std::string ext = lower_extension(path);
    if (ext == ".png") return read_kitti_disparity_png(read_file(path));
    if (ext == ".pfm") {
        Grid g = read_pfm(read_file(path));
        if (g.channels() != 1) throw FormatError(FormatErrorKind::UnsupportedPixelFormat, "disparity PFM must be 1-channel");
        return DisparityMap(std::move(g));
    }
    throw ConfigError("disparity files must be .png or .pfm: " + path.string());
}

void save_disparity(const fs::path& path, const DisparityMap& d) {
    const std::string ext = lower_extension(path);
    if (ext == ".png") {
        write_file(path, write_kitti_disparity_png(d));
    } else if (ext == ".pfm") {
        Grid g = d.values;
        for (int y = 0; y < d.height(); ++y) {
            for (int x = 0; x < d.width(); ++x) {
                if (!d.valid(y, x)) g(0, y, x) = 0.0;
            }
        }
        write_file(path, write_pfm(g));
    } else {
        throw ConfigError("disparity output must be .png or .pfm: " + path.string());
    }
}

} // namespace edgestereo::io
