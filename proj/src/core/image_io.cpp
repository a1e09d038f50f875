#include "wss/core/image_io.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace wss {

namespace fs = std::filesystem;

RgbImage read_image(const fs::path& path) {
    const cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) throw std::runtime_error("cannot decode image " + path.string());
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    RgbImage out(rgb.rows, rgb.cols, 3);
    for (int y = 0; y < rgb.rows; ++y)
        std::memcpy(&out.at(y, 0, 0), rgb.ptr<std::uint8_t>(y), static_cast<std::size_t>(rgb.cols) * 3);
    return out;
}

void write_image(const fs::path& path, const RgbImage& image) {
    if (image.channels != 3) throw std::invalid_argument("write_image expects 3 channels");
    cv::Mat rgb(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.data.data()));
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), bgr)) throw std::runtime_error("cannot write image " + path.string());
}

Mask read_mask(const fs::path& path) {
    const cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (m.empty()) throw std::runtime_error("cannot decode mask " + path.string());
    if (m.type() != CV_8UC1) throw std::runtime_error("mask is not single-channel 8-bit: " + path.string());
    Mask out(m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y)
        std::memcpy(&out.at(y, 0), m.ptr<std::uint8_t>(y), static_cast<std::size_t>(m.cols));
    return out;
}

void write_mask(const fs::path& path, const Mask& mask) {
    cv::Mat m(mask.height(), mask.width(), CV_8UC1, const_cast<std::uint8_t*>(mask.labels.data.data()));
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), m)) throw std::runtime_error("cannot write mask " + path.string());
}

ImageRecord load_record(const fs::path& path, ImageSource source) {
    ImageRecord r;
    r.id = path.stem().string();
    r.pixels = read_image(path);
    r.source = source;
    return r;
}

std::string text_digest(std::string_view bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
    return out;
}

std::string file_digest(const fs::path& path) { return text_digest(read_text_file(path)); }

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_text_file(const fs::path& path, std::string_view text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace wss
