#include "sketchedit/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <boost/beast/core/detail/base64.hpp>
#include <cmath>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace sketchedit {

namespace {

struct PngImage {
    png_image header{};

    PngImage() { header.version = PNG_IMAGE_VERSION; }
    ~PngImage() { png_image_free(&header); }
    PngImage(const PngImage&) = delete;
    PngImage& operator=(const PngImage&) = delete;
};

std::vector<std::uint8_t> decode_raw(std::span<const std::uint8_t> bytes, png_uint_32 format, int& width, int& height) {
    PngImage img;
    if (!png_image_begin_read_from_memory(&img.header, bytes.data(), bytes.size())) {
        throw std::invalid_argument(std::string("PNG decode failed: ") + img.header.message);
    }
    img.header.format = format;
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(img.header));
    if (!png_image_finish_read(&img.header, nullptr, pixels.data(), 0, nullptr)) {
        throw std::invalid_argument(std::string("PNG decode failed: ") + img.header.message);
    }
    width = static_cast<int>(img.header.width);
    height = static_cast<int>(img.header.height);
    return pixels;
}

std::vector<std::uint8_t> encode_raw(const std::vector<std::uint8_t>& pixels, int width, int height,
                                     png_uint_32 format) {
    PngImage img;
    img.header.width = static_cast<png_uint_32>(width);
    img.header.height = static_cast<png_uint_32>(height);
    img.header.format = format;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img.header, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
        throw std::runtime_error(std::string("PNG encode failed: ") + img.header.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&img.header, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
        throw std::runtime_error(std::string("PNG encode failed: ") + img.header.message);
    }
    out.resize(size);
    return out;
}

}  // namespace

std::uint8_t to_u8(float v) {
    const double scaled = std::round((static_cast<double>(v) + 1.0) / 2.0 * 255.0);
    return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

float from_u8(std::uint8_t v8) { return static_cast<float>(static_cast<double>(v8) * 2.0 / 255.0 - 1.0); }

Image quantize(const Image& x) {
    Image out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = from_u8(to_u8(x[i]));
    return out;
}

std::vector<std::uint8_t> encode_png(const Image& rgb) {
    require_rgb(rgb, "encode_png");
    const int h = rgb.height(), w = rgb.width();
    std::vector<std::uint8_t> px(static_cast<std::size_t>(h) * w * 3);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            for (int c = 0; c < 3; ++c) px[(static_cast<std::size_t>(i) * w + j) * 3 + c] = to_u8(rgb.at(c, i, j));
    return encode_raw(px, w, h, PNG_FORMAT_RGB);
}

std::vector<std::uint8_t> encode_mask_png(const Mask& m) {
    require_binary_mask(m, "encode_mask_png");
    std::vector<std::uint8_t> px(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) px[i] = m[i] == 1.0f ? 255 : 0;
    return encode_raw(px, m.width(), m.height(), PNG_FORMAT_GRAY);
}

Image decode_png(std::span<const std::uint8_t> bytes) {
    int w = 0, h = 0;
    const auto px = decode_raw(bytes, PNG_FORMAT_RGB, w, h);
    Image out(3, h, w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            for (int c = 0; c < 3; ++c) out.at(c, i, j) = from_u8(px[(static_cast<std::size_t>(i) * w + j) * 3 + c]);
    return out;
}

Mask decode_mask_png(std::span<const std::uint8_t> bytes) {
    int w = 0, h = 0;
    const auto px = decode_raw(bytes, PNG_FORMAT_GRAY, w, h);
    Mask out(1, h, w);
    for (std::size_t i = 0; i < px.size(); ++i) out[i] = px[i] >= 128 ? 1.0f : 0.0f;
    return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Image read_image(const std::filesystem::path& path) {
    try {
        return decode_png(read_file(path));
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

Mask read_mask(const std::filesystem::path& path) {
    try {
        return decode_mask_png(read_file(path));
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

void write_image(const std::filesystem::path& path, const Image& rgb) { write_file(path, encode_png(rgb)); }

void write_mask(const std::filesystem::path& path, const Mask& m) { write_file(path, encode_mask_png(m)); }

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    namespace b64 = boost::beast::detail::base64;
    std::string out(b64::encoded_size(bytes.size()), '\0');
    out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    namespace b64 = boost::beast::detail::base64;
    // Accept data URLs as produced by browsers.
    if (text.rfind("data:", 0) == 0) {
        const auto comma = text.find(',');
        if (comma == std::string_view::npos) throw std::invalid_argument("base64: malformed data URL");
        text.remove_prefix(comma + 1);
    }
    if (text.size() % 4 != 0) throw std::invalid_argument("base64: length is not a multiple of 4");
    std::vector<std::uint8_t> out(b64::decoded_size(text.size()));
    const auto [written, read] = b64::decode(out.data(), text.data(), text.size());
    const auto tail = text.substr(read);
    if (tail.size() > 2 || tail.find_first_not_of('=') != std::string_view::npos) {
        throw std::invalid_argument("base64: invalid character");
    }
    out.resize(written);
    return out;
}

}  // namespace sketchedit
