#include "gsalign/image_io.hpp"
#include "gsalign/error.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

namespace gsalign {

namespace {

std::string lower_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

unsigned quantize(double v, unsigned max_value) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<unsigned>(std::lround(c * max_value));
}

void check_depth(int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) throw InvalidParameter("image bit depth must be 8 or 16");
}

// Skips whitespace and '#' comments between PPM header tokens.
long read_header_int(std::istream& in, const std::filesystem::path& path) {
    for (;;) {
        const int c = in.peek();
        if (c == '#') {
            std::string ignored;
            std::getline(in, ignored);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    long v = -1;
    if (!(in >> v) || v < 0) throw ParseError("malformed PPM header in " + path.string());
    return v;
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P6") throw ParseError("unsupported PPM type '" + magic + "' in " + path.string());
    const long w = read_header_int(in, path);
    const long h = read_header_int(in, path);
    const long maxval = read_header_int(in, path);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw ParseError("invalid PPM dimensions or maxval in " + path.string());
    in.get();  // single whitespace before the raster
    Image img(static_cast<int>(w), static_cast<int>(h));
    const std::size_t bytes_per = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(img.data.size() * bytes_per);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw ParseError("truncated PPM raster in " + path.string());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const unsigned v = bytes_per == 2 ? (unsigned(raw[2 * i]) << 8) | raw[2 * i + 1] : raw[i];
        img.data[i] = double(v) / double(maxval);
    }
    img.clamp01();
    return img;
}

void write_ppm(const std::filesystem::path& path, const Image& image, int bit_depth) {
    check_depth(bit_depth);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    const unsigned maxval = bit_depth == 16 ? 65535u : 255u;
    out << "P6\n" << image.width << " " << image.height << "\n" << maxval << "\n";
    std::vector<unsigned char> raw;
    raw.reserve(image.data.size() * (bit_depth / 8));
    for (double v : image.data) {
        const unsigned q = quantize(v, maxval);
        if (bit_depth == 16) raw.push_back(static_cast<unsigned char>(q >> 8));
        raw.push_back(static_cast<unsigned char>(q & 0xff));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

Image read_png(const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("libpng initialisation failed");
    }
    Image img;
    std::vector<unsigned char> buffer;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError("malformed PNG " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    const int color_type = png_get_color_type(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const int depth = png_get_bit_depth(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    buffer.resize(rowbytes * h);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = buffer.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    img = Image(static_cast<int>(w), static_cast<int>(h));
    const double maxval = depth == 16 ? 65535.0 : 255.0;
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const unsigned v = depth == 16 ? (unsigned(buffer[2 * i]) << 8) | buffer[2 * i + 1] : buffer[i];
        img.data[i] = double(v) / maxval;
    }
    return img;
}

void write_png(const std::filesystem::path& path, const Image& image, int bit_depth) {
    check_depth(bit_depth);
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw IoError("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error("libpng initialisation failed");
    }
    const std::size_t bytes = static_cast<std::size_t>(bit_depth / 8);
    const std::size_t rowbytes = static_cast<std::size_t>(image.width) * 3 * bytes;
    std::vector<unsigned char> buffer(rowbytes * image.height);
    const unsigned maxval = bit_depth == 16 ? 65535u : 255u;
    for (std::size_t i = 0; i < image.data.size(); ++i) {
        const unsigned q = quantize(image.data[i], maxval);
        if (bytes == 2) {
            buffer[2 * i] = static_cast<unsigned char>(q >> 8);
            buffer[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
        } else {
            buffer[i] = static_cast<unsigned char>(q);
        }
    }
    std::vector<png_bytep> rows(image.height);
    for (int y = 0; y < image.height; ++y) rows[y] = buffer.data() + y * rowbytes;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, image.width, image.height, bit_depth, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_image(const std::filesystem::path& path) {
    const std::string ext = lower_extension(path);
    if (ext == ".ppm") return read_ppm(path);
    if (ext == ".png") return read_png(path);
    throw InvalidParameter("unsupported image format: " + path.string());
}

void write_image(const std::filesystem::path& path, const Image& image, int bit_depth) {
    const std::string ext = lower_extension(path);
    if (ext == ".ppm") return write_ppm(path, image, bit_depth);
    if (ext == ".png") return write_png(path, image, bit_depth);
    throw InvalidParameter("unsupported image format: " + path.string());
}

}  // namespace gsalign
