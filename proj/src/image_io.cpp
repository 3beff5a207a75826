#include <cstddef>
#include <cstdio>

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cstring>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <vector>

#include "pek/image.hpp"

namespace pek::img {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

bool has_suffix(const std::string& s, const char* suf) {
    std::string lower;
    lower.reserve(s.size());
    for (char c : s) lower.push_back(static_cast<char>(std::tolower(c)));
    const std::size_t n = std::strlen(suf);
    return lower.size() >= n && lower.compare(lower.size() - n, n, suf) == 0;
}

ImageTensor decode_png(std::FILE* f, const std::string& path) {
    png_byte header[8];
    if (std::fread(header, 1, 8, f) != 8 || png_sig_cmp(header, 0, 8))
        throw std::runtime_error("load_image: not a PNG file: " + path);

    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("load_image: png init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("load_image: png init failed");
    }
    std::vector<png_bytep> row_ptrs;
    std::vector<png_byte> pixels;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("load_image: undecodable PNG: " + path);
    }
    png_init_io(png, f);
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("load_image: unsupported PNG layout: " + path);
    }
    pixels.resize(static_cast<std::size_t>(h) * w * channels);
    row_ptrs.resize(h);
    for (png_uint_32 y = 0; y < h; ++y)
        row_ptrs[y] = pixels.data() + static_cast<std::size_t>(y) * w * channels;
    png_read_image(png, row_ptrs.data());
    png_destroy_read_struct(&png, &info, nullptr);

    ImageTensor img(static_cast<int>(h), static_cast<int>(w), channels);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = from_byte(pixels[i]);
    return img;
}

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    std::longjmp(err->jump, 1);
}

ImageTensor decode_jpeg(std::FILE* f, const std::string& path) {
    jpeg_decompress_struct cinfo;
    JpegErrorMgr jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw std::runtime_error("load_image: undecodable JPEG: " + path);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space =
        cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);

    const int w = static_cast<int>(cinfo.output_width);
    const int h = static_cast<int>(cinfo.output_height);
    const int channels = cinfo.output_components;
    if (channels != 1 && channels != 3) {
        jpeg_destroy_decompress(&cinfo);
        throw std::runtime_error("load_image: unsupported JPEG layout: " + path);
    }
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * channels);
    ImageTensor img(h, w, channels);
    while (cinfo.output_scanline < cinfo.output_height) {
        unsigned char* rp = row.data();
        const int y = static_cast<int>(cinfo.output_scanline);
        jpeg_read_scanlines(&cinfo, &rp, 1);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                img.at(y, x, c) = from_byte(row[x * channels + c]);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
}

}  // namespace

ImageTensor load_image(const std::string& path,
                       std::optional<std::pair<int, int>> target) {
    if (!std::filesystem::exists(path))
        throw std::runtime_error("load_image: no such file: " + path);
    if (target && (target->first < 1 || target->second < 1))
        throw std::invalid_argument("load_image: zero-sized target");

    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("load_image: cannot open: " + path);

    ImageTensor img;
    if (has_suffix(path, ".jpg") || has_suffix(path, ".jpeg"))
        img = decode_jpeg(f.get(), path);
    else
        img = decode_png(f.get(), path);

    if (target) img = resize_bilinear(img, target->first, target->second);
    return img;
}

void ensure_parent_dir(const std::string& path) {
    const std::filesystem::path parent =
        std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

std::vector<std::string> list_image_files(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir))
        throw std::runtime_error("not a directory: " + dir);
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string ext = e.path().extension().string();
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg")
            out.push_back(e.path().string());
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw std::runtime_error("no images in " + dir);
    return out;
}

void save_image(const ImageTensor& img, const std::string& path) {
    validate(img, "save_image");
    if (!has_suffix(path, ".png"))
        throw std::invalid_argument("save_image: only PNG output supported: " +
                                    path);

    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw std::runtime_error("save_image: cannot write: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                              nullptr, nullptr);
    if (!png) throw std::runtime_error("save_image: png init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("save_image: png init failed");
    }
    std::vector<png_byte> pixels(img.data.size());
    std::vector<png_bytep> row_ptrs(img.height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("save_image: write failed: " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, img.width, img.height, 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        pixels[i] = static_cast<png_byte>(to_byte(img.data[i]));
    for (int y = 0; y < img.height; ++y)
        row_ptrs[y] = pixels.data() +
                      static_cast<std::size_t>(y) * img.width * img.channels;
    png_write_info(png, info);
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace pek::img
