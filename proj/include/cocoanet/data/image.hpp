#pragma once

#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "../core/error.hpp"

namespace cocoanet {

// Decoded 8-bit image, packed RGB rows. Grayscale and palette sources are
// expanded, alpha is dropped; every caller downstream sees exactly 3
// channels.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    std::uint8_t* pixel(int y, int x) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* pixel(int y, int x) const {
        return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
};

inline bool has_image_extension(const std::filesystem::path& file) {
    std::string ext = file.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

namespace detail {

enum class ImageKind { Png, Jpeg, Unknown };

// Containers are identified by magic bytes, not extension; mislabeled files
// are common in scraped datasets.
inline ImageKind sniff_kind(FILE* fp) {
    unsigned char magic[8] = {};
    const std::size_t got = std::fread(magic, 1, sizeof magic, fp);
    std::rewind(fp);
    static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (got >= 8 && std::memcmp(magic, png_sig, 8) == 0) return ImageKind::Png;
    if (got >= 3 && magic[0] == 0xff && magic[1] == 0xd8 && magic[2] == 0xff)
        return ImageKind::Jpeg;
    return ImageKind::Unknown;
}

struct FileCloser {
    FILE* fp;
    ~FileCloser() {
        if (fp) std::fclose(fp);
    }
};

struct JpegError {
    jpeg_error_mgr mgr;
    std::jmp_buf env;
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
    longjmp(reinterpret_cast<JpegError*>(cinfo->err)->env, 1);
}
inline void jpeg_silence(j_common_ptr, int) {}

inline Image decode_png_stream(FILE* fp, const std::string& name, bool header_only) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        if (png) png_destroy_read_struct(&png, nullptr, nullptr);
        throw ImageDecodeError(name + ": png decoder setup failed");
    }
    Image img;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageDecodeError(name + ": corrupt or unsupported PNG");
    }
    png_init_io(png, fp);
    if (header_only) {
        png_read_info(png, info);
        img.width = static_cast<int>(png_get_image_width(png, info));
        img.height = static_cast<int>(png_get_image_height(png, info));
        png_destroy_read_struct(&png, &info, nullptr);
        return img;
    }
    png_read_png(png, info,
                 PNG_TRANSFORM_STRIP_16 | PNG_TRANSFORM_PACKING | PNG_TRANSFORM_EXPAND |
                     PNG_TRANSFORM_STRIP_ALPHA | PNG_TRANSFORM_GRAY_TO_RGB,
                 nullptr);
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    if (png_get_channels(png, info) != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageDecodeError(name + ": PNG did not normalize to RGB");
    }
    png_bytepp rows = png_get_rows(png, info);
    img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    const std::size_t row_bytes = static_cast<std::size_t>(img.width) * 3;
    for (int y = 0; y < img.height; ++y)
        std::memcpy(img.rgb.data() + static_cast<std::size_t>(y) * row_bytes, rows[y], row_bytes);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

inline Image decode_jpeg_stream(FILE* fp, const std::string& name, bool header_only) {
    jpeg_decompress_struct cinfo{};
    JpegError jerr{};
    cinfo.err = jpeg_std_error(&jerr.mgr);
    jerr.mgr.error_exit = jpeg_error_exit;
    jerr.mgr.emit_message = jpeg_silence;
    if (setjmp(jerr.env)) {
        jpeg_destroy_decompress(&cinfo);
        throw ImageDecodeError(name + ": corrupt or unsupported JPEG");
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, fp);
    jpeg_read_header(&cinfo, TRUE);
    Image img;
    if (header_only) {
        img.width = static_cast<int>(cinfo.image_width);
        img.height = static_cast<int>(cinfo.image_height);
        jpeg_destroy_decompress(&cinfo);
        return img;
    }
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    img.width = static_cast<int>(cinfo.output_width);
    img.height = static_cast<int>(cinfo.output_height);
    if (cinfo.output_components != 3) {
        jpeg_destroy_decompress(&cinfo);
        throw ImageDecodeError(name + ": JPEG did not normalize to RGB");
    }
    img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    const std::size_t row_bytes = static_cast<std::size_t>(img.width) * 3;
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = img.rgb.data() + cinfo.output_scanline * row_bytes;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
}

inline Image decode_any(const std::filesystem::path& file, bool header_only) {
    FileCloser fc{std::fopen(file.string().c_str(), "rb")};
    if (!fc.fp) throw ImageDecodeError(file.string() + ": cannot open");
    switch (sniff_kind(fc.fp)) {
        case ImageKind::Png: return decode_png_stream(fc.fp, file.string(), header_only);
        case ImageKind::Jpeg: return decode_jpeg_stream(fc.fp, file.string(), header_only);
        default: break;
    }
    throw ImageDecodeError(file.string() + ": not a PNG or JPEG");
}

} // namespace detail

inline Image decode_image(const std::filesystem::path& file) {
    Image img = detail::decode_any(file, false);
    if (img.width <= 0 || img.height <= 0)
        throw ImageDecodeError(file.string() + ": empty image");
    return img;
}

// Header-level validity check used while scanning datasets; full decoding
// problems still surface at load time.
inline bool probe_image(const std::filesystem::path& file, int* width = nullptr,
                        int* height = nullptr) noexcept {
    try {
        Image img = detail::decode_any(file, true);
        if (img.width <= 0 || img.height <= 0) return false;
        if (width) *width = img.width;
        if (height) *height = img.height;
        return true;
    } catch (...) {
        return false;
    }
}

// Fixture writer for tests and synthetic datasets.
inline void encode_png(const std::filesystem::path& file, const Image& img) {
    if (img.width <= 0 || img.height <= 0 ||
        img.rgb.size() != static_cast<std::size_t>(img.width) * img.height * 3)
        throw std::invalid_argument("encode_png: malformed image buffer");
    detail::FileCloser fc{std::fopen(file.string().c_str(), "wb")};
    if (!fc.fp) throw RuntimeFailure(file.string() + ": cannot open for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        if (png) png_destroy_write_struct(&png, nullptr);
        throw RuntimeFailure("encode_png: encoder setup failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw RuntimeFailure(file.string() + ": PNG write failed");
    }
    png_init_io(png, fc.fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t row_bytes = static_cast<std::size_t>(img.width) * 3;
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(img.rgb.data() + y * row_bytes));
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

} // namespace cocoanet
