// SPDX-License-Identifier: Apache-2.0
#include "ogs/io_image.hpp"

#include "ogs/common.hpp"

#include <png.h>

#include <ImfChannelList.h>
#include <ImfFrameBuffer.h>
#include <ImfHeader.h>
#include <ImfInputFile.h>
#include <ImfOutputFile.h>

#include <algorithm>
#include <cstdio>
#include <memory>
#include <vector>

namespace ogs {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t to_byte(float v) {
    const float x = std::clamp(v, 0.f, 1.f) * 255.f;
    return static_cast<std::uint8_t>(x + 0.5f);
}

} // namespace

void write_png(const std::string& path, const Image& img) {
    OGS_REQUIRE(img.channels == 1 || img.channels == 3 || img.channels == 4,
                "write_png: unsupported channel count");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    OGS_REQUIRE(fp != nullptr, "cannot write png: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    OGS_REQUIRE(png, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("png write failed: " + path);
    }
    png_init_io(png, fp.get());
    const int color_type = img.channels == 1   ? PNG_COLOR_TYPE_GRAY
                           : img.channels == 3 ? PNG_COLOR_TYPE_RGB
                                               : PNG_COLOR_TYPE_RGBA;
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                row[static_cast<std::size_t>(x) * img.channels + c] = to_byte(img.at(c, y, x));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    OGS_REQUIRE(fp != nullptr, "cannot open png: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    OGS_REQUIRE(png, "png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("png read failed: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_set_expand(png);                 // palette/low-bit gray to 8 bit
    png_set_strip_16(png);
    const png_byte color_type = png_get_color_type(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int channels = static_cast<int>(png_get_channels(png, info));

    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * channels);
    Image img(w, h, channels);
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                img.at(c, y, x) =
                    static_cast<float>(row[static_cast<std::size_t>(x) * channels + c]) / 255.f;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

namespace {

const char* exr_channel_name(int channels, int c) {
    static const char* rgba[4] = {"R", "G", "B", "A"};
    if (channels == 1) return "Y";
    return rgba[c];
}

} // namespace

void write_exr(const std::string& path, const Image& img) {
    OGS_REQUIRE(img.channels == 1 || img.channels == 3 || img.channels == 4,
                "write_exr: unsupported channel count");
    Imf::Header header(img.width, img.height);
    Imf::FrameBuffer fb;
    for (int c = 0; c < img.channels; ++c) {
        const char* name = exr_channel_name(img.channels, c);
        header.channels().insert(name, Imf::Channel(Imf::FLOAT));
        fb.insert(name, Imf::Slice(Imf::FLOAT,
                                   reinterpret_cast<char*>(const_cast<float*>(img.plane(c))),
                                   sizeof(float), sizeof(float) * img.width));
    }
    Imf::OutputFile file(path.c_str(), header);
    file.setFrameBuffer(fb);
    file.writePixels(img.height);
}

Image read_exr(const std::string& path) {
    Imf::InputFile file(path.c_str());
    const Imath::Box2i dw = file.header().dataWindow();
    const int w = dw.max.x - dw.min.x + 1;
    const int h = dw.max.y - dw.min.y + 1;

    std::vector<std::string> names;
    const Imf::ChannelList& chans = file.header().channels();
    for (auto it = chans.begin(); it != chans.end(); ++it) names.emplace_back(it.name());
    // stable RGBA ordering when present
    std::vector<std::string> ordered;
    for (const char* want : {"R", "G", "B", "A", "Y"})
        for (const auto& n : names)
            if (n == want) ordered.push_back(n);
    if (ordered.empty()) ordered = names;

    Image img(w, h, static_cast<int>(ordered.size()));
    Imf::FrameBuffer fb;
    for (std::size_t c = 0; c < ordered.size(); ++c) {
        char* base = reinterpret_cast<char*>(img.plane(static_cast<int>(c))) -
                     (dw.min.y * static_cast<std::ptrdiff_t>(w) + dw.min.x) *
                         static_cast<std::ptrdiff_t>(sizeof(float));
        fb.insert(ordered[c], Imf::Slice(Imf::FLOAT, base, sizeof(float), sizeof(float) * w));
    }
    file.setFrameBuffer(fb);
    file.readPixels(dw.min.y, dw.max.y);
    return img;
}

} // namespace ogs
