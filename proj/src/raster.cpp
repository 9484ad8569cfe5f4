#include "urbanvis/raster.hpp"

#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <cstring>

#include <jpeglib.h>
#include <png.h>

#include "urbanvis/error.hpp"
#include "urbanvis/io.hpp"

namespace urbanvis {

namespace {

bool is_png(std::span<const std::uint8_t> b) {
  static constexpr std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return b.size() >= 8 && std::memcmp(b.data(), sig, 8) == 0;
}

bool is_jpeg(std::span<const std::uint8_t> b) {
  return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

Raster decode_png(std::span<const std::uint8_t> bytes) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw Error(Errc::UndecodableImage, std::string("png: ") + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  Raster r;
  r.width = static_cast<int>(img.width);
  r.height = static_cast<int>(img.height);
  r.rgb.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, r.rgb.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw Error(Errc::UndecodableImage, "png: " + msg);
  }
  return r;
}

struct JpegErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// No C++ objects with destructors may live between setjmp and longjmp here.
bool decode_jpeg_into(std::span<const std::uint8_t> bytes, Raster& r, char* message) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    std::strncpy(message, jerr.message, JMSG_LENGTH_MAX);
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  r.width = static_cast<int>(cinfo.output_width);
  r.height = static_cast<int>(cinfo.output_height);
  r.rgb.resize(static_cast<std::size_t>(r.width) * r.height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = r.rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * r.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

}  // namespace

Raster decode_image(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (is_jpeg(bytes)) {
    Raster r;
    char message[JMSG_LENGTH_MAX] = {};
    if (!decode_jpeg_into(bytes, r, message)) throw Error(Errc::UndecodableImage, std::string("jpeg: ") + message);
    return r;
  }
  throw Error(Errc::UndecodableImage, "neither PNG nor JPEG");
}

Raster load_image(const std::string& path) {
  const std::string data = io::read_file(path);
  try {
    return decode_image({reinterpret_cast<const std::uint8_t*>(data.data()), data.size()});
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

void save_png(const std::string& path, const Raster& image) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.rgb.data(), 0, nullptr)) {
    throw Error(Errc::StorageFailure, "png write " + path + ": " + img.message);
  }
}

GrayImage to_gray(const Raster& image) {
  GrayImage g(image.height, image.width);
  const std::uint8_t* p = image.rgb.data();
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x, p += 3) {
      g(y, x) = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    }
  }
  return g;
}

std::string content_type_for(const std::string& path) {
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == "png") return "image/png";
  if (ext == "jpg" || ext == "jpeg") return "image/jpeg";
  return "application/octet-stream";
}

}  // namespace urbanvis
