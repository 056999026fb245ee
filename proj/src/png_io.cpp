#include "shunit/png_io.hpp"

#include <png.h>

#include <cstring>

#include "shunit/errors.hpp"

namespace shunit::png {

Image8 read(const std::filesystem::path& path, int64_t channels) {
  if (channels != 1 && channels != 3) {
    throw std::invalid_argument("png::read: channels must be 1 or 3");
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;

  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw DataError("cannot read PNG " + path.string() + ": " + image.message);
  }
  const bool is_color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  if (channels == 1 && is_color) {
    png_image_free(&image);
    throw DataError("label PNG must be single-channel: " + path.string());
  }
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;

  Image8 out;
  out.height = image.height;
  out.width = image.width;
  out.channels = channels;
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    throw DataError("cannot decode PNG " + path.string() + ": " + message);
  }
  return out;
}

void write(const std::filesystem::path& path, const Image8& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw std::invalid_argument("png::write: channels must be 1 or 3");
  }
  if (static_cast<int64_t>(img.pixels.size()) != img.height * img.width * img.channels) {
    throw std::invalid_argument("png::write: pixel buffer size mismatch");
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;

  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0, nullptr)) {
    throw DataError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

}  // namespace shunit::png
