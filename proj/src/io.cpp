#include "urbanvis/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "urbanvis/error.hpp"

namespace urbanvis {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvalidGeometry: return "InvalidGeometry";
    case Errc::UnknownSegment: return "UnknownSegment";
    case Errc::InvalidValue: return "InvalidValue";
    case Errc::StorageFailure: return "StorageFailure";
    case Errc::InsufficientClass: return "InsufficientClass";
    case Errc::UndecodableImage: return "UndecodableImage";
    case Errc::ImageTooSmall: return "ImageTooSmall";
    case Errc::TooFewDescriptors: return "TooFewDescriptors";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::SingleClassInput: return "SingleClassInput";
    case Errc::NonFiniteFeature: return "NonFiniteFeature";
    case Errc::CorruptModelFile: return "CorruptModelFile";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::ConstantInput: return "ConstantInput";
    case Errc::MissingFeature: return "MissingFeature";
    case Errc::CorpusExhausted: return "CorpusExhausted";
    case Errc::NoModelLoaded: return "NoModelLoaded";
    case Errc::UnknownImage: return "UnknownImage";
  }
  return "Unknown";
}

namespace io {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::StorageFailure, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::StorageFailure, "cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(Errc::StorageFailure, "write failed for " + path);
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> lines(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    std::string_view line = text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.emplace_back(line);
    start = pos + 1;
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view field) {
  // from_chars rejects a leading '+', strtod semantics are otherwise matched.
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw Error(Errc::MalformedRow, "not a number: '" + std::string(field) + "'");
  }
  return v;
}

long long parse_int(std::string_view field) {
  long long v = 0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw Error(Errc::MalformedRow, "not an integer: '" + std::string(field) + "'");
  }
  return v;
}

}  // namespace io
}  // namespace urbanvis
