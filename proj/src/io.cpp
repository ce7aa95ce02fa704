#include "autoscale/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace autoscale::io {

static_assert(std::endian::native == std::endian::little,
              "CRMP I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 4> kMagic{'C', 'R', 'M', 'P'};
constexpr std::uint8_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

std::string header(DType dtype, std::uint32_t w, std::uint32_t h) {
  std::string out(kMagic.begin(), kMagic.end());
  out.push_back(static_cast<char>(kVersion));
  out.push_back(static_cast<char>(dtype));
  put_u32(out, w);
  put_u32(out, h);
  return out;
}

template <class V>
void put_payload(std::string& out, std::span<const V> values) {
  out.append(reinterpret_cast<const char*>(values.data()), values.size_bytes());
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return buf.str();
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::filesystem::path& path) : bytes_(bytes), path_(path) {}
  void take(void* dst, std::size_t n) {
    if (pos_ + n > bytes_.size()) throw IoError(path_.string() + ": truncated CRMP file");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  template <class T>
  T get() {
    T v;
    take(&v, sizeof v);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

template <class V>
Raster<V> read_plane(Reader& in, std::uint32_t w, std::uint32_t h) {
  std::vector<V> values(std::size_t{w} * h);
  in.take(values.data(), values.size() * sizeof(V));
  return Raster<V>(w, h, std::move(values));
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_atomically(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("failed writing " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at " + path.string());
  }
}

void write_crmp(const std::filesystem::path& path, const Raster<float>& raster) {
  auto out = header(DType::F32, raster.width(), raster.height());
  put_payload(out, raster.values());
  write_atomically(path, out);
}

void write_crmp(const std::filesystem::path& path, const Raster<std::uint8_t>& raster) {
  auto out = header(DType::U8, raster.width(), raster.height());
  put_payload(out, raster.values());
  write_atomically(path, out);
}

void write_crmp(const std::filesystem::path& path, const ProbabilityVolume& volume) {
  auto out = header(DType::ProbStack, volume.width(), volume.height());
  out.push_back(static_cast<char>(volume.n_classes()));
  for (std::uint8_t k = 0; k < volume.n_classes(); ++k) put_payload(out, volume.plane(k).values());
  write_atomically(path, out);
}

CrmpContent read_crmp(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  Reader in(bytes, path);
  std::array<char, 4> magic{};
  in.take(magic.data(), 4);
  if (magic != kMagic) throw IoError(path.string() + ": not a CRMP file");
  const auto version = in.get<std::uint8_t>();
  if (version != kVersion)
    throw IoError(path.string() + ": unsupported CRMP version " + std::to_string(version));
  const auto dtype = in.get<std::uint8_t>();
  const auto w = in.get<std::uint32_t>();
  const auto h = in.get<std::uint32_t>();
  if (w == 0 || h == 0) throw IoError(path.string() + ": empty raster");

  CrmpContent content;
  switch (static_cast<DType>(dtype)) {
    case DType::F32: content = read_plane<float>(in, w, h); break;
    case DType::U8: content = read_plane<std::uint8_t>(in, w, h); break;
    case DType::ProbStack: {
      const auto n = in.get<std::uint8_t>();
      if (n < 2) throw IoError(path.string() + ": probability stack needs >= 2 classes");
      std::vector<Raster<float>> planes;
      for (std::uint8_t k = 0; k < n; ++k) planes.push_back(read_plane<float>(in, w, h));
      content = ProbabilityVolume(std::move(planes));
      break;
    }
    default: throw IoError(path.string() + ": unknown CRMP dtype " + std::to_string(dtype));
  }
  if (!in.done()) throw IoError(path.string() + ": trailing bytes after CRMP payload");
  return content;
}

Raster<float> read_f32(const std::filesystem::path& path) {
  auto c = read_crmp(path);
  if (auto* r = std::get_if<Raster<float>>(&c)) return std::move(*r);
  throw IoError(path.string() + ": expected an f32 raster");
}

Raster<std::uint8_t> read_u8(const std::filesystem::path& path) {
  auto c = read_crmp(path);
  if (auto* r = std::get_if<Raster<std::uint8_t>>(&c)) return std::move(*r);
  throw IoError(path.string() + ": expected a u8 raster");
}

void write_label_pgm(const std::filesystem::path& path, const LabelRaster& labels,
                     std::uint8_t n_classes) {
  if (n_classes < 2) throw ValidationError("PGM export needs at least 2 classes");
  const int step = 255 / (n_classes - 1);
  std::string out = "P5\n" + std::to_string(labels.width()) + " " +
                    std::to_string(labels.height()) + "\n255\n";
  out.reserve(out.size() + labels.size());
  for (std::uint8_t v : labels.values()) out.push_back(static_cast<char>(v * step));
  write_atomically(path, out);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

std::optional<std::uint32_t> header_field(std::string_view line, std::string_view key) {
  const auto pos = line.find(key);
  if (pos == std::string_view::npos) return std::nullopt;
  auto rest = line.substr(pos + key.size());
  std::uint32_t v = 0;
  const auto res = std::from_chars(rest.data(), rest.data() + rest.size(), v);
  if (res.ec != std::errc()) return std::nullopt;
  return v;
}

}  // namespace

PointSet read_points(const std::filesystem::path& path, std::optional<std::uint32_t> width,
                     std::optional<std::uint32_t> height) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Point> pts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      if (lineno == 1) {
        if (auto w = header_field(t, "width=")) width = width.value_or(*w);
        if (auto h = header_field(t, "height=")) height = height.value_or(*h);
      }
      continue;
    }
    const auto comma = t.find(',');
    Point p;
    if (comma == std::string_view::npos || !parse_double(t.substr(0, comma), p.x) ||
        !parse_double(t.substr(comma + 1), p.y))
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected \"x,y\"");
    pts.push_back(p);
  }
  if (in.bad()) throw IoError("failed reading " + path.string());
  if (!width || !height)
    throw ValidationError(path.string() +
                          ": frame size unknown (no '# width=W height=H' header and no flag)");
  return PointSet(*width, *height, std::move(pts));
}

void write_points(const std::filesystem::path& path, const PointSet& points,
                  const std::string& extra_header) {
  std::string out = "# width=" + std::to_string(points.width()) +
                    " height=" + std::to_string(points.height());
  if (!extra_header.empty()) out += " " + extra_header;
  out += "\n";
  for (const auto& p : points.points()) out += format_double(p.x) + "," + format_double(p.y) + "\n";
  write_atomically(path, out);
}

std::vector<double> read_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<double> values;
  std::string line;
  bool first = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    // A "name,value" layout keeps the last column.
    if (const auto comma = t.rfind(','); comma != std::string_view::npos) t = t.substr(comma + 1);
    double v = 0.0;
    if (!parse_double(t, v)) {
      if (first) {
        first = false;
        continue;
      }
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected a number");
    }
    first = false;
    values.push_back(v);
  }
  return values;
}

}  // namespace autoscale::io
