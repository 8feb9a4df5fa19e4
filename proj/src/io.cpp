#include "deltas/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

namespace deltas {

static_assert(std::endian::native == std::endian::little,
              "file readers assume a little-endian host");

std::string format_double(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

namespace {

[[noreturn]] void parse_fail(const std::filesystem::path& path, size_t offset,
                             const std::string& what) {
  fail(ErrorCode::parse_error,
       path.string() + ": " + what + " at byte " + std::to_string(offset));
}

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::io_error, "cannot open " + path.string());
    data_.assign(std::istreambuf_iterator<char>(in),
                 std::istreambuf_iterator<char>());
  }

  void expect_magic(const char magic[4]) {
    if (data_.size() < offset_ + 4 ||
        std::memcmp(data_.data() + offset_, magic, 4) != 0) {
      parse_fail(path_, offset_, std::string("bad magic, expected \"") +
                                     std::string(magic, 4) + "\"");
    }
    offset_ += 4;
  }

  uint32_t read_u32(const char* name) {
    if (data_.size() < offset_ + 4)
      parse_fail(path_, offset_, std::string("truncated ") + name);
    uint32_t v;
    std::memcpy(&v, data_.data() + offset_, 4);
    offset_ += 4;
    return v;
  }

  std::vector<float> read_f32(size_t count, const char* name) {
    if (data_.size() < offset_ + count * 4)
      parse_fail(path_, data_.size(),
                 std::string("truncated ") + name + " payload");
    std::vector<float> v(count);
    std::memcpy(v.data(), data_.data() + offset_, count * 4);
    offset_ += count * 4;
    return v;
  }

  void expect_end() {
    if (offset_ != data_.size())
      parse_fail(path_, offset_, "trailing bytes after payload");
  }

  size_t offset() const { return offset_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::string data_;
  size_t offset_ = 0;
};

void write_bytes(const std::filesystem::path& path, const void* data,
                 size_t size, std::ofstream& out) {
  out.write(static_cast<const char*>(data), std::streamsize(size));
  require(out.good(), ErrorCode::io_error, "write failed for " + path.string());
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::io_error, "cannot create " + path.string());
  return out;
}

}  // namespace

ScoreMap read_score_map(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic("SMAP");
  ScoreMap map;
  map.height = int(r.read_u32("height"));
  map.width = int(r.read_u32("width"));
  if (map.height <= 0 || map.width <= 0)
    parse_fail(path, 4, "non-positive dimensions");
  map.values = r.read_f32(size_t(map.width) * map.height, "score");
  r.expect_end();
  try {
    validate_score_map(map);
  } catch (const Error& e) {
    parse_fail(path, 12, e.what());
  }
  return map;
}

void write_score_map(const std::filesystem::path& path, const ScoreMap& map) {
  auto out = open_out(path);
  const uint32_t h = uint32_t(map.height), w = uint32_t(map.width);
  write_bytes(path, "SMAP", 4, out);
  write_bytes(path, &h, 4, out);
  write_bytes(path, &w, 4, out);
  write_bytes(path, map.values.data(), map.values.size() * 4, out);
}

DescriptorField read_descriptor_field(const std::filesystem::path& path,
                                      int stride) {
  BinaryReader r(path);
  r.expect_magic("DESC");
  DescriptorField field;
  field.grid_height = int(r.read_u32("height"));
  field.grid_width = int(r.read_u32("width"));
  field.dim = int(r.read_u32("dim"));
  field.stride = stride;
  if (field.grid_height <= 0 || field.grid_width <= 0 || field.dim < 2)
    parse_fail(path, 4, "bad descriptor field dimensions");
  field.values = r.read_f32(
      size_t(field.grid_width) * field.grid_height * field.dim, "descriptor");
  r.expect_end();
  try {
    validate_descriptor_field(field);
  } catch (const Error& e) {
    parse_fail(path, 16, e.what());
  }
  return field;
}

void write_descriptor_field(const std::filesystem::path& path,
                            const DescriptorField& field) {
  auto out = open_out(path);
  const uint32_t h = uint32_t(field.grid_height), w = uint32_t(field.grid_width),
                 n = uint32_t(field.dim);
  write_bytes(path, "DESC", 4, out);
  write_bytes(path, &h, 4, out);
  write_bytes(path, &w, 4, out);
  write_bytes(path, &n, 4, out);
  write_bytes(path, field.values.data(), field.values.size() * 4, out);
}

DepthImage read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::io_error, "cannot open " + path.string());
  std::string data(std::istreambuf_iterator<char>(in),
                   std::istreambuf_iterator<char>{});

  size_t pos = 0;
  const auto token = [&]() -> std::string {
    while (pos < data.size() && std::isspace(uint8_t(data[pos]))) ++pos;
    const size_t start = pos;
    while (pos < data.size() && !std::isspace(uint8_t(data[pos]))) ++pos;
    if (start == pos) parse_fail(path, start, "truncated header");
    return data.substr(start, pos - start);
  };

  if (token() != "Pf") parse_fail(path, 0, "expected grayscale PFM magic \"Pf\"");
  int width = 0, height = 0;
  double scale = 0.0;
  try {
    width = std::stoi(token());
    height = std::stoi(token());
    scale = std::stod(token());
  } catch (const std::exception&) {
    parse_fail(path, pos, "malformed header number");
  }
  if (width <= 0 || height <= 0) parse_fail(path, pos, "non-positive dimensions");
  if (scale >= 0.0) parse_fail(path, pos, "expected negative (little-endian) scale");
  ++pos;  // single whitespace byte after the scale line

  const size_t need = size_t(width) * height * 4;
  if (data.size() - pos < need) parse_fail(path, data.size(), "truncated pixel data");

  DepthImage image = DepthImage::all_invalid({width, height});
  for (int row = 0; row < height; ++row) {
    const int y = height - 1 - row;  // bottom-to-top storage
    for (int x = 0; x < width; ++x) {
      float v;
      const size_t at = pos + (size_t(row) * width + x) * 4;
      std::memcpy(&v, data.data() + at, 4);
      if (!std::isfinite(v) || v < 0.0f)
        parse_fail(path, at, "depth values must be finite and >= 0");
      if (v > 0.0f) image.set(x, y, double(v));
    }
  }
  return image;
}

void write_pfm(const std::filesystem::path& path, const DepthImage& image) {
  auto out = open_out(path);
  std::string header = "Pf\n" + std::to_string(image.width) + " " +
                       std::to_string(image.height) + "\n-1.0\n";
  write_bytes(path, header.data(), header.size(), out);
  std::vector<float> row(image.width);
  for (int y = image.height - 1; y >= 0; --y) {
    for (int x = 0; x < image.width; ++x)
      row[x] = image.valid_at(x, y) ? float(image.at(x, y)) : 0.0f;
    write_bytes(path, row.data(), row.size() * 4, out);
  }
}

std::vector<CameraView> read_cameras_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::io_error, "cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    parse_fail(path, e.byte, e.what());
  }
  require(doc.is_array() && !doc.empty(), ErrorCode::parse_error,
          path.string() + ": expected a non-empty array of views");

  std::vector<CameraView> views;
  for (size_t i = 0; i < doc.size(); ++i) {
    const auto& v = doc[i];
    for (const char* key : {"K", "R", "t", "width", "height"}) {
      require(v.contains(key), ErrorCode::parse_error,
              path.string() + ": view " + std::to_string(i) +
                  " is missing field \"" + key + "\"");
    }
    const auto mat3 = [&](const char* key) -> Mat3 {
      const auto& a = v.at(key);
      require(a.is_array() && a.size() == 9, ErrorCode::parse_error,
              path.string() + ": field \"" + std::string(key) +
                  "\" must hold 9 numbers");
      Mat3 m;
      for (int k = 0; k < 9; ++k) m(k / 3, k % 3) = a[k].get<double>();
      return m;
    };
    const auto& ta = v.at("t");
    require(ta.is_array() && ta.size() == 3, ErrorCode::parse_error,
            path.string() + ": field \"t\" must hold 3 numbers");
    Vec3 t(ta[0].get<double>(), ta[1].get<double>(), ta[2].get<double>());
    try {
      views.emplace_back(mat3("K"), mat3("R"), t,
                         ImageSize{v.at("width").get<int>(),
                                   v.at("height").get<int>()});
    } catch (const Error& e) {
      fail(ErrorCode::parse_error, path.string() + ": view " +
                                       std::to_string(i) + ": " + e.what());
    }
  }
  return views;
}

void write_cameras_json(const std::filesystem::path& path,
                        const std::vector<CameraView>& views) {
  // Rendered by hand with shortest round-trip doubles so a dump/load cycle
  // reproduces every camera bit-exactly.
  std::string text = "[\n";
  for (size_t i = 0; i < views.size(); ++i) {
    const CameraView& v = views[i];
    const auto mat3 = [](const Mat3& m) {
      std::string s = "[";
      for (int k = 0; k < 9; ++k) {
        if (k) s += ", ";
        s += format_double(m(k / 3, k % 3));
      }
      return s + "]";
    };
    text += "  {\"K\": " + mat3(v.intrinsics()) + ",\n   \"R\": " +
            mat3(v.rotation()) + ",\n   \"t\": [" +
            format_double(v.translation().x()) + ", " +
            format_double(v.translation().y()) + ", " +
            format_double(v.translation().z()) + "],\n   \"width\": " +
            std::to_string(v.image_size().width) + ", \"height\": " +
            std::to_string(v.image_size().height) + "}";
    text += (i + 1 < views.size()) ? ",\n" : "\n";
  }
  text += "]\n";
  auto out = open_out(path);
  write_bytes(path, text.data(), text.size(), out);
}

std::string metrics_csv_header() {
  return "map,abs_rel,abs_diff,sq_rel,rmse,rmse_log,delta1,delta2,delta3,n_valid";
}

std::string metrics_csv_row(const std::string& label, const MetricsReport& r) {
  std::string s = label;
  for (const double v : {r.abs_rel, r.abs_diff, r.sq_rel, r.rmse, r.rmse_log,
                         r.delta1, r.delta2, r.delta3}) {
    s += "," + format_double(v);
  }
  return s + "," + std::to_string(r.n_valid);
}

}  // namespace deltas
