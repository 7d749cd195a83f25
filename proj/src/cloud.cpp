#include "gtvd/cloud.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include "gtvd/errors.hpp"

namespace gtvd {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<double> parse_double(std::string_view tok) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) return std::nullopt;
  return value;
}

// Splits into lines, dropping a trailing '\r' so CRLF files parse.
class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    std::size_t end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    line = text_.substr(pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = end + 1;
    ++number_;
    return true;
  }
  std::size_t number() const { return number_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t number_ = 0;
};

Vec3 parse_xyz_tokens(std::string_view x, std::string_view y, std::string_view z,
                      std::size_t line_no) {
  std::array<std::string_view, 3> toks{x, y, z};
  Vec3 p;
  for (int a = 0; a < 3; ++a) {
    auto v = parse_double(toks[a]);
    if (!v) throw ParseError("non-numeric coordinate '" + std::string(toks[a]) + "'", line_no);
    if (!std::isfinite(*v)) throw ParseError("non-finite coordinate", line_no);
    p[a] = *v;
  }
  return p;
}

PointCloud parse_xyz(std::string_view text) {
  LineReader reader(text);
  std::string_view line;
  std::vector<Vec3> pts;
  while (reader.next(line)) {
    auto toks = split_ws(line);
    if (toks.empty() || toks.front().front() == '#') continue;
    if (toks.size() < 3)
      throw ParseError("expected 3 coordinates, found " + std::to_string(toks.size()),
                       reader.number());
    pts.push_back(parse_xyz_tokens(toks[0], toks[1], toks[2], reader.number()));
  }
  if (pts.empty()) throw ParseError("empty file: no points", std::max<std::size_t>(reader.number(), 1));
  return PointCloud(std::move(pts));
}

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<std::string> properties;
  bool has_list = false;
};

PointCloud parse_ply(std::string_view text) {
  LineReader reader(text);
  std::string_view line;
  if (!reader.next(line)) throw ParseError("empty file", 1);
  if (split_ws(line) != std::vector<std::string_view>{"ply"})
    throw ParseError("missing 'ply' magic", reader.number());

  std::vector<PlyElement> elements;
  bool saw_format = false;
  bool saw_end = false;
  while (reader.next(line)) {
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    const auto& key = toks[0];
    if (key == "comment" || key == "obj_info") continue;
    if (key == "format") {
      if (toks.size() < 2 || toks[1] != "ascii")
        throw ParseError("only 'format ascii' PLY is supported", reader.number());
      saw_format = true;
    } else if (key == "element") {
      if (toks.size() != 3) throw ParseError("malformed element line", reader.number());
      std::size_t count = 0;
      auto [ptr, ec] = std::from_chars(toks[2].data(), toks[2].data() + toks[2].size(), count);
      if (ec != std::errc() || ptr != toks[2].data() + toks[2].size())
        throw ParseError("malformed element count", reader.number());
      elements.push_back({std::string(toks[1]), count, {}, false});
    } else if (key == "property") {
      if (elements.empty()) throw ParseError("property before any element", reader.number());
      if (toks.size() >= 2 && toks[1] == "list") {
        if (toks.size() != 5) throw ParseError("malformed list property", reader.number());
        elements.back().has_list = true;
        elements.back().properties.emplace_back(toks[4]);
      } else {
        if (toks.size() != 3) throw ParseError("malformed property line", reader.number());
        elements.back().properties.emplace_back(toks[2]);
      }
    } else if (key == "end_header") {
      saw_end = true;
      break;
    } else {
      throw ParseError("unexpected header keyword '" + std::string(key) + "'", reader.number());
    }
  }
  if (!saw_end) throw ParseError("missing end_header", reader.number());
  if (!saw_format) throw ParseError("missing format line", reader.number());

  std::vector<Vec3> pts;
  bool found_vertex = false;
  for (const auto& el : elements) {
    if (el.name != "vertex") {
      // Faces and other elements are skipped; they only need to be present.
      for (std::size_t r = 0; r < el.count; ++r)
        if (!reader.next(line)) break;
      continue;
    }
    found_vertex = true;
    if (el.has_list) throw ParseError("list properties on vertex element are not supported", 0);
    std::array<std::size_t, 3> col{};
    const char* names[3] = {"x", "y", "z"};
    for (int a = 0; a < 3; ++a) {
      auto it = std::find(el.properties.begin(), el.properties.end(), names[a]);
      if (it == el.properties.end())
        throw ParseError(std::string("vertex element has no '") + names[a] + "' property", 0);
      col[a] = static_cast<std::size_t>(it - el.properties.begin());
    }
    pts.reserve(el.count);
    for (std::size_t r = 0; r < el.count; ++r) {
      if (!reader.next(line)) {
        throw ParseError("expected " + std::to_string(el.count) + " vertices, found " +
                             std::to_string(r),
                         reader.number() + 1);
      }
      auto toks = split_ws(line);
      if (toks.size() < el.properties.size())
        throw ParseError("expected " + std::to_string(el.properties.size()) +
                             " vertex properties, found " + std::to_string(toks.size()),
                         reader.number());
      pts.push_back(parse_xyz_tokens(toks[col[0]], toks[col[1]], toks[col[2]], reader.number()));
    }
  }
  if (!found_vertex) throw ParseError("no vertex element in header", 0);
  if (pts.empty()) throw ParseError("vertex element is empty", 0);
  return PointCloud(std::move(pts));
}

void append_double(std::string& out, double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), ptr);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
  return std::move(ss).str();
}

}  // namespace

PointCloud::PointCloud(std::vector<Vec3> positions) : positions_(std::move(positions)) {
  if (positions_.empty()) throw InvalidArgument("point cloud must contain at least one point");
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    if (!positions_[i].allFinite())
      throw InvalidArgument("point " + std::to_string(i) + " has a non-finite coordinate");
  }
}

Eigen::VectorXd PointCloud::stacked() const {
  Eigen::VectorXd out(3 * positions_.size());
  for (std::size_t i = 0; i < positions_.size(); ++i) out.segment<3>(3 * i) = positions_[i];
  return out;
}

PointCloud PointCloud::from_stacked(const Eigen::VectorXd& xyz) {
  if (xyz.size() % 3 != 0) throw InvalidArgument("stacked position vector length must be 3N");
  std::vector<Vec3> pts(static_cast<std::size_t>(xyz.size() / 3));
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = xyz.segment<3>(3 * i);
  return PointCloud(std::move(pts));
}

CloudFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".ply") return CloudFormat::PlyAscii;
  if (ext == ".xyz" || ext == ".txt" || ext == ".pts") return CloudFormat::Xyz;
  throw InvalidArgument("cannot infer point cloud format from '" + path.string() +
                        "' (expected .ply or .xyz)");
}

std::string_view format_name(CloudFormat format) {
  return format == CloudFormat::PlyAscii ? "ply" : "xyz";
}

PointCloud parse_cloud(std::string_view text, CloudFormat format) {
  return format == CloudFormat::PlyAscii ? parse_ply(text) : parse_xyz(text);
}

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format) {
  return parse_cloud(read_file(path), format);
}

PointCloud load_cloud(const std::filesystem::path& path) {
  return load_cloud(path, format_from_path(path));
}

std::string format_cloud(const PointCloud& cloud, CloudFormat format) {
  std::string out;
  out.reserve(cloud.size() * 64 + 128);
  if (format == CloudFormat::PlyAscii) {
    out += "ply\nformat ascii 1.0\nelement vertex ";
    out += std::to_string(cloud.size());
    out += "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  }
  for (const auto& p : cloud.positions()) {
    append_double(out, p.x());
    out += ' ';
    append_double(out, p.y());
    out += ' ';
    append_double(out, p.z());
    out += '\n';
  }
  return out;
}

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  std::string text = format_cloud(cloud, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  save_cloud(cloud, path, format_from_path(path));
}

GaussianSampler::GaussianSampler(std::uint64_t seed) : engine_(seed) {}

double GaussianSampler::uniform_open() {
  // (k + 1) / 2^53 for k in [0, 2^53): never 0, so log() below is finite.
  return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
}

double GaussianSampler::operator()() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  constexpr double two_pi = 6.283185307179586476925286766559;
  const double u1 = uniform_open();
  const double u2 = uniform_open();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(two_pi * u2);
  has_spare_ = true;
  return r * std::cos(two_pi * u2);
}

PointCloud add_gaussian_noise(const PointCloud& cloud, const NoiseSpec& spec) {
  if (!(spec.sigma >= 0.0) || !std::isfinite(spec.sigma))
    throw InvalidArgument("noise sigma must be finite and >= 0");
  if (spec.sigma == 0.0) return cloud;
  GaussianSampler normal(spec.seed);
  std::vector<Vec3> out(cloud.positions().begin(), cloud.positions().end());
  for (auto& p : out) {
    for (int a = 0; a < 3; ++a) p[a] += spec.sigma * normal();
  }
  return PointCloud(std::move(out));
}

BoundingBox bounding_box(std::span<const Vec3> points) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  BoundingBox box{Vec3::Constant(inf), Vec3::Constant(-inf)};
  for (const auto& p : points) {
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  }
  return box;
}

PointCloud normalize_to_unit_diagonal(const PointCloud& cloud) {
  const BoundingBox box = bounding_box(cloud.positions());
  const double diag = box.diagonal();
  if (!(diag > 0.0)) throw DegenerateInput("cannot normalize a cloud with zero extent");
  const Vec3 center = 0.5 * (box.min + box.max);
  std::vector<Vec3> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud.positions()) out.push_back((p - center) / diag);
  return PointCloud(std::move(out));
}

}  // namespace gtvd
