#include "cmivtp/data/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <json.hpp>

namespace cmivtp::data {

namespace {

using nlohmann::json;

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

json track_json(const Track& t) {
  json a = json::array();
  for (const auto& p : t) a.push_back({p.x, p.y});
  return a;
}

std::vector<unsigned char> floats_le(const std::vector<float>& v) {
  std::vector<unsigned char> out(v.size() * 4);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(v[i]);
    for (int b = 0; b < 4; ++b) out[i * 4 + static_cast<std::size_t>(b)] = static_cast<unsigned char>(bits >> (8 * b));
  }
  return out;
}

class LineParser {
 public:
  LineParser(const json& j, std::size_t line_no) : j_(j), line_(line_no) {}

  [[noreturn]] void fail(const std::string& field, const std::string& why) const {
    throw ParseError("line " + std::to_string(line_) + ": field '" + field + "': " + why);
  }

  const json& field(const std::string& name) const {
    auto it = j_.find(name);
    if (it == j_.end()) fail(name, "missing");
    return *it;
  }

  Track track(const std::string& name) const {
    const json& a = field(name);
    if (!a.is_array()) fail(name, "expected an array of [x, y] pairs");
    Track t;
    for (const auto& p : a) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
        fail(name, "expected an array of [x, y] pairs");
      }
      t.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return t;
  }

  std::size_t line() const { return line_; }

 private:
  const json& j_;
  std::size_t line_;
};

}  // namespace

std::string base64_encode(const std::vector<unsigned char>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t v = bytes[i] << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0) throw ParseError("base64 length is not a multiple of 4");
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + static_cast<std::size_t>(k)];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        v[k] = 0;
        ++pad;
      } else {
        v[k] = value(c);
        if (v[k] < 0 || pad > 0) throw ParseError("invalid base64 character");
      }
    }
    const std::uint32_t n = (static_cast<std::uint32_t>(v[0]) << 18) | (static_cast<std::uint32_t>(v[1]) << 12) |
                            (static_cast<std::uint32_t>(v[2]) << 6) | static_cast<std::uint32_t>(v[3]);
    out.push_back(static_cast<unsigned char>(n >> 16));
    if (pad < 2) out.push_back(static_cast<unsigned char>((n >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<unsigned char>(n & 0xFF));
  }
  return out;
}

std::string sample_to_json_line(const VesselSample& s) {
  json j;
  j["vessel_id"] = s.vessel_id;
  j["density"] = to_string(s.density);
  j["is_dark"] = s.is_dark;
  j["obs_ais"] = track_json(s.obs_ais.points);
  j["ais_mask"] = s.obs_ais.available;
  j["obs_cctv"] = track_json(s.obs_cctv.points);
  j["fut_ais"] = track_json(s.fut_ais);
  j["fut_cctv"] = track_json(s.fut_cctv);
  json scenes = json::array();
  for (const auto& f : s.scenes) {
    scenes.push_back({{"raster", base64_encode(floats_le(f.raster))},
                      {"shape", {kSceneChannels, f.height, f.width}},
                      {"bbox", {f.bbox.x_min, f.bbox.y_min, f.bbox.x_max, f.bbox.y_max}}});
  }
  j["scenes"] = std::move(scenes);
  return j.dump();
}

namespace {
VesselSample parse_sample(const json& j, std::size_t line_no);
}

VesselSample sample_from_json_line(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw ParseError("line " + std::to_string(line_no) + ": expected a JSON object");
  try {
    return parse_sample(j, line_no);
  } catch (const json::exception& e) {
    throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
  }
}

namespace {

VesselSample parse_sample(const json& j, std::size_t line_no) {
  LineParser p(j, line_no);
  VesselSample s;
  const json& id = p.field("vessel_id");
  if (!id.is_string()) p.fail("vessel_id", "expected a string");
  s.vessel_id = id.get<std::string>();
  const json& dens = p.field("density");
  if (!dens.is_string()) p.fail("density", "expected a string");
  try {
    s.density = density_from_string(dens.get<std::string>());
  } catch (const ParseError&) {
    p.fail("density", "expected low|medium|high");
  }
  const json& dark = p.field("is_dark");
  if (!dark.is_boolean()) p.fail("is_dark", "expected a boolean");
  s.is_dark = dark.get<bool>();
  s.obs_ais.points = p.track("obs_ais");
  const json& mask = p.field("ais_mask");
  if (!mask.is_array()) p.fail("ais_mask", "expected an array of booleans");
  for (const auto& b : mask) {
    if (!b.is_boolean()) p.fail("ais_mask", "expected an array of booleans");
    s.obs_ais.available.push_back(b.get<bool>());
  }
  if (s.obs_ais.available.size() != s.obs_ais.points.size()) p.fail("ais_mask", "length differs from obs_ais");
  s.obs_cctv.points = p.track("obs_cctv");
  if (s.obs_cctv.points.size() != s.obs_ais.points.size()) p.fail("obs_cctv", "length differs from obs_ais");
  s.fut_ais = p.track("fut_ais");
  s.fut_cctv = p.track("fut_cctv");
  if (s.fut_cctv.size() != s.fut_ais.size()) p.fail("fut_cctv", "length differs from fut_ais");
  const json& scenes = p.field("scenes");
  if (!scenes.is_array()) p.fail("scenes", "expected an array");
  for (const auto& sj : scenes) {
    SceneFrame f;
    auto shape_it = sj.find("shape");
    if (shape_it == sj.end() || !shape_it->is_array() || shape_it->size() != 3 ||
        (*shape_it)[0].get<std::size_t>() != kSceneChannels) {
      p.fail("scenes.shape", "expected [3, H, W]");
    }
    f.height = (*shape_it)[1].get<std::size_t>();
    f.width = (*shape_it)[2].get<std::size_t>();
    auto raster_it = sj.find("raster");
    if (raster_it == sj.end() || !raster_it->is_string()) p.fail("scenes.raster", "expected a base64 string");
    std::vector<unsigned char> bytes;
    try {
      bytes = base64_decode(raster_it->get<std::string>());
    } catch (const ParseError& e) {
      p.fail("scenes.raster", e.what());
    }
    if (bytes.size() != kSceneChannels * f.height * f.width * 4) p.fail("scenes.raster", "size does not match shape");
    f.raster.resize(bytes.size() / 4);
    for (std::size_t i = 0; i < f.raster.size(); ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[i * 4 + static_cast<std::size_t>(b)]) << (8 * b);
      f.raster[i] = std::bit_cast<float>(bits);
    }
    auto bbox_it = sj.find("bbox");
    if (bbox_it == sj.end() || !bbox_it->is_array() || bbox_it->size() != 4) p.fail("scenes.bbox", "expected 4 numbers");
    f.bbox = {(*bbox_it)[0].get<double>(), (*bbox_it)[1].get<double>(), (*bbox_it)[2].get<double>(),
              (*bbox_it)[3].get<double>()};
    if (!(f.bbox.x_min < f.bbox.x_max) || !(f.bbox.y_min < f.bbox.y_max)) p.fail("scenes.bbox", "empty box");
    s.scenes.push_back(std::move(f));
  }
  if (!s.scenes.empty() && s.scenes.size() != s.obs_ais.points.size()) p.fail("scenes", "length differs from obs_ais");
  return s;
}

}  // namespace

void write_dataset(const std::filesystem::path& path, const std::vector<VesselSample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset " + path.string());
  for (const auto& s : samples) out << sample_to_json_line(s) << '\n';
  if (!out) throw Error("failed writing dataset " + path.string());
}

std::vector<VesselSample> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset " + path.string());
  std::vector<VesselSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(sample_from_json_line(line, line_no));
  }
  return out;
}

}  // namespace cmivtp::data
