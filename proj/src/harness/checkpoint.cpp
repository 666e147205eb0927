#include "cmivtp/harness/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cmivtp/config.hpp"
#include "cmivtp/error.hpp"

namespace cmivtp::harness {

namespace {

constexpr char kMagic[4] = {'C', 'M', 'I', 'V'};
constexpr const char* kConfigName = "meta.model_config";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

  std::uint64_t uint(std::size_t width, const char* what) {
    need(width, what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += width;
    return v;
  }

  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(origin_ + ": truncated checkpoint while reading " + what + " at byte " +
                            std::to_string(pos_));
    }
  }

  const std::string& bytes_;
  const std::string& origin_;
  std::size_t pos_ = 0;
};

std::vector<double> bank_meta(const model::TrajectoryBank& b) {
  return {static_cast<double>(b.t_obs), static_cast<double>(b.t_fut), static_cast<double>(b.seed >> 32),
          static_cast<double>(b.seed & 0xffffffffu)};
}

}  // namespace

std::string encode_tensors(const std::vector<NamedTensor>& tensors) {
  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  std::uint64_t checksum = 0xcbf29ce484222325ULL;
  for (const auto& t : tensors) {
    if (t.data.size() != num::numel(t.shape)) {
      throw DimensionError("tensor " + t.name + " holds " + std::to_string(t.data.size()) + " values for shape " +
                           num::shape_str(t.shape));
    }
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put_u64(out, d);
    const std::size_t start = out.size();
    for (double v : t.data) put_u64(out, std::bit_cast<std::uint64_t>(v));
    checksum = fnv1a64(std::string_view(out).substr(start), checksum);
  }
  put_u64(out, checksum);
  return out;
}

std::vector<NamedTensor> decode_tensors(const std::string& bytes, const std::string& origin) {
  Reader r(bytes, origin);
  if (r.str(4, "magic") != std::string(kMagic, 4)) throw CheckpointError(origin + ": not a checkpoint (bad magic)");
  const auto version = r.uint(4, "version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(origin + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = r.uint(4, "tensor count");
  std::vector<NamedTensor> out;
  std::uint64_t checksum = 0xcbf29ce484222325ULL;
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.str(r.uint(4, "name length"), "tensor name");
    const auto rank = r.uint(4, "rank");
    for (std::uint64_t k = 0; k < rank; ++k) t.shape.push_back(r.uint(8, "dimension"));
    const std::size_t n = num::numel(t.shape);
    if (n > r.remaining() / 8) throw CheckpointError(origin + ": truncated checkpoint in payload of " + t.name);
    const std::size_t start = r.pos();
    t.data.resize(n);
    for (auto& v : t.data) v = std::bit_cast<double>(r.uint(8, "payload"));
    checksum = fnv1a64(std::string_view(bytes).substr(start, 8 * n), checksum);
    out.push_back(std::move(t));
  }
  if (r.uint(8, "checksum") != checksum) throw CheckpointError(origin + ": checksum mismatch");
  if (r.remaining() != 0) throw CheckpointError(origin + ": trailing bytes after checksum");
  return out;
}

void write_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  const std::string bytes = encode_tensors(tensors);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw CheckpointError("failed writing " + path.string());
}

std::vector<NamedTensor> read_tensors(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_tensors(ss.str(), path.string());
}

std::uint64_t config_hash(const model::ModelConfig& cfg) {
  const auto v = cfg.encode();
  std::string bytes;
  for (double x : v) put_u64(bytes, std::bit_cast<std::uint64_t>(x));
  return fnv1a64(bytes);
}

void save_checkpoint(const std::filesystem::path& path, const model::CmivtpModel& m,
                     const model::TrajectoryBank* bank) {
  std::vector<NamedTensor> out;
  const auto cfg = m.config().encode();
  out.push_back({kConfigName, {cfg.size()}, cfg});
  for (const auto& [name, t] : m.params().entries()) {
    out.push_back({name, t.shape(), {t.data().begin(), t.data().end()}});
  }
  if (bank) {
    const std::size_t k = bank->entries.size();
    NamedTensor obs{"bank.obs", {k, bank->t_obs, 2}, {}}, fut{"bank.fut", {k, bank->t_fut, 2}, {}},
        feat{"bank.feat", {k, 2 * bank->t_obs}, {}};
    for (const auto& e : bank->entries) {
      for (auto p : e.obs) obs.data.insert(obs.data.end(), {p.x, p.y});
      for (auto p : e.fut) fut.data.insert(fut.data.end(), {p.x, p.y});
      feat.data.insert(feat.data.end(), e.feat.begin(), e.feat.end());
    }
    const auto meta = bank_meta(*bank);
    out.push_back({"bank.meta", {meta.size()}, meta});
    out.push_back(std::move(obs));
    out.push_back(std::move(fut));
    out.push_back(std::move(feat));
  }
  write_tensors(path, out);
}

namespace {

const NamedTensor* find(const std::vector<NamedTensor>& ts, const std::string& name) {
  for (const auto& t : ts)
    if (t.name == name) return &t;
  return nullptr;
}

void copy_parameters(const std::vector<NamedTensor>& file, const std::string& origin, model::CmivtpModel& m) {
  for (const auto& [name, t] : m.params().entries()) {
    const NamedTensor* src = find(file, name);
    if (!src) throw CheckpointError(origin + ": missing tensor " + name);
    if (src->shape != t.shape()) {
      throw CheckpointError(origin + ": shape mismatch for tensor " + name + ": file has " + num::shape_str(src->shape) +
                            ", model expects " + num::shape_str(t.shape()));
    }
  }
  for (const auto& [name, t] : m.params().entries()) {
    auto dst = const_cast<num::Tensor&>(t).mutable_data();
    const auto& src = find(file, name)->data;
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

model::ModelConfig stored_config(const std::vector<NamedTensor>& file, const std::string& origin) {
  const NamedTensor* c = find(file, kConfigName);
  if (!c) throw CheckpointError(origin + ": missing tensor " + kConfigName);
  return model::ModelConfig::decode(c->data);
}

}  // namespace

void load_parameters(const std::filesystem::path& path, model::CmivtpModel& m) {
  const auto file = read_tensors(path);
  const auto cfg = stored_config(file, path.string());
  copy_parameters(file, path.string(), m);
  if (config_hash(cfg) != config_hash(m.config())) {
    throw CheckpointError(path.string() + ": config hash " + hex64(config_hash(cfg)) + " differs from the model's " +
                          hex64(config_hash(m.config())));
  }
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const auto file = read_tensors(path);
  const std::string origin = path.string();
  LoadedCheckpoint out;
  out.model = std::make_unique<model::CmivtpModel>(stored_config(file, origin), 0);
  copy_parameters(file, origin, *out.model);
  const NamedTensor* meta = find(file, "bank.meta");
  if (meta) {
    const NamedTensor *obs = find(file, "bank.obs"), *fut = find(file, "bank.fut"), *feat = find(file, "bank.feat");
    if (!obs || !fut || !feat || meta->data.size() != 4) throw CheckpointError(origin + ": incomplete bank tensors");
    model::TrajectoryBank b;
    b.t_obs = static_cast<std::size_t>(meta->data[0]);
    b.t_fut = static_cast<std::size_t>(meta->data[1]);
    b.seed = (static_cast<std::uint64_t>(meta->data[2]) << 32) | static_cast<std::uint64_t>(meta->data[3]);
    const std::size_t k = obs->shape.empty() ? 0 : obs->shape[0];
    if (obs->shape != num::Shape{k, b.t_obs, 2} || fut->shape != num::Shape{k, b.t_fut, 2} ||
        feat->shape != num::Shape{k, 2 * b.t_obs}) {
      throw CheckpointError(origin + ": bank tensor shapes disagree");
    }
    for (std::size_t i = 0; i < k; ++i) {
      model::BankEntry e;
      for (std::size_t t = 0; t < b.t_obs; ++t)
        e.obs.push_back({obs->data[(i * b.t_obs + t) * 2], obs->data[(i * b.t_obs + t) * 2 + 1]});
      for (std::size_t t = 0; t < b.t_fut; ++t)
        e.fut.push_back({fut->data[(i * b.t_fut + t) * 2], fut->data[(i * b.t_fut + t) * 2 + 1]});
      e.feat.assign(feat->data.begin() + static_cast<std::ptrdiff_t>(i * 2 * b.t_obs),
                    feat->data.begin() + static_cast<std::ptrdiff_t>((i + 1) * 2 * b.t_obs));
      b.entries.push_back(std::move(e));
    }
    out.bank = std::move(b);
  }
  return out;
}

}  // namespace cmivtp::harness
